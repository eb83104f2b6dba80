#include "gbees/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <unordered_set>

#include "gbees/format.hpp"

namespace gbees {

GaussianDensity::GaussianDensity(std::vector<double> mean, std::vector<double> cov)
    : mean_(std::move(mean)), cov_(std::move(cov)) {
  const std::size_t n = mean_.size();
  if (n == 0 || n > kMaxDim) throw std::invalid_argument("GaussianDensity: dimension out of range");
  if (cov_.size() != n * n) throw std::invalid_argument("GaussianDensity: covariance must be dim x dim");
  chol_.assign(n * n, 0.0);
  double logDet = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = cov_[i * n + j];
      for (std::size_t k = 0; k < j; ++k) s -= chol_[i * n + k] * chol_[j * n + k];
      if (i == j) {
        if (!(s > 0.0)) throw std::invalid_argument("GaussianDensity: covariance not positive definite");
        chol_[i * n + i] = std::sqrt(s);
        logDet += 2.0 * std::log(chol_[i * n + i]);
      } else {
        chol_[i * n + j] = s / chol_[j * n + j];
      }
    }
  }
  logNorm_ = -0.5 * (static_cast<double>(n) * std::log(2.0 * std::numbers::pi) + logDet);
}

GaussianDensity GaussianDensity::diagonal(std::vector<double> mean, std::vector<double> variance) {
  const std::size_t n = mean.size();
  if (variance.size() != n) throw std::invalid_argument("GaussianDensity: one variance per axis");
  std::vector<double> cov(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) cov[i * n + i] = variance[i];
  return GaussianDensity(std::move(mean), std::move(cov));
}

double GaussianDensity::operator()(std::span<const double> x) const {
  const std::size_t n = dim();
  Vec z{};
  double q = 0.0;
  // Forward substitution L z = x - mean.
  for (std::size_t i = 0; i < n; ++i) {
    double s = x[i] - mean_[i];
    for (std::size_t k = 0; k < i; ++k) s -= chol_[i * n + k] * z[k];
    z[i] = s / chol_[i * n + i];
    q += z[i] * z[i];
  }
  return std::exp(logNorm_ - 0.5 * q);
}

double GaussianDensity::maxStd() const {
  double s = 0.0;
  for (std::size_t i = 0; i < dim(); ++i) s = std::max(s, std::sqrt(cov_[i * dim() + i]));
  return s;
}

namespace {

// Visits every lattice point of the box [lo, hi] (inclusive, per axis).
template <class F>
void forEachInBox(const CellIndex& lo, const CellIndex& hi, F&& f) {
  const std::size_t n = lo.dim();
  for (std::size_t d = 0; d < n; ++d)
    if (hi[d] < lo[d]) return;
  CellIndex idx = lo;
  while (true) {
    f(idx);
    std::size_t d = n;
    while (d-- > 0) {
      if (idx[d] < hi[d]) {
        ++idx[d];
        break;
      }
      idx[d] = lo[d];
      if (d == 0) return;
    }
  }
}

double quadratureMass(const ReferenceSolution::Density& density, const std::pair<Vec, Vec>& box, std::size_t n,
                      double t) {
  const int perAxis = std::max(8, static_cast<int>(std::pow(1.6e5, 1.0 / static_cast<double>(n))));
  std::vector<double> h(n);
  double vol = 1.0;
  for (std::size_t d = 0; d < n; ++d) {
    h[d] = (box.second[d] - box.first[d]) / perAxis;
    vol *= h[d];
  }
  CellIndex lo(n);
  CellIndex hi(n);
  for (std::size_t d = 0; d < n; ++d) hi[d] = perAxis - 1;
  double sum = 0.0;
  Vec x{};
  forEachInBox(lo, hi, [&](const CellIndex& idx) {
    for (std::size_t d = 0; d < n; ++d) x[d] = box.first[d] + (idx[d] + 0.5) * h[d];
    sum += density(std::span<const double>(x.data(), n), t);
  });
  return sum * vol;
}

}  // namespace

ReferenceSolution::ReferenceSolution(std::size_t dim, Density density, Support support, std::string description,
                                     double checkTime)
    : dim_(dim), density_(std::move(density)), support_(std::move(support)), description_(std::move(description)) {
  if (dim_ == 0 || dim_ > kMaxDim) throw std::invalid_argument("ReferenceSolution: dimension out of range");
  const double mass = quadratureMass(density_, support_(checkTime), dim_, checkTime);
  if (std::abs(mass - 1.0) > 1e-6)
    throw std::invalid_argument("ReferenceSolution '" + description_ + "' integrates to " + formatNumber(mass));
}

namespace {

std::pair<Vec, Vec> gaussianBox(const GaussianDensity& g, double radius) {
  Vec lo{};
  Vec hi{};
  for (std::size_t d = 0; d < g.dim(); ++d) {
    const double s = std::sqrt(g.cov()[d * g.dim() + d]);
    lo[d] = g.mean()[d] - radius * s;
    hi[d] = g.mean()[d] + radius * s;
  }
  return {lo, hi};
}

}  // namespace

ReferenceSolution stationaryGaussian(GaussianDensity g, double radius) {
  const std::size_t n = g.dim();
  auto box = gaussianBox(g, radius);
  return ReferenceSolution(
      n, [g](std::span<const double> x, double) { return g(x); }, [box](double) { return box; },
      "stationary gaussian");
}

GaussianDensity rotationExactState(const GaussianDensity& initial, double mu, double t) {
  if (initial.dim() != 2) throw std::invalid_argument("rotationExactState: initial condition must be 2D");
  // Characteristics of (y, -x): x(t) = R(t) x(0), R = [[cos, sin], [-sin, cos]].
  const double c = std::cos(t);
  const double s = std::sin(t);
  const double r[4] = {c, s, -s, c};
  const auto& m0 = initial.mean();
  const auto& p0 = initial.cov();
  std::vector<double> mean = {r[0] * m0[0] + r[1] * m0[1], r[2] * m0[0] + r[3] * m0[1]};
  std::vector<double> cov(4, 0.0);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k)
        for (int l = 0; l < 2; ++l) cov[i * 2 + j] += r[i * 2 + k] * p0[k * 2 + l] * r[j * 2 + l];
  cov[0] += 2.0 * mu * t;
  cov[3] += 2.0 * mu * t;
  // Symmetrize against roundoff in the rotation.
  cov[1] = cov[2] = 0.5 * (cov[1] + cov[2]);
  return GaussianDensity(std::move(mean), std::move(cov));
}

ReferenceSolution rotationExactSolution(const GaussianDensity& initial, double mu, double radius) {
  return ReferenceSolution(
      2,
      [initial, mu](std::span<const double> x, double t) { return rotationExactState(initial, mu, t)(x); },
      [initial, mu, radius](double t) { return gaussianBox(rotationExactState(initial, mu, t), radius); },
      "rotation exact solution, mu=" + formatNumber(mu));
}

KlResult klDivergenceBits(std::span<const double> referenceMass, std::span<const double> approxMass,
                          bool floorMissing) {
  if (referenceMass.size() != approxMass.size()) throw std::invalid_argument("klDivergenceBits: size mismatch");
  constexpr double kSupportCut = 1e-15;
  constexpr double kFloorFraction = 1e-12;

  double refSum = 0.0;
  double approxSum = 0.0;
  double approxMax = 0.0;
  KlResult result;
  for (std::size_t i = 0; i < referenceMass.size(); ++i) {
    if (!(referenceMass[i] > kSupportCut)) continue;
    ++result.comparedCells;
    refSum += referenceMass[i];
    approxSum += approxMass[i];
    approxMax = std::max(approxMax, approxMass[i]);
  }
  if (result.comparedCells == 0) throw std::domain_error("klDivergenceBits: reference has no mass");
  if (!(approxSum > 0.0)) throw std::domain_error("klDivergenceBits: approximation has no mass on the reference support");

  const double floor = kFloorFraction * approxMax / approxSum;
  double flooredSum = 0.0;
  for (std::size_t i = 0; i < referenceMass.size(); ++i) {
    if (!(referenceMass[i] > kSupportCut)) continue;
    double q = approxMass[i] / approxSum;
    if (q < floor) {
      if (!floorMissing && q <= 0.0)
        throw std::domain_error("klDivergenceBits: approximation lacks support where the reference has mass");
      q = floor;
      ++result.flooredCells;
    }
    flooredSum += q;
  }

  double bits = 0.0;
  for (std::size_t i = 0; i < referenceMass.size(); ++i) {
    if (!(referenceMass[i] > kSupportCut)) continue;
    const double p = referenceMass[i] / refSum;
    const double q = std::max(approxMass[i] / approxSum, floor) / flooredSum;
    bits += p * std::log2(p / q);
  }
  result.bits = std::max(0.0, bits);
  result.floor = result.flooredCells ? floor : 0.0;
  return result;
}

KlResult klDivergenceBits(const ReferenceSolution& reference, double t, const SparseGrid& approx,
                          bool floorMissing) {
  const GridGeometry& geo = approx.geometry();
  const std::size_t n = geo.dim();
  if (reference.dim() != n) throw std::invalid_argument("klDivergenceBits: reference dimension mismatch");
  const auto box = reference.support(t);
  const CellIndex lo = geo.nearestIndex(std::span<const double>(box.first.data(), n));
  const CellIndex hi = geo.nearestIndex(std::span<const double>(box.second.data(), n));
  std::vector<double> ref;
  std::vector<double> est;
  const double vol = geo.cellVolume();
  forEachInBox(lo, hi, [&](const CellIndex& idx) {
    const Vec x = geo.center(idx);
    ref.push_back(reference.evaluate(std::span<const double>(x.data(), n), t) * vol);
    const Cell* c = approx.find(idx);
    est.push_back(c ? c->p * vol : 0.0);
  });
  return klDivergenceBits(ref, est, floorMissing);
}

KlResult klDivergenceBits(const SparseGrid& reference, const SparseGrid& approx, bool floorMissing) {
  if (reference.dim() != approx.dim()) throw std::invalid_argument("klDivergenceBits: grid dimension mismatch");
  std::vector<double> ref;
  std::vector<double> est;
  const double volRef = reference.geometry().cellVolume();
  const double volEst = approx.geometry().cellVolume();
  for (const auto& [idx, cell] : reference) {
    ref.push_back(cell.p * volRef);
    const Cell* c = approx.find(idx);
    est.push_back(c ? c->p * volEst : 0.0);
  }
  return klDivergenceBits(ref, est, floorMissing);
}

DiffusionFit matchedRotationDiffusion(double targetBits, const GridGeometry& geometry, const GaussianDensity& initial,
                                      double t, double muLow, double muHigh) {
  if (!(muLow > 0.0 && muHigh > muLow)) throw std::invalid_argument("matchedRotationDiffusion: bad bracket");
  const std::size_t n = 2;
  const GaussianDensity exact = rotationExactState(initial, 0.0, t);
  auto divergence = [&](double mu) {
    const GaussianDensity diffused = rotationExactState(initial, mu, t);
    const auto box = gaussianBox(diffused, 10.0);
    const CellIndex lo = geometry.nearestIndex(std::span<const double>(box.first.data(), n));
    const CellIndex hi = geometry.nearestIndex(std::span<const double>(box.second.data(), n));
    std::vector<double> ref;
    std::vector<double> est;
    forEachInBox(lo, hi, [&](const CellIndex& idx) {
      const Vec x = geometry.center(idx);
      ref.push_back(exact(std::span<const double>(x.data(), n)));
      est.push_back(diffused(std::span<const double>(x.data(), n)));
    });
    return klDivergenceBits(ref, est).bits;
  };

  double a = std::log(muLow);
  double b = std::log(muHigh);
  if (divergence(muLow) >= targetBits) return {muLow, divergence(muLow)};
  if (divergence(muHigh) <= targetBits) return {muHigh, divergence(muHigh)};
  while (b - a > 1e-6) {
    const double m = 0.5 * (a + b);
    (divergence(std::exp(m)) < targetBits ? a : b) = m;
  }
  const double mu = std::exp(0.5 * (a + b));
  return {mu, divergence(mu)};
}

DiffusionFit fitRotationDiffusion(const SparseGrid& numerical, const GaussianDensity& initial, double t,
                                  double muLow, double muHigh) {
  if (!(muLow > 0.0 && muHigh > muLow)) throw std::invalid_argument("fitRotationDiffusion: bad bracket");
  auto objective = [&](double logMu) {
    const double mu = std::exp(logMu);
    const GaussianDensity g = rotationExactState(initial, mu, t);
    const std::size_t n = 2;
    const GridGeometry& geo = numerical.geometry();
    const auto box = gaussianBox(g, 10.0);
    const CellIndex lo = geo.nearestIndex(std::span<const double>(box.first.data(), n));
    const CellIndex hi = geo.nearestIndex(std::span<const double>(box.second.data(), n));
    std::vector<double> ref;
    std::vector<double> est;
    forEachInBox(lo, hi, [&](const CellIndex& idx) {
      const Vec x = geo.center(idx);
      ref.push_back(g(std::span<const double>(x.data(), n)));
      const Cell* c = numerical.find(idx);
      est.push_back(c ? c->p : 0.0);
    });
    return klDivergenceBits(ref, est).bits;
  };

  const double invPhi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = std::log(muLow);
  double b = std::log(muHigh);
  double c = b - invPhi * (b - a);
  double d = a + invPhi * (b - a);
  double fc = objective(c);
  double fd = objective(d);
  while (b - a > 1e-4) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invPhi * (b - a);
      fc = objective(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invPhi * (b - a);
      fd = objective(d);
    }
  }
  const double best = 0.5 * (a + b);
  return {std::exp(best), objective(best)};
}

Components superlevelComponents(const SparseGrid& grid, double level) {
  if (!(level > 0.0)) throw std::invalid_argument("superlevelComponents: level must be positive");
  const std::size_t n = grid.dim();
  const GridGeometry& geo = grid.geometry();
  const double vol = geo.cellVolume();
  Components out;
  std::unordered_set<const Cell*> seen;
  std::deque<const Cell*> queue;
  for (const auto& [idx, start] : grid) {
    if (!(start.p > level) || seen.count(&start)) continue;
    double mass = 0.0;
    Vec moment{};
    std::size_t size = 0;
    seen.insert(&start);
    queue.push_back(&start);
    while (!queue.empty()) {
      const Cell* c = queue.front();
      queue.pop_front();
      ++size;
      mass += c->p * vol;
      const Vec x = geo.center(c->index);
      for (std::size_t d = 0; d < n; ++d) moment[d] += c->p * vol * x[d];
      for (std::size_t d = 0; d < n; ++d) {
        for (const Cell* nb : {c->low[d], c->high[d]}) {
          if (nb && nb->p > level && seen.insert(nb).second) queue.push_back(nb);
        }
      }
    }
    for (std::size_t d = 0; d < n; ++d) moment[d] /= mass;
    out.masses.push_back(mass);
    out.centroids.push_back(moment);
    out.sizes.push_back(size);
  }
  return out;
}

Moments moments(const SparseGrid& grid) {
  const std::size_t n = grid.dim();
  const GridGeometry& geo = grid.geometry();
  double w = 0.0;
  std::vector<double> mean(n, 0.0);
  for (const auto& [idx, cell] : grid) {
    const Vec x = geo.center(idx);
    w += cell.p;
    for (std::size_t d = 0; d < n; ++d) mean[d] += cell.p * x[d];
  }
  if (!(w > 0.0)) throw std::domain_error("moments: grid has no mass");
  for (double& m : mean) m /= w;
  std::vector<double> cov(n * n, 0.0);
  for (const auto& [idx, cell] : grid) {
    const Vec x = geo.center(idx);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j) cov[i * n + j] += cell.p * (x[i] - mean[i]) * (x[j] - mean[j]);
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      cov[i * n + j] /= w;
      cov[j * n + i] = cov[i * n + j];
    }
  }
  return {std::move(mean), std::move(cov)};
}

DiagnosticsLog::DiagnosticsLog(std::ostream& out, std::size_t dim, bool withKl)
    : out_(out), dim_(dim), withKl_(withKl) {
  out_ << "t,dt,activeCells,totalMass,massRemovedCumulative";
  for (std::size_t d = 0; d < dim_; ++d) out_ << ",mean" << d;
  if (withKl_) out_ << ",klBits";
  out_ << ",componentCount\n";
}

void DiagnosticsLog::write(const Row& row) {
  out_ << formatNumber(row.t) << ',' << formatNumber(row.dt) << ',' << row.activeCells << ','
       << formatNumber(row.totalMass) << ',' << formatNumber(row.massRemovedCumulative);
  for (std::size_t d = 0; d < dim_; ++d) out_ << ',' << formatNumber(d < row.mean.size() ? row.mean[d] : 0.0);
  if (withKl_) out_ << ',' << formatNumber(row.klBits);
  out_ << ',' << row.componentCount << '\n';
}

}  // namespace gbees
