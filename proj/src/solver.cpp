#include "gbees/solver.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "gbees/errors.hpp"

namespace gbees {
namespace {

int teamSize(int workers) {
#ifdef _OPENMP
  return workers > 0 ? workers : omp_get_max_threads();
#else
  (void)workers;
  return 1;
#endif
}

inline double density(const Cell* c) { return c ? c->p : 0.0; }

}  // namespace

void SolverConfig::validate() const {
  if (!(cflTarget > 0.0 && cflTarget <= 1.0)) throw ConfigError("cfl target must lie in (0, 1]");
  if (!(dtMax > 0.0) || !std::isfinite(dtMax)) throw ConfigError("dt_max must be positive");
  if (!(diffusionCompensation >= 0.0)) throw ConfigError("diffusion compensation must be nonnegative");
  if (workers < 0) throw ConfigError("workers must be nonnegative");
}

std::vector<double> effectiveDiffusion(const DynamicsModel& model, const SolverConfig& config) {
  const std::size_t n = model.dim();
  const auto& q = model.diffusion();
  std::vector<double> mu(n);
  for (std::size_t d = 0; d < n; ++d) mu[d] = std::max(0.0, 0.5 * q[d * n + d] - config.diffusionCompensation);
  return mu;
}

double limiterPhi(double theta, Limiter kind) {
  switch (kind) {
    case Limiter::MC:
      return std::max(0.0, std::min({0.5 * (1.0 + theta), 2.0, 2.0 * theta}));
    case Limiter::VanLeer: {
      const double a = std::abs(theta);
      return (theta + a) / (1.0 + a);
    }
    case Limiter::None:
      return 0.0;
  }
  return 0.0;
}

double faceVelocity(const DynamicsModel& model, const GridGeometry& geometry, const CellIndex& idx,
                    std::size_t d) {
  Vec x = geometry.center(idx);
  x[d] -= 0.5 * geometry.spacing(d);
  Vec v{};
  const std::size_t n = geometry.dim();
  model.drift(std::span<const double>(x.data(), n), std::span<double>(v.data(), n));
  return v[d];
}

namespace {

void fillVelocities(SparseGrid& grid, const DynamicsModel& model, int workers, bool all) {
  if (model.dim() != grid.dim()) throw std::invalid_argument("model and grid dimensions differ");
  const auto cells = grid.cells();
  const GridGeometry& geo = grid.geometry();
  const std::size_t n = grid.dim();
  const std::uint64_t id = model.instanceId();
  const std::ptrdiff_t count = static_cast<std::ptrdiff_t>(cells.size());
#pragma omp parallel for schedule(static) num_threads(teamSize(workers))
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    Cell& c = *cells[i];
    if (!all && c.velocitySource == id) continue;
    const Vec center = geo.center(c.index);
    Vec x{};
    Vec v{};
    for (std::size_t d = 0; d < n; ++d) {
      x = center;
      x[d] -= 0.5 * geo.spacing(d);
      model.drift(std::span<const double>(x.data(), n), std::span<double>(v.data(), n));
      c.velocityLow[d] = v[d];
    }
    c.velocitySource = id;
  }
}

}  // namespace

void computeFaceVelocities(SparseGrid& grid, const DynamicsModel& model, int workers) {
  fillVelocities(grid, model, workers, true);
}

void updateFaceVelocities(SparseGrid& grid, const DynamicsModel& model, int workers) {
  fillVelocities(grid, model, workers, false);
}

double computeStableDt(SparseGrid& grid, const DynamicsModel& model, const SolverConfig& config) {
  if (grid.empty()) throw std::invalid_argument("computeStableDt: empty grid");
  updateFaceVelocities(grid, model, config.workers);
  const std::size_t n = grid.dim();
  const GridGeometry& geo = grid.geometry();

  // Largest |u| / dx over all faces; zero velocities impose nothing.
  double rate = 0.0;
  for (const Cell* c : grid.cells())
    for (std::size_t d = 0; d < n; ++d) rate = std::max(rate, std::abs(c->velocityLow[d]) / geo.spacing(d));

  double dt = config.dtMax;
  if (rate > 0.0) dt = std::min(dt, config.cflTarget / rate);

  const auto mu = effectiveDiffusion(model, config);
  double diffusionRate = 0.0;
  for (std::size_t d = 0; d < n; ++d) diffusionRate += 2.0 * mu[d] / (geo.spacing(d) * geo.spacing(d));
  if (diffusionRate > 0.0) dt = std::min(dt, config.cflTarget / diffusionRate);
  return dt;
}

namespace {

// Per-face flux pieces for the low face of k in direction a. The public kernels
// and the fused step path apply them in the same order, so both give identical bits.

inline double godunovFlux(const Cell& k, std::size_t a) {
  const Cell* lo = k.low[a];
  if (!lo) return 0.0;
  const double u = k.velocityLow[a];
  return std::max(u, 0.0) * lo->p + std::min(u, 0.0) * k.p;
}

// Transverse waves live on b-faces; a wave with b-velocity w enters the cell
// above the face when w > 0 and the cell below when w < 0. The a-flux on the low
// face of k collects the waves entering k (weighted by u-) and those entering its
// low a-neighbor (weighted by u+).
inline double incoming(const Cell& target, std::size_t b) {
  double s = 0.0;
  if (const Cell* below = target.low[b]) {
    const double w = target.velocityLow[b];
    if (w > 0.0) s += w * (target.p - below->p);
  }
  if (const Cell* above = target.high[b]) {
    const double w = above->velocityLow[b];
    if (w < 0.0) s += w * (above->p - target.p);
  }
  return s;
}

inline void addCtu(Cell& k, std::size_t a, std::size_t n, double dt, const GridGeometry& geo) {
  const Cell* lo = k.low[a];
  if (!lo) return;
  const double u = k.velocityLow[a];
  const double uMinus = std::min(u, 0.0);
  const double uPlus = std::max(u, 0.0);
  for (std::size_t b = 0; b < n; ++b) {
    if (b == a) continue;
    double s = 0.0;
    if (uMinus != 0.0) s += uMinus * incoming(k, b);
    if (uPlus != 0.0) s += uPlus * incoming(*lo, b);
    k.fluxLow[a] -= 0.5 * dt * s / geo.spacing(b);
  }
}

inline void addHighResolution(Cell& k, std::size_t a, double dt, Limiter limiter, const GridGeometry& geo) {
  const Cell* lo = k.low[a];
  if (!lo) return;
  const double u = k.velocityLow[a];
  const double dp = k.p - lo->p;
  if (dp == 0.0 || u == 0.0) return;
  const double upwind = u >= 0.0 ? lo->p - density(lo->low[a]) : density(k.high[a]) - k.p;
  const double phi = limiterPhi(upwind / dp, limiter);
  const double speed = std::abs(u);
  const double h = geo.spacing(a);
  k.fluxLow[a] += 0.5 * speed * (1.0 - speed * dt / h) * dp * phi;
}

inline void addDiffusion(Cell& k, std::size_t a, double muBar, const GridGeometry& geo) {
  const Cell* lo = k.low[a];
  if (!lo || muBar == 0.0) return;
  k.fluxLow[a] -= muBar * (k.p - lo->p) / geo.spacing(a);
}

bool anyDiffusion(std::span<const double> muBar) {
  return std::any_of(muBar.begin(), muBar.end(), [](double m) { return m != 0.0; });
}

void computeAllFluxes(SparseGrid& grid, double dt, Limiter limiter, std::span<const double> muBar, int workers) {
  const auto cells = grid.cells();
  const std::size_t n = grid.dim();
  const GridGeometry& geo = grid.geometry();
  const bool diffuse = anyDiffusion(muBar);
  const std::ptrdiff_t count = static_cast<std::ptrdiff_t>(cells.size());
#pragma omp parallel for schedule(static) num_threads(teamSize(workers))
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    Cell& k = *cells[i];
    for (std::size_t a = 0; a < n; ++a) {
      k.fluxLow[a] = godunovFlux(k, a);
      if (n > 1) addCtu(k, a, n, dt, geo);
      addHighResolution(k, a, dt, limiter, geo);
      if (diffuse) addDiffusion(k, a, muBar[a], geo);
    }
  }
}

}  // namespace

void initGodunovFluxes(SparseGrid& grid, int workers) {
  const auto cells = grid.cells();
  const std::size_t n = grid.dim();
  const std::ptrdiff_t count = static_cast<std::ptrdiff_t>(cells.size());
#pragma omp parallel for schedule(static) num_threads(teamSize(workers))
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    Cell& k = *cells[i];
    for (std::size_t a = 0; a < n; ++a) k.fluxLow[a] = godunovFlux(k, a);
  }
}

void applyCtuCorrections(SparseGrid& grid, double dt, int workers) {
  const auto cells = grid.cells();
  const std::size_t n = grid.dim();
  if (n < 2) return;
  const GridGeometry& geo = grid.geometry();
  const std::ptrdiff_t count = static_cast<std::ptrdiff_t>(cells.size());
#pragma omp parallel for schedule(static) num_threads(teamSize(workers))
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    Cell& k = *cells[i];
    for (std::size_t a = 0; a < n; ++a) addCtu(k, a, n, dt, geo);
  }
}

void applyHighResolutionCorrections(SparseGrid& grid, double dt, Limiter limiter, int workers) {
  const auto cells = grid.cells();
  const std::size_t n = grid.dim();
  const GridGeometry& geo = grid.geometry();
  const std::ptrdiff_t count = static_cast<std::ptrdiff_t>(cells.size());
#pragma omp parallel for schedule(static) num_threads(teamSize(workers))
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    Cell& k = *cells[i];
    for (std::size_t a = 0; a < n; ++a) addHighResolution(k, a, dt, limiter, geo);
  }
}

void applyDiffusionFluxes(SparseGrid& grid, std::span<const double> muBar, int workers) {
  const auto cells = grid.cells();
  const std::size_t n = grid.dim();
  if (muBar.size() != n) throw std::invalid_argument("applyDiffusionFluxes: one coefficient per direction");
  if (!anyDiffusion(muBar)) return;
  const GridGeometry& geo = grid.geometry();
  const std::ptrdiff_t count = static_cast<std::ptrdiff_t>(cells.size());
#pragma omp parallel for schedule(static) num_threads(teamSize(workers))
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    Cell& k = *cells[i];
    for (std::size_t a = 0; a < n; ++a) addDiffusion(k, a, muBar[a], geo);
  }
}

double applyFluxDivergence(SparseGrid& grid, double dt, int workers) {
  const auto cells = grid.cells();
  const std::size_t n = grid.dim();
  const GridGeometry& geo = grid.geometry();
  const std::ptrdiff_t count = static_cast<std::ptrdiff_t>(cells.size());
  bool finite = true;
#pragma omp parallel for schedule(static) num_threads(teamSize(workers)) reduction(&& : finite)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    Cell& k = *cells[i];
    double divergence = 0.0;
    for (std::size_t a = 0; a < n; ++a) {
      const double outflow = k.high[a] ? k.high[a]->fluxLow[a] : 0.0;
      divergence += (outflow - k.fluxLow[a]) / geo.spacing(a);
    }
    k.pNext = k.p - dt * divergence;
    finite = finite && std::isfinite(k.pNext);
  }
  if (!finite) {
    for (const Cell* c : cells) {
      if (!std::isfinite(c->pNext)) {
        std::string where;
        for (std::size_t d = 0; d < n; ++d) where += (d ? "," : "") + std::to_string(c->index[d]);
        throw NumericalError("non-finite density produced at cell (" + where + ")");
      }
    }
  }

  // Serial so the clamp total is summed in key order for any team size.
  double clamped = 0.0;
  for (Cell* c : cells) {
    if (c->pNext < 0.0) {
      clamped -= c->pNext;
      c->pNext = 0.0;
    }
    c->p = c->pNext;
  }
  return clamped * geo.cellVolume();
}

StepResult advanceStep(SparseGrid& grid, const DynamicsModel& model, const SolverConfig& config,
                       double dtLimit) {
  if (grid.empty()) throw std::invalid_argument("advanceStep: empty grid");
  if (!(dtLimit > 0.0)) throw std::invalid_argument("advanceStep: dt limit must be positive");
  StepResult result;
  result.cellsAdded = grid.expand();
  result.dt = std::min(computeStableDt(grid, model, config), dtLimit);

  // Godunov, corner transport, limited correction and diffusion in one pass.
  const auto mu = effectiveDiffusion(model, config);
  computeAllFluxes(grid, result.dt, config.limiter, mu, config.workers);

  result.massClamped = applyFluxDivergence(grid, result.dt, config.workers);
  if (config.prune) result.massRemoved = grid.prune();
  return result;
}

}  // namespace gbees
