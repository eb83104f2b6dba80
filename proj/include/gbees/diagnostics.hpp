#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gbees/sparse_grid.hpp"

namespace gbees {

/// Multivariate normal density with a cached Cholesky factor.
class GaussianDensity {
 public:
  /// `cov` is row-major dim x dim and must be symmetric positive definite.
  GaussianDensity(std::vector<double> mean, std::vector<double> cov);
  static GaussianDensity diagonal(std::vector<double> mean, std::vector<double> variance);

  std::size_t dim() const noexcept { return mean_.size(); }
  const std::vector<double>& mean() const noexcept { return mean_; }
  const std::vector<double>& cov() const noexcept { return cov_; }

  double operator()(std::span<const double> x) const;
  /// Largest per-axis standard deviation.
  double maxStd() const;

 private:
  std::vector<double> mean_;
  std::vector<double> cov_;
  std::vector<double> chol_;  // lower triangle
  double logNorm_ = 0.0;
};

/// Time-dependent reference density with an axis-aligned box holding its support.
class ReferenceSolution {
 public:
  using Density = std::function<double(std::span<const double> x, double t)>;
  using Support = std::function<std::pair<Vec, Vec>(double t)>;

  /// Checks by quadrature over the support at `checkTime` that the density
  /// integrates to 1 within 1e-6; throws std::invalid_argument otherwise.
  ReferenceSolution(std::size_t dim, Density density, Support support, std::string description,
                    double checkTime = 0.0);

  std::size_t dim() const noexcept { return dim_; }
  double evaluate(std::span<const double> x, double t) const { return density_(x, t); }
  std::pair<Vec, Vec> support(double t) const { return support_(t); }
  const std::string& description() const noexcept { return description_; }

 private:
  std::size_t dim_;
  Density density_;
  Support support_;
  std::string description_;
};

/// Gaussian that does not change in time; support is mean +/- `radius` standard deviations.
ReferenceSolution stationaryGaussian(GaussianDensity g, double radius = 10.0);

/// Mean and covariance at time t of a Gaussian carried by f(x, y) = (y, -x) under
/// isotropic diffusion mu: rigid clockwise rotation by angle t plus 2 mu t I.
GaussianDensity rotationExactState(const GaussianDensity& initial, double mu, double t);

/// Closed-form density of the rotation problem as a function of time.
ReferenceSolution rotationExactSolution(const GaussianDensity& initial, double mu, double radius = 10.0);

struct KlResult {
  double bits = 0.0;
  /// Mass floor applied to approximation cells; 0 when flooring was not needed.
  double floor = 0.0;
  std::size_t flooredCells = 0;
  std::size_t comparedCells = 0;
};

/// Sum of P0 log2(P0 / Pe) over entries with reference mass above 1e-15, both
/// vectors renormalized over that set. Approximation entries are floored at
/// 1e-12 of their largest value when `floorMissing`; otherwise a zero where the
/// reference has mass throws std::domain_error.
KlResult klDivergenceBits(std::span<const double> referenceMass, std::span<const double> approxMass,
                          bool floorMissing = true);

/// Reference sampled at cell centers over its support box at time t.
KlResult klDivergenceBits(const ReferenceSolution& reference, double t, const SparseGrid& approx,
                          bool floorMissing = true);

/// Divergence between two grids on the same lattice.
KlResult klDivergenceBits(const SparseGrid& reference, const SparseGrid& approx, bool floorMissing = true);

struct DiffusionFit {
  double mu = 0.0;
  double bits = 0.0;
};

/// Isotropic diffusion level whose exact rotation solution best explains `numerical`
/// at time t (minimum divergence from exact to numerical). Golden-section search
/// over log(mu) in [muLow, muHigh].
DiffusionFit fitRotationDiffusion(const SparseGrid& numerical, const GaussianDensity& initial, double t,
                                  double muLow, double muHigh);

/// Isotropic diffusion level at which the exact diffused rotation solution sits
/// `targetBits` away from the undiffused one, both sampled on `geometry`. Bisection
/// over log(mu) in [muLow, muHigh]; the result is clamped to the bracket.
DiffusionFit matchedRotationDiffusion(double targetBits, const GridGeometry& geometry, const GaussianDensity& initial,
                                      double t, double muLow, double muHigh);

struct Components {
  std::size_t count() const noexcept { return masses.size(); }
  std::vector<double> masses;
  std::vector<Vec> centroids;
  std::vector<std::size_t> sizes;
};

/// Edge-connected components of {p > level}, ordered by their smallest key.
Components superlevelComponents(const SparseGrid& grid, double level);

struct Moments {
  std::vector<double> mean;
  std::vector<double> covariance;  // row-major
};

/// Mass-weighted mean and covariance of cell centers. Throws std::domain_error on zero mass.
Moments moments(const SparseGrid& grid);

/// Row-per-step diagnostics table.
class DiagnosticsLog {
 public:
  DiagnosticsLog(std::ostream& out, std::size_t dim, bool withKl);

  struct Row {
    double t = 0.0;
    double dt = 0.0;
    std::size_t activeCells = 0;
    double totalMass = 0.0;
    double massRemovedCumulative = 0.0;
    std::vector<double> mean;
    double klBits = 0.0;
    std::size_t componentCount = 0;
  };

  void write(const Row& row);

 private:
  std::ostream& out_;
  std::size_t dim_;
  bool withKl_;
};

}  // namespace gbees
