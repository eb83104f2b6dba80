#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "gbees/dynamics.hpp"
#include "gbees/sparse_grid.hpp"

namespace gbees {

struct MeasurementEvent {
  double time = 0.0;
  std::vector<double> y;
  std::shared_ptr<const GaussianMeasurementModel> model;
};

struct BayesResult {
  /// Sum of likelihood * prior * cellVolume, with the likelihood taken without its
  /// Gaussian normalization constant. May underflow for sharp likelihoods; the
  /// logarithm is always finite.
  double normConstant = 0.0;
  double logNormConstant = 0.0;
  /// Posterior mass dropped by the post-update prune, before renormalization.
  double massRemoved = 0.0;
};

/// Multiplies p by the likelihood evaluated at each cell center and renormalizes
/// to unit mass, then prunes (renormalizing again if anything was removed) and
/// re-expands the active set.
/// Throws DegenerateUpdateError when the posterior mass vanishes and
/// std::invalid_argument for an empty grid.
BayesResult bayesUpdate(SparseGrid& grid, const MeasurementEvent& event, int workers = 0);

/// Divides every p by the total mass; returns the mass before normalization.
double normalize(SparseGrid& grid);

/// Sorted-time check for a schedule; throws ConfigError on a decreasing time.
void checkSchedule(std::span<const MeasurementEvent> events);

}  // namespace gbees
