#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "gbees/dynamics.hpp"
#include "gbees/sparse_grid.hpp"

namespace gbees {

enum class Limiter { MC, VanLeer, None };

struct SolverConfig {
  double cflTarget = 0.5;
  double dtMax = 1e-3;
  Limiter limiter = Limiter::MC;
  /// Subtracted from the physical diffusion q_dd / 2 to offset scheme diffusion.
  double diffusionCompensation = 0.0;
  bool prune = true;
  /// OpenMP team size for the face loops; 0 uses the runtime default. Results are
  /// bitwise identical for every value.
  int workers = 0;

  void validate() const;
};

/// Per-direction diffusion coefficient applied numerically: max(0, q_dd / 2 - compensation).
std::vector<double> effectiveDiffusion(const DynamicsModel& model, const SolverConfig& config);

double limiterPhi(double theta, Limiter kind);

/// Drift component `d` at the center of the low face of `idx` in direction `d`.
double faceVelocity(const DynamicsModel& model, const GridGeometry& geometry, const CellIndex& idx,
                    std::size_t d);

/// Refreshes Cell::velocityLow on every active cell.
void computeFaceVelocities(SparseGrid& grid, const DynamicsModel& model, int workers = 0);

/// Fills Cell::velocityLow only where it was not computed by `model` (new cells, or
/// a different model). Drift does not depend on time, so cached values stay exact.
void updateFaceVelocities(SparseGrid& grid, const DynamicsModel& model, int workers = 0);

/// Updates face velocities, then returns the CFL- (and diffusion-) limited step,
/// capped by dtMax. Throws std::invalid_argument on an empty grid.
double computeStableDt(SparseGrid& grid, const DynamicsModel& model, const SolverConfig& config);

// Flux kernels. Fluxes live on interior faces only (both adjacent cells active);
// a face with a missing low neighbor carries zero flux. Each kernel writes only
// the low-face fluxes of the cell it visits, so the loops parallelize without
// atomics. Velocities must be current (computeFaceVelocities).

void initGodunovFluxes(SparseGrid& grid, int workers = 0);
void applyCtuCorrections(SparseGrid& grid, double dt, int workers = 0);
void applyHighResolutionCorrections(SparseGrid& grid, double dt, Limiter limiter, int workers = 0);
/// Adds -muBar[d] * dp / dx[d] to each face flux (a smoothing contribution).
void applyDiffusionFluxes(SparseGrid& grid, std::span<const double> muBar, int workers = 0);

/// Conservative cell update from the accumulated fluxes, followed by clamping of
/// negative densities. Returns the mass added by clamping. Throws NumericalError,
/// leaving p untouched, when any updated value is not finite.
double applyFluxDivergence(SparseGrid& grid, double dt, int workers = 0);

struct StepResult {
  double dt = 0.0;
  double massRemoved = 0.0;
  double massClamped = 0.0;
  std::size_t cellsAdded = 0;
};

/// One full step: expand, velocities and dt, fluxes, update, clamp, prune.
/// `dtLimit` shortens the step so callers can land on scheduled times.
StepResult advanceStep(SparseGrid& grid, const DynamicsModel& model, const SolverConfig& config,
                       double dtLimit = std::numeric_limits<double>::infinity());

}  // namespace gbees
