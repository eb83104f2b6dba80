#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gbees/bayes.hpp"
#include "gbees/diagnostics.hpp"
#include "gbees/dynamics.hpp"
#include "gbees/solver.hpp"
#include "gbees/sparse_grid.hpp"

namespace gbees {

/// Everything a run needs; parsed from a `key = value` file (see configs/).
struct RunConfig {
  // Model.
  std::string model = "rotation";  // rotation | lorenz | constant
  double lorenzSigma = 4.0;
  double lorenzB = 1.0;
  double lorenzR = 48.0;
  std::vector<double> velocity;  // constant model
  double diffusionMu = 0.0;      // Q = 2 mu I

  // Grid.
  std::vector<double> spacing;
  std::optional<std::vector<double>> origin;  // default: IC mean rounded to the lattice
  double threshold = 1e-3;

  SolverConfig solver;

  // Initial condition.
  std::vector<double> icMean;
  std::vector<double> icVariance;
  double icSupportRadius = 5.0;

  double tFinal = 0.0;
  std::vector<double> snapshotTimes;
  double snapshotEvery = 0.0;

  // Measurements: either a schedule file or a synthetic truth run.
  std::filesystem::path measurementSchedule;
  bool syntheticMeasurements = false;
  double measurementPeriod = 1e-3;
  std::vector<std::size_t> measurementComponents;
  std::vector<double> measurementNoiseStd;
  std::vector<double> truthStart;  // default: IC mean
  std::uint64_t seed = 1;

  // Diagnostics.
  std::string reference;  // "" | rotation_exact
  double referenceMu = 0.0;
  double componentLevel = 0.005;
  std::size_t diagnosticsEvery = 1;

  std::filesystem::path outputDir;

  std::size_t dim() const noexcept { return icMean.size(); }
  bool hasMeasurements() const { return syntheticMeasurements || !measurementSchedule.empty(); }

  /// Throws ConfigError describing the first violated constraint.
  void validate() const;
};

/// Relative paths in the file resolve against `baseDir`. Throws ConfigError.
RunConfig parseConfig(std::istream& in, const std::filesystem::path& baseDir = {});
RunConfig loadConfig(const std::filesystem::path& path);

std::unique_ptr<DynamicsModel> makeModel(const RunConfig& config);
GridGeometry makeGeometry(const RunConfig& config);

/// Cells within icSupportRadius standard deviations of the mean (per axis), set to
/// the Gaussian density at their centers, then expanded and normalized.
SparseGrid initializeGaussian(const RunConfig& config);

/// Diagonal-covariance Gaussian of the initial condition.
GaussianDensity initialDensity(const RunConfig& config);

/// Reference solution selected by the config, if any.
std::optional<ReferenceSolution> makeReference(const RunConfig& config);

struct TruthSample {
  double t = 0.0;
  std::vector<double> x;
};

struct SyntheticMeasurements {
  std::vector<MeasurementEvent> events;
  std::vector<TruthSample> truth;
};

/// Fixed-step RK4 truth trajectory from truthStart with step <= dtMax, measured
/// every period with seeded Gaussian noise.
SyntheticMeasurements generateSyntheticMeasurements(const RunConfig& config, const DynamicsModel& model);

/// Hooks for in-process consumers of a run (tests, the acceptance suite).
class RunObserver {
 public:
  virtual ~RunObserver() = default;
  virtual void onStep(double /*t*/, const SparseGrid& /*grid*/, const StepResult& /*step*/) {}
  virtual void onMeasurement(double /*t*/, const SparseGrid& /*grid*/, const BayesResult& /*update*/) {}
};

struct RunOptions {
  /// Write snapshots, the diagnostics CSV and measurement files under outputDir.
  bool writeFiles = true;
  RunObserver* observer = nullptr;
};

struct RunResult {
  SparseGrid grid;
  double t = 0.0;
  std::size_t steps = 0;
  std::size_t measurementsApplied = 0;
  std::size_t snapshotsWritten = 0;
  double massRemovedCumulative = 0.0;
  double massClampedCumulative = 0.0;
  std::optional<double> finalKlBits = std::nullopt;
  double wallSeconds = 0.0;
};

/// Time loop: steps land exactly on measurement and snapshot times. Throws
/// ConfigError, NumericalError, DegenerateUpdateError or IoError.
RunResult runScenario(const RunConfig& config, const RunOptions& options = {});

}  // namespace gbees
