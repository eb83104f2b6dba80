#include "gbees/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "gbees/errors.hpp"
#include "gbees/format.hpp"
#include "gbees/io.hpp"

namespace gbees {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double toNumber(const std::string& key, const std::string& tok) {
  try {
    std::size_t used = 0;
    const double v = std::stod(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': '" + tok + "' is not a number");
  }
}

std::vector<double> toNumbers(const std::string& key, const std::string& value) {
  std::istringstream in(value);
  std::vector<double> out;
  std::string tok;
  while (in >> tok) out.push_back(toNumber(key, tok));
  return out;
}

double toScalar(const std::string& key, const std::string& value) {
  const auto v = toNumbers(key, value);
  if (v.size() != 1) throw ConfigError("key '" + key + "' takes one value");
  return v[0];
}

bool toBool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError("key '" + key + "': expected true or false, got '" + value + "'");
}

std::size_t toCount(const std::string& key, double v) {
  if (v < 0 || v != std::floor(v)) throw ConfigError("key '" + key + "' must be a nonnegative integer");
  return static_cast<std::size_t>(v);
}

Limiter toLimiter(const std::string& value) {
  if (value == "mc") return Limiter::MC;
  if (value == "vanleer") return Limiter::VanLeer;
  if (value == "none") return Limiter::None;
  throw ConfigError("limiter must be one of mc, vanleer, none (got '" + value + "')");
}

std::size_t modelDim(const RunConfig& c) {
  if (c.model == "rotation") return 2;
  if (c.model == "lorenz") return 3;
  if (c.model == "constant") return c.velocity.size();
  throw ConfigError("unknown model '" + c.model + "' (expected rotation, lorenz or constant)");
}

// Snapshot times merged from the explicit list and the periodic cadence.
std::vector<double> snapshotSchedule(const RunConfig& c) {
  std::vector<double> times = c.snapshotTimes;
  if (c.snapshotEvery > 0.0) {
    for (std::size_t k = 1;; ++k) {
      const double t = static_cast<double>(k) * c.snapshotEvery;
      if (t > c.tFinal * (1.0 + 1e-12)) break;
      times.push_back(std::min(t, c.tFinal));
    }
  }
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  return times;
}

void rk4Step(const DynamicsModel& model, std::vector<double>& x, double h) {
  const std::size_t n = x.size();
  std::vector<double> k1(n), k2(n), k3(n), k4(n), tmp(n);
  model.drift(x, k1);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * h * k1[i];
  model.drift(tmp, k2);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * h * k2[i];
  model.drift(tmp, k3);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + h * k3[i];
  model.drift(tmp, k4);
  for (std::size_t i = 0; i < n; ++i) x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

}  // namespace

void RunConfig::validate() const {
  const std::size_t n = modelDim(*this);
  if (n == 0 || n > kMaxDim) throw ConfigError("model dimension out of range");
  if (spacing.size() != n) throw ConfigError("spacing needs " + std::to_string(n) + " values");
  for (double h : spacing)
    if (!(h > 0.0)) throw ConfigError("spacing must be positive");
  if (origin && origin->size() != n) throw ConfigError("origin needs " + std::to_string(n) + " values");
  if (!(threshold > 0.0)) throw ConfigError("threshold must be positive");
  solver.validate();
  if (icMean.size() != n) throw ConfigError("ic.mean needs " + std::to_string(n) + " values");
  if (icVariance.size() != n) throw ConfigError("ic.variance needs " + std::to_string(n) + " values");
  for (double v : icVariance)
    if (!(v > 0.0)) throw ConfigError("ic.variance entries must be positive");
  if (!(icSupportRadius > 0.0)) throw ConfigError("ic.support_radius must be positive");
  if (!(diffusionMu >= 0.0)) throw ConfigError("diffusion.mu must be nonnegative");
  if (!(tFinal > 0.0)) throw ConfigError("t_final must be positive");
  if (!std::is_sorted(snapshotTimes.begin(), snapshotTimes.end())) throw ConfigError("snapshot_times must be sorted");
  for (double t : snapshotTimes)
    if (t < 0.0 || t > tFinal) throw ConfigError("snapshot time " + formatNumber(t) + " outside [0, t_final]");
  if (snapshotEvery < 0.0) throw ConfigError("snapshot_every must be nonnegative");
  if (syntheticMeasurements && !measurementSchedule.empty())
    throw ConfigError("choose either measurement.schedule or measurement.synthetic");
  if (hasMeasurements()) {
    if (measurementComponents.empty()) throw ConfigError("measurement.components is required with measurements");
    for (std::size_t c : measurementComponents)
      if (c >= n) throw ConfigError("measurement component " + std::to_string(c) + " out of range");
  }
  if (syntheticMeasurements) {
    if (!(measurementPeriod > 0.0)) throw ConfigError("measurement.period must be positive");
    if (measurementNoiseStd.size() != measurementComponents.size())
      throw ConfigError("measurement.noise_std needs one value per component");
    for (double s : measurementNoiseStd)
      if (!(s > 0.0)) throw ConfigError("measurement.noise_std must be positive");
    if (!truthStart.empty() && truthStart.size() != n) throw ConfigError("truth.start needs " + std::to_string(n) + " values");
  }
  if (!reference.empty() && reference != "rotation_exact")
    throw ConfigError("unknown reference '" + reference + "'");
  if (reference == "rotation_exact" && model != "rotation")
    throw ConfigError("reference rotation_exact requires model rotation");
  if (!(componentLevel > 0.0)) throw ConfigError("diagnostics.component_level must be positive");
  if (diagnosticsEvery == 0) throw ConfigError("diagnostics.every must be at least 1");
}

RunConfig parseConfig(std::istream& in, const std::filesystem::path& baseDir) {
  RunConfig c;
  std::string line;
  std::size_t lineNo = 0;
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_relative() && !baseDir.empty() ? baseDir / path : path;
  };
  while (std::getline(in, line)) {
    ++lineNo;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineNo) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));

    if (key == "model") c.model = value;
    else if (key == "lorenz.sigma") c.lorenzSigma = toScalar(key, value);
    else if (key == "lorenz.b") c.lorenzB = toScalar(key, value);
    else if (key == "lorenz.r") c.lorenzR = toScalar(key, value);
    else if (key == "velocity") c.velocity = toNumbers(key, value);
    else if (key == "diffusion.mu") c.diffusionMu = toScalar(key, value);
    else if (key == "spacing") c.spacing = toNumbers(key, value);
    else if (key == "origin") c.origin = toNumbers(key, value);
    else if (key == "threshold") c.threshold = toScalar(key, value);
    else if (key == "cfl") c.solver.cflTarget = toScalar(key, value);
    else if (key == "dt_max") c.solver.dtMax = toScalar(key, value);
    else if (key == "limiter") c.solver.limiter = toLimiter(value);
    else if (key == "diffusion_compensation") c.solver.diffusionCompensation = toScalar(key, value);
    else if (key == "prune") c.solver.prune = toBool(key, value);
    else if (key == "workers") c.solver.workers = static_cast<int>(toCount(key, toScalar(key, value)));
    else if (key == "ic.mean") c.icMean = toNumbers(key, value);
    else if (key == "ic.variance") c.icVariance = toNumbers(key, value);
    else if (key == "ic.support_radius") c.icSupportRadius = toScalar(key, value);
    else if (key == "t_final") c.tFinal = toScalar(key, value);
    else if (key == "snapshot_times") c.snapshotTimes = toNumbers(key, value);
    else if (key == "snapshot_every") c.snapshotEvery = toScalar(key, value);
    else if (key == "measurement.schedule") c.measurementSchedule = resolve(value);
    else if (key == "measurement.synthetic") c.syntheticMeasurements = toBool(key, value);
    else if (key == "measurement.period") c.measurementPeriod = toScalar(key, value);
    else if (key == "measurement.components") {
      c.measurementComponents.clear();
      for (double v : toNumbers(key, value)) c.measurementComponents.push_back(toCount(key, v));
    } else if (key == "measurement.noise_std") c.measurementNoiseStd = toNumbers(key, value);
    else if (key == "truth.start") c.truthStart = toNumbers(key, value);
    else if (key == "seed") c.seed = toCount(key, toScalar(key, value));
    else if (key == "reference") c.reference = value == "none" ? "" : value;
    else if (key == "reference.mu") c.referenceMu = toScalar(key, value);
    else if (key == "diagnostics.component_level") c.componentLevel = toScalar(key, value);
    else if (key == "diagnostics.every") c.diagnosticsEvery = toCount(key, toScalar(key, value));
    else if (key == "output_dir") c.outputDir = resolve(value);
    else throw ConfigError("line " + std::to_string(lineNo) + ": unknown key '" + key + "'");
  }
  return c;
}

RunConfig loadConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  return parseConfig(in, path.parent_path());
}

std::unique_ptr<DynamicsModel> makeModel(const RunConfig& c) {
  if (c.model == "rotation") return std::make_unique<RotationModel>(c.diffusionMu);
  if (c.model == "lorenz") return std::make_unique<LorenzModel>(c.lorenzSigma, c.lorenzB, c.lorenzR, c.diffusionMu);
  if (c.model == "constant") return std::make_unique<ConstantDriftModel>(c.velocity, c.diffusionMu);
  throw ConfigError("unknown model '" + c.model + "'");
}

GridGeometry makeGeometry(const RunConfig& c) {
  std::vector<double> origin;
  if (c.origin) {
    origin = *c.origin;
  } else {
    for (std::size_t d = 0; d < c.spacing.size(); ++d)
      origin.push_back(std::round(c.icMean[d] / c.spacing[d]) * c.spacing[d]);
  }
  return GridGeometry(c.spacing, origin);
}

GaussianDensity initialDensity(const RunConfig& c) { return GaussianDensity::diagonal(c.icMean, c.icVariance); }

SparseGrid initializeGaussian(const RunConfig& c) {
  const std::size_t n = c.dim();
  if (n == 0 || c.icVariance.size() != n || c.spacing.size() != n)
    throw ConfigError("initial condition and grid dimensions disagree");
  for (double v : c.icVariance)
    if (!(v > 0.0)) throw ConfigError("initial covariance diagonal must be positive");
  SparseGrid grid(makeGeometry(c), c.threshold);
  const GridGeometry& geo = grid.geometry();
  const GaussianDensity g = initialDensity(c);

  CellIndex lo(n);
  CellIndex hi(n);
  for (std::size_t d = 0; d < n; ++d) {
    const double reach = c.icSupportRadius * std::sqrt(c.icVariance[d]);
    lo[d] = static_cast<std::int32_t>(std::ceil((c.icMean[d] - reach - geo.origin(d)) / geo.spacing(d) - 1e-9));
    hi[d] = static_cast<std::int32_t>(std::floor((c.icMean[d] + reach - geo.origin(d)) / geo.spacing(d) + 1e-9));
    if (hi[d] < lo[d])
      throw ConfigError("initial condition support holds no cell center along axis " + std::to_string(d) +
                        "; reduce the spacing or widen ic.support_radius");
  }
  CellIndex idx = lo;
  while (true) {
    const Vec x = geo.center(idx);
    grid.insert(idx, g(std::span<const double>(x.data(), n)));
    std::size_t d = n;
    bool done = false;
    while (d-- > 0) {
      if (idx[d] < hi[d]) {
        ++idx[d];
        break;
      }
      idx[d] = lo[d];
      if (d == 0) done = true;
    }
    if (done) break;
  }
  if (!(grid.totalMass() > 0.0)) throw ConfigError("initial condition has no mass on the grid; reduce the spacing");
  grid.expand();
  normalize(grid);
  return grid;
}

std::optional<ReferenceSolution> makeReference(const RunConfig& c) {
  if (c.reference == "rotation_exact") return rotationExactSolution(initialDensity(c), c.referenceMu);
  return std::nullopt;
}

SyntheticMeasurements generateSyntheticMeasurements(const RunConfig& c, const DynamicsModel& model) {
  SyntheticMeasurements out;
  std::vector<double> x = c.truthStart.empty() ? c.icMean : c.truthStart;
  const auto h = std::make_shared<const GaussianMeasurementModel>(
      GaussianMeasurementModel::observingComponents(c.measurementComponents, c.measurementNoiseStd));
  std::mt19937_64 rng(c.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  const auto substeps = static_cast<std::size_t>(std::max(1.0, std::ceil(c.measurementPeriod / c.solver.dtMax - 1e-9)));
  const double hStep = c.measurementPeriod / static_cast<double>(substeps);

  out.truth.push_back({0.0, x});
  for (std::size_t k = 1;; ++k) {
    const double t = static_cast<double>(k) * c.measurementPeriod;
    if (t > c.tFinal * (1.0 + 1e-12)) break;
    for (std::size_t s = 0; s < substeps; ++s) rk4Step(model, x, hStep);
    out.truth.push_back({t, x});
    MeasurementEvent ev;
    ev.time = t;
    ev.model = h;
    ev.y.resize(h->obsDim());
    h->observe(x, ev.y);
    for (std::size_t i = 0; i < ev.y.size(); ++i) ev.y[i] += c.measurementNoiseStd[i] * noise(rng);
    out.events.push_back(std::move(ev));
  }
  return out;
}

RunResult runScenario(const RunConfig& config, const RunOptions& options) {
  config.validate();
  const auto wallStart = std::chrono::steady_clock::now();
  const auto model = makeModel(config);
  const auto reference = makeReference(config);
  const auto snapshots = snapshotSchedule(config);

  std::vector<MeasurementEvent> events;
  std::vector<TruthSample> truth;
  if (config.syntheticMeasurements) {
    auto synthetic = generateSyntheticMeasurements(config, *model);
    events = std::move(synthetic.events);
    truth = std::move(synthetic.truth);
  } else if (!config.measurementSchedule.empty()) {
    try {
      events = readSchedule(config.measurementSchedule, config.measurementComponents);
    } catch (const IoError& e) {
      throw ConfigError(e.what());
    }
  }
  checkSchedule(events);
  for (const auto& ev : events)
    if (ev.time < 0.0) throw ConfigError("measurement scheduled before t = 0");

  std::ofstream diagFile;
  std::optional<DiagnosticsLog> log;
  if (options.writeFiles) {
    if (config.outputDir.empty()) throw IoError("no output directory configured");
    std::error_code ec;
    std::filesystem::create_directories(config.outputDir, ec);
    if (ec || !std::filesystem::is_directory(config.outputDir))
      throw IoError("cannot create output directory " + config.outputDir.string());
    diagFile.open(config.outputDir / "diagnostics.csv");
    if (!diagFile) throw IoError("cannot write diagnostics in " + config.outputDir.string());
    log.emplace(diagFile, config.dim(), reference.has_value());
    if (!events.empty()) {
      std::ofstream sched(config.outputDir / "measurements.txt");
      if (!sched) throw IoError("cannot write measurements in " + config.outputDir.string());
      writeSchedule(sched, events);
    }
    if (!truth.empty()) {
      std::ofstream tr(config.outputDir / "truth.csv");
      if (!tr) throw IoError("cannot write truth trajectory in " + config.outputDir.string());
      tr << "t";
      for (std::size_t d = 0; d < config.dim(); ++d) tr << ",x" << d;
      tr << '\n';
      for (const auto& s : truth) {
        tr << formatNumber(s.t);
        for (double v : s.x) tr << ',' << formatNumber(v);
        tr << '\n';
      }
    }
  }

  RunResult result{.grid = initializeGaussian(config)};
  SparseGrid& grid = result.grid;
  std::size_t nextEvent = 0;
  std::size_t nextSnapshot = 0;
  double lastDt = 0.0;

  auto writeRow = [&] {
    if (!log) return;
    DiagnosticsLog::Row row;
    row.t = result.t;
    row.dt = lastDt;
    row.activeCells = grid.size();
    row.totalMass = grid.totalMass();
    row.massRemovedCumulative = result.massRemovedCumulative;
    row.mean = moments(grid).mean;
    if (reference) row.klBits = klDivergenceBits(*reference, result.t, grid).bits;
    row.componentCount = superlevelComponents(grid, config.componentLevel).count();
    log->write(row);
  };
  auto applyDueEvents = [&] {
    while (nextEvent < events.size() && events[nextEvent].time <= result.t) {
      const auto update = bayesUpdate(grid, events[nextEvent], config.solver.workers);
      result.massRemovedCumulative += update.massRemoved;
      ++result.measurementsApplied;
      if (options.observer) options.observer->onMeasurement(result.t, grid, update);
      ++nextEvent;
    }
  };
  auto writeDueSnapshots = [&] {
    bool wrote = false;
    while (nextSnapshot < snapshots.size() && snapshots[nextSnapshot] <= result.t) {
      if (options.writeFiles) {
        char name[32];
        std::snprintf(name, sizeof name, "snapshot_%03zu.txt", result.snapshotsWritten);
        writeSnapshot(config.outputDir / name, grid, result.t);
      }
      ++result.snapshotsWritten;
      ++nextSnapshot;
      wrote = true;
    }
    return wrote;
  };

  applyDueEvents();
  writeDueSnapshots();
  writeRow();

  while (result.t < config.tFinal) {
    double target = config.tFinal;
    if (nextEvent < events.size()) target = std::min(target, events[nextEvent].time);
    if (nextSnapshot < snapshots.size()) target = std::min(target, snapshots[nextSnapshot]);
    const double remaining = target - result.t;

    const StepResult step = advanceStep(grid, *model, config.solver, remaining);
    result.t = step.dt >= remaining ? target : result.t + step.dt;
    lastDt = step.dt;
    ++result.steps;
    result.massRemovedCumulative += step.massRemoved;
    result.massClampedCumulative += step.massClamped;
    if (options.observer) options.observer->onStep(result.t, grid, step);

    applyDueEvents();
    const bool snapped = writeDueSnapshots();
    if (snapped || result.steps % config.diagnosticsEvery == 0 || result.t >= config.tFinal) writeRow();
  }

  if (reference) result.finalKlBits = klDivergenceBits(*reference, result.t, grid).bits;
  if (options.writeFiles && !diagFile) throw IoError("failed writing diagnostics");
  result.wallSeconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - wallStart).count();
  return result;
}

}  // namespace gbees
