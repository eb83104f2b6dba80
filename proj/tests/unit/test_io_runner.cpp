#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "gbees/errors.hpp"
#include "gbees/io.hpp"
#include "gbees/runner.hpp"
#include "test_support.hpp"

using namespace gbees;
namespace fs = std::filesystem;

namespace {

fs::path scratchDir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("gbees_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

RunConfig parse(const std::string& text, const fs::path& base = {}) {
  std::istringstream in(text);
  return parseConfig(in, base);
}

const char* kDrift = R"(
model = constant
velocity = 1.0      # moves right
spacing = 0.05
threshold = 1e-6
ic.mean = 0
ic.variance = 0.01
t_final = 0.25
snapshot_times = 0 0.1 0.25
dt_max = 0.01
)";

}  // namespace

TEST_CASE("snapshot round trip") {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SparseGrid g(GridGeometry({0.1, 0.3}, {-1.0, 2.5}), 1e-4);
  for (int i = -3; i < 4; ++i)
    for (int j = 0; j < 3; ++j) g.insert(CellIndex{i, j}, u(rng) / 7.0);
  std::stringstream buf;
  writeSnapshot(buf, g, 0.1 + 0.2);
  const Snapshot s = readSnapshot(buf);
  CHECK(s.t == 0.1 + 0.2);
  CHECK(s.grid.size() == g.size());
  CHECK(s.grid.threshold() == g.threshold());
  CHECK(s.grid.geometry().spacing(1) == 0.3);
  CHECK(s.grid.geometry().origin(0) == -1.0);
  for (const auto& [idx, c] : g) CHECK(s.grid.find(idx)->p == c.p);
  CHECK(gbees::test::linksConsistent(s.grid));
}

TEST_CASE("malformed snapshots are rejected") {
  std::istringstream none("");
  CHECK_THROWS_AS(readSnapshot(none), IoError);
  std::istringstream noSpacing("# t=0 dim=1 threshold=1e-3\n0 0.5 1\n");
  CHECK_THROWS_AS(readSnapshot(noSpacing), IoError);
  std::istringstream badRow("# t=0 dim=1 spacing=0.5 threshold=1e-3\n0 0.5 abc\n");
  CHECK_THROWS_AS(readSnapshot(badRow), IoError);
  CHECK_THROWS_AS(readSnapshot(fs::path("/nonexistent/gbees/snap.txt")), IoError);
}

TEST_CASE("measurement schedule round trip") {
  std::istringstream in("# header\n0.5 1.25 -2 0.1 0.2\n\n1.0 3 4 0.5 0.5  # trailing\n");
  const std::vector<std::size_t> comps = {0, 2};
  const auto ev = readSchedule(in, comps);
  REQUIRE(ev.size() == 2);
  CHECK(ev[0].time == 0.5);
  CHECK(ev[0].y == std::vector<double>{1.25, -2.0});
  CHECK(ev[1].model->noiseStd() == std::vector<double>{0.5, 0.5});

  std::stringstream out;
  writeSchedule(out, ev);
  const auto again = readSchedule(out, comps);
  REQUIRE(again.size() == 2);
  CHECK(again[1].y == ev[1].y);
  CHECK(again[0].model->noiseStd() == ev[0].model->noiseStd());

  std::istringstream shortRow("0.5 1.0 0.1\n");
  CHECK_THROWS_AS(readSchedule(shortRow, comps), IoError);
  std::istringstream zeroNoise("0.5 1 1 0 1\n");
  CHECK_THROWS_AS(readSchedule(zeroNoise, comps), IoError);
}

TEST_CASE("config parsing") {
  const RunConfig c = parse(kDrift);
  CHECK(c.model == "constant");
  CHECK(c.velocity == std::vector<double>{1.0});
  CHECK(c.snapshotTimes == std::vector<double>{0, 0.1, 0.25});
  CHECK(c.solver.dtMax == 0.01);
  CHECK_NOTHROW(c.validate());

  CHECK_THROWS_AS(parse("bogus = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse("threshold = 1e-3x\n"), ConfigError);
  CHECK_THROWS_AS(parse("spacing\n"), ConfigError);
  CHECK_THROWS_AS(parse("limiter = superbee\n"), ConfigError);
  CHECK_THROWS_AS(parse("prune = maybe\n"), ConfigError);
  CHECK_THROWS_AS(parse("workers = 1.5\n"), ConfigError);

  auto invalid = [](const std::string& extra) { return parse(std::string(kDrift) + extra); };
  CHECK_THROWS_AS(invalid("threshold = 0\n").validate(), ConfigError);
  CHECK_THROWS_AS(invalid("snapshot_times = 0.2 0.1\n").validate(), ConfigError);
  CHECK_THROWS_AS(invalid("snapshot_times = 0.5\n").validate(), ConfigError);
  CHECK_THROWS_AS(invalid("spacing = 0.1 0.1\n").validate(), ConfigError);
  CHECK_THROWS_AS(invalid("ic.variance = -1\n").validate(), ConfigError);
  CHECK_THROWS_AS(invalid("measurement.synthetic = true\n").validate(), ConfigError);
  CHECK_THROWS_AS(invalid("reference = rotation_exact\n").validate(), ConfigError);
  CHECK_THROWS_AS(invalid("cfl = 1.5\n").validate(), ConfigError);
}

TEST_CASE("relative paths resolve against the config directory") {
  const RunConfig c = parse("output_dir = out\nmeasurement.schedule = /abs/sched.txt\n", "/data/cfg");
  CHECK(c.outputDir == fs::path("/data/cfg/out"));
  CHECK(c.measurementSchedule == fs::path("/abs/sched.txt"));
  CHECK_THROWS_AS(loadConfig("/nonexistent/gbees.cfg"), ConfigError);
}

TEST_CASE("initial grid is normalized and centered on the lattice") {
  const RunConfig c = parse(kDrift);
  const SparseGrid g = initializeGaussian(c);
  CHECK(g.totalMass() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(g.geometry().origin(0) == 0.0);
  // 5 sigma = 0.5 reaches indices -10..10; expansion adds one halo cell each side.
  CHECK(g.find(CellIndex{10}));
  CHECK(g.find(CellIndex{-11}));
  CHECK(!g.find(CellIndex{12}));
  const auto m = moments(g);
  CHECK(std::abs(m.mean[0]) < 1e-12);

  RunConfig coarse = c;
  coarse.spacing = {10.0};
  coarse.origin = std::vector<double>{5.0};
  CHECK_THROWS_AS(initializeGaussian(coarse), ConfigError);
}

TEST_CASE("synthetic measurements are deterministic per seed") {
  RunConfig c = parse(std::string(kDrift) +
                      "measurement.synthetic = true\nmeasurement.period = 0.05\n"
                      "measurement.components = 0\nmeasurement.noise_std = 0.1\n");
  const auto model = makeModel(c);
  const auto a = generateSyntheticMeasurements(c, *model);
  const auto b = generateSyntheticMeasurements(c, *model);
  REQUIRE(a.events.size() == 5);
  CHECK(a.events.back().time == doctest::Approx(0.25));
  for (std::size_t k = 0; k < a.events.size(); ++k) CHECK(a.events[k].y == b.events[k].y);
  // Truth under constant unit drift is exact for RK4.
  CHECK(a.truth.back().x[0] == doctest::Approx(0.25).epsilon(1e-12));
  c.seed = 2;
  const auto other = generateSyntheticMeasurements(c, *model);
  CHECK(other.events[0].y != a.events[0].y);
}

namespace {

struct Recorder : RunObserver {
  std::vector<double> stepTimes;
  std::vector<double> updateTimes;
  std::vector<double> postUpdateMass;
  void onStep(double t, const SparseGrid&, const StepResult&) override { stepTimes.push_back(t); }
  void onMeasurement(double t, const SparseGrid& g, const BayesResult&) override {
    updateTimes.push_back(t);
    postUpdateMass.push_back(g.totalMass());
  }
};

bool hits(const std::vector<double>& times, double t) {
  for (double s : times)
    if (s == t) return true;
  return false;
}

}  // namespace

TEST_CASE("run lands on snapshot and measurement times") {
  RunConfig c = parse(std::string(kDrift) +
                      "measurement.synthetic = true\nmeasurement.period = 0.0625\n"
                      "measurement.components = 0\nmeasurement.noise_std = 0.2\n"
                      "snapshot_times = 0 0.1 0.13\n");
  Recorder rec;
  const RunResult r = runScenario(c, {.writeFiles = false, .observer = &rec});
  CHECK(r.t == 0.25);
  CHECK(r.snapshotsWritten == 3);
  CHECK(r.measurementsApplied == 4);
  CHECK(hits(rec.stepTimes, 0.1));
  CHECK(hits(rec.stepTimes, 0.13));
  CHECK(hits(rec.stepTimes, 0.0625));
  CHECK(hits(rec.stepTimes, 0.1875));
  CHECK(rec.updateTimes == std::vector<double>{0.0625, 0.125, 0.1875, 0.25});
  for (double m : rec.postUpdateMass) CHECK(std::abs(m - 1.0) < 1e-12);
  for (std::size_t k = 1; k < rec.stepTimes.size(); ++k) CHECK(rec.stepTimes[k] > rec.stepTimes[k - 1]);
  CHECK(r.steps == rec.stepTimes.size());
}

TEST_CASE("run writes snapshots, diagnostics and measurements") {
  const fs::path dir = scratchDir("run");
  RunConfig c = parse(std::string(kDrift) + "output_dir = out\nsnapshot_every = 0.05\n"
                                            "measurement.synthetic = true\nmeasurement.period = 0.125\n"
                                            "measurement.components = 0\nmeasurement.noise_std = 0.3\n",
                      dir);
  const RunResult r = runScenario(c);
  // Explicit 0, 0.1, 0.25 merged with the 0.05 cadence.
  CHECK(r.snapshotsWritten == 6);
  for (int k = 0; k < 6; ++k) {
    char name[32];
    std::snprintf(name, sizeof name, "snapshot_%03d.txt", k);
    CHECK(fs::exists(dir / "out" / name));
  }
  CHECK(!fs::exists(dir / "out" / "snapshot_006.txt"));
  const Snapshot last = readSnapshot(dir / "out" / "snapshot_005.txt");
  CHECK(last.t == 0.25);
  CHECK(last.grid.size() == r.grid.size());
  // Drift carries the mean along at unit speed before the measurements pull it.
  const Snapshot mid = readSnapshot(dir / "out" / "snapshot_002.txt");
  CHECK(mid.t == doctest::Approx(0.1));
  CHECK(moments(mid.grid).mean[0] == doctest::Approx(0.1).epsilon(1e-2));

  std::ifstream diag(dir / "out" / "diagnostics.csv");
  std::string header;
  std::getline(diag, header);
  CHECK(header.rfind("t,dt,activeCells,totalMass", 0) == 0);
  CHECK(fs::exists(dir / "out" / "measurements.txt"));
  CHECK(fs::exists(dir / "out" / "truth.csv"));
  fs::remove_all(dir);
}

TEST_CASE("run without an output directory fails with an I/O error") {
  RunConfig c = parse(kDrift);
  CHECK_THROWS_AS(runScenario(c), IoError);
  CHECK_NOTHROW(runScenario(c, {.writeFiles = false}));
}

TEST_CASE("rotation run reports the final divergence from the exact solution") {
  RunConfig c = parse(R"(
model = rotation
spacing = 0.05 0.05
threshold = 1e-4
ic.mean = 0 1
ic.variance = 0.04 0.04
t_final = 0.5
reference = rotation_exact
)");
  const RunResult r = runScenario(c, {.writeFiles = false});
  REQUIRE(r.finalKlBits);
  CHECK(*r.finalKlBits > 0.0);
  CHECK(*r.finalKlBits < 0.1);
}
