// gbees: command-line driver for sparse grid-based Bayesian estimation runs.
//
//   gbees run <config> [--out DIR] [--workers N] [--seed S] [--snapshot-every T]
//   gbees validate <config>
//   gbees kl <snapshot> <reference-spec>
//
// Exit codes: 0 success, 1 usage, 2 config error, 3 numerical abort,
// 4 degenerate Bayes update, 5 I/O failure.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "gbees/diagnostics.hpp"
#include "gbees/errors.hpp"
#include "gbees/format.hpp"
#include "gbees/io.hpp"
#include "gbees/runner.hpp"

namespace {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kConfig = 2,
  kNumerical = 3,
  kDegenerate = 4,
  kIo = 5,
};

std::filesystem::path defaultOutputDir() {
  if (const char* env = std::getenv("GBEES_OUTPUT_DIR"); env && *env) return env;
  return "gbees_out";
}

bool looksLikeSnapshot(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::string line;
  return std::getline(in, line) && line.rfind("# t=", 0) == 0;
}

int runKl(const std::string& snapshotPath, const std::string& referenceSpec) {
  const auto snap = gbees::readSnapshot(std::filesystem::path(snapshotPath));
  gbees::KlResult kl;
  if (looksLikeSnapshot(referenceSpec)) {
    const auto ref = gbees::readSnapshot(std::filesystem::path(referenceSpec));
    kl = gbees::klDivergenceBits(ref.grid, snap.grid);
  } else {
    const auto config = gbees::loadConfig(referenceSpec);
    const auto reference = gbees::makeReference(config);
    if (!reference) throw gbees::ConfigError("reference spec " + referenceSpec + " configures no reference solution");
    kl = gbees::klDivergenceBits(*reference, snap.t, snap.grid);
  }
  std::cout << "t=" << gbees::formatNumber(snap.t) << " kl_bits=" << gbees::formatNumber(kl.bits)
            << " compared_cells=" << kl.comparedCells << " floored_cells=" << kl.flooredCells
            << " floor=" << gbees::formatNumber(kl.floor) << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Grid-based Bayesian estimation on sparse phase-space grids"};
  app.require_subcommand(1);

  std::string configPath;
  std::string outDir;
  int workers = -1;
  long long seed = -1;
  double snapshotEvery = 0.0;
  auto* run = app.add_subcommand("run", "Run a scenario described by a config file");
  run->add_option("config", configPath, "Run configuration")->required();
  run->add_option("--out", outDir, "Output directory (overrides output_dir and $GBEES_OUTPUT_DIR)");
  run->add_option("--workers", workers, "OpenMP workers for the step kernels (1 = serial)")->check(CLI::NonNegativeNumber);
  run->add_option("--seed", seed, "Seed for synthetic measurements")->check(CLI::NonNegativeNumber);
  run->add_option("--snapshot-every", snapshotEvery, "Additional snapshot cadence in time units")
      ->check(CLI::PositiveNumber);

  auto* validate = app.add_subcommand("validate", "Parse and check a config file");
  validate->add_option("config", configPath, "Run configuration")->required();

  std::string snapshotPath;
  std::string referenceSpec;
  auto* kl = app.add_subcommand("kl", "KL divergence of a snapshot from a reference");
  kl->add_option("snapshot", snapshotPath, "Snapshot file")->required();
  kl->add_option("reference", referenceSpec, "Reference snapshot, or config naming a reference solution")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*validate) {
      const auto config = gbees::loadConfig(configPath);
      config.validate();
      std::cout << configPath << ": ok (model=" << config.model << ", dim=" << config.dim() << ")\n";
      return kOk;
    }
    if (*kl) return runKl(snapshotPath, referenceSpec);

    auto config = gbees::loadConfig(configPath);
    if (!outDir.empty()) config.outputDir = outDir;
    if (config.outputDir.empty()) config.outputDir = defaultOutputDir();
    if (workers >= 0) config.solver.workers = workers;
    if (seed >= 0) config.seed = static_cast<std::uint64_t>(seed);
    if (snapshotEvery > 0.0) config.snapshotEvery = snapshotEvery;

    const auto result = gbees::runScenario(config);
    std::cout << "t=" << gbees::formatNumber(result.t) << " steps=" << result.steps
              << " active_cells=" << result.grid.size() << " mass=" << gbees::formatNumber(result.grid.totalMass())
              << " mass_removed=" << gbees::formatNumber(result.massRemovedCumulative)
              << " mass_clamped=" << gbees::formatNumber(result.massClampedCumulative)
              << " measurements=" << result.measurementsApplied << " snapshots=" << result.snapshotsWritten;
    if (result.finalKlBits) std::cout << " kl_bits=" << gbees::formatNumber(*result.finalKlBits);
    std::cout << " wall_s=" << result.wallSeconds << '\n';
    std::cout << "output: " << config.outputDir.string() << '\n';
    return kOk;
  } catch (const gbees::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const gbees::NumericalError& e) {
    std::cerr << "numerical abort: " << e.what() << '\n';
    return kNumerical;
  } catch (const gbees::DegenerateUpdateError& e) {
    std::cerr << "bayes update failed: " << e.what() << '\n';
    return kDegenerate;
  } catch (const gbees::IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfig;
  }
}
