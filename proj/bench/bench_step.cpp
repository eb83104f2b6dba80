// Times one advanceStep on the rotation problem three ways: the sparse kernels
// with one worker, the sparse kernels with the full OpenMP team, and the dense
// serial reference. Also reports the largest cellwise disagreement.

#include <chrono>
#include <cmath>
#include <iostream>

#include <CLI11.hpp>
#ifdef _OPENMP
#include <omp.h>
#endif

#include "gbees/reference/dense_solver.hpp"
#include "gbees/runner.hpp"
#include "gbees/solver.hpp"

namespace {

using Clock = std::chrono::steady_clock;

double secondsSince(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Step-kernel benchmark"};
  int steps = 20;
  int size = 32;
  int workers = 0;
  app.add_option("--steps", steps, "Steps per variant")->check(CLI::PositiveNumber);
  app.add_option("--size", size, "Initial Gaussian spans about 2.5 * size cells per axis")->check(CLI::PositiveNumber);
  app.add_option("--workers", workers, "OpenMP team for the parallel variant (0 = default)");
  CLI11_PARSE(app, argc, argv);

  gbees::RunConfig config;
  config.model = "rotation";
  config.spacing = {0.01, 0.01};
  config.threshold = 1e-12;
  config.icMean = {0.0, 0.5};
  const double sigma = size * 0.01 / 4.0;
  config.icVariance = {sigma * sigma, sigma * sigma};
  config.icSupportRadius = 5.0;
  config.solver.dtMax = 1e-3;

  const gbees::RotationModel model;
  gbees::SparseGrid initial = gbees::initializeGaussian(config);
  initial.setThreshold(0.0);

  gbees::SolverConfig serialCfg = config.solver;
  serialCfg.workers = 1;
  gbees::SolverConfig parallelCfg = config.solver;
  parallelCfg.workers = workers;

  gbees::SparseGrid serial = initial;
  auto t0 = Clock::now();
  std::vector<double> dts;
  for (int s = 0; s < steps; ++s) dts.push_back(gbees::advanceStep(serial, model, serialCfg).dt);
  const double serialTime = secondsSince(t0);

  gbees::SparseGrid parallel = initial;
  t0 = Clock::now();
  for (int s = 0; s < steps; ++s) gbees::advanceStep(parallel, model, parallelCfg);
  const double parallelTime = secondsSince(t0);

  gbees::reference::DenseGrid dense = gbees::reference::DenseGrid::enclosing(initial, steps + 2);
  const std::vector<double> mu = {0.0, 0.0};
  t0 = Clock::now();
  for (int s = 0; s < steps; ++s) gbees::reference::step(dense, model, dts[s], config.solver.limiter, mu);
  const double denseTime = secondsSince(t0);

  double maxDiff = 0.0;
  double maxWorkerDiff = 0.0;
  for (std::size_t k = 0; k < dense.size(); ++k) {
    const auto idx = dense.indexOf(k);
    const auto* c = serial.find(idx);
    maxDiff = std::max(maxDiff, std::abs((c ? c->p : 0.0) - dense.values()[k]));
  }
  for (const auto& [idx, cell] : serial) {
    const auto* c = parallel.find(idx);
    maxWorkerDiff = std::max(maxWorkerDiff, c ? std::abs(c->p - cell.p) : std::abs(cell.p));
  }

  int team = 1;
#ifdef _OPENMP
  team = workers > 0 ? workers : omp_get_max_threads();
#endif
  std::cout << "active cells (final)     " << serial.size() << "\n"
            << "dense cells              " << dense.size() << "\n"
            << "sparse serial   ms/step  " << 1e3 * serialTime / steps << "\n"
            << "sparse x" << team << " ms/step      " << 1e3 * parallelTime / steps << "\n"
            << "dense reference ms/step  " << 1e3 * denseTime / steps << "\n"
            << "max |sparse - dense|     " << maxDiff << "\n"
            << "max |serial - parallel|  " << maxWorkerDiff << "\n";
  return maxWorkerDiff == 0.0 && maxDiff < 1e-9 ? 0 : 1;
}
