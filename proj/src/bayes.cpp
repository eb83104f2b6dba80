#include "gbees/bayes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

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

std::string describe(const MeasurementEvent& event) {
  std::string s = "measurement at t=" + std::to_string(event.time) + " y=(";
  for (std::size_t c = 0; c < event.y.size(); ++c) s += (c ? "," : "") + std::to_string(event.y[c]);
  return s + ")";
}

}  // namespace

BayesResult bayesUpdate(SparseGrid& grid, const MeasurementEvent& event, int workers) {
  if (grid.empty()) throw std::invalid_argument("bayesUpdate: empty grid");
  if (!event.model) throw std::invalid_argument("bayesUpdate: event has no measurement model");
  if (event.y.size() != event.model->obsDim())
    throw std::invalid_argument("bayesUpdate: observation has the wrong dimension");

  const auto cells = grid.cells();
  const GridGeometry& geo = grid.geometry();
  const std::size_t n = grid.dim();
  const std::ptrdiff_t count = static_cast<std::ptrdiff_t>(cells.size());

  // Log-likelihoods go into pNext; only cells carrying mass set the shift.
#pragma omp parallel for schedule(static) num_threads(teamSize(workers))
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    Cell& c = *cells[i];
    const Vec x = geo.center(c.index);
    c.pNext = event.model->logLikelihood(event.y, std::span<const double>(x.data(), n));
  }
  double shift = -std::numeric_limits<double>::infinity();
  for (const Cell* c : cells)
    if (c->p > 0.0) shift = std::max(shift, c->pNext);
  if (!std::isfinite(shift)) throw DegenerateUpdateError("prior has no mass for " + describe(event));

  double weighted = 0.0;
  for (Cell* c : cells) {
    c->pNext = std::exp(c->pNext - shift) * c->p;
    weighted += c->pNext;
  }
  const double scaledC = weighted * geo.cellVolume();
  if (!(scaledC > 0.0) || !std::isfinite(scaledC))
    throw DegenerateUpdateError("likelihood annihilates the support for " + describe(event));

  for (Cell* c : cells) c->p = c->pNext / scaledC;

  BayesResult result;
  result.logNormConstant = std::log(scaledC) + shift;
  result.normConstant = std::exp(result.logNormConstant);
  // Pruned mass is folded back in by a second normalization so the posterior
  // leaves with unit mass.
  result.massRemoved = grid.prune();
  if (result.massRemoved > 0.0) normalize(grid);
  grid.expand();
  return result;
}

double normalize(SparseGrid& grid) {
  const double mass = grid.totalMass();
  if (!(mass > 0.0) || !std::isfinite(mass)) throw NumericalError("normalize: total mass must be positive");
  for (auto& [idx, cell] : grid) cell.p /= mass;
  return mass;
}

void checkSchedule(std::span<const MeasurementEvent> events) {
  for (std::size_t i = 1; i < events.size(); ++i)
    if (events[i].time < events[i - 1].time) throw ConfigError("measurement times must be nondecreasing");
}

}  // namespace gbees
