#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "gbees/errors.hpp"
#include "gbees/reference/dense_solver.hpp"
#include "gbees/solver.hpp"
#include "test_support.hpp"

using namespace gbees;
using gbees::test::boxGrid;

namespace {

// Drift that is NaN everywhere; used to exercise the non-finite abort.
class NanDrift final : public DynamicsModel {
 public:
  std::size_t dim() const noexcept override { return 1; }
  void drift(std::span<const double>, std::span<double> v) const override {
    v[0] = std::numeric_limits<double>::quiet_NaN();
  }
  const std::vector<double>& diffusion() const noexcept override { return q_; }
  std::string name() const override { return "nan"; }

 private:
  std::vector<double> q_ = {0.0};
};

SparseGrid line(std::vector<double> values, double h = 1.0) {
  SparseGrid g(GridGeometry({h}, {0.0}), 0.0);
  for (std::size_t i = 0; i < values.size(); ++i) g.insert(CellIndex{static_cast<int>(i)}, values[i]);
  return g;
}

double flux(SparseGrid& g, CellIndex idx, std::size_t d = 0) { return g.find(idx)->fluxLow[d]; }

double totalVariation(const SparseGrid& g) {
  double tv = 0.0;
  const Cell* prev = nullptr;
  for (const auto& [idx, c] : g) {
    if (prev) tv += std::abs(c.p - prev->p);
    prev = &c;
  }
  return tv;
}

}  // namespace

TEST_CASE("solver config validation") {
  SolverConfig c;
  CHECK_NOTHROW(c.validate());
  c.cflTarget = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.cflTarget = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.cflTarget = 1.0;
  CHECK_NOTHROW(c.validate());
  c.dtMax = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.dtMax = 1e-3;
  c.diffusionCompensation = -1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("effective diffusion subtracts the compensation and floors at zero") {
  const RotationModel m(1e-3);  // q = 2e-3, so mu = 1e-3
  SolverConfig c;
  CHECK(effectiveDiffusion(m, c)[0] == doctest::Approx(1e-3));
  c.diffusionCompensation = 4e-4;
  CHECK(effectiveDiffusion(m, c)[1] == doctest::Approx(6e-4));
  c.diffusionCompensation = 1.0;
  CHECK(effectiveDiffusion(m, c)[0] == 0.0);
}

TEST_CASE("limiter values") {
  CHECK(limiterPhi(1.0, Limiter::MC) == 1.0);
  CHECK(limiterPhi(1.0, Limiter::VanLeer) == 1.0);
  CHECK(limiterPhi(-1.0, Limiter::MC) == 0.0);
  CHECK(limiterPhi(-1.0, Limiter::VanLeer) == 0.0);
  CHECK(limiterPhi(3.0, Limiter::MC) == 2.0);
  CHECK(limiterPhi(3.0, Limiter::VanLeer) == 1.5);
  CHECK(limiterPhi(0.25, Limiter::MC) == 0.5);
  CHECK(limiterPhi(0.7, Limiter::None) == 0.0);
}

TEST_CASE("limiters stay in [0, 2]") {
  std::mt19937 rng(1);
  std::cauchy_distribution<double> theta(0.0, 3.0);
  for (int k = 0; k < 2000; ++k) {
    const double t = theta(rng);
    for (Limiter l : {Limiter::MC, Limiter::VanLeer}) {
      const double phi = limiterPhi(t, l);
      CHECK(phi >= 0.0);
      CHECK(phi <= 2.0);
    }
  }
}

TEST_CASE("face velocities are evaluated at low-face centers") {
  const RotationModel rot;
  const GridGeometry fine({0.01, 0.01}, {0.005, 0.5});
  CHECK(faceVelocity(rot, fine, CellIndex{0, 0}, 0) == doctest::Approx(0.5));
  const GridGeometry coarse({0.1, 0.1}, {0.0, 0.0});
  CHECK(faceVelocity(rot, coarse, CellIndex{10, 3}, 1) == doctest::Approx(-1.0));
  const LorenzModel lor;
  const GridGeometry lg({0.25, 0.25, 0.25}, {0.0, 0.0, 0.125});
  CHECK(faceVelocity(lor, lg, CellIndex{0, 0, 0}, 2) == doctest::Approx(-48.0));
}

TEST_CASE("stable time step") {
  SolverConfig c;
  c.dtMax = 1.0;
  c.cflTarget = 0.5;
  {
    auto g = line({1.0, 2.0, 3.0});
    const ConstantDriftModel still({0.0});
    CHECK(computeStableDt(g, still, c) == 1.0);
  }
  {
    auto g = line({1.0, 2.0, 3.0}, 0.01);
    const ConstantDriftModel m({-2.0});
    CHECK(computeStableDt(g, m, c) == doctest::Approx(0.0025));
  }
  {
    SparseGrid g(GridGeometry({0.25, 0.25, 0.25}, {0.0, 0.0, 0.0}), 0.0);
    for (int i = -40; i <= 40; i += 8)
      for (int j = -80; j <= 80; j += 8)
        for (int k = -100; k <= 60; k += 8) g.insert(CellIndex{i, j, k}, 1.0);
    SolverConfig lc;
    lc.dtMax = 1e-3;
    const double dt = computeStableDt(g, LorenzModel(), lc);
    CHECK(dt > 0.0);
    CHECK(dt <= 1e-3);
  }
  {
    SparseGrid empty(GridGeometry({1.0}, {0.0}), 0.0);
    CHECK_THROWS_AS(computeStableDt(empty, ConstantDriftModel({1.0}), c), std::invalid_argument);
  }
}

TEST_CASE("godunov fluxes are upwind") {
  auto g = line({2.0, 5.0});
  computeFaceVelocities(g, ConstantDriftModel({1.0}));
  initGodunovFluxes(g);
  CHECK(flux(g, CellIndex{1}) == 2.0);
  CHECK(flux(g, CellIndex{0}) == 0.0);  // no low neighbor

  computeFaceVelocities(g, ConstantDriftModel({-1.0}));
  initGodunovFluxes(g);
  CHECK(flux(g, CellIndex{1}) == -5.0);

  computeFaceVelocities(g, ConstantDriftModel({0.0}));
  initGodunovFluxes(g);
  CHECK(flux(g, CellIndex{1}) == 0.0);
}

TEST_CASE("CTU terms vanish for constant density") {
  auto g = boxGrid({0.1, 0.1}, {-3, -3}, {3, 3}, [](const Vec&) { return 0.7; });
  computeFaceVelocities(g, RotationModel());
  initGodunovFluxes(g);
  std::vector<double> before;
  for (const Cell* c : g.cells()) before.insert(before.end(), c->fluxLow.begin(), c->fluxLow.begin() + 2);
  applyCtuCorrections(g, 0.01);
  std::vector<double> after;
  for (const Cell* c : g.cells()) after.insert(after.end(), c->fluxLow.begin(), c->fluxLow.begin() + 2);
  CHECK(before == after);
}

TEST_CASE("CTU with positive velocities moves only the downstream x-flux") {
  // Only the y-face between (0,0) and (0,1) carries a jump.
  SparseGrid g(GridGeometry({0.5, 0.25}, {0.0, 0.0}), 0.0);
  for (int i = -1; i <= 1; ++i)
    for (int j = 0; j <= 1; ++j) g.insert(CellIndex{i, j}, (i == 0 && j == 1) ? 1.0 : 0.0);
  const double u = 0.8;
  const double v = 0.6;
  const double dt = 0.05;
  computeFaceVelocities(g, ConstantDriftModel({u, v}));
  initGodunovFluxes(g);
  std::vector<double> godunov;
  for (const Cell* c : g.cells()) godunov.push_back(c->fluxLow[0]);
  applyCtuCorrections(g, dt);
  std::size_t k = 0;
  for (const Cell* c : g.cells()) {
    const double delta = c->fluxLow[0] - godunov[k++];
    if (c->index == CellIndex{1, 1})
      CHECK(delta == doctest::Approx(-dt * u * v / 2 * 1.0 / 0.25));
    else
      CHECK(delta == 0.0);
  }
}

TEST_CASE("high resolution correction on a linear profile reproduces the Lax-Wendroff flux") {
  std::vector<double> vals(10);
  for (int i = 0; i < 10; ++i) vals[i] = i;
  const double h = 0.01;
  const double u = 1.3;
  const double dt = 0.004;
  auto g = line(vals, h);
  computeFaceVelocities(g, ConstantDriftModel({u}));
  initGodunovFluxes(g);
  applyHighResolutionCorrections(g, dt, Limiter::MC);
  for (int i = 2; i < 10; ++i) {
    const double lw = u / 2 * (vals[i] + vals[i - 1]) - u * u / 2 * dt / h * (vals[i] - vals[i - 1]);
    CHECK(flux(g, CellIndex{i}) == doctest::Approx(lw).epsilon(1e-13));
  }
}

TEST_CASE("high resolution correction is dropped at an extremum and on flat faces") {
  auto g = line({0.0, 1.0, 3.0, 1.0, 1.0, 1.0});
  computeFaceVelocities(g, ConstantDriftModel({1.0}));
  initGodunovFluxes(g);
  applyHighResolutionCorrections(g, 0.1, Limiter::MC);
  CHECK(flux(g, CellIndex{3}) == 3.0);  // theta = -1 behind the peak
  CHECK(flux(g, CellIndex{5}) == 1.0);  // zero jump
}

TEST_CASE("diffusion fluxes") {
  const std::vector<double> hat = {0.0, 0.0, 1.0, 2.0, 1.0, 0.0, 0.0};
  const double h = 0.1;
  const double dt = 0.002;
  const double mu = 0.7;
  SUBCASE("zero coefficient leaves fluxes alone") {
    auto g = line(hat, h);
    computeFaceVelocities(g, ConstantDriftModel({0.0}));
    initGodunovFluxes(g);
    applyDiffusionFluxes(g, std::vector<double>{0.0});
    for (const auto& [idx, c] : g) CHECK(c.fluxLow[0] == 0.0);
  }
  SUBCASE("uniform density has no diffusive flux") {
    auto g = line(std::vector<double>(5, 0.3), h);
    computeFaceVelocities(g, ConstantDriftModel({0.0}));
    initGodunovFluxes(g);
    applyDiffusionFluxes(g, std::vector<double>{mu});
    for (const auto& [idx, c] : g) CHECK(c.fluxLow[0] == 0.0);
  }
  SUBCASE("one update is the explicit heat step") {
    auto g = line(hat, h);
    computeFaceVelocities(g, ConstantDriftModel({0.0}));
    initGodunovFluxes(g);
    applyDiffusionFluxes(g, std::vector<double>{mu});
    applyFluxDivergence(g, dt);
    const double r = mu * dt / (h * h);
    for (int i = 1; i + 1 < static_cast<int>(hat.size()); ++i)
      CHECK(g.find(CellIndex{i})->p == doctest::Approx(hat[i] + r * (hat[i + 1] - 2 * hat[i] + hat[i - 1])));
  }
}

TEST_CASE("a still model leaves the density unchanged") {
  auto g = boxGrid({0.1, 0.1}, {-4, -4}, {4, 4}, [](const Vec& x) { return std::exp(-x[0] * x[0] - x[1] * x[1]); },
                   1e-3);
  g.expand();
  const SparseGrid before = g;
  SolverConfig c;
  c.prune = false;
  advanceStep(g, ConstantDriftModel({0.0, 0.0}), c);
  for (const auto& [idx, cell] : before) CHECK(g.find(idx)->p == cell.p);
}

TEST_CASE("sparse step matches the dense reference on a rotating Gaussian") {
  auto g = boxGrid({0.05, 0.05}, {-16, -16}, {15, 15}, [](const Vec& x) {
    return std::exp(-((x[0] - 0.1) * (x[0] - 0.1) + (x[1] - 0.2) * (x[1] - 0.2)) / (2 * 0.09));
  });
  SolverConfig c;
  c.prune = false;
  const RotationModel rot;
  auto dense = reference::DenseGrid::enclosing(g, 2);
  const auto s = advanceStep(g, rot, c);
  reference::step(dense, rot, s.dt, c.limiter, std::vector<double>{0.0, 0.0});
  double worst = 0.0;
  for (std::size_t k = 0; k < dense.size(); ++k) {
    const Cell* cell = g.find(dense.indexOf(k));
    worst = std::max(worst, std::abs((cell ? cell->p : 0.0) - dense.values()[k]));
  }
  CHECK(worst < 1e-14);
}

TEST_CASE("mass is conserved without pruning") {
  auto g = boxGrid({0.05, 0.05}, {-30, -30}, {30, 30}, [](const Vec& x) {
    return std::exp(-((x[0] - 0.3) * (x[0] - 0.3) + x[1] * x[1]) / (2 * 0.04)) / (2 * M_PI * 0.04);
  });
  SolverConfig c;
  c.prune = false;
  const double m0 = g.totalMass();
  double clamped = 0.0;
  for (int k = 0; k < 50; ++k) clamped += advanceStep(g, RotationModel(), c).massClamped;
  CHECK(std::abs(g.totalMass() - clamped - m0) < 1e-12 * m0);
}

TEST_CASE("1D advection is TVD and bounded for both limiters") {
  for (Limiter l : {Limiter::MC, Limiter::VanLeer}) {
    std::vector<double> vals(80, 0.0);
    for (int i = 20; i < 40; ++i) vals[i] = 1.0;
    auto g = line(vals, 0.01);
    SolverConfig c;
    c.limiter = l;
    c.prune = false;
    c.cflTarget = 0.8;
    double tv = totalVariation(g);
    for (int k = 0; k < 60; ++k) {
      advanceStep(g, ConstantDriftModel({1.0}), c);
      const double next = totalVariation(g);
      CHECK(next <= tv + 1e-12);
      tv = next;
      for (const auto& [idx, cell] : g) {
        CHECK(cell.p >= -1e-12);
        CHECK(cell.p <= 1.0 + 1e-12);
      }
    }
  }
}

TEST_CASE("densities stay nonnegative after every step") {
  auto g = boxGrid({0.05, 0.05}, {-10, -10}, {10, 10},
                   [](const Vec& x) { return (std::abs(x[0]) < 0.2 && std::abs(x[1]) < 0.2) ? 1.0 : 0.0; }, 1e-6);
  SolverConfig c;
  for (int k = 0; k < 30; ++k) {
    advanceStep(g, RotationModel(), c);
    for (const auto& [idx, cell] : g) CHECK(cell.p >= 0.0);
  }
}

TEST_CASE("results do not depend on the worker count") {
  auto make = [] {
    return boxGrid({0.05, 0.05}, {-12, -12}, {12, 12}, [](const Vec& x) {
      return std::exp(-((x[0] - 0.2) * (x[0] - 0.2) + x[1] * x[1]) / 0.02);
    }, 1e-4);
  };
  SparseGrid a = make();
  SparseGrid b = make();
  SparseGrid c = make();
  SolverConfig ca, cb, cc;
  ca.workers = 1;
  cb.workers = 2;
  cc.workers = 5;
  const RotationModel rot(1e-3);
  for (int k = 0; k < 20; ++k) {
    advanceStep(a, rot, ca);
    advanceStep(b, rot, cb);
    advanceStep(c, rot, cc);
  }
  REQUIRE(a.size() == b.size());
  REQUIRE(a.size() == c.size());
  for (const auto& [idx, cell] : a) {
    CHECK(b.find(idx)->p == cell.p);
    CHECK(c.find(idx)->p == cell.p);
  }
}

TEST_CASE("non-finite densities abort the step without touching the grid") {
  auto g = line({0.1, 0.5, 0.2});
  SolverConfig c;
  c.prune = false;
  CHECK_THROWS_AS(advanceStep(g, NanDrift(), c), NumericalError);
  // The failed update never committed.
  CHECK(g.find(CellIndex{1})->p == 0.5);
}

TEST_CASE("step bookkeeping") {
  auto g = line({0.0, 1.0, 0.0});
  g.setThreshold(1e-3);
  SolverConfig c;
  c.dtMax = 0.01;
  const auto r = advanceStep(g, ConstantDriftModel({0.5}), c, 0.004);
  CHECK(r.dt == 0.004);
  CHECK(r.cellsAdded == 0);
  CHECK_THROWS_AS(advanceStep(g, ConstantDriftModel({0.5}), c, 0.0), std::invalid_argument);
}

TEST_CASE("advanceStep matches the kernels applied one by one") {
  auto make = [] {
    return boxGrid({0.1, 0.1}, {-8, -8}, {8, 8}, [](const Vec& x) {
      return std::exp(-2.0 * ((x[0] - 0.2) * (x[0] - 0.2) + x[1] * x[1])) + (x[0] > 0.3 ? 0.5 : 0.0);
    });
  };
  const RotationModel rot(0.02);
  SolverConfig c;
  c.prune = false;
  auto a = make();
  auto b = make();
  const auto st = advanceStep(a, rot, c);
  b.expand();
  const double dt = computeStableDt(b, rot, c);
  REQUIRE(dt == st.dt);
  initGodunovFluxes(b);
  applyCtuCorrections(b, dt);
  applyHighResolutionCorrections(b, dt, c.limiter);
  applyDiffusionFluxes(b, effectiveDiffusion(rot, c));
  applyFluxDivergence(b, dt);
  REQUIRE(a.size() == b.size());
  for (const auto& [idx, cell] : a) CHECK(b.find(idx)->p == cell.p);
}

TEST_CASE("cached face velocities follow the model") {
  auto g = line({1.0, 1.0, 1.0});
  const ConstantDriftModel right({1.0});
  const ConstantDriftModel left({-2.0});
  updateFaceVelocities(g, right);
  CHECK(g.find(CellIndex{1})->velocityLow[0] == 1.0);
  updateFaceVelocities(g, left);
  CHECK(g.find(CellIndex{1})->velocityLow[0] == -2.0);
  g.insert(CellIndex{3}, 0.0);
  updateFaceVelocities(g, left);
  CHECK(g.find(CellIndex{3})->velocityLow[0] == -2.0);
  const ConstantDriftModel copy = right;
  CHECK(copy.instanceId() != right.instanceId());
}
