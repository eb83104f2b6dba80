#include "gbees/dynamics.hpp"

#include <array>
#include <atomic>
#include <cmath>
#include <stdexcept>

#include "gbees/cell_index.hpp"

namespace gbees {
namespace {

std::uint64_t nextModelId() noexcept {
  static std::atomic<std::uint64_t> counter{0};
  return ++counter;
}

}  // namespace

DynamicsModel::DynamicsModel() noexcept : id_(nextModelId()) {}
DynamicsModel::DynamicsModel(const DynamicsModel&) noexcept : id_(nextModelId()) {}

DiffusionHolder::DiffusionHolder(std::size_t dim, std::vector<double> q) : q_(std::move(q)) {
  if (q_.empty()) q_.assign(dim * dim, 0.0);
  if (q_.size() != dim * dim) throw std::invalid_argument("diffusion matrix must be dim x dim");
  for (std::size_t i = 0; i < dim; ++i) {
    if (!(q_[i * dim + i] >= 0.0)) throw std::invalid_argument("diffusion diagonal must be nonnegative");
    for (std::size_t j = i + 1; j < dim; ++j)
      if (q_[i * dim + j] != q_[j * dim + i]) throw std::invalid_argument("diffusion matrix must be symmetric");
  }
}

std::vector<double> isotropicDiffusion(std::size_t dim, double mu) {
  std::vector<double> q(dim * dim, 0.0);
  for (std::size_t i = 0; i < dim; ++i) q[i * dim + i] = 2.0 * mu;
  return q;
}

RotationModel::RotationModel(double mu) : q_(2, isotropicDiffusion(2, mu)) {}

void RotationModel::drift(std::span<const double> x, std::span<double> v) const {
  v[0] = x[1];
  v[1] = -x[0];
}

LorenzModel::LorenzModel(double sigma, double b, double r, double mu)
    : sigma_(sigma), b_(b), r_(r), q_(3, isotropicDiffusion(3, mu)) {}

void LorenzModel::drift(std::span<const double> x, std::span<double> v) const {
  v[0] = sigma_ * (x[1] - x[0]);
  v[1] = -x[1] - x[0] * x[2];
  v[2] = -b_ * x[2] + x[0] * x[1] - b_ * r_;
}

ConstantDriftModel::ConstantDriftModel(std::vector<double> velocity, double mu)
    : velocity_(std::move(velocity)), q_(velocity_.size(), isotropicDiffusion(velocity_.size(), mu)) {
  if (velocity_.empty() || velocity_.size() > kMaxDim)
    throw std::invalid_argument("ConstantDriftModel: dimension out of range");
}

void ConstantDriftModel::drift(std::span<const double>, std::span<double> v) const {
  for (std::size_t d = 0; d < velocity_.size(); ++d) v[d] = velocity_[d];
}

std::vector<double> lorenzDrift(std::span<const double> x, double sigma, double b, double r) {
  std::vector<double> v(3);
  LorenzModel(sigma, b, r).drift(x, v);
  return v;
}

std::vector<double> rotationDrift(std::span<const double> x) {
  std::vector<double> v(2);
  RotationModel().drift(x, v);
  return v;
}

GaussianMeasurementModel::GaussianMeasurementModel(Observe observe, std::vector<double> noiseStd)
    : observe_(std::move(observe)), noiseStd_(std::move(noiseStd)) {
  if (!observe_) throw std::invalid_argument("GaussianMeasurementModel: missing observation function");
  if (noiseStd_.empty() || noiseStd_.size() > kMaxDim)
    throw std::invalid_argument("GaussianMeasurementModel: observation dimension out of range");
  for (double s : noiseStd_) {
    if (!(s > 0.0) || !std::isfinite(s))
      throw std::invalid_argument("GaussianMeasurementModel: noise standard deviation must be positive");
    invTwoVar_.push_back(1.0 / (2.0 * s * s));
  }
}

GaussianMeasurementModel GaussianMeasurementModel::observingComponents(std::vector<std::size_t> components,
                                                                       std::vector<double> noiseStd) {
  if (components.size() != noiseStd.size())
    throw std::invalid_argument("observingComponents: one noise level per observed component");
  return GaussianMeasurementModel(
      [components](std::span<const double> x, std::span<double> y) {
        for (std::size_t c = 0; c < components.size(); ++c) y[c] = x[components[c]];
      },
      std::move(noiseStd));
}

double GaussianMeasurementModel::logLikelihood(std::span<const double> y, std::span<const double> x) const {
  std::array<double, kMaxDim> h{};
  observe_(x, std::span<double>(h.data(), obsDim()));
  double sum = 0.0;
  for (std::size_t c = 0; c < obsDim(); ++c) {
    const double r = y[c] - h[c];
    sum += r * r * invTwoVar_[c];
  }
  return -sum;
}

double gaussianLogLikelihood(const GaussianMeasurementModel& model, std::span<const double> y,
                             std::span<const double> x) {
  return model.logLikelihood(y, x);
}

}  // namespace gbees
