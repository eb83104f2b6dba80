#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace gbees {

/// Drift f(x) and additive diffusion spectral density Q of a system dx/dt = f(x) + w.
class DynamicsModel {
 public:
  virtual ~DynamicsModel() = default;

  virtual std::size_t dim() const noexcept = 0;

  /// Writes f(x) into `v`; both spans hold dim() entries.
  virtual void drift(std::span<const double> x, std::span<double> v) const = 0;

  /// Row-major dim() x dim() spectral density matrix.
  virtual const std::vector<double>& diffusion() const noexcept = 0;

  virtual std::string name() const = 0;

  /// Distinct for every model object, copies included. Lets grids tell whether
  /// cached face velocities came from this model.
  std::uint64_t instanceId() const noexcept { return id_; }

 protected:
  DynamicsModel() noexcept;
  DynamicsModel(const DynamicsModel&) noexcept;
  DynamicsModel& operator=(const DynamicsModel&) noexcept { return *this; }

 private:
  std::uint64_t id_;
};

/// Shared storage and validation of Q for the concrete models.
class DiffusionHolder {
 public:
  DiffusionHolder(std::size_t dim, std::vector<double> q);
  const std::vector<double>& matrix() const noexcept { return q_; }

 private:
  std::vector<double> q_;
};

/// Q = 2 mu I in `dim` dimensions.
std::vector<double> isotropicDiffusion(std::size_t dim, double mu);

/// Solid-body rotation about the origin: f(x, y) = (y, -x).
class RotationModel final : public DynamicsModel {
 public:
  explicit RotationModel(double mu = 0.0);

  std::size_t dim() const noexcept override { return 2; }
  void drift(std::span<const double> x, std::span<double> v) const override;
  const std::vector<double>& diffusion() const noexcept override { return q_.matrix(); }
  std::string name() const override { return "rotation"; }

 private:
  DiffusionHolder q_;
};

/// Lorenz system with x3 shifted by r, so the invariant axis is x1 = x2 = 0.
class LorenzModel final : public DynamicsModel {
 public:
  LorenzModel(double sigma = 4.0, double b = 1.0, double r = 48.0, double mu = 0.0);

  std::size_t dim() const noexcept override { return 3; }
  void drift(std::span<const double> x, std::span<double> v) const override;
  const std::vector<double>& diffusion() const noexcept override { return q_.matrix(); }
  std::string name() const override { return "lorenz"; }

  double sigma() const noexcept { return sigma_; }
  double b() const noexcept { return b_; }
  double r() const noexcept { return r_; }

 private:
  double sigma_, b_, r_;
  DiffusionHolder q_;
};

/// Spatially uniform drift; the workhorse for 1D advection and pure-diffusion tests.
class ConstantDriftModel final : public DynamicsModel {
 public:
  explicit ConstantDriftModel(std::vector<double> velocity, double mu = 0.0);

  std::size_t dim() const noexcept override { return velocity_.size(); }
  void drift(std::span<const double> x, std::span<double> v) const override;
  const std::vector<double>& diffusion() const noexcept override { return q_.matrix(); }
  std::string name() const override { return "constant"; }

 private:
  std::vector<double> velocity_;
  DiffusionHolder q_;
};

std::vector<double> lorenzDrift(std::span<const double> x, double sigma, double b, double r);
std::vector<double> rotationDrift(std::span<const double> x);

/// Measurement model y = h(x) + v with independent Gaussian noise per component.
class GaussianMeasurementModel {
 public:
  using Observe = std::function<void(std::span<const double> x, std::span<double> y)>;

  /// `noiseStd` fixes the observation dimension; every entry must be positive.
  GaussianMeasurementModel(Observe observe, std::vector<double> noiseStd);

  /// h(x) = (x[components[0]], x[components[1]], ...).
  static GaussianMeasurementModel observingComponents(std::vector<std::size_t> components,
                                                      std::vector<double> noiseStd);

  std::size_t obsDim() const noexcept { return noiseStd_.size(); }
  const std::vector<double>& noiseStd() const noexcept { return noiseStd_; }

  void observe(std::span<const double> x, std::span<double> y) const { observe_(x, y); }

  /// log p(y | x) without the additive normalization constant.
  double logLikelihood(std::span<const double> y, std::span<const double> x) const;

 private:
  Observe observe_;
  std::vector<double> noiseStd_;
  std::vector<double> invTwoVar_;
};

double gaussianLogLikelihood(const GaussianMeasurementModel& model, std::span<const double> y,
                             std::span<const double> x);

}  // namespace gbees
