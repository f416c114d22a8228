#ifndef IMAP_MODELS_HPP_
#define IMAP_MODELS_HPP_

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

#include "imap/integrators.hpp"
#include "imap/linalg.hpp"

namespace imap {

/// Zero-mean Gaussian noise with a validated covariance. The covariance may
/// be singular for sampling purposes; likelihood evaluation needs it to be
/// positive definite.
class GaussianNoise {
 public:
  GaussianNoise() = default;

  explicit GaussianNoise(const Matrix& cov, const std::string& name = "noise covariance")
      : cov_(symmetrize(cov)) {
    require_psd(cov_, name);
    factor_ = sampling_factor(cov_);
    llt_.compute(cov_);
    positive_definite_ = llt_.info() == Eigen::Success && min_eigenvalue(cov_) > 0.0;
  }

  const Matrix& cov() const noexcept { return cov_; }
  const Matrix& factor() const noexcept { return factor_; }
  bool positive_definite() const noexcept { return positive_definite_; }
  Eigen::Index dim() const noexcept { return cov_.rows(); }

  /// cov^{-1} r via the stored Cholesky factorization.
  Vector whiten_solve(const Vector& r) const {
    if (!positive_definite_) throw NumericalError("noise covariance is singular");
    return llt_.solve(r);
  }

  Vector sample(Rng& rng) const { return factor_ * standard_normal(cov_.rows(), rng); }

 private:
  Matrix cov_;
  Matrix factor_;
  Eigen::LLT<Matrix> llt_;
  bool positive_definite_ = false;
};

/// Gaussian negative log-likelihood 1/2 |y - h(x)|^2_R (constants dropped)
/// and its gradient -H^T R^{-1} (y - h(x)), with H the measurement Jacobian
/// at x.
inline std::pair<double, Vector> neg_loglik_and_grad_gaussian(const Vector& y, const Vector& hx,
                                                              const Matrix& hjac, const GaussianNoise& noise) {
  const Vector residual = y - hx;
  const Vector weighted = noise.whiten_solve(residual);
  return {0.5 * residual.dot(weighted), -hjac.transpose() * weighted};
}

inline std::pair<double, Vector> neg_loglik_and_grad_gaussian(const Vector& y, const Vector& hx,
                                                              const Matrix& hjac, const Matrix& r) {
  require_spd(r, "measurement noise covariance R");
  return neg_loglik_and_grad_gaussian(y, hx, hjac, GaussianNoise(r, "R"));
}

/// State-space model contract shared by simulators and filters:
///   x_t = f_t(x_{t-1}) + q,  q ~ N(0, Q)
///   y_t = h(x_t) + r,        r ~ N(0, R)
/// Time index t is the index of the state being produced (t = 1..T).
class StateSpaceModel {
 public:
  virtual ~StateSpaceModel() = default;

  virtual int state_dim() const = 0;
  virtual int obs_dim() const = 0;
  virtual Vector transition_mean(const Vector& x, int t) const = 0;
  virtual Matrix jacobian_F(const Vector& x, int t) const = 0;
  virtual Vector measurement_mean(const Vector& x, int t) const = 0;
  virtual Matrix jacobian_H(const Vector& x, int t) const = 0;

  /// Physical time between consecutive observations.
  virtual double time_step() const { return 1.0; }

  /// Ground-truth propagation used by simulate(). Defaults to the model's own
  /// transition distribution; models with a finer-grained truth override it.
  virtual Vector propagate_truth(const Vector& x, int t, Rng& rng) const { return transition_sample(x, t, rng); }

  const Matrix& process_cov() const noexcept { return process_.cov(); }
  const Matrix& measurement_cov() const noexcept { return measurement_.cov(); }
  const GaussianNoise& process_noise() const noexcept { return process_; }
  const GaussianNoise& measurement_noise() const noexcept { return measurement_; }
  const Vector& initial_mean() const noexcept { return mu0_; }
  const Matrix& initial_cov() const noexcept { return sigma0_; }

  Vector transition_sample(const Vector& x, int t, Rng& rng) const {
    return transition_mean(x, t) + process_.sample(rng);
  }
  Vector measurement_sample(const Vector& x, int t, Rng& rng) const {
    return measurement_mean(x, t) + measurement_.sample(rng);
  }
  Vector sample_initial(Rng& rng) const { return mu0_ + sigma0_factor_ * standard_normal(mu0_.size(), rng); }

  double neg_loglik(const Vector& x, const Vector& y, int t) const {
    const Vector residual = y - measurement_mean(x, t);
    return 0.5 * residual.dot(measurement_.whiten_solve(residual));
  }
  Vector grad_neg_loglik(const Vector& x, const Vector& y, int t) const {
    return neg_loglik_and_grad_gaussian(y, measurement_mean(x, t), jacobian_H(x, t), measurement_).second;
  }

 protected:
  StateSpaceModel(const Matrix& q, const Matrix& r, Vector mu0, const Matrix& sigma0)
      : process_(q, "process noise covariance Q"),
        measurement_(r, "measurement noise covariance R"),
        mu0_(std::move(mu0)),
        sigma0_(symmetrize(sigma0)) {
    require_psd(sigma0_, "initial covariance");
    if (sigma0_.rows() != mu0_.size()) throw std::invalid_argument("initial mean/covariance dimension mismatch");
    sigma0_factor_ = sampling_factor(sigma0_);
  }

 private:
  GaussianNoise process_;
  GaussianNoise measurement_;
  Vector mu0_;
  Matrix sigma0_;
  Matrix sigma0_factor_;
};

class LinearGaussianModel final : public StateSpaceModel {
 public:
  LinearGaussianModel(Matrix f, const Matrix& q, Matrix h, const Matrix& r, Vector mu0, const Matrix& sigma0)
      : StateSpaceModel(q, r, std::move(mu0), sigma0), f_(std::move(f)), h_(std::move(h)) {
    if (f_.rows() != f_.cols() || f_.rows() != process_cov().rows() || f_.rows() != initial_mean().size())
      throw std::invalid_argument("LinearGaussianModel: inconsistent state dimensions");
    if (h_.cols() != f_.rows() || h_.rows() != measurement_cov().rows())
      throw std::invalid_argument("LinearGaussianModel: inconsistent observation dimensions");
  }

  int state_dim() const override { return static_cast<int>(f_.rows()); }
  int obs_dim() const override { return static_cast<int>(h_.rows()); }
  Vector transition_mean(const Vector& x, int) const override { return f_ * x; }
  Matrix jacobian_F(const Vector&, int) const override { return f_; }
  Vector measurement_mean(const Vector& x, int) const override { return h_ * x; }
  Matrix jacobian_H(const Vector&, int) const override { return h_; }

  const Matrix& F() const noexcept { return f_; }
  const Matrix& H() const noexcept { return h_; }

 private:
  Matrix f_;
  Matrix h_;
};

// Univariate nonlinear growth model.
inline double ungm_transition_mean(double x, int t, double dt) {
  return 0.5 * x + 25.0 * x / (1.0 + x * x) + 8.0 * std::cos(1.2 * t * dt);
}

inline double ungm_measurement_mean(double x) { return x * x / 20.0; }

class UngmModel final : public StateSpaceModel {
 public:
  UngmModel(double q, double r, double dt = 0.1)
      : StateSpaceModel(Matrix::Constant(1, 1, q), Matrix::Constant(1, 1, r), Vector::Zero(1),
                        Matrix::Identity(1, 1)),
        dt_(dt) {
    if (!(q > 0.0) || !(r > 0.0)) throw std::invalid_argument("UngmModel: Q and R must be positive");
  }

  int state_dim() const override { return 1; }
  int obs_dim() const override { return 1; }
  double time_step() const override { return dt_; }

  Vector transition_mean(const Vector& x, int t) const override {
    return Vector::Constant(1, ungm_transition_mean(x[0], t, dt_));
  }
  Matrix jacobian_F(const Vector& x, int) const override {
    const double x2 = x[0] * x[0];
    return Matrix::Constant(1, 1, 0.5 + 25.0 * (1.0 - x2) / ((1.0 + x2) * (1.0 + x2)));
  }
  Vector measurement_mean(const Vector& x, int) const override {
    return Vector::Constant(1, ungm_measurement_mean(x[0]));
  }
  Matrix jacobian_H(const Vector& x, int) const override { return Matrix::Constant(1, 1, x[0] / 10.0); }

 private:
  double dt_;
};

/// Filter-side propagation of the Lorenz state between observations.
enum class LorenzDynamics { rk4, euler, grw };

inline std::string to_string(LorenzDynamics d) {
  switch (d) {
    case LorenzDynamics::rk4: return "rk4";
    case LorenzDynamics::euler: return "euler";
    case LorenzDynamics::grw: return "grw";
  }
  return "?";
}

inline LorenzDynamics parse_lorenz_dynamics(const std::string& s) {
  if (s == "rk4") return LorenzDynamics::rk4;
  if (s == "euler") return LorenzDynamics::euler;
  if (s == "grw") return LorenzDynamics::grw;
  throw std::invalid_argument("unknown Lorenz dynamics '" + s + "' (expected rk4, euler or grw)");
}

/// Stochastic Lorenz '63 observed directly in Gaussian noise. Ground truth is
/// Euler-Maruyama with `cfg.substeps` inner steps; the filter-facing
/// transition uses `dynamics`. The process covariance is q_alpha^2 dt I, where
/// q_alpha defaults to the true diffusion scale.
class LorenzModel final : public StateSpaceModel {
 public:
  explicit LorenzModel(const LorenzConfig& cfg, LorenzDynamics dynamics = LorenzDynamics::rk4,
                       std::optional<double> q_alpha = std::nullopt)
      : StateSpaceModel(process_cov_for(cfg, q_alpha), cfg.obs_noise_var * Matrix::Identity(3, 3),
                        Vector::Constant(3, 10.0), Matrix::Identity(3, 3)),
        cfg_(cfg),
        dynamics_(dynamics) {
    cfg_.validate();
  }

  int state_dim() const override { return 3; }
  int obs_dim() const override { return 3; }
  double time_step() const override { return cfg_.dt; }

  const LorenzConfig& config() const noexcept { return cfg_; }
  LorenzDynamics dynamics() const noexcept { return dynamics_; }

  Vector transition_mean(const Vector& x, int) const override {
    const auto drift = [this](const Vector& v) { return lorenz_drift(v, cfg_); };
    switch (dynamics_) {
      case LorenzDynamics::rk4: return step_rk4(drift, x, cfg_.dt);
      case LorenzDynamics::euler: return step_euler(drift, x, cfg_.dt);
      case LorenzDynamics::grw: return x;
    }
    return x;
  }

  Matrix jacobian_F(const Vector& x, int) const override {
    switch (dynamics_) {
      case LorenzDynamics::rk4:
        return step_rk4_jacobian([this](const Vector& v) { return lorenz_drift(v, cfg_); },
                                 [this](const Vector& v) { return lorenz_drift_jacobian(v, cfg_); }, x, cfg_.dt);
      case LorenzDynamics::euler:
        return Matrix::Identity(3, 3) + cfg_.dt * lorenz_drift_jacobian(x, cfg_);
      case LorenzDynamics::grw: return Matrix::Identity(3, 3);
    }
    return Matrix::Identity(3, 3);
  }

  Vector measurement_mean(const Vector& x, int) const override { return x; }
  Matrix jacobian_H(const Vector&, int) const override { return Matrix::Identity(3, 3); }

  Vector propagate_truth(const Vector& x, int, Rng& rng) const override {
    const Eigen::Vector3d start = x;
    const Eigen::Vector3d end = step_euler_maruyama(
        [this](const Eigen::Vector3d& v) { return lorenz_drift(v, cfg_); }, start, cfg_.dt, cfg_.substeps,
        cfg_.alpha, rng);
    return end;
  }

 private:
  static Matrix process_cov_for(const LorenzConfig& cfg, std::optional<double> q_alpha) {
    const double a = q_alpha.value_or(cfg.alpha);
    if (!(a > 0.0)) throw std::invalid_argument("LorenzModel: q_alpha must be > 0");
    return a * a * cfg.dt * Matrix::Identity(3, 3);
  }

  LorenzConfig cfg_;
  LorenzDynamics dynamics_;
};

}  // namespace imap

#endif  // IMAP_MODELS_HPP_
