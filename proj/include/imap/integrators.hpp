#ifndef IMAP_INTEGRATORS_HPP_
#define IMAP_INTEGRATORS_HPP_

#include <cmath>
#include <random>
#include <stdexcept>

#include "imap/linalg.hpp"

namespace imap {

/// Parameters of the stochastic Lorenz '63 system.
struct LorenzConfig {
  double sigma = 10.0;
  double rho = 28.0;
  double beta = 8.0 / 3.0;
  double alpha = 10.0;     // diffusion scale of the driving Wiener process
  double dt = 0.02;        // time between observations
  int substeps = 1000;     // Euler-Maruyama steps between observations (ground truth)
  double obs_noise_var = 2.0;

  void validate() const {
    if (substeps < 1) throw std::invalid_argument("LorenzConfig.substeps must be >= 1");
    if (!(alpha > 0.0)) throw std::invalid_argument("LorenzConfig.alpha must be > 0");
    if (!(dt > 0.0)) throw std::invalid_argument("LorenzConfig.dt must be > 0");
    if (!(obs_noise_var > 0.0)) throw std::invalid_argument("LorenzConfig.obs_noise_var must be > 0");
  }
};

template <class Vec>
Vec lorenz_drift(const Vec& x, const LorenzConfig& cfg) {
  Vec d = x;
  d[0] = cfg.sigma * (x[1] - x[0]);
  d[1] = x[0] * (cfg.rho - x[2]) - x[1];
  d[2] = x[0] * x[1] - cfg.beta * x[2];
  return d;
}

inline Matrix lorenz_drift_jacobian(const Vector& x, const LorenzConfig& cfg) {
  Matrix j(3, 3);
  j << -cfg.sigma, cfg.sigma, 0.0,
       cfg.rho - x[2], -1.0, -x[0],
       x[1], x[0], -cfg.beta;
  return j;
}

template <class Vec, class Drift>
Vec step_euler(Drift&& drift, const Vec& x, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("step_euler: dt must be > 0");
  Vec out = x + dt * drift(x);
  return out;
}

template <class Vec, class Drift>
Vec step_rk4(Drift&& drift, const Vec& x, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("step_rk4: dt must be > 0");
  const Vec k1 = drift(x);
  const Vec x2 = x + (0.5 * dt) * k1;
  const Vec k2 = drift(x2);
  const Vec x3 = x + (0.5 * dt) * k2;
  const Vec k3 = drift(x3);
  const Vec x4 = x + dt * k3;
  const Vec k4 = drift(x4);
  Vec out = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  return out;
}

/// Derivative of the RK4 map with respect to its starting point, propagated
/// through the four stages by the chain rule.
template <class Drift, class DriftJacobian>
Matrix step_rk4_jacobian(Drift&& drift, DriftJacobian&& jac, const Vector& x, double dt) {
  const auto n = x.size();
  const Matrix eye = Matrix::Identity(n, n);
  const Vector k1 = drift(x);
  const Matrix j1 = jac(x);
  const Vector x2 = x + (0.5 * dt) * k1;
  const Vector k2 = drift(x2);
  const Matrix j2 = jac(x2) * (eye + (0.5 * dt) * j1);
  const Vector x3 = x + (0.5 * dt) * k2;
  const Vector k3 = drift(x3);
  const Matrix j3 = jac(x3) * (eye + (0.5 * dt) * j2);
  const Vector x4 = x + dt * k3;
  const Matrix j4 = jac(x4) * (eye + dt * j3);
  return eye + (dt / 6.0) * (j1 + 2.0 * j2 + 2.0 * j3 + j4);
}

/// Advances x by dt with `substeps` Euler-Maruyama steps of size h = dt/substeps:
/// x <- x + h drift(x) + alpha sqrt(h) xi, xi ~ N(0, I).
template <class Vec, class Drift>
Vec step_euler_maruyama(Drift&& drift, const Vec& x, double dt, int substeps, double alpha, Rng& rng) {
  if (substeps < 1) throw std::invalid_argument("step_euler_maruyama: substeps must be >= 1");
  const double h = dt / substeps;
  const double noise_scale = alpha * std::sqrt(h);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec state = x;
  Vec noise = x;
  for (int s = 0; s < substeps; ++s) {
    for (Eigen::Index i = 0; i < noise.size(); ++i) noise[i] = normal(rng);
    state += h * drift(state) + noise_scale * noise;
  }
  return state;
}

}  // namespace imap

#endif  // IMAP_INTEGRATORS_HPP_
