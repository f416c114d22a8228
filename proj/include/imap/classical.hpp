#ifndef IMAP_CLASSICAL_HPP_
#define IMAP_CLASSICAL_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

#include "imap/linalg.hpp"
#include "imap/models.hpp"
#include "imap/trajectory.hpp"

namespace imap {

struct GaussianBelief {
  Vector mean;
  Matrix cov;
};

namespace detail {

// Restores symmetry and rejects covariances that lost positive semidefiniteness.
inline Matrix checked_covariance(const Matrix& cov, int step) {
  Matrix s = symmetrize(cov);
  if (!s.allFinite()) throw DivergenceError("non-finite covariance", step);
  const double floor = -1e-10 * std::max(1.0, s.cwiseAbs().maxCoeff());
  if (min_eigenvalue(s) < floor) throw NumericalError("covariance lost positive semidefiniteness");
  return s;
}

inline void check_mean(const Vector& mean, int step) {
  if (!mean.allFinite()) throw DivergenceError("non-finite filter mean", step);
}

// Update around a linearization point x_lin (x_lin = mu^- gives the EKF):
//   v = y - h(x_lin) - H (mu^- - x_lin),  S = H Sigma^- H^T + R,  K = Sigma^- H^T S^{-1}.
struct LinearizedUpdate {
  Vector mean;
  Matrix gain;
  Matrix innovation_cov;
};

inline LinearizedUpdate linearized_update(const GaussianBelief& prior, const Vector& x_lin, const StateSpaceModel& model,
                                          const Vector& y, int t) {
  const Matrix hjac = model.jacobian_H(x_lin, t);
  const Vector v = y - model.measurement_mean(x_lin, t) - hjac * (prior.mean - x_lin);
  const Matrix s = hjac * prior.cov * hjac.transpose() + model.measurement_cov();
  const Matrix gain = spd_solve(s, hjac * prior.cov.transpose()).transpose();
  return {prior.mean + gain * v, gain, s};
}

}  // namespace detail

inline GaussianBelief kf_predict(const GaussianBelief& b, const Matrix& f, const Matrix& q) {
  return {f * b.mean, symmetrize(f * b.cov * f.transpose() + q)};
}

inline GaussianBelief kf_update(const GaussianBelief& prior, const Matrix& h, const Matrix& r, const Vector& y,
                                int step = 0) {
  const Vector v = y - h * prior.mean;
  const Matrix s = h * prior.cov * h.transpose() + r;
  const Matrix gain = spd_solve(s, h * prior.cov.transpose()).transpose();
  GaussianBelief post{prior.mean + gain * v, prior.cov - gain * s * gain.transpose()};
  detail::check_mean(post.mean, step);
  post.cov = detail::checked_covariance(post.cov, step);
  return post;
}

/// One Kalman predict + update.
inline GaussianBelief kf_step(const GaussianBelief& b, const Matrix& f, const Matrix& q, const Matrix& h,
                              const Matrix& r, const Vector& y, int step = 0) {
  return kf_update(kf_predict(b, f, q), h, r, y, step);
}

inline GaussianBelief ekf_predict(const GaussianBelief& b, const StateSpaceModel& model, int t) {
  const Matrix fjac = model.jacobian_F(b.mean, t);
  GaussianBelief out{model.transition_mean(b.mean, t), fjac * b.cov * fjac.transpose() + model.process_cov()};
  detail::check_mean(out.mean, t);
  out.cov = detail::checked_covariance(out.cov, t);
  return out;
}

/// Iterated EKF update: K relinearizations starting from x^(0) = mu^-; the
/// covariance comes from the final gain. K = 1 is the EKF update.
inline GaussianBelief iekf_update(const GaussianBelief& prior, const StateSpaceModel& model, const Vector& y, int t,
                                  int iterations) {
  if (iterations < 1) throw std::invalid_argument("iekf_update: K must be >= 1");
  Vector x = prior.mean;
  detail::LinearizedUpdate u;
  for (int i = 0; i < iterations; ++i) {
    u = detail::linearized_update(prior, x, model, y, t);
    x = u.mean;
    detail::check_mean(x, t);
  }
  GaussianBelief post{x, prior.cov - u.gain * u.innovation_cov * u.gain.transpose()};
  post.cov = detail::checked_covariance(post.cov, t);
  return post;
}

inline GaussianBelief ekf_update(const GaussianBelief& prior, const StateSpaceModel& model, const Vector& y, int t) {
  const auto u = detail::linearized_update(prior, prior.mean, model, y, t);
  GaussianBelief post{u.mean, prior.cov - u.gain * u.innovation_cov * u.gain.transpose()};
  detail::check_mean(post.mean, t);
  post.cov = detail::checked_covariance(post.cov, t);
  return post;
}

inline GaussianBelief ekf_step(const GaussianBelief& b, const StateSpaceModel& model, const Vector& y, int t) {
  return ekf_update(ekf_predict(b, model, t), model, y, t);
}

/// Unscented transform parameters; `standard(n)` is alpha = 1, beta = 3 - n,
/// lambda = alpha^2 (n + beta) - n.
struct UkfParams {
  double alpha = 1.0;
  double beta = 0.0;
  double lambda = 0.0;

  static UkfParams standard(int n) {
    UkfParams p;
    p.alpha = 1.0;
    p.beta = 3.0 - n;
    p.lambda = p.alpha * p.alpha * (n + p.beta) - n;
    return p;
  }

  void validate(int n) const {
    if (!(n + lambda > 0.0)) throw std::invalid_argument("UkfParams: n + lambda must be > 0");
  }
};

struct SigmaPoints {
  Matrix points;        // n x (2n + 1), column 0 is the mean
  Vector mean_weights;  // 2n + 1
  Vector cov_weights;   // 2n + 1
};

inline SigmaPoints ukf_sigma_points(const GaussianBelief& b, const UkfParams& p) {
  const auto n = b.mean.size();
  p.validate(static_cast<int>(n));
  const double spread = std::sqrt(n + p.lambda);
  const Matrix root = cholesky_lower(b.cov);
  SigmaPoints sp;
  sp.points.resize(n, 2 * n + 1);
  sp.points.col(0) = b.mean;
  for (Eigen::Index i = 0; i < n; ++i) {
    sp.points.col(1 + i) = b.mean + spread * root.col(i);
    sp.points.col(1 + n + i) = b.mean - spread * root.col(i);
  }
  const double wi = 1.0 / (2.0 * (n + p.lambda));
  sp.mean_weights = Vector::Constant(2 * n + 1, wi);
  sp.cov_weights = Vector::Constant(2 * n + 1, wi);
  sp.mean_weights[0] = p.lambda / (n + p.lambda);
  sp.cov_weights[0] = p.lambda / (n + p.lambda) + (1.0 - p.alpha * p.alpha + p.beta);
  return sp;
}

namespace detail {

struct UnscentedMoments {
  Matrix images;  // transformed sigma points, one per column
  Vector mean;
  Matrix cov;     // without additive noise
};

template <class Map>
UnscentedMoments unscented_transform(const SigmaPoints& sp, Map&& map) {
  UnscentedMoments out;
  const Vector first = map(Vector(sp.points.col(0)));
  out.images.resize(first.size(), sp.points.cols());
  out.images.col(0) = first;
  for (Eigen::Index i = 1; i < sp.points.cols(); ++i) out.images.col(i) = map(Vector(sp.points.col(i)));
  out.mean = out.images * sp.mean_weights;
  const Matrix centered = out.images.colwise() - out.mean;
  out.cov = centered * sp.cov_weights.asDiagonal() * centered.transpose();
  return out;
}

}  // namespace detail

inline GaussianBelief ukf_predict(const GaussianBelief& b, const StateSpaceModel& model, int t, const UkfParams& p) {
  const auto sp = ukf_sigma_points(b, p);
  const auto ut = detail::unscented_transform(sp, [&](const Vector& x) { return model.transition_mean(x, t); });
  GaussianBelief out{ut.mean, ut.cov + model.process_cov()};
  detail::check_mean(out.mean, t);
  out.cov = detail::checked_covariance(out.cov, t);
  return out;
}

inline GaussianBelief ukf_update(const GaussianBelief& prior, const StateSpaceModel& model, const Vector& y, int t,
                                 const UkfParams& p) {
  const auto sp = ukf_sigma_points(prior, p);
  const auto ut = detail::unscented_transform(sp, [&](const Vector& x) { return model.measurement_mean(x, t); });
  const Matrix s = ut.cov + model.measurement_cov();
  const Matrix x_centered = sp.points.colwise() - prior.mean;
  const Matrix y_centered = ut.images.colwise() - ut.mean;
  const Matrix cross = x_centered * sp.cov_weights.asDiagonal() * y_centered.transpose();
  const Matrix gain = spd_solve(s, cross.transpose()).transpose();
  GaussianBelief post{prior.mean + gain * (y - ut.mean), prior.cov - gain * s * gain.transpose()};
  detail::check_mean(post.mean, t);
  post.cov = detail::checked_covariance(post.cov, t);
  return post;
}

inline GaussianBelief ukf_step(const GaussianBelief& b, const StateSpaceModel& model, const Vector& y, int t,
                               const UkfParams& p) {
  return ukf_update(ukf_predict(b, model, t, p), model, y, t, p);
}

/// Weighted particle approximation; particles are stored one per column.
struct ParticleSet {
  Matrix particles;
  Vector weights;

  Eigen::Index size() const noexcept { return particles.cols(); }

  static ParticleSet from_prior(const StateSpaceModel& model, int n, Rng& rng) {
    if (n < 1) throw std::invalid_argument("ParticleSet: n must be >= 1");
    ParticleSet ps;
    ps.particles.resize(model.state_dim(), n);
    for (int i = 0; i < n; ++i) ps.particles.col(i) = model.sample_initial(rng);
    ps.weights = Vector::Constant(n, 1.0 / n);
    return ps;
  }
};

/// Normalizes log-weights as exp(l_i - max_j l_j) / sum. Returns false (and
/// uniform weights) when every weight underflows or is non-finite.
inline bool normalize_log_weights(const Vector& log_weights, Vector& weights) {
  const auto n = log_weights.size();
  double top = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < n; ++i)
    if (std::isfinite(log_weights[i])) top = std::max(top, log_weights[i]);
  weights.resize(n);
  if (!std::isfinite(top)) {
    weights.setConstant(1.0 / n);
    return false;
  }
  for (Eigen::Index i = 0; i < n; ++i)
    weights[i] = std::isfinite(log_weights[i]) ? std::exp(log_weights[i] - top) : 0.0;
  const double total = weights.sum();
  if (!(total > 0.0) || !std::isfinite(total)) {
    weights.setConstant(1.0 / n);
    return false;
  }
  weights /= total;
  return true;
}

/// Multinomial resampling: n ancestor indices drawn i.i.d. from `weights`.
inline std::vector<Eigen::Index> multinomial_resample(const Vector& weights, Rng& rng) {
  const auto n = weights.size();
  std::vector<double> cdf(static_cast<std::size_t>(n));
  double run = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) cdf[i] = (run += weights[i]);
  std::uniform_real_distribution<double> unif(0.0, run);
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  for (auto& k : idx) {
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), unif(rng));
    k = std::min<Eigen::Index>(static_cast<Eigen::Index>(it - cdf.begin()), n - 1);
  }
  return idx;
}

struct PfStepResult {
  ParticleSet particles;   // resampled, uniform weights
  Vector estimate;         // weighted mean before resampling
  Vector prediction;       // mean of the propagated particles
  bool weights_reset = false;
};

/// Bootstrap particle filter step: propagate through the transition, weight
/// by the likelihood in log space, estimate, then resample.
inline PfStepResult pf_step(const ParticleSet& ps, const StateSpaceModel& model, const Vector& y, int t, Rng& rng) {
  const auto n = ps.size();
  if (n < 1) throw std::invalid_argument("pf_step: empty particle set");
  PfStepResult out;
  Matrix moved(ps.particles.rows(), n);
  Vector log_w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    moved.col(i) = model.transition_sample(ps.particles.col(i), t, rng);
    const double prior_w = ps.weights[i];
    log_w[i] = prior_w > 0.0 ? std::log(prior_w) - model.neg_loglik(moved.col(i), y, t)
                             : -std::numeric_limits<double>::infinity();
  }
  Vector w;
  out.weights_reset = !normalize_log_weights(log_w, w);
  out.prediction = moved.rowwise().mean();
  out.estimate = moved * w;
  detail::check_mean(out.estimate, t);
  const auto ancestors = multinomial_resample(w, rng);
  out.particles.particles.resize(moved.rows(), n);
  for (Eigen::Index i = 0; i < n; ++i) out.particles.particles.col(i) = moved.col(ancestors[i]);
  out.particles.weights = Vector::Constant(n, 1.0 / n);
  return out;
}

/// Estimate sequence plus the number of steps whose weights had to be reset.
struct FilterRun : EstimateSequence {
  int flagged_steps = 0;
};

inline GaussianBelief initial_belief(const StateSpaceModel& model) { return {model.initial_mean(), model.initial_cov()}; }

inline FilterRun kf_run(const LinearGaussianModel& model, const std::vector<Vector>& ys) {
  FilterRun run;
  GaussianBelief b = initial_belief(model);
  for (std::size_t i = 0; i < ys.size(); ++i) {
    const int t = static_cast<int>(i) + 1;
    const auto prior = kf_predict(b, model.F(), model.process_cov());
    b = kf_update(prior, model.H(), model.measurement_cov(), ys[i], t);
    run.predictions.push_back(prior.mean);
    run.estimates.push_back(b.mean);
  }
  return run;
}

inline FilterRun ekf_run(const StateSpaceModel& model, const std::vector<Vector>& ys) {
  FilterRun run;
  GaussianBelief b = initial_belief(model);
  for (std::size_t i = 0; i < ys.size(); ++i) {
    const int t = static_cast<int>(i) + 1;
    const auto prior = ekf_predict(b, model, t);
    b = ekf_update(prior, model, ys[i], t);
    run.predictions.push_back(prior.mean);
    run.estimates.push_back(b.mean);
  }
  return run;
}

inline FilterRun iekf_run(const StateSpaceModel& model, const std::vector<Vector>& ys, int iterations) {
  FilterRun run;
  GaussianBelief b = initial_belief(model);
  for (std::size_t i = 0; i < ys.size(); ++i) {
    const int t = static_cast<int>(i) + 1;
    const auto prior = ekf_predict(b, model, t);
    b = iekf_update(prior, model, ys[i], t, iterations);
    run.predictions.push_back(prior.mean);
    run.estimates.push_back(b.mean);
  }
  return run;
}

inline FilterRun ukf_run(const StateSpaceModel& model, const std::vector<Vector>& ys, const UkfParams& p) {
  FilterRun run;
  GaussianBelief b = initial_belief(model);
  for (std::size_t i = 0; i < ys.size(); ++i) {
    const int t = static_cast<int>(i) + 1;
    const auto prior = ukf_predict(b, model, t, p);
    b = ukf_update(prior, model, ys[i], t, p);
    run.predictions.push_back(prior.mean);
    run.estimates.push_back(b.mean);
  }
  return run;
}

inline FilterRun ukf_run(const StateSpaceModel& model, const std::vector<Vector>& ys) {
  return ukf_run(model, ys, UkfParams::standard(model.state_dim()));
}

inline FilterRun pf_run(const StateSpaceModel& model, const std::vector<Vector>& ys, int n, Rng& rng) {
  FilterRun run;
  ParticleSet ps = ParticleSet::from_prior(model, n, rng);
  for (std::size_t i = 0; i < ys.size(); ++i) {
    const int t = static_cast<int>(i) + 1;
    auto step = pf_step(ps, model, ys[i], t, rng);
    run.flagged_steps += step.weights_reset ? 1 : 0;
    run.predictions.push_back(std::move(step.prediction));
    run.estimates.push_back(std::move(step.estimate));
    ps = std::move(step.particles);
  }
  return run;
}

}  // namespace imap

#endif  // IMAP_CLASSICAL_HPP_
