#ifndef IMAP_IMAP_FILTER_HPP_
#define IMAP_IMAP_FILTER_HPP_

#include <cmath>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "imap/linalg.hpp"
#include "imap/models.hpp"
#include "imap/optimizers.hpp"
#include "imap/trajectory.hpp"

namespace imap {

/// Optimizer, step budget K, and whether optimizer accumulators restart at
/// every timestep.
struct ImapConfig {
  OptimizerSpec optimizer;
  int steps = 1;
  bool reset_optimizer_each_t = true;

  void validate() const {
    optimizer.validate();
    if (steps < 1) throw std::invalid_argument("ImapConfig.steps (K) must be >= 1");
  }
};

/// Predictions mu^-_t and estimates mu-hat_t for t = 1..T.
using ImapRun = EstimateSequence;

/// Which measurement covariance the IMAP loss uses. `unit` is the
/// mean-squared-error form (R = I); `model` uses the model's own R.
enum class LikelihoodNoise { unit, model };

/// Delta-method predict step: mu^-_t = f_t(mu-hat_{t-1}). No covariance is formed.
inline Vector imap_predict(const StateSpaceModel& model, const Vector& mu_prev, int t) {
  if (mu_prev.size() != model.state_dim()) throw std::invalid_argument("imap_predict: state dimension mismatch");
  return model.transition_mean(mu_prev, t);
}

/// K optimizer steps on a loss from m^(0) = mu_minus. `loss_grad(x)` returns
/// (loss, gradient). When `carried` is given it is used (and advanced) instead
/// of a freshly initialized optimizer. Non-finite values abort with a
/// DivergenceError naming `step` and the offending iterate.
template <class LossGrad>
Vector imap_update(const Vector& mu_minus, LossGrad&& loss_grad, const ImapConfig& cfg,
                   OptimizerState* carried = nullptr, int step = 0) {
  cfg.validate();
  std::optional<OptimizerState> fresh;
  OptimizerState* opt = carried;
  if (opt == nullptr) {
    fresh.emplace(cfg.optimizer, mu_minus.size());
    opt = &*fresh;
  }
  Vector m = mu_minus;
  for (int k = 0; k < cfg.steps; ++k) {
    const auto [loss, grad] = loss_grad(static_cast<const Vector&>(m));
    if (!std::isfinite(loss) || !grad.allFinite()) throw DivergenceError("non-finite loss or gradient", step, k);
    m += opt->step(grad);
    if (!m.allFinite()) throw DivergenceError("non-finite iterate", step, k + 1);
  }
  return m;
}

/// Gaussian negative log-likelihood of observation y at time t, either with
/// the model's R or with R = I.
inline auto make_gaussian_loss(const StateSpaceModel& model, const Vector& y, int t, LikelihoodNoise noise) {
  return [&model, y, t, noise](const Vector& x) -> std::pair<double, Vector> {
    const Vector residual = y - model.measurement_mean(x, t);
    const Matrix hjac = model.jacobian_H(x, t);
    if (noise == LikelihoodNoise::unit) return {0.5 * residual.squaredNorm(), -hjac.transpose() * residual};
    const Vector weighted = model.measurement_noise().whiten_solve(residual);
    return {0.5 * residual.dot(weighted), -hjac.transpose() * weighted};
  };
}

/// Alternates imap_predict and imap_update over t = 1..T, with the loss for
/// each step produced by `make_loss(t, y_t)`.
template <class LossFactory>
ImapRun imap_filter_with_loss(const StateSpaceModel& model, const Vector& mu0, const std::vector<Vector>& observations,
                              const ImapConfig& cfg, LossFactory&& make_loss) {
  cfg.validate();
  if (observations.empty()) throw std::invalid_argument("imap_filter: observations must be nonempty");
  if (mu0.size() != model.state_dim()) throw std::invalid_argument("imap_filter: initial state dimension mismatch");
  ImapRun run;
  run.predictions.reserve(observations.size());
  run.estimates.reserve(observations.size());
  std::optional<OptimizerState> carried;
  if (!cfg.reset_optimizer_each_t) carried.emplace(cfg.optimizer, mu0.size());
  Vector mu = mu0;
  for (std::size_t i = 0; i < observations.size(); ++i) {
    const int t = static_cast<int>(i) + 1;
    const Vector mu_minus = imap_predict(model, mu, t);
    if (!mu_minus.allFinite()) throw DivergenceError("non-finite prediction", t);
    mu = imap_update(mu_minus, make_loss(t, observations[i]), cfg, carried ? &*carried : nullptr, t);
    run.predictions.push_back(mu_minus);
    run.estimates.push_back(mu);
  }
  return run;
}

inline ImapRun imap_filter(const StateSpaceModel& model, const Vector& mu0, const std::vector<Vector>& observations,
                           const ImapConfig& cfg, LikelihoodNoise noise = LikelihoodNoise::unit) {
  return imap_filter_with_loss(model, mu0, observations, cfg, [&model, noise](int t, const Vector& y) {
    return make_gaussian_loss(model, y, t, noise);
  });
}

}  // namespace imap

#endif  // IMAP_IMAP_FILTER_HPP_
