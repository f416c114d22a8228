#ifndef IMAP_WEIGHTSPACE_HPP_
#define IMAP_WEIGHTSPACE_HPP_

#include <algorithm>
#include <cstdint>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "imap/classical.hpp"
#include "imap/imap_filter.hpp"
#include "imap/linalg.hpp"
#include "imap/optimizers.hpp"
#include "imap/parallel.hpp"

namespace imap {

/// Two-layer perceptron in -> hidden -> 1, rectifier hidden units and a
/// sigmoid output. Parameters are flattened as [W1 (column-major), b1, W2, b2].
struct MlpModel {
  int inputs = 2;
  int hidden = 16;

  int dim() const noexcept { return (inputs + 1) * hidden + (hidden + 1); }

  struct Params {
    Matrix w1;  // hidden x inputs
    Vector b1;  // hidden
    Vector w2;  // hidden (single output row)
    double b2 = 0.0;
  };

  void check(const Vector& w) const {
    if (w.size() != dim()) throw std::invalid_argument("MlpModel: parameter vector has wrong dimension");
  }

  Params unflatten(const Vector& w) const {
    check(w);
    Params p;
    p.w1 = Eigen::Map<const Matrix>(w.data(), hidden, inputs);
    Eigen::Index at = static_cast<Eigen::Index>(hidden) * inputs;
    p.b1 = w.segment(at, hidden);
    at += hidden;
    p.w2 = w.segment(at, hidden);
    at += hidden;
    p.b2 = w[at];
    return p;
  }

  Vector flatten(const Params& p) const {
    Vector w(dim());
    Eigen::Index at = static_cast<Eigen::Index>(hidden) * inputs;
    w.head(at) = Eigen::Map<const Vector>(p.w1.data(), at);
    w.segment(at, hidden) = p.b1;
    at += hidden;
    w.segment(at, hidden) = p.w2;
    at += hidden;
    w[at] = p.b2;
    return w;
  }

  /// Output logits for each row of X.
  Vector logits(const Vector& w, const Matrix& x) const {
    const Params p = unflatten(w);
    const Matrix a1 = ((x * p.w1.transpose()).rowwise() + p.b1.transpose()).cwiseMax(0.0);
    return (a1 * p.w2).array() + p.b2;
  }

  /// Class-1 probabilities for each row of X.
  Vector forward(const Vector& w, const Matrix& x) const {
    return logits(w, x).unaryExpr([](double z) { return 1.0 / (1.0 + std::exp(-z)); });
  }

  /// Mean binary cross-entropy and its gradient by reverse accumulation. The
  /// loss is evaluated from logits as softplus(z) - y z, which never takes
  /// log(0), so no probability clamp is needed and dL/dlogit = (p - y) / n
  /// is exact everywhere.
  std::pair<double, Vector> loss_grad(const Vector& w, const Matrix& x, const Vector& labels) const {
    if (x.rows() != labels.size() || x.rows() == 0) throw std::invalid_argument("MlpModel: batch/label mismatch");
    const Params p = unflatten(w);
    const double n = static_cast<double>(x.rows());
    const Matrix z1 = (x * p.w1.transpose()).rowwise() + p.b1.transpose();
    const Matrix a1 = z1.cwiseMax(0.0);
    const Vector logit = (a1 * p.w2).array() + p.b2;
    double loss = 0.0;
    Vector dlogit(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const double z = logit[i];
      const double softplus = std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
      loss += softplus - labels[i] * z;
      dlogit[i] = (1.0 / (1.0 + std::exp(-z)) - labels[i]) / n;
    }
    Params g;
    g.w2 = a1.transpose() * dlogit;
    g.b2 = dlogit.sum();
    const Matrix dz1 = (dlogit * p.w2.transpose()).cwiseProduct((z1.array() > 0.0).cast<double>().matrix());
    g.w1 = dz1.transpose() * x;
    g.b1 = dz1.colwise().sum().transpose();
    return {loss / n, flatten(g)};
  }

  double accuracy(const Vector& w, const Matrix& x, const Vector& labels) const {
    const Vector prob = forward(w, x);
    int hits = 0;
    for (Eigen::Index i = 0; i < prob.size(); ++i) hits += ((prob[i] >= 0.5) == (labels[i] >= 0.5)) ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(prob.size());
  }
};

inline double accuracy_from_probs(const Vector& prob, const Vector& labels) {
  int hits = 0;
  for (Eigen::Index i = 0; i < prob.size(); ++i) hits += ((prob[i] >= 0.5) == (labels[i] >= 0.5)) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(prob.size());
}

/// Two unit-variance Gaussian clusters at radius * (cos theta_t, sin theta_t)
/// and its antipode, theta_t = omega * t.
struct DriftTask {
  double omega = 2.0 * std::numbers::pi / 80.0;
  double radius = 1.5;
  int train_size = 32;
  int test_size = 100;
  int val_size = 16;
  int horizon = 80;

  void validate() const {
    if (!(radius >= 0.0)) throw std::invalid_argument("DriftTask: radius must be >= 0");
    if (train_size < 1 || test_size < 1 || val_size < 1 || horizon < 2)
      throw std::invalid_argument("DriftTask: sizes must be positive and horizon >= 2");
  }
};

struct LabeledBatch {
  Matrix x;
  Vector y;
};

struct DriftBatch {
  LabeledBatch train, test, val;
};

namespace detail {

inline LabeledBatch draw_clusters(const DriftTask& task, int t, int n, Rng& rng) {
  const double theta = task.omega * t;
  const Eigen::RowVector2d center(task.radius * std::cos(theta), task.radius * std::sin(theta));
  std::bernoulli_distribution coin(0.5);
  std::normal_distribution<double> normal(0.0, 1.0);
  LabeledBatch b{Matrix(n, 2), Vector(n)};
  for (int i = 0; i < n; ++i) {
    const bool positive = coin(rng);
    b.y[i] = positive ? 1.0 : 0.0;
    const Eigen::RowVector2d c = positive ? center : Eigen::RowVector2d(-center);
    b.x(i, 0) = c[0] + normal(rng);
    b.x(i, 1) = c[1] + normal(rng);
  }
  return b;
}

}  // namespace detail

inline DriftBatch drift_task_sample(const DriftTask& task, int t, Rng& rng) {
  task.validate();
  if (t < 0 || t >= task.horizon) throw std::invalid_argument("drift_task_sample: t out of range");
  DriftBatch b;
  b.train = detail::draw_clusters(task, t, task.train_size, rng);
  b.test = detail::draw_clusters(task, t, task.test_size, rng);
  b.val = detail::draw_clusters(task, t, task.val_size, rng);
  return b;
}

/// Every step's splits, drawn once so all strategies see the same data.
inline std::vector<DriftBatch> drift_task_generate(const DriftTask& task, Rng& rng) {
  std::vector<DriftBatch> data;
  data.reserve(task.horizon);
  for (int t = 0; t < task.horizon; ++t) data.push_back(drift_task_sample(task, t, rng));
  return data;
}

/// Standard Adam (eta = 1e-3, beta1 = 0.9, beta2 = 0.999).
inline OptimizerSpec adam_standard() { return OptimizerSpec::adam(1e-3, 0.9, 0.999); }

struct VkfConfig {
  double sigma2 = 0.01;
  OptimizerSpec inner = adam_standard();
  int steps = 1000;

  void validate() const {
    if (!(sigma2 > 0.0)) throw std::invalid_argument("VkfConfig: sigma2 must be > 0");
    if (steps < 1) throw std::invalid_argument("VkfConfig: steps must be >= 1");
    inner.validate();
  }
};

/// Approximate argmin of loss(w) + |w - w_prev|^2 / (2 n sigma^2), started at
/// w_prev, for any loss given as w -> (value, gradient).
template <class LossGrad>
Vector vkf_update(const Vector& w_prev, LossGrad&& loss_grad, double n, const VkfConfig& cfg, int step = 0) {
  cfg.validate();
  const double anchor = 1.0 / (n * cfg.sigma2);
  auto objective = [&](const Vector& w) -> std::pair<double, Vector> {
    auto [loss, grad] = loss_grad(w);
    const Vector diff = w - w_prev;
    return {loss + 0.5 * anchor * diff.squaredNorm(), grad + anchor * diff};
  };
  return imap_update(w_prev, objective, ImapConfig{cfg.inner, cfg.steps, true}, nullptr, step);
}

/// VKF update on one training split: mean BCE anchored at w_prev.
inline Vector vkf_step(const Vector& w_prev, const LabeledBatch& batch, const VkfConfig& cfg, const MlpModel& model,
                       int step = 0) {
  return vkf_update(
      w_prev, [&](const Vector& w) { return model.loss_grad(w, batch.x, batch.y); },
      static_cast<double>(batch.x.rows()), cfg, step);
}

enum class StrategyKind { static_weights, direct_fit, imap, pf, vkf };

inline std::string to_string(StrategyKind k) {
  switch (k) {
    case StrategyKind::static_weights: return "static";
    case StrategyKind::direct_fit: return "direct_fit";
    case StrategyKind::imap: return "imap";
    case StrategyKind::pf: return "pf";
    case StrategyKind::vkf: return "vkf";
  }
  return "?";
}

/// One concrete adaptation strategy. `steps` is K for imap (1000 for direct
/// fit); `sigma2` is the random-walk variance for pf and vkf.
struct Strategy {
  StrategyKind kind = StrategyKind::static_weights;
  int steps = 1;
  double sigma2 = 0.01;
  int particles = 1000;
  OptimizerSpec optimizer = adam_standard();

  static Strategy static_weights() { return {}; }
  static Strategy direct_fit() { return {StrategyKind::direct_fit, 1000}; }
  static Strategy imap(int k) { return {StrategyKind::imap, k}; }
  static Strategy pf(double sigma2, int n = 1000) { return {StrategyKind::pf, 1, sigma2, n}; }
  static Strategy vkf(double sigma2) { return {StrategyKind::vkf, 1000, sigma2}; }

  std::string describe() const {
    switch (kind) {
      case StrategyKind::static_weights: return "static";
      case StrategyKind::direct_fit: return "direct_fit(K=" + std::to_string(steps) + ")";
      case StrategyKind::imap: return "imap(K=" + std::to_string(steps) + ")";
      case StrategyKind::pf: return "pf(n=" + std::to_string(particles) + ";sigma2=" + format_number(sigma2) + ")";
      case StrategyKind::vkf: return "vkf(sigma2=" + format_number(sigma2) + ")";
    }
    return "?";
  }
};

inline const std::vector<int>& imap_step_grid() {
  static const std::vector<int> grid{1, 10, 25, 50, 100};
  return grid;
}

inline const std::vector<double>& sigma2_grid() {
  static const std::vector<double> grid{0.1, 0.05, 0.01, 0.005, 0.001};
  return grid;
}

/// Per-step test and validation accuracies of one strategy.
struct AdaptationResult {
  std::string label;
  std::vector<double> test_accuracy;
  std::vector<double> val_accuracy;

  // Mean validation accuracy over the first half of the horizon.
  double selection_score() const {
    const std::size_t half = val_accuracy.size() / 2;
    double s = 0.0;
    for (std::size_t t = 0; t < half; ++t) s += val_accuracy[t];
    return half ? s / static_cast<double>(half) : 0.0;
  }

  // Mean test accuracy over the second half of the horizon (never used for selection).
  double heldout_score() const {
    const std::size_t half = test_accuracy.size() / 2;
    double s = 0.0;
    for (std::size_t t = half; t < test_accuracy.size(); ++t) s += test_accuracy[t];
    return test_accuracy.size() > half ? s / static_cast<double>(test_accuracy.size() - half) : 0.0;
  }

  double mean_test_accuracy() const {
    double s = 0.0;
    for (double a : test_accuracy) s += a;
    return test_accuracy.empty() ? 0.0 : s / static_cast<double>(test_accuracy.size());
  }
};

/// Random initialization scaled by 1/sqrt(fan_in) followed by `steps` plain
/// gradient steps on the t = 0 training split.
inline Vector pretrain(const MlpModel& model, const LabeledBatch& batch, Rng& rng, int steps = 200,
                       double learning_rate = 0.5) {
  MlpModel::Params p;
  std::normal_distribution<double> normal(0.0, 1.0);
  p.w1 = Matrix::NullaryExpr(model.hidden, model.inputs, [&] { return normal(rng) / std::sqrt(model.inputs); });
  p.b1 = Vector::Zero(model.hidden);
  p.w2 = Vector::NullaryExpr(model.hidden, [&] { return normal(rng) / std::sqrt(model.hidden); });
  p.b2 = 0.0;
  const Vector w0 = model.flatten(p);
  auto loss = [&](const Vector& w) { return model.loss_grad(w, batch.x, batch.y); };
  return imap_update(w0, loss, ImapConfig{OptimizerSpec::gd(learning_rate), steps, true}, nullptr, 0);
}

/// Runs one strategy over the task horizon. At t = 0 every strategy holds the
/// pretrained weights; for t >= 1 it adapts on that step's training split and
/// is then scored on the step's test and validation splits.
inline AdaptationResult run_adaptation(const Strategy& s, const std::vector<DriftBatch>& data, const MlpModel& model,
                                       const Vector& w_pretrained, Rng& rng) {
  if (data.empty()) throw std::invalid_argument("run_adaptation: empty task data");
  AdaptationResult out;
  out.label = s.describe();
  if (s.kind == StrategyKind::pf) {
    if (s.particles < 1 || !(s.sigma2 > 0.0)) throw std::invalid_argument("run_adaptation: invalid PF settings");
    const auto n = s.particles;
    const double scale = std::sqrt(s.sigma2);
    Matrix particles = w_pretrained.replicate(1, n);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t t = 0; t < data.size(); ++t) {
      Vector weights = Vector::Constant(n, 1.0 / n);
      if (t > 0) {
        Vector log_w(n);
        for (int i = 0; i < n; ++i) {
          for (Eigen::Index j = 0; j < particles.rows(); ++j) particles(j, i) += scale * normal(rng);
          const double mean_bce = model.loss_grad(particles.col(i), data[t].train.x, data[t].train.y).first;
          log_w[i] = -mean_bce * static_cast<double>(data[t].train.x.rows());
        }
        normalize_log_weights(log_w, weights);
      }
      // Posterior predictive: particle probabilities averaged under the weights.
      Vector p_test = Vector::Zero(data[t].test.x.rows());
      Vector p_val = Vector::Zero(data[t].val.x.rows());
      for (int i = 0; i < n; ++i) {
        if (weights[i] == 0.0) continue;
        p_test += weights[i] * model.forward(particles.col(i), data[t].test.x);
        p_val += weights[i] * model.forward(particles.col(i), data[t].val.x);
      }
      out.test_accuracy.push_back(accuracy_from_probs(p_test, data[t].test.y));
      out.val_accuracy.push_back(accuracy_from_probs(p_val, data[t].val.y));
      if (t > 0) {
        const auto ancestors = multinomial_resample(weights, rng);
        Matrix next(particles.rows(), n);
        for (int i = 0; i < n; ++i) next.col(i) = particles.col(ancestors[i]);
        particles = std::move(next);
      }
    }
    return out;
  }

  Vector w = w_pretrained;
  for (std::size_t t = 0; t < data.size(); ++t) {
    const int step = static_cast<int>(t);
    if (t > 0) {
      const auto& train = data[t].train;
      switch (s.kind) {
        case StrategyKind::static_weights: break;
        case StrategyKind::direct_fit:
        case StrategyKind::imap: {
          auto loss = [&](const Vector& v) { return model.loss_grad(v, train.x, train.y); };
          w = imap_update(w, loss, ImapConfig{s.optimizer, s.steps, true}, nullptr, step);
          break;
        }
        case StrategyKind::vkf: w = vkf_step(w, train, VkfConfig{s.sigma2, s.optimizer, s.steps}, model, step); break;
        case StrategyKind::pf: break;
      }
    }
    out.test_accuracy.push_back(model.accuracy(w, data[t].test.x, data[t].test.y));
    out.val_accuracy.push_back(model.accuracy(w, data[t].val.x, data[t].val.y));
  }
  return out;
}

/// Runs every candidate and returns the one with the best first-half
/// validation accuracy (ties keep the earlier candidate).
inline std::pair<Strategy, AdaptationResult> select_strategy(const std::vector<Strategy>& candidates,
                                                             const std::vector<DriftBatch>& data,
                                                             const MlpModel& model, const Vector& w_pretrained,
                                                             Rng& rng) {
  if (candidates.empty()) throw std::invalid_argument("select_strategy: no candidates");
  std::pair<Strategy, AdaptationResult> best;
  double best_score = -std::numeric_limits<double>::infinity();
  for (const auto& c : candidates) {
    auto r = run_adaptation(c, data, model, w_pretrained, rng);
    const double score = r.selection_score();
    if (score > best_score) {
      best_score = score;
      best = {c, std::move(r)};
    }
  }
  return best;
}

struct DriftBenchOptions {
  MlpModel model;
  bool include_pf = true;
  int particles = 1000;
  int threads = 1;
};

/// Selected result of each strategy family on each seed. Families are
/// static, direct_fit, imap (K chosen on validation), pf and vkf (sigma^2
/// chosen on validation).
struct DriftBenchResult {
  std::vector<std::string> families;
  std::vector<std::vector<AdaptationResult>> runs;  // [family][seed]
};

inline DriftBenchResult run_drift_benchmark(const DriftTask& task, const std::vector<std::uint64_t>& seeds,
                                            const DriftBenchOptions& opt = {}) {
  task.validate();
  DriftBenchResult out;
  out.families = {"static", "direct_fit", "imap", "vkf"};
  if (opt.include_pf) out.families.push_back("pf");
  out.runs.assign(out.families.size(), std::vector<AdaptationResult>(seeds.size()));
  parallel_for(seeds.size(), opt.threads, [&](std::size_t i) {
    Rng data_rng = make_rng(seeds[i], 0);
    Rng init_rng = make_rng(seeds[i], 1);
    Rng run_rng = make_rng(seeds[i], 2);
    const auto data = drift_task_generate(task, data_rng);
    const Vector w0 = pretrain(opt.model, data.front().train, init_rng);
    std::vector<Strategy> imaps, vkfs, pfs;
    for (int k : imap_step_grid()) imaps.push_back(Strategy::imap(k));
    for (double s2 : sigma2_grid()) {
      vkfs.push_back(Strategy::vkf(s2));
      pfs.push_back(Strategy::pf(s2, opt.particles));
    }
    out.runs[0][i] = run_adaptation(Strategy::static_weights(), data, opt.model, w0, run_rng);
    out.runs[1][i] = run_adaptation(Strategy::direct_fit(), data, opt.model, w0, run_rng);
    out.runs[2][i] = select_strategy(imaps, data, opt.model, w0, run_rng).second;
    out.runs[3][i] = select_strategy(vkfs, data, opt.model, w0, run_rng).second;
    if (opt.include_pf) out.runs[4][i] = select_strategy(pfs, data, opt.model, w0, run_rng).second;
  });
  return out;
}

}  // namespace imap

#endif  // IMAP_WEIGHTSPACE_HPP_
