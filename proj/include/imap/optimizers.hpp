#ifndef IMAP_OPTIMIZERS_HPP_
#define IMAP_OPTIMIZERS_HPP_

#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>

#include "imap/linalg.hpp"

namespace imap {

enum class OptimizerKind { gd, adagrad, adadelta, rmsprop, adam };

inline std::string to_string(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::gd: return "gd";
    case OptimizerKind::adagrad: return "adagrad";
    case OptimizerKind::adadelta: return "adadelta";
    case OptimizerKind::rmsprop: return "rmsprop";
    case OptimizerKind::adam: return "adam";
  }
  return "?";
}

inline OptimizerKind parse_optimizer_kind(const std::string& s) {
  if (s == "gd" || s == "sgd") return OptimizerKind::gd;
  if (s == "adagrad") return OptimizerKind::adagrad;
  if (s == "adadelta") return OptimizerKind::adadelta;
  if (s == "rmsprop") return OptimizerKind::rmsprop;
  if (s == "adam") return OptimizerKind::adam;
  throw std::invalid_argument("unknown optimizer '" + s + "'");
}

/// Hyperparameters of one member of the optimizer family. `gamma` is the
/// decay of RMSprop and Adadelta; `beta1`/`beta2` are Adam's decays.
struct OptimizerSpec {
  OptimizerKind kind = OptimizerKind::gd;
  double learning_rate = 0.1;
  double gamma = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static OptimizerSpec gd(double eta) { return {OptimizerKind::gd, eta}; }
  static OptimizerSpec adagrad(double eta, double eps = 1e-8) {
    OptimizerSpec s{OptimizerKind::adagrad, eta};
    s.epsilon = eps;
    return s;
  }
  static OptimizerSpec rmsprop(double eta, double gamma, double eps = 1e-8) {
    OptimizerSpec s{OptimizerKind::rmsprop, eta};
    s.gamma = gamma;
    s.epsilon = eps;
    return s;
  }
  static OptimizerSpec adam(double eta, double beta1, double beta2, double eps = 1e-8) {
    OptimizerSpec s{OptimizerKind::adam, eta};
    s.beta1 = beta1;
    s.beta2 = beta2;
    s.epsilon = eps;
    return s;
  }
  static OptimizerSpec adadelta(double gamma, double eps = 1e-6) {
    OptimizerSpec s{OptimizerKind::adadelta, 1.0};
    s.gamma = gamma;
    s.epsilon = eps;
    return s;
  }

  void validate() const {
    const auto open_unit = [](double v) { return v > 0.0 && v < 1.0; };
    if (!(epsilon > 0.0)) throw std::invalid_argument("optimizer epsilon must be > 0");
    // GD accepts eta = 0, the "no update" member; Adadelta ignores eta.
    if (kind == OptimizerKind::gd) {
      if (!(learning_rate >= 0.0)) throw std::invalid_argument("GD learning rate must be >= 0");
    } else if (kind != OptimizerKind::adadelta && !(learning_rate > 0.0)) {
      throw std::invalid_argument("optimizer learning rate must be > 0");
    }
    if ((kind == OptimizerKind::rmsprop || kind == OptimizerKind::adadelta) && !open_unit(gamma))
      throw std::invalid_argument("optimizer gamma must lie in (0, 1)");
    if (kind == OptimizerKind::adam && (!open_unit(beta1) || !open_unit(beta2)))
      throw std::invalid_argument("Adam beta1/beta2 must lie in (0, 1)");
  }

  /// Human-readable parameter string used in result tables.
  std::string describe() const {
    std::ostringstream os;
    os << to_string(kind);
    switch (kind) {
      case OptimizerKind::gd:
      case OptimizerKind::adagrad: os << "(eta=" << learning_rate << ")"; break;
      case OptimizerKind::rmsprop: os << "(eta=" << learning_rate << ";gamma=" << gamma << ")"; break;
      case OptimizerKind::adam: os << "(eta=" << learning_rate << ";beta1=" << beta1 << ";beta2=" << beta2 << ")"; break;
      case OptimizerKind::adadelta: os << "(gamma=" << gamma << ")"; break;
    }
    return os.str();
  }
};

/// Accumulators of one optimizer over a gradient history. `step()` returns
/// the additive update (descent sign included): the caller applies m += delta.
class OptimizerState {
 public:
  OptimizerState(const OptimizerSpec& spec, Eigen::Index dim) : spec_(spec) {
    spec_.validate();
    if (dim < 1) throw std::invalid_argument("optimizer dimension must be >= 1");
    dim_ = dim;
    switch (spec_.kind) {
      case OptimizerKind::gd: break;
      case OptimizerKind::adam: first_moment_ = Vector::Zero(dim); [[fallthrough]];
      case OptimizerKind::adagrad:
      case OptimizerKind::rmsprop: second_moment_ = Vector::Zero(dim); break;
      case OptimizerKind::adadelta:
        second_moment_ = Vector::Zero(dim);
        delta_accum_ = Vector::Zero(dim);
        break;
    }
  }

  Vector step(const Vector& g) {
    if (g.size() != dim_) throw std::invalid_argument("optimizer gradient dimension mismatch");
    const double eps = spec_.epsilon;
    Vector delta;
    switch (spec_.kind) {
      case OptimizerKind::gd:
        delta = -spec_.learning_rate * g;
        break;
      case OptimizerKind::adagrad:
        second_moment_.array() += g.array().square();
        delta = -spec_.learning_rate * (g.array() / (second_moment_.array().sqrt() + eps)).matrix();
        break;
      case OptimizerKind::rmsprop:
        second_moment_ = spec_.gamma * second_moment_ + (1.0 - spec_.gamma) * g.cwiseAbs2();
        delta = -spec_.learning_rate * (g.array() / (second_moment_.array().sqrt() + eps)).matrix();
        break;
      case OptimizerKind::adam: {
        first_moment_ = spec_.beta1 * first_moment_ + (1.0 - spec_.beta1) * g;
        second_moment_ = spec_.beta2 * second_moment_ + (1.0 - spec_.beta2) * g.cwiseAbs2();
        const double k1 = static_cast<double>(step_count_ + 1);
        const double c1 = 1.0 - std::pow(spec_.beta1, k1);
        const double c2 = 1.0 - std::pow(spec_.beta2, k1);
        const Eigen::ArrayXd m_hat = first_moment_.array() / c1;
        const Eigen::ArrayXd v_hat = second_moment_.array() / c2;
        delta = -spec_.learning_rate * (m_hat / (v_hat.sqrt() + eps)).matrix();
        break;
      }
      case OptimizerKind::adadelta:
        second_moment_ = spec_.gamma * second_moment_ + (1.0 - spec_.gamma) * g.cwiseAbs2();
        delta = -(((delta_accum_.array() + eps).sqrt() / (second_moment_.array() + eps).sqrt()) * g.array()).matrix();
        delta_accum_ = spec_.gamma * delta_accum_ + (1.0 - spec_.gamma) * delta.cwiseAbs2();
        break;
    }
    ++step_count_;
    return delta;
  }

  const OptimizerSpec& spec() const noexcept { return spec_; }
  std::int64_t step_count() const noexcept { return step_count_; }
  Eigen::Index dim() const noexcept { return dim_; }
  const Vector& first_moment() const noexcept { return first_moment_; }
  const Vector& second_moment() const noexcept { return second_moment_; }
  const Vector& delta_accum() const noexcept { return delta_accum_; }

 private:
  OptimizerSpec spec_;
  Eigen::Index dim_ = 0;
  std::int64_t step_count_ = 0;
  Vector first_moment_;
  Vector second_moment_;
  Vector delta_accum_;
};

}  // namespace imap

#endif  // IMAP_OPTIMIZERS_HPP_
