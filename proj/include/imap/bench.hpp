#ifndef IMAP_BENCH_HPP_
#define IMAP_BENCH_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "imap/classical.hpp"
#include "imap/imap_filter.hpp"
#include "imap/models.hpp"
#include "imap/optimizers.hpp"
#include "imap/parallel.hpp"
#include "imap/trajectory.hpp"

namespace imap {

/// sqrt of the mean squared error over all timesteps and state dimensions.
inline double rmse(const std::vector<Vector>& estimates, const std::vector<Vector>& truth) {
  if (estimates.size() != truth.size() || estimates.empty())
    throw std::invalid_argument("rmse: sequences must be nonempty and of equal length");
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t t = 0; t < truth.size(); ++t) {
    if (estimates[t].size() != truth[t].size()) throw std::invalid_argument("rmse: dimension mismatch");
    total += (estimates[t] - truth[t]).squaredNorm();
    count += static_cast<std::size_t>(truth[t].size());
  }
  return std::sqrt(total / static_cast<double>(count));
}

struct Interval {
  double mean = 0.0;
  double half_width = 0.0;
};

/// Normal-approximation 95% interval: mean and 1.96 s / sqrt(n), s the sample std.
inline Interval confidence_interval(const std::vector<double>& values) {
  if (values.size() < 2) throw std::invalid_argument("confidence_interval: need at least 2 values");
  const double n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, 1.96 * std::sqrt(ss / (n - 1.0)) / std::sqrt(n)};
}

struct RmseSummary {
  std::vector<double> per_run;  // after divergence replacement
  std::vector<bool> diverged;
  double mean = 0.0;
  double half_width = 0.0;
  int diverged_count = 0;
};

/// Diverged (non-finite) runs are replaced by the largest finite RMSE and
/// counted; with `replace_diverged` off they are excluded from the statistics.
inline RmseSummary summarize_rmse(const std::vector<double>& raw, bool replace_diverged = true) {
  RmseSummary s;
  double worst = -std::numeric_limits<double>::infinity();
  for (double v : raw)
    if (std::isfinite(v)) worst = std::max(worst, v);
  std::vector<double> used;
  for (double v : raw) {
    const bool bad = !std::isfinite(v);
    s.diverged.push_back(bad);
    s.diverged_count += bad ? 1 : 0;
    const double kept = bad ? (std::isfinite(worst) ? worst : std::numeric_limits<double>::quiet_NaN()) : v;
    s.per_run.push_back(kept);
    if (!bad || replace_diverged) used.push_back(kept);
  }
  if (used.size() >= 2) {
    const auto ci = confidence_interval(used);
    s.mean = ci.mean;
    s.half_width = ci.half_width;
  } else if (used.size() == 1) {
    s.mean = used.front();
    s.half_width = 0.0;
  } else {
    s.mean = s.half_width = std::numeric_limits<double>::quiet_NaN();
  }
  return s;
}

enum class SystemKind { linear, ungm, lorenz };

struct SystemConfig {
  SystemKind kind = SystemKind::ungm;
  int steps = 200;
  // ungm; with noise_as_std the q and r parameters are standard deviations
  double q = 3.0;
  double r = 2.0;
  double dt = 0.1;
  bool noise_as_std = false;
  // lorenz
  LorenzConfig lorenz;
  LorenzDynamics dynamics = LorenzDynamics::rk4;
  // linear
  Matrix f, qm, h, rm, sigma0;
  Vector mu0;

  void validate() const {
    if (steps < 1) throw std::invalid_argument("system: steps (T) must be >= 1");
    if (kind == SystemKind::lorenz) lorenz.validate();
  }

  double ungm_q_var() const { return noise_as_std ? q * q : q; }
  double ungm_r_var() const { return noise_as_std ? r * r : r; }
};

enum class MethodKind { kf, ekf, iekf, ukf, pf, imap };

inline std::string to_string(MethodKind k) {
  switch (k) {
    case MethodKind::kf: return "kf";
    case MethodKind::ekf: return "ekf";
    case MethodKind::iekf: return "iekf";
    case MethodKind::ukf: return "ukf";
    case MethodKind::pf: return "pf";
    case MethodKind::imap: return "imap";
  }
  return "?";
}

inline MethodKind parse_method_kind(const std::string& s) {
  for (auto k : {MethodKind::kf, MethodKind::ekf, MethodKind::iekf, MethodKind::ukf, MethodKind::pf, MethodKind::imap})
    if (to_string(k) == s) return k;
  throw std::invalid_argument("unknown method '" + s + "'");
}

/// Filter choice plus its hyperparameters. `q_alpha` overrides the Lorenz
/// filter's diffusion scale; `q_scale` multiplies Q for the other systems.
struct MethodConfig {
  MethodKind kind = MethodKind::ukf;
  int iterations = 5;
  int particles = 1000;
  ImapConfig imap;
  LikelihoodNoise imap_noise = LikelihoodNoise::unit;
  std::optional<double> q_alpha;
  double q_scale = 1.0;
  std::optional<LorenzDynamics> dynamics;  // overrides the system's filter dynamics

  std::string name() const { return to_string(kind); }

  std::string describe() const {
    std::string s;
    auto add = [&s](const std::string& part) { s += (s.empty() ? "" : ";") + part; };
    switch (kind) {
      case MethodKind::iekf: add("K=" + std::to_string(iterations)); break;
      case MethodKind::pf: add("n=" + std::to_string(particles)); break;
      case MethodKind::imap:
        add("K=" + std::to_string(imap.steps));
        add(imap.optimizer.describe());
        if (!imap.reset_optimizer_each_t) add("carry");
        if (imap_noise == LikelihoodNoise::model) add("likelihood=model");
        break;
      default: break;
    }
    if (q_alpha) add("q_alpha=" + format_number(*q_alpha));
    if (q_scale != 1.0) add("q_scale=" + format_number(q_scale));
    if (dynamics) add("dynamics=" + to_string(*dynamics));
    return s.empty() ? "default" : s;
  }

  // Tie-break key for grid selection: fewer steps, then smaller step size.
  std::pair<int, double> tie_key() const {
    switch (kind) {
      case MethodKind::imap: return {imap.steps, imap.optimizer.learning_rate};
      case MethodKind::iekf: return {iterations, q_alpha.value_or(0.0)};
      default: return {0, q_alpha.value_or(q_scale)};
    }
  }
};

/// Model that generates ground truth for a system.
inline std::unique_ptr<StateSpaceModel> make_truth_model(const SystemConfig& sys) {
  sys.validate();
  switch (sys.kind) {
    case SystemKind::ungm: return std::make_unique<UngmModel>(sys.ungm_q_var(), sys.ungm_r_var(), sys.dt);
    case SystemKind::lorenz: return std::make_unique<LorenzModel>(sys.lorenz, sys.dynamics);
    case SystemKind::linear:
      return std::make_unique<LinearGaussianModel>(sys.f, sys.qm, sys.h, sys.rm, sys.mu0, sys.sigma0);
  }
  throw std::invalid_argument("unknown system");
}

/// Model the filter runs on: the truth model with the method's dynamics and
/// process-noise overrides applied.
inline std::unique_ptr<StateSpaceModel> make_filter_model(const SystemConfig& sys, const MethodConfig& m) {
  sys.validate();
  switch (sys.kind) {
    case SystemKind::ungm: return std::make_unique<UngmModel>(sys.ungm_q_var() * m.q_scale, sys.ungm_r_var(), sys.dt);
    case SystemKind::lorenz: return std::make_unique<LorenzModel>(sys.lorenz, m.dynamics.value_or(sys.dynamics), m.q_alpha);
    case SystemKind::linear:
      return std::make_unique<LinearGaussianModel>(sys.f, sys.qm * m.q_scale, sys.h, sys.rm, sys.mu0, sys.sigma0);
  }
  throw std::invalid_argument("unknown system");
}

/// Runs one filter over an observation sequence.
inline EstimateSequence run_filter(const MethodConfig& m, const StateSpaceModel& model,
                                   const std::vector<Vector>& observations, Rng& rng) {
  switch (m.kind) {
    case MethodKind::kf: {
      const auto* lin = dynamic_cast<const LinearGaussianModel*>(&model);
      if (lin == nullptr) throw std::invalid_argument("kf requires a linear-Gaussian system");
      return kf_run(*lin, observations);
    }
    case MethodKind::ekf: return ekf_run(model, observations);
    case MethodKind::iekf: return iekf_run(model, observations, m.iterations);
    case MethodKind::ukf: return ukf_run(model, observations);
    case MethodKind::pf: return pf_run(model, observations, m.particles, rng);
    case MethodKind::imap: return imap_filter(model, model.initial_mean(), observations, m.imap, m.imap_noise);
  }
  throw std::invalid_argument("unknown method");
}

// Streams derived from each run seed: 0 simulates the trajectory, 1 drives the filter.
inline constexpr std::uint64_t kTrajectoryStream = 0;
inline constexpr std::uint64_t kFilterStream = 1;
// Validation seeds start this far above the evaluation base seed.
inline constexpr std::uint64_t kValidationSeedOffset = 1'000'000;

inline std::vector<std::uint64_t> evaluation_seeds(std::uint64_t base, int runs) {
  if (runs < 1) throw std::invalid_argument("runs must be >= 1");
  if (static_cast<std::uint64_t>(runs) > kValidationSeedOffset)
    throw std::invalid_argument("runs must not exceed the validation seed offset");
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < runs; ++i) seeds.push_back(base + static_cast<std::uint64_t>(i));
  return seeds;
}

inline std::vector<std::uint64_t> validation_seeds(std::uint64_t base, int runs) {
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < runs; ++i) seeds.push_back(base + kValidationSeedOffset + static_cast<std::uint64_t>(i));
  return seeds;
}

inline std::vector<Trajectory> simulate_trajectories(const SystemConfig& sys, const std::vector<std::uint64_t>& seeds,
                                                     int threads = 1) {
  const auto model = make_truth_model(sys);
  std::vector<Trajectory> out(seeds.size());
  parallel_for(seeds.size(), threads, [&](std::size_t i) {
    Rng rng = make_rng(seeds[i], kTrajectoryStream);
    out[i] = simulate(*model, sys.steps, rng);
  });
  return out;
}

/// RMSE of one filter run; NaN when the filter diverges or fails numerically.
inline double run_rmse(const MethodConfig& m, const StateSpaceModel& model, const Trajectory& traj,
                       std::uint64_t seed) {
  Rng rng = make_rng(seed, kFilterStream);
  try {
    const auto est = run_filter(m, model, traj.observations, rng);
    return rmse(est.estimates, traj.states);
  } catch (const DivergenceError&) {
    return std::numeric_limits<double>::quiet_NaN();
  } catch (const NumericalError&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

/// Per-run RMSEs of a method on pre-simulated trajectories (seeds aligned).
inline std::vector<double> evaluate_runs(const SystemConfig& sys, const MethodConfig& m,
                                         const std::vector<Trajectory>& trajs,
                                         const std::vector<std::uint64_t>& seeds, int threads = 1) {
  if (trajs.size() != seeds.size()) throw std::invalid_argument("evaluate_runs: seeds/trajectories mismatch");
  const auto model = make_filter_model(sys, m);
  std::vector<double> out(trajs.size());
  parallel_for(trajs.size(), threads, [&](std::size_t i) { out[i] = run_rmse(m, *model, trajs[i], seeds[i]); });
  return out;
}

struct GridSpec {
  enum class Type { optimizers, q_alpha } type = Type::optimizers;
  std::vector<OptimizerKind> kinds{OptimizerKind::adadelta, OptimizerKind::gd, OptimizerKind::adagrad,
                                   OptimizerKind::rmsprop, OptimizerKind::adam};
  std::vector<int> steps{1, 3, 5, 10, 25, 50, 100};
  std::vector<double> etas{1.0, 0.5, 0.1, 0.05, 0.01};
  std::vector<double> decays{0.1, 0.5, 0.9};
  int count = 500;
  double lo = 0.5;
  double hi = 250.0;
};

/// Optimizer lattice: Adadelta over K x decay, GD and Adagrad over K x eta,
/// RMSprop and Adam over K x eta x decay (Adam with beta2 = beta1).
inline std::vector<ImapConfig> optimizer_grid(const GridSpec& g = {}) {
  std::vector<ImapConfig> cells;
  for (auto kind : g.kinds) {
    for (int k : g.steps) {
      switch (kind) {
        case OptimizerKind::adadelta:
          for (double d : g.decays) cells.push_back({OptimizerSpec::adadelta(d), k, true});
          break;
        case OptimizerKind::gd:
          for (double eta : g.etas) cells.push_back({OptimizerSpec::gd(eta), k, true});
          break;
        case OptimizerKind::adagrad:
          for (double eta : g.etas) cells.push_back({OptimizerSpec::adagrad(eta), k, true});
          break;
        case OptimizerKind::rmsprop:
          for (double eta : g.etas)
            for (double d : g.decays) cells.push_back({OptimizerSpec::rmsprop(eta, d), k, true});
          break;
        case OptimizerKind::adam:
          for (double eta : g.etas)
            for (double d : g.decays) cells.push_back({OptimizerSpec::adam(eta, d, d), k, true});
          break;
      }
    }
  }
  return cells;
}

/// `count` evenly spaced values in [lo, hi].
inline std::vector<double> linspace(double lo, double hi, int count) {
  if (count < 1) throw std::invalid_argument("linspace: count must be >= 1");
  std::vector<double> v;
  for (int i = 0; i < count; ++i) v.push_back(count == 1 ? lo : lo + (hi - lo) * i / (count - 1));
  return v;
}

/// Expands a grid around a base method: optimizer cells for imap, q_alpha
/// cells for the Gaussian filters.
inline std::vector<MethodConfig> expand_grid(const MethodConfig& base, const GridSpec& g) {
  std::vector<MethodConfig> cells;
  if (g.type == GridSpec::Type::optimizers) {
    if (base.kind != MethodKind::imap) throw std::invalid_argument("optimizer grid requires method imap");
    for (const auto& c : optimizer_grid(g)) {
      MethodConfig m = base;
      m.imap.optimizer = c.optimizer;
      m.imap.steps = c.steps;
      cells.push_back(m);
    }
  } else {
    for (double a : linspace(g.lo, g.hi, g.count)) {
      MethodConfig m = base;
      m.q_alpha = a;
      cells.push_back(m);
    }
  }
  return cells;
}

struct GridRow {
  MethodConfig method;
  RmseSummary summary;
};

struct GridResult {
  std::vector<GridRow> rows;
  std::size_t best = 0;

  const GridRow& best_row() const { return rows.at(best); }

  /// Row indices sorted by mean RMSE (ties by the grid tie-break).
  std::vector<std::size_t> ranking() const {
    std::vector<std::size_t> idx(rows.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(), [this](std::size_t a, std::size_t b) { return better(a, b); });
    return idx;
  }

  bool better(std::size_t a, std::size_t b) const {
    const double ma = rows[a].summary.mean, mb = rows[b].summary.mean;
    const bool fa = std::isfinite(ma), fb = std::isfinite(mb);
    if (fa != fb) return fa;
    if (fa && ma != mb) return ma < mb;
    return rows[a].method.tie_key() < rows[b].method.tie_key();
  }
};

/// Evaluates every cell on `validation_runs` simulations seeded from a block
/// disjoint from the evaluation seeds and picks the lowest mean RMSE.
inline GridResult grid_search(const SystemConfig& sys, const std::vector<MethodConfig>& cells,
                              std::uint64_t base_seed, int validation_runs = 5, int threads = 1,
                              bool replace_diverged = true) {
  if (cells.empty()) throw std::invalid_argument("grid_search: grid is empty");
  if (validation_runs < 1) throw std::invalid_argument("grid_search: validation_runs must be >= 1");
  const auto seeds = validation_seeds(base_seed, validation_runs);
  const auto trajs = simulate_trajectories(sys, seeds, threads);
  GridResult result;
  result.rows.resize(cells.size());
  // Parallel across cells; each cell's runs are sequential.
  parallel_for(cells.size(), threads, [&](std::size_t c) {
    result.rows[c] = {cells[c], summarize_rmse(evaluate_runs(sys, cells[c], trajs, seeds, 1), replace_diverged)};
  });
  for (std::size_t c = 1; c < cells.size(); ++c)
    if (result.better(c, result.best)) result.best = c;
  return result;
}

struct MethodEntry {
  MethodConfig method;
  std::optional<GridSpec> grid;
};

struct ExperimentConfig {
  SystemConfig system;
  std::vector<MethodEntry> methods;
  int runs = 100;
  std::uint64_t base_seed = 0;
  int threads = 1;
  int validation_runs = 5;
  bool replace_diverged = true;

  void validate() const {
    system.validate();
    if (runs < 1) throw std::invalid_argument("runs must be >= 1");
    if (validation_runs < 1) throw std::invalid_argument("validation_runs must be >= 1");
    if (methods.empty()) throw std::invalid_argument("config needs at least one method");
  }
};

/// Monte-Carlo evaluation of one method: run i uses seed base_seed + i.
inline RmseSummary run_monte_carlo(const SystemConfig& sys, const MethodConfig& m, int runs, std::uint64_t base_seed,
                                   int threads = 1, bool replace_diverged = true) {
  const auto seeds = evaluation_seeds(base_seed, runs);
  const auto trajs = simulate_trajectories(sys, seeds, threads);
  return summarize_rmse(evaluate_runs(sys, m, trajs, seeds, threads), replace_diverged);
}

inline RmseSummary run_monte_carlo(const ExperimentConfig& cfg) {
  cfg.validate();
  return run_monte_carlo(cfg.system, cfg.methods.front().method, cfg.runs, cfg.base_seed, cfg.threads,
                         cfg.replace_diverged);
}

struct BenchRow {
  MethodConfig method;
  RmseSummary summary;
  std::vector<std::uint64_t> seeds;
};

/// Every configured method on one shared block of evaluation trajectories;
/// gridded methods are first tuned on the validation block.
inline std::vector<BenchRow> run_bench(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto seeds = evaluation_seeds(cfg.base_seed, cfg.runs);
  const auto trajs = simulate_trajectories(cfg.system, seeds, cfg.threads);
  std::vector<BenchRow> rows;
  for (const auto& entry : cfg.methods) {
    MethodConfig m = entry.method;
    if (entry.grid) {
      const auto cells = expand_grid(m, *entry.grid);
      m = grid_search(cfg.system, cells, cfg.base_seed, cfg.validation_runs, cfg.threads, cfg.replace_diverged)
              .best_row()
              .method;
    }
    rows.push_back({m, summarize_rmse(evaluate_runs(cfg.system, m, trajs, seeds, cfg.threads), cfg.replace_diverged),
                    seeds});
  }
  return rows;
}

inline void write_table_header(std::ostream& os) { os << "method,param_string,rmse_mean,rmse_ci,diverged\n"; }

inline void write_table_row(std::ostream& os, const MethodConfig& m, const RmseSummary& s) {
  os << m.name() << ',' << m.describe() << ',' << format_number(s.mean) << ',' << format_number(s.half_width) << ','
     << s.diverged_count << '\n';
}

/// Per-run CSV `method,param_string,run,seed,rmse,diverged` with round-trip
/// precision, so summary means can be recomputed exactly.
inline void write_per_run_csv(std::ostream& os, const std::vector<BenchRow>& rows) {
  os << "method,param_string,run,seed,rmse,diverged\n";
  char buf[40];
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.summary.per_run.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", r.summary.per_run[i]);
      os << r.method.name() << ',' << r.method.describe() << ',' << i << ',' << r.seeds[i] << ',' << buf << ','
         << (r.summary.diverged[i] ? 1 : 0) << '\n';
    }
  }
}

// JSON configuration. Matrices are arrays of rows; scalars are accepted for
// 1 x 1 matrices and length-1 vectors.
namespace config {

using nlohmann::json;

inline Matrix matrix_from_json(const json& j, const std::string& what) {
  if (j.is_number()) return Matrix::Constant(1, 1, j.get<double>());
  if (!j.is_array() || j.empty()) throw std::invalid_argument(what + ": expected a nonempty array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (!j[i].is_array() || static_cast<Eigen::Index>(j[i].size()) != cols)
      throw std::invalid_argument(what + ": ragged matrix");
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = j[i][k].get<double>();
  }
  return m;
}

inline Vector vector_from_json(const json& j, const std::string& what) {
  if (j.is_number()) return Vector::Constant(1, j.get<double>());
  if (!j.is_array() || j.empty()) throw std::invalid_argument(what + ": expected a nonempty array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

inline SystemConfig parse_system(const json& j) {
  SystemConfig s;
  const auto type = j.value("type", std::string("ungm"));
  s.steps = j.value("steps", 200);
  if (type == "ungm") {
    s.kind = SystemKind::ungm;
    s.q = j.value("q", 3.0);
    s.r = j.value("r", 2.0);
    s.dt = j.value("dt", 0.1);
    const auto noise = j.value("noise", std::string("variance"));
    if (noise != "variance" && noise != "std") throw std::invalid_argument("ungm noise must be 'variance' or 'std'");
    s.noise_as_std = noise == "std";
  } else if (type == "lorenz") {
    s.kind = SystemKind::lorenz;
    s.lorenz.sigma = j.value("sigma", s.lorenz.sigma);
    s.lorenz.rho = j.value("rho", s.lorenz.rho);
    s.lorenz.beta = j.value("beta", s.lorenz.beta);
    s.lorenz.alpha = j.value("alpha", s.lorenz.alpha);
    s.lorenz.dt = j.value("dt", s.lorenz.dt);
    s.lorenz.substeps = j.value("substeps", s.lorenz.substeps);
    s.lorenz.obs_noise_var = j.value("obs_noise_var", s.lorenz.obs_noise_var);
    s.dynamics = parse_lorenz_dynamics(j.value("dynamics", std::string("rk4")));
  } else if (type == "linear") {
    s.kind = SystemKind::linear;
    s.f = matrix_from_json(j.at("F"), "F");
    s.qm = matrix_from_json(j.at("Q"), "Q");
    s.h = matrix_from_json(j.at("H"), "H");
    s.rm = matrix_from_json(j.at("R"), "R");
    s.mu0 = j.contains("mu0") ? vector_from_json(j["mu0"], "mu0") : Vector::Zero(s.f.rows());
    s.sigma0 = j.contains("Sigma0") ? matrix_from_json(j["Sigma0"], "Sigma0") : Matrix::Identity(s.f.rows(), s.f.rows());
  } else {
    throw std::invalid_argument("unknown system type '" + type + "'");
  }
  s.validate();
  return s;
}

inline OptimizerSpec parse_optimizer(const json& j) {
  const auto kind = parse_optimizer_kind(j.value("kind", std::string("gd")));
  OptimizerSpec s;
  switch (kind) {
    case OptimizerKind::gd: s = OptimizerSpec::gd(j.value("eta", 0.1)); break;
    case OptimizerKind::adagrad: s = OptimizerSpec::adagrad(j.value("eta", 0.1)); break;
    case OptimizerKind::rmsprop: s = OptimizerSpec::rmsprop(j.value("eta", 0.1), j.value("gamma", 0.9)); break;
    case OptimizerKind::adam: {
      const double b1 = j.value("beta1", 0.9);
      s = OptimizerSpec::adam(j.value("eta", 0.1), b1, j.value("beta2", j.contains("beta1") ? b1 : 0.999));
      break;
    }
    case OptimizerKind::adadelta: s = OptimizerSpec::adadelta(j.value("gamma", 0.9)); break;
  }
  if (j.contains("epsilon")) s.epsilon = j["epsilon"].get<double>();
  s.validate();
  return s;
}

inline GridSpec parse_grid(const json& j) {
  GridSpec g;
  const auto type = j.value("type", std::string("optimizers"));
  if (type == "optimizers") {
    g.type = GridSpec::Type::optimizers;
    if (j.contains("optimizers")) {
      g.kinds.clear();
      for (const auto& k : j["optimizers"]) g.kinds.push_back(parse_optimizer_kind(k.get<std::string>()));
    }
    if (j.contains("K")) g.steps = j["K"].get<std::vector<int>>();
    if (j.contains("eta")) g.etas = j["eta"].get<std::vector<double>>();
    if (j.contains("decays")) g.decays = j["decays"].get<std::vector<double>>();
  } else if (type == "q_alpha") {
    g.type = GridSpec::Type::q_alpha;
    g.count = j.value("count", g.count);
    g.lo = j.value("min", g.lo);
    g.hi = j.value("max", g.hi);
  } else {
    throw std::invalid_argument("unknown grid type '" + type + "'");
  }
  return g;
}

inline MethodEntry parse_method(const json& j) {
  MethodEntry e;
  auto& m = e.method;
  m.kind = parse_method_kind(j.at("type").get<std::string>());
  m.iterations = j.value("K", m.iterations);
  m.particles = j.value("particles", m.particles);
  if (m.kind == MethodKind::imap) {
    m.imap.steps = j.value("K", 1);
    m.imap.optimizer = parse_optimizer(j.value("optimizer", json::object()));
    m.imap.reset_optimizer_each_t = j.value("reset_optimizer_each_t", true);
    const auto lik = j.value("likelihood", std::string("unit"));
    if (lik == "unit") m.imap_noise = LikelihoodNoise::unit;
    else if (lik == "model") m.imap_noise = LikelihoodNoise::model;
    else throw std::invalid_argument("likelihood must be 'unit' or 'model'");
    m.imap.validate();
  }
  if (j.contains("q_alpha")) m.q_alpha = j["q_alpha"].get<double>();
  m.q_scale = j.value("q_scale", 1.0);
  if (j.contains("dynamics")) m.dynamics = parse_lorenz_dynamics(j["dynamics"].get<std::string>());
  if (m.iterations < 1) throw std::invalid_argument("method K must be >= 1");
  if (m.particles < 1) throw std::invalid_argument("particles must be >= 1");
  if (j.contains("grid")) e.grid = parse_grid(j["grid"]);
  return e;
}

inline ExperimentConfig parse_experiment(const json& j) {
  ExperimentConfig cfg;
  cfg.system = parse_system(j.value("system", json::object()));
  if (j.contains("methods")) {
    for (const auto& m : j["methods"]) cfg.methods.push_back(parse_method(m));
  } else if (j.contains("method")) {
    cfg.methods.push_back(parse_method(j["method"]));
  }
  cfg.runs = j.value("runs", cfg.runs);
  cfg.base_seed = j.value("base_seed", cfg.base_seed);
  cfg.threads = j.value("threads", cfg.threads);
  cfg.validation_runs = j.value("validation_runs", cfg.validation_runs);
  cfg.replace_diverged = j.value("replace_diverged", cfg.replace_diverged);
  cfg.validate();
  return cfg;
}

}  // namespace config

}  // namespace imap

#endif  // IMAP_BENCH_HPP_
