#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "imap/bench.hpp"
#include "imap/trajectory.hpp"

using namespace imap;

namespace {

SystemConfig scalar_linear(int steps = 50) {
  SystemConfig s;
  s.kind = SystemKind::linear;
  s.steps = steps;
  s.f = Matrix::Constant(1, 1, 0.9);
  s.qm = Matrix::Constant(1, 1, 1.0);
  s.h = Matrix::Constant(1, 1, 1.0);
  s.rm = Matrix::Constant(1, 1, 2.0);
  s.mu0 = Vector::Zero(1);
  s.sigma0 = Matrix::Identity(1, 1);
  return s;
}

MethodConfig method(MethodKind k) {
  MethodConfig m;
  m.kind = k;
  return m;
}

}  // namespace

TEST(Rmse, Examples) {
  const std::vector<Vector> a{Vector::Ones(2), Vector::Zero(2)};
  EXPECT_EQ(rmse(a, a), 0.0);
  EXPECT_DOUBLE_EQ(rmse({Vector::Zero(1)}, {Vector::Constant(1, 3.0)}), 3.0);
  const std::vector<Vector> truth(4, Vector::Zero(3)), est(4, Vector::Ones(3));
  EXPECT_DOUBLE_EQ(rmse(est, truth), 1.0);
  EXPECT_THROW(rmse(a, {Vector::Ones(2)}), std::invalid_argument);
}

TEST(ConfidenceInterval, Examples) {
  const auto flat = confidence_interval({2.5, 2.5, 2.5});
  EXPECT_DOUBLE_EQ(flat.mean, 2.5);
  EXPECT_DOUBLE_EQ(flat.half_width, 0.0);
  const auto two = confidence_interval({0.0, 2.0});
  EXPECT_DOUBLE_EQ(two.mean, 1.0);
  EXPECT_NEAR(two.half_width, 1.96, 1e-15);
  EXPECT_THROW(confidence_interval({1.0}), std::invalid_argument);
}

TEST(ConfidenceInterval, MatchesWelfordOracle) {
  Rng rng(1);
  std::gamma_distribution<double> g(2.0, 3.0);
  std::vector<double> xs;
  for (int i = 0; i < 100; ++i) xs.push_back(g(rng));
  // Welford's online update as an independent variance computation.
  double mean = 0, m2 = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double d = xs[i] - mean;
    mean += d / static_cast<double>(i + 1);
    m2 += d * (xs[i] - mean);
  }
  const auto ci = confidence_interval(xs);
  EXPECT_NEAR(ci.mean, mean, 1e-12);
  EXPECT_NEAR(ci.half_width, 1.96 * std::sqrt(m2 / 99.0) / 10.0, 1e-12);
}

TEST(Summary, DivergedRunsReplacedByWorstFinite) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const auto s = summarize_rmse({1.0, nan, 3.0, std::numeric_limits<double>::infinity()});
  EXPECT_EQ(s.diverged_count, 2);
  EXPECT_EQ(s.per_run, (std::vector<double>{1.0, 3.0, 3.0, 3.0}));
  EXPECT_DOUBLE_EQ(s.mean, 2.5);
  const auto kept = summarize_rmse({1.0, nan, 3.0}, false);
  EXPECT_DOUBLE_EQ(kept.mean, 2.0);
  EXPECT_EQ(kept.diverged_count, 1);
}

TEST(MonteCarlo, Deterministic) {
  const auto sys = scalar_linear();
  auto pf = method(MethodKind::pf);
  pf.particles = 100;
  const auto a = run_monte_carlo(sys, pf, 5, 42);
  const auto b = run_monte_carlo(sys, pf, 5, 42);
  EXPECT_EQ(a.per_run, b.per_run);
  EXPECT_EQ(a.mean, b.mean);
  // Two runs sharing a seed see the same trajectory and filter stream.
  const auto trajs = simulate_trajectories(sys, {7, 7});
  const auto model = make_filter_model(sys, pf);
  EXPECT_EQ(run_rmse(pf, *model, trajs[0], 7), run_rmse(pf, *model, trajs[1], 7));
}

TEST(MonteCarlo, TrajectoriesDoNotDependOnTheMethod) {
  const auto sys = scalar_linear();
  const auto seeds = evaluation_seeds(3, 4);
  const auto trajs = simulate_trajectories(sys, seeds, 2);
  const auto model = make_truth_model(sys);
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    Rng rng = make_rng(seeds[i], kTrajectoryStream);
    EXPECT_EQ(simulate(*model, sys.steps, rng).states, trajs[i].states);
  }
}

TEST(MonteCarlo, MatchedKalmanBeatsMisspecified) {
  const auto sys = scalar_linear(100);
  const auto matched = run_monte_carlo(sys, method(MethodKind::kf), 100, 0);
  for (double scale : {0.1, 0.5, 2.0, 10.0}) {
    auto mis = method(MethodKind::kf);
    mis.q_scale = scale;
    EXPECT_LE(matched.mean, run_monte_carlo(sys, mis, 100, 0).mean) << "q_scale " << scale;
  }
}

TEST(MonteCarlo, ThreadCountDoesNotChangeResults) {
  const auto sys = scalar_linear();
  auto pf = method(MethodKind::pf);
  pf.particles = 50;
  EXPECT_EQ(run_monte_carlo(sys, pf, 6, 1, 1).per_run, run_monte_carlo(sys, pf, 6, 1, 3).per_run);
}

TEST(Grid, OptimizerLatticeShape) {
  const auto cells = optimizer_grid();
  // Adadelta 7x3, GD 7x5, Adagrad 7x5, RMSprop 7x5x3, Adam 7x5x3.
  EXPECT_EQ(cells.size(), 301u);
  int adam = 0;
  for (const auto& c : cells)
    if (c.optimizer.kind == OptimizerKind::adam) {
      ++adam;
      EXPECT_EQ(c.optimizer.beta1, c.optimizer.beta2);
    }
  EXPECT_EQ(adam, 105);
  const auto qs = linspace(0.5, 250.0, 500);
  EXPECT_EQ(qs.size(), 500u);
  EXPECT_DOUBLE_EQ(qs.front(), 0.5);
  EXPECT_DOUBLE_EQ(qs.back(), 250.0);
}

TEST(Grid, SingleCellIsReturned) {
  auto m = method(MethodKind::imap);
  m.imap = ImapConfig{OptimizerSpec::gd(0.3), 4};
  const auto res = grid_search(scalar_linear(), {m}, 0, 3);
  ASSERT_EQ(res.rows.size(), 1u);
  EXPECT_EQ(res.best, 0u);
  EXPECT_EQ(res.best_row().method.describe(), m.describe());
}

TEST(Grid, TiesBreakByStepsThenStepSize) {
  GridResult r;
  auto make = [](int k, double eta) {
    MethodConfig m;
    m.kind = MethodKind::imap;
    m.imap = ImapConfig{OptimizerSpec::gd(eta), k};
    RmseSummary s;
    s.mean = 1.0;
    return GridRow{m, s};
  };
  r.rows = {make(10, 0.1), make(3, 0.5), make(3, 0.05)};
  const auto order = r.ranking();
  EXPECT_EQ(order, (std::vector<std::size_t>{2, 1, 0}));
  r.rows[0].summary.mean = std::numeric_limits<double>::quiet_NaN();
  EXPECT_FALSE(r.better(0, 1));
}

TEST(Grid, ValidationAndEvaluationSeedsAreDisjoint) {
  const auto eval = evaluation_seeds(0, 100), val = validation_seeds(0, 5);
  std::set<std::uint64_t> all(eval.begin(), eval.end());
  for (auto s : val) EXPECT_EQ(all.count(s), 0u);
  EXPECT_THROW(evaluation_seeds(0, 2'000'000), std::invalid_argument);
}

TEST(Grid, UngmAdamCellSelectionLandsInTopBand) {
  // Full optimizer lattice on UNGM (standard-deviation reading of Q and R).
  SystemConfig sys;
  sys.noise_as_std = true;
  auto base = method(MethodKind::imap);
  const auto cells = expand_grid(base, GridSpec{});
  bool has_table_cell = false;
  for (const auto& c : cells)
    has_table_cell |= c.imap.steps == 50 && c.imap.optimizer.kind == OptimizerKind::adam &&
                      c.imap.optimizer.learning_rate == 0.1 && c.imap.optimizer.beta1 == 0.1;
  EXPECT_TRUE(has_table_cell);
  const auto best = grid_search(sys, cells, 0, 5).best_row().method;
  const auto eval = run_monte_carlo(sys, best, 100, 0);
  EXPECT_GE(eval.mean, 5.3) << best.describe();
  EXPECT_LE(eval.mean, 6.5) << best.describe();
}

TEST(Output, PerRunCsvRoundTripsTheMean) {
  ExperimentConfig cfg;
  cfg.system = scalar_linear();
  cfg.runs = 7;
  cfg.methods = {{method(MethodKind::kf), std::nullopt}, {method(MethodKind::ukf), std::nullopt}};
  const auto rows = run_bench(cfg);
  std::stringstream ss;
  write_per_run_csv(ss, rows);
  std::string line;
  std::getline(ss, line);
  EXPECT_EQ(line, "method,param_string,run,seed,rmse,diverged");
  std::map<std::string, std::vector<double>> by_method;
  while (std::getline(ss, line)) {
    const auto cells = detail::split_csv_line(line);
    ASSERT_EQ(cells.size(), 6u);
    by_method[cells[0]].push_back(std::stod(cells[4]));
  }
  for (const auto& r : rows) EXPECT_EQ(confidence_interval(by_method[r.method.name()]).mean, r.summary.mean);

  std::stringstream table;
  write_table_header(table);
  write_table_row(table, rows[0].method, rows[0].summary);
  EXPECT_EQ(table.str().substr(0, table.str().find('\n')), "method,param_string,rmse_mean,rmse_ci,diverged");
}

TEST(Config, ParsesExperiment) {
  const auto j = nlohmann::json::parse(R"({
    "system": {"type": "ungm", "q": 3, "r": 2, "steps": 50, "noise": "std"},
    "methods": [
      {"type": "imap", "K": 50, "optimizer": {"kind": "adam", "eta": 0.1, "beta1": 0.1}},
      {"type": "iekf", "K": 5},
      {"type": "pf", "particles": 200}
    ],
    "runs": 10, "base_seed": 9
  })");
  const auto cfg = config::parse_experiment(j);
  EXPECT_TRUE(cfg.system.noise_as_std);
  EXPECT_DOUBLE_EQ(cfg.system.ungm_q_var(), 9.0);
  ASSERT_EQ(cfg.methods.size(), 3u);
  EXPECT_EQ(cfg.methods[0].method.describe(), "K=50;adam(eta=0.1;beta1=0.1;beta2=0.1)");
  EXPECT_EQ(cfg.methods[1].method.describe(), "K=5");
  EXPECT_EQ(cfg.methods[2].method.particles, 200);
  EXPECT_EQ(cfg.runs, 10);
  EXPECT_EQ(cfg.base_seed, 9u);

  EXPECT_THROW(config::parse_experiment(nlohmann::json::parse(R"({"method": {"type": "smoother"}})")),
               std::invalid_argument);
  EXPECT_THROW(config::parse_experiment(nlohmann::json::parse(R"({"system": {"type": "ungm", "noise": "db"},
               "method": {"type": "ukf"}})")),
               std::invalid_argument);
  EXPECT_THROW(config::parse_experiment(nlohmann::json::parse(R"({"system": {"type": "ungm"}})")),
               std::invalid_argument);
}

TEST(Config, ParsesLorenzAndLinear) {
  const auto lor = config::parse_system(nlohmann::json::parse(
      R"({"type": "lorenz", "alpha": 5, "substeps": 10, "dynamics": "euler"})"));
  EXPECT_EQ(lor.kind, SystemKind::lorenz);
  EXPECT_DOUBLE_EQ(lor.lorenz.alpha, 5.0);
  EXPECT_EQ(lor.dynamics, LorenzDynamics::euler);
  const auto lin = config::parse_system(nlohmann::json::parse(
      R"({"type": "linear", "F": [[1, 0.1], [0, 1]], "Q": [[0.1, 0], [0, 0.1]], "H": [[1, 0]], "R": 0.5})"));
  EXPECT_EQ(lin.f.rows(), 2);
  EXPECT_EQ(lin.rm.rows(), 1);
  EXPECT_EQ(lin.mu0.size(), 2);
  EXPECT_THROW(config::parse_system(nlohmann::json::parse(R"({"type": "linear", "F": [[1, 2], [3]]})")),
               std::invalid_argument);
}
