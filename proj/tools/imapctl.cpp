// imapctl: command-line front end for simulation, filtering, Monte-Carlo
// benchmarks, grid search, the equivalence self-check and the drift task.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "imap/imap.hpp"

namespace {

using nlohmann::json;

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config '" + path + "'");
  return json::parse(in);
}

// Writes to `path`, or stdout when empty.
template <class Fn>
void emit(const std::string& path, Fn&& write) {
  if (path.empty()) {
    write(std::cout);
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  write(out);
}

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> runs;
  std::optional<int> threads;
};

void add_common(CLI::App* app, Common& c, bool needs_config = true) {
  auto* opt = app->add_option("--config", c.config, "JSON experiment config");
  if (needs_config) opt->required()->check(CLI::ExistingFile);
  app->add_option("--out", c.out, "output file (default stdout)");
  app->add_option("--seed", c.seed, "base seed (overrides config)");
  app->add_option("--runs", c.runs, "number of Monte-Carlo runs (overrides config)");
  app->add_option("--threads", c.threads, "worker threads (overrides config)")->check(CLI::PositiveNumber);
}

imap::ExperimentConfig experiment(const Common& c) {
  auto cfg = imap::config::parse_experiment(load_json(c.config));
  if (c.seed) cfg.base_seed = *c.seed;
  if (c.runs) cfg.runs = *c.runs;
  if (c.threads) cfg.threads = *c.threads;
  cfg.validate();
  return cfg;
}

int cmd_simulate(const Common& c, std::optional<int> steps) {
  auto cfg = experiment(c);
  if (steps) cfg.system.steps = *steps;
  const auto model = imap::make_truth_model(cfg.system);
  imap::Rng rng = imap::make_rng(cfg.base_seed, imap::kTrajectoryStream);
  const auto traj = imap::simulate(*model, cfg.system.steps, rng);
  emit(c.out, [&](std::ostream& os) { imap::write_trajectory_csv(os, traj); });
  return 0;
}

int cmd_filter(const Common& c, const std::string& input) {
  const auto cfg = experiment(c);
  std::ifstream in(input);
  if (!in) throw std::runtime_error("cannot open trajectory '" + input + "'");
  const auto traj = imap::read_trajectory_csv(in);
  const auto& method = cfg.methods.front().method;
  const auto model = imap::make_filter_model(cfg.system, method);
  imap::Rng rng = imap::make_rng(cfg.base_seed, imap::kFilterStream);
  const auto run = imap::run_filter(method, *model, traj.observations, rng);
  emit(c.out, [&](std::ostream& os) { imap::write_estimates_csv(os, run); });
  std::cerr << method.name() << " [" << method.describe() << "] rmse " << imap::format_number(imap::rmse(run.estimates, traj.states))
            << '\n';
  return 0;
}

int cmd_bench(const Common& c, const std::string& per_run, const std::string& json_out) {
  const auto cfg = experiment(c);
  const auto rows = imap::run_bench(cfg);
  emit(c.out, [&](std::ostream& os) {
    imap::write_table_header(os);
    for (const auto& r : rows) imap::write_table_row(os, r.method, r.summary);
  });
  if (!per_run.empty()) emit(per_run, [&](std::ostream& os) { imap::write_per_run_csv(os, rows); });
  if (!json_out.empty()) {
    json j = json::array();
    for (const auto& r : rows) {
      j.push_back({{"method", r.method.name()},
                   {"param_string", r.method.describe()},
                   {"rmse_mean", r.summary.mean},
                   {"rmse_ci", r.summary.half_width},
                   {"diverged", r.summary.diverged_count},
                   {"per_run", r.summary.per_run},
                   {"divergence_policy", cfg.replace_diverged ? "replace_with_max_finite" : "exclude"}});
    }
    emit(json_out, [&](std::ostream& os) { os << j.dump(2) << '\n'; });
  }
  return 0;
}

int cmd_gridsearch(const Common& c) {
  const auto cfg = experiment(c);
  for (const auto& entry : cfg.methods) {
    if (!entry.grid) continue;
    const auto cells = imap::expand_grid(entry.method, *entry.grid);
    const auto result = imap::grid_search(cfg.system, cells, cfg.base_seed, cfg.validation_runs, cfg.threads,
                                          cfg.replace_diverged);
    emit(c.out, [&](std::ostream& os) {
      imap::write_table_header(os);
      for (auto i : result.ranking()) imap::write_table_row(os, result.rows[i].method, result.rows[i].summary);
    });
    const auto& best = result.best_row();
    std::cerr << "best " << best.method.name() << " [" << best.method.describe() << "] validation rmse "
              << imap::format_number(best.summary.mean) << '\n';
    return 0;
  }
  throw std::runtime_error("config has no method with a grid");
}

int cmd_verify(const Common& c, int instances) {
  const auto rep = imap::verify_equivalence(instances, c.seed.value_or(0));
  const double tol = 1e-8;
  bool ok = true;
  emit(c.out, [&](std::ostream& os) {
    os << "identity,max_relative_residual,tolerance,status\n";
    auto line = [&](const char* name, double v) {
      const bool pass = v <= tol;
      ok = ok && pass;
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.3e", v);
      os << name << ',' << buf << ",1e-08," << (pass ? "pass" : "fail") << '\n';
    };
    line("forward_gd_to_kalman", rep.forward);
    line("reverse_kalman_to_gd", rep.reverse);
    line("lr_matrix_round_trip", rep.round_trip);
    line("compensated_noise_gain", rep.compensated);
    line("ngd_vi_vs_recursion", rep.ngd);
  });
  return ok ? 0 : 1;
}

int cmd_driftbench(const Common& c, const std::string& summary_path, std::optional<int> particles, bool no_pf) {
  json j = c.config.empty() ? json::object() : load_json(c.config);
  imap::DriftTask task;
  const json t = j.value("task", json::object());
  task.omega = t.value("omega", task.omega);
  task.radius = t.value("radius", task.radius);
  task.horizon = t.value("horizon", task.horizon);
  task.train_size = t.value("train_size", task.train_size);
  task.test_size = t.value("test_size", task.test_size);
  task.val_size = t.value("val_size", task.val_size);
  imap::DriftBenchOptions opt;
  opt.particles = particles.value_or(j.value("particles", opt.particles));
  opt.include_pf = !no_pf && j.value("include_pf", true);
  opt.threads = c.threads.value_or(j.value("threads", 1));
  const int seeds_n = c.runs.value_or(j.value("seeds", 10));
  const std::uint64_t base = c.seed.value_or(j.value("base_seed", std::uint64_t{0}));
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < seeds_n; ++i) seeds.push_back(base + static_cast<std::uint64_t>(i));
  const auto res = imap::run_drift_benchmark(task, seeds, opt);

  emit(c.out, [&](std::ostream& os) {
    os << "t,strategy,accuracy\n";
    for (std::size_t f = 0; f < res.families.size(); ++f) {
      for (int step = 0; step < task.horizon; ++step) {
        double s = 0.0;
        for (const auto& r : res.runs[f]) s += r.test_accuracy[step];
        os << step << ',' << res.families[f] << ',' << imap::format_number(s / seeds_n) << '\n';
      }
    }
  });
  json summary = json::object();
  for (std::size_t f = 0; f < res.families.size(); ++f) {
    std::vector<double> means, heldout;
    json chosen = json::array();
    for (const auto& r : res.runs[f]) {
      means.push_back(r.mean_test_accuracy());
      heldout.push_back(r.heldout_score());
      chosen.push_back(r.label);
    }
    auto ci = [](const std::vector<double>& v) {
      return v.size() >= 2 ? imap::confidence_interval(v) : imap::Interval{v.empty() ? 0.0 : v.front(), 0.0};
    };
    const auto all = ci(means), late = ci(heldout);
    summary[res.families[f]] = {{"mean_accuracy", all.mean},
                                {"ci", all.half_width},
                                {"second_half_mean_accuracy", late.mean},
                                {"second_half_ci", late.half_width},
                                {"selected", chosen}};
  }
  if (!summary_path.empty()) emit(summary_path, [&](std::ostream& os) { os << summary.dump(2) << '\n'; });
  else std::cerr << summary.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Implicit MAP filtering toolkit"};
  app.require_subcommand(1);

  Common sim, filt, bench, grid, verify, drift;
  std::optional<int> steps;
  auto* s_sim = app.add_subcommand("simulate", "simulate one trajectory and write it as CSV");
  add_common(s_sim, sim);
  s_sim->add_option("--steps", steps, "trajectory length T (overrides config)");

  std::string input;
  auto* s_filt = app.add_subcommand("filter", "run the configured method on a trajectory CSV");
  add_common(s_filt, filt);
  s_filt->add_option("--input", input, "trajectory CSV")->required()->check(CLI::ExistingFile);

  std::string per_run, json_out;
  auto* s_bench = app.add_subcommand("bench", "Monte-Carlo RMSE table for every configured method");
  add_common(s_bench, bench);
  s_bench->add_option("--per-run", per_run, "per-run RMSE CSV");
  s_bench->add_option("--json", json_out, "JSON summary");

  auto* s_grid = app.add_subcommand("gridsearch", "validation RMSE for every cell of the configured grid");
  add_common(s_grid, grid);

  int instances = 200;
  auto* s_verify = app.add_subcommand("verify-equivalence", "residuals of the gradient-descent/Kalman identities");
  add_common(s_verify, verify, false);
  s_verify->add_option("--instances", instances, "random instances")->check(CLI::PositiveNumber);

  std::string summary;
  std::optional<int> particles;
  bool no_pf = false;
  auto* s_drift = app.add_subcommand("driftbench", "weight-space adaptation strategies on the drift task");
  add_common(s_drift, drift, false);
  s_drift->add_option("--summary", summary, "summary JSON (mean and 95% CI per strategy)");
  s_drift->add_option("--particles", particles, "particles for the weight-space PF")->check(CLI::PositiveNumber);
  s_drift->add_flag("--no-pf", no_pf, "skip the particle filter strategy");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*s_sim) return cmd_simulate(sim, steps);
    if (*s_filt) return cmd_filter(filt, input);
    if (*s_bench) return cmd_bench(bench, per_run, json_out);
    if (*s_grid) return cmd_gridsearch(grid);
    if (*s_verify) return cmd_verify(verify, instances);
    if (*s_drift) return cmd_driftbench(drift, summary, particles, no_pf);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
