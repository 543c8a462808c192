#pragma once

// Command-line front end. Exit codes: 0 success, 2 usage or configuration
// error, 3 runtime failure.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "plr/blocking.hpp"
#include "plr/harness.hpp"
#include "plr/mlp.hpp"

namespace plr {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

namespace cli_detail {

struct Options {
  std::string config;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> n;
  std::string data;
  std::string net_t;
  std::string net_y;
  std::size_t blocks_n = 0;
  std::optional<std::size_t> blocks_a;
};

inline std::filesystem::path prepare_out(const std::string& dir) {
  std::filesystem::path p(dir);
  std::filesystem::create_directories(p);
  return p;
}

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream f(p);
  if (!f) throw std::runtime_error("cannot write '" + p.string() + "'");
  return f;
}

inline ExperimentConfig load(const Options& opt) {
  ExperimentConfig cfg = load_config(opt.config);
  if (opt.seed) {
    cfg.base_seed = *opt.seed;
    cfg.dgp.seed = *opt.seed;
    cfg.train.seed = *opt.seed;
    cfg.ortho.seed = *opt.seed;
  }
  if (opt.n) cfg.dgp.n = *opt.n;
  if (!opt.data.empty()) cfg.data_path = opt.data;
  cfg.validate();
  return cfg;
}

inline Dataset load_or_simulate(const ExperimentConfig& cfg) {
  if (cfg.data_path.empty()) return simulate(cfg.dgp).data;
  std::ifstream in(cfg.data_path);
  if (!in) throw ConfigError("cannot open dataset '" + cfg.data_path + "'");
  return read_dataset_csv(in);
}

inline Network load_net(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open network file '" + path + "'");
  return load_network(in);
}

inline int cmd_simulate(const Options& opt, std::ostream& out) {
  const ExperimentConfig cfg = load(opt);
  const auto dir = prepare_out(opt.out);
  const Simulation sim = simulate(cfg.dgp);
  auto f = open_out(dir / "dataset.csv");
  write_dataset_csv(f, sim.data);
  write_manifest(dir, cfg, "simulate", {"dataset.csv"});
  out << "wrote " << (dir / "dataset.csv").string() << " (n=" << sim.data.size() << ")\n";
  return kExitOk;
}

inline int cmd_fit(const Options& opt, std::ostream& out) {
  const ExperimentConfig cfg = load(opt);
  const auto dir = prepare_out(opt.out);
  const Dataset data = load_or_simulate(cfg);
  const NuisanceFits fits = fit_nuisances(data, cfg.rule_T, cfg.rule_Y, cfg.train);
  {
    auto f = open_out(dir / "net_T.txt");
    save_network(f, fits.treatment.network);
  }
  {
    auto f = open_out(dir / "net_Y.txt");
    save_network(f, fits.outcome.network);
  }
  auto f = open_out(dir / "fit.csv");
  f << "nuisance,train_mse,best_restart_mse,theta_n,epochs_run,seed,depth,width,bound,parameters\n";
  for (const auto& [name, fit] : {std::pair{"treatment", &fits.treatment}, std::pair{"outcome", &fits.outcome}}) {
    const auto& arch = fit->network.architecture();
    f << name << ',' << format_double(fit->train_mse) << ',' << format_double(fit->best_restart_mse) << ','
      << format_double(fit->theta_n) << ',' << fit->epochs_run << ',' << fit->seed << ',' << arch.depth() << ','
      << arch.hidden_widths.front() << ',' << format_double(arch.output_bound) << ',' << parameter_count(arch)
      << "\n";
  }
  write_manifest(dir, cfg, "fit", {"net_T.txt", "net_Y.txt", "fit.csv"});
  out << "treatment mse " << fits.treatment.train_mse << ", outcome mse " << fits.outcome.train_mse << "\n";
  return kExitOk;
}

inline int cmd_estimate(const Options& opt, std::ostream& out, std::ostream& err) {
  const ExperimentConfig cfg = load(opt);
  const auto dir = prepare_out(opt.out);
  const Dataset data = load_or_simulate(cfg);
  Estimate est;
  if (!opt.net_t.empty() || !opt.net_y.empty()) {
    if (opt.net_t.empty() || opt.net_y.empty()) throw ConfigError("--net-t and --net-y must be given together");
    const Network fT = load_net(opt.net_t);
    const Network fY = load_net(opt.net_y);
    est = confidence_interval(data, fT, fY, cfg.inference.level, cfg.inference.bandwidth);
  } else if (cfg.oracle_nuisances) {
    const Oracle oracle(cfg.dgp);
    est = confidence_interval(data, oracle.f0T(), oracle.f0Y(), cfg.inference.level, cfg.inference.bandwidth);
  } else {
    const NuisanceFits fits = fit_nuisances(data, cfg.rule_T, cfg.rule_Y, cfg.train);
    est = confidence_interval(data, fits.treatment.network, fits.outcome.network, cfg.inference.level,
                              cfg.inference.bandwidth);
  }
  if (est.degenerate_variance) err << "warning: estimated long-run variance is zero; interval has zero width\n";
  auto f = open_out(dir / "estimate.csv");
  write_estimate_header(f);
  write_estimate_row(f, est, cfg.train.seed);
  write_manifest(dir, cfg, "estimate", {"estimate.csv"});
  out << "theta_hat " << est.theta_hat << " se " << est.se << " ci [" << est.ci_low << ", " << est.ci_high << "]\n";
  return kExitOk;
}

inline int cmd_rate_study(const Options& opt, std::ostream& out) {
  const ExperimentConfig cfg = load(opt);
  const auto dir = prepare_out(opt.out);
  const RateStudyResult res = run_rate_study(cfg);
  {
    auto f = open_out(dir / "replications.csv");
    write_replications_csv(f, res.summary.replications);
  }
  {
    auto f = open_out(dir / "summary.csv");
    write_summary_csv(f, res.summary.rows);
  }
  auto f = open_out(dir / "rate.csv");
  f << "slope,slope_se,grid_points,replications\n"
    << format_double(res.slope) << ',' << format_double(res.slope_se) << ',' << res.summary.rows.size() << ','
    << cfg.replications << "\n";
  write_manifest(dir, cfg, "rate-study", {"replications.csv", "summary.csv", "rate.csv"});
  out << "log-log RMSE slope " << res.slope << " (se " << res.slope_se << ")\n";
  return kExitOk;
}

inline int cmd_coverage_study(const Options& opt, std::ostream& out) {
  const ExperimentConfig cfg = load(opt);
  const auto dir = prepare_out(opt.out);
  const MonteCarloSummary res = run_coverage_study(cfg);
  {
    auto f = open_out(dir / "replications.csv");
    write_replications_csv(f, res.replications);
  }
  auto f = open_out(dir / "summary.csv");
  write_summary_csv(f, res.rows);
  write_manifest(dir, cfg, "coverage-study", {"replications.csv", "summary.csv"});
  for (const auto& row : res.rows) out << "n=" << row.n << " coverage " << row.coverage << "\n";
  return kExitOk;
}

inline int cmd_ortho_check(const Options& opt, std::ostream& out) {
  const ExperimentConfig cfg = load(opt);
  const auto dir = prepare_out(opt.out);
  const OrthoReport report = run_ortho_check(cfg);
  {
    auto f = open_out(dir / "ortho.csv");
    write_ortho_csv(f, report);
  }
  auto f = open_out(dir / "ortho_derivatives.csv");
  f << "quantity,value,mc_se\n"
    << "first_derivative," << format_double(report.first_derivative.value) << ','
    << format_double(report.first_derivative.mc_se) << "\n"
    << "second_derivative," << format_double(report.second_derivative.value) << ','
    << format_double(report.second_derivative.mc_se) << "\n";
  write_manifest(dir, cfg, "ortho-check", {"ortho.csv", "ortho_derivatives.csv"});
  out << "first derivative " << report.first_derivative.value << " (mc se " << report.first_derivative.mc_se
      << "), second derivative " << report.second_derivative.value << "\n";
  return kExitOk;
}

inline int cmd_blocks(const Options& opt, std::ostream& out) {
  const std::size_t a = opt.blocks_a.value_or(default_block_length(opt.blocks_n));
  const BlockPartition p = make_partition(opt.blocks_n, a);
  write_partition_csv(out, p);
  return kExitOk;
}

}  // namespace cli_detail

inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  using namespace cli_detail;
  CLI::App app{"Two-stage inference for the partially linear time-series model"};
  app.require_subcommand(1);
  Options opt;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config, "INI configuration file")->required();
    sub->add_option("--out", opt.out, "output directory");
    sub->add_option("--seed", opt.seed, "override every seed in the config");
  };
  auto* simulate_cmd = app.add_subcommand("simulate", "simulate a dataset");
  add_common(simulate_cmd);
  simulate_cmd->add_option("--n", opt.n, "sample size");
  auto* fit_cmd = app.add_subcommand("fit", "fit both nuisance networks");
  add_common(fit_cmd);
  fit_cmd->add_option("--data", opt.data, "dataset CSV (default: simulate from [dgp])");
  auto* estimate_cmd = app.add_subcommand("estimate", "estimate theta with a confidence interval");
  add_common(estimate_cmd);
  estimate_cmd->add_option("--data", opt.data, "dataset CSV (default: simulate from [dgp])");
  estimate_cmd->add_option("--net-t", opt.net_t, "saved treatment network");
  estimate_cmd->add_option("--net-y", opt.net_y, "saved outcome network");
  auto* rate_cmd = app.add_subcommand("rate-study", "Monte Carlo RMSE rate over the n grid");
  add_common(rate_cmd);
  auto* coverage_cmd = app.add_subcommand("coverage-study", "Monte Carlo interval coverage");
  add_common(coverage_cmd);
  auto* ortho_cmd = app.add_subcommand("ortho-check", "moment path along a nuisance direction");
  add_common(ortho_cmd);
  auto* blocks_cmd = app.add_subcommand("blocks", "print the independent-block partition of 1..n");
  blocks_cmd->add_option("--n", opt.blocks_n, "series length")->required();
  blocks_cmd->add_option("--a", opt.blocks_a, "block length (default ceil(2 ln n))");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitConfig;
  }

  try {
    if (*simulate_cmd) return cmd_simulate(opt, out);
    if (*fit_cmd) return cmd_fit(opt, out);
    if (*estimate_cmd) return cmd_estimate(opt, out, err);
    if (*rate_cmd) return cmd_rate_study(opt, out);
    if (*coverage_cmd) return cmd_coverage_study(opt, out);
    if (*ortho_cmd) return cmd_ortho_check(opt, out);
    if (*blocks_cmd) return cmd_blocks(opt, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    err << "invalid argument: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "runtime error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitConfig;
}

}  // namespace plr
