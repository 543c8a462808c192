#pragma once

// Experiment orchestration: configuration files, single replications,
// Monte Carlo rate and coverage studies, orthogonality diagnostics and CSV
// reporting.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "plr/dgp.hpp"
#include "plr/errors.hpp"
#include "plr/estimator.hpp"
#include "plr/functions.hpp"
#include "plr/inference.hpp"
#include "plr/orthogonality.hpp"
#include "plr/sieve.hpp"

namespace plr {

inline constexpr const char* kVersion = "1.0.0";
inline constexpr int kCsvSchemaVersion = 1;

struct InferenceConfig {
  double level = 0.95;
  std::optional<std::size_t> bandwidth;  // default floor(n^{1/3})
};

struct OrthoConfig {
  std::size_t mc_n = 100000;
  std::vector<double> lambdas{-0.2, -0.1, -0.05, 0.0, 0.05, 0.1, 0.2};
  Direction direction{NamedFunction::of("sin"), NamedFunction::of("zero")};
  double outcome_bound = 3.0;
  std::uint64_t seed = 0;
};

struct ExperimentConfig {
  PlrDgpConfig dgp;
  ScalingRule rule_T = ScalingRule::treatment(2, 1);
  ScalingRule rule_Y = ScalingRule::outcome(2, 1, 0.0);
  TrainConfig train;
  InferenceConfig inference;
  std::size_t replications = 1;
  std::vector<std::size_t> n_grid;
  std::uint64_t base_seed = 0;
  bool oracle_nuisances = false;
  std::string output_dir = ".";
  std::string data_path;
  OrthoConfig ortho;

  void validate() const {
    dgp.validate();
    rule_T.validate();
    rule_Y.validate();
    train.validate();
    if (rule_T.role != NuisanceRole::treatment || rule_Y.role != NuisanceRole::outcome) {
      throw ConfigError("rules: expected a treatment rule and an outcome rule");
    }
    if (rule_T.input_dim != dgp.d || rule_Y.input_dim != dgp.d) throw ConfigError("rules: input_dim must equal dgp.d");
    if (!(inference.level > 0.0 && inference.level < 1.0)) throw ConfigError("inference: level must lie in (0, 1)");
    if (replications < 1) throw ConfigError("study: replications must be >= 1");
    for (std::size_t i = 1; i < n_grid.size(); ++i) {
      if (n_grid[i] <= n_grid[i - 1]) throw ConfigError("study: n_grid must be strictly increasing");
    }
    for (auto n : n_grid) {
      if (n < 2) throw ConfigError("study: grid sizes must be >= 2");
    }
  }
};

/// Desk-scale defaults: theta0 = 2, f0T = 0.8 tanh, g0 = sin, rho_x = 0.5,
/// noise sds 0.5, d = 1, with small networks trained by decaying-step Adam.
inline ExperimentConfig default_experiment() {
  ExperimentConfig cfg;
  cfg.rule_T.c_L = cfg.rule_Y.c_L = 0.3;
  cfg.rule_T.c_H = cfg.rule_Y.c_H = 0.05;
  cfg.train.epochs = 300;
  cfg.train.batch = 64;
  cfg.train.step = 1e-2;
  cfg.train.step_decay = 0.98;
  cfg.train.restarts = 2;
  cfg.train.early_stop_window = 30;
  cfg.n_grid = {500, 1000, 2000, 4000};
  cfg.replications = 200;
  return cfg;
}

// ---------------------------------------------------------------------------
// Config files: INI sections dgp, rules, train, inference, study, ortho, data.

inline NamedFunction parse_named_function(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    parts.push_back(item);
  }
  if (parts.empty() || parts.size() > 5) {
    throw ConfigError("function '" + text + "' must be id[,scale,freq,shift,offset]");
  }
  NamedFunction f = NamedFunction::of(parts[0]);
  double* fields[] = {&f.scale, &f.frequency, &f.shift, &f.offset};
  for (std::size_t i = 1; i < parts.size(); ++i) {
    try {
      *fields[i - 1] = std::stod(parts[i]);
    } catch (const std::exception&) {
      throw ConfigError("function '" + text + "': bad number '" + parts[i] + "'");
    }
  }
  return f;
}

/// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string to_string(const NamedFunction& f) {
  return std::string(to_string(f.base)) + "," + format_double(f.scale) + "," + format_double(f.frequency) + "," +
         format_double(f.shift) + "," + format_double(f.offset);
}

template <class T>
std::vector<T> parse_list(const std::string& text) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      if constexpr (std::is_floating_point_v<T>) {
        out.push_back(static_cast<T>(std::stod(item)));
      } else {
        const long long v = std::stoll(item);
        if (v < 0) throw ConfigError("negative list entry");
        out.push_back(static_cast<T>(v));
      }
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception&) {
      throw ConfigError("bad list entry '" + item + "'");
    }
  }
  return out;
}

namespace config_detail {

// Missing keys take the default; present keys must parse.
template <class T>
T get_or(const boost::property_tree::ptree& tree, const char* path, T fallback) {
  if (!tree.get_child_optional(path)) return fallback;
  return tree.get<T>(path);
}

}  // namespace config_detail

inline ExperimentConfig parse_config(std::istream& is) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  using config_detail::get_or;
  ExperimentConfig cfg = default_experiment();
  try {
    auto& dgp = cfg.dgp;
    dgp.theta0 = get_or(tree, "dgp.theta0", dgp.theta0);
    if (auto v = tree.get_optional<std::string>("dgp.g0")) dgp.g0 = parse_named_function(*v);
    if (auto v = tree.get_optional<std::string>("dgp.f0T")) dgp.f0T = parse_named_function(*v);
    dgp.rho_x = get_or(tree, "dgp.rho_x", dgp.rho_x);
    dgp.noise_sd_u = get_or(tree, "dgp.noise_sd_u", dgp.noise_sd_u);
    dgp.noise_sd_v = get_or(tree, "dgp.noise_sd_v", dgp.noise_sd_v);
    dgp.n = get_or(tree, "dgp.n", dgp.n);
    dgp.d = get_or(tree, "dgp.d", dgp.d);
    dgp.burn_in = get_or(tree, "dgp.burn_in", dgp.burn_in);
    dgp.seed = get_or(tree, "dgp.seed", dgp.seed);
    const auto noise = tree.get<std::string>("dgp.y_noise", "gaussian");
    if (noise == "gaussian") {
      dgp.y_noise = NoiseKind::gaussian;
    } else if (noise == "student_t") {
      dgp.y_noise = NoiseKind::student_t;
    } else {
      throw ConfigError("dgp.y_noise must be gaussian or student_t");
    }

    cfg.rule_T = ScalingRule::treatment(get_or(tree, "rules.p_T", 2), dgp.d);
    cfg.rule_Y = ScalingRule::outcome(get_or(tree, "rules.p_Y", 2), dgp.d, get_or(tree, "rules.kappa", 0.0));
    for (ScalingRule* r : {&cfg.rule_T, &cfg.rule_Y}) {
      r->c_L = get_or(tree, "rules.c_L", 0.3);
      r->c_H = get_or(tree, "rules.c_H", 0.05);
      r->c_B = get_or(tree, "rules.c_B", 1.0);
    }

    auto& tr = cfg.train;
    tr.epochs = get_or(tree, "train.epochs", tr.epochs);
    tr.batch = get_or(tree, "train.batch", tr.batch);
    tr.step = get_or(tree, "train.step", tr.step);
    tr.step_decay = get_or(tree, "train.step_decay", tr.step_decay);
    tr.restarts = get_or(tree, "train.restarts", tr.restarts);
    tr.seed = get_or(tree, "train.seed", tr.seed);
    tr.early_stop_tol = get_or(tree, "train.early_stop_tol", tr.early_stop_tol);
    tr.early_stop_window = get_or(tree, "train.early_stop_window", tr.early_stop_window);
    tr.warm_start = get_or(tree, "train.warm_start", tr.warm_start);

    cfg.inference.level = get_or(tree, "inference.level", cfg.inference.level);
    const long long bw = get_or(tree, "inference.bandwidth", -1LL);
    if (bw >= 0) cfg.inference.bandwidth = static_cast<std::size_t>(bw);

    cfg.replications = get_or(tree, "study.replications", cfg.replications);
    if (auto v = tree.get_optional<std::string>("study.n_grid")) cfg.n_grid = parse_list<std::size_t>(*v);
    cfg.base_seed = get_or(tree, "study.base_seed", cfg.base_seed);
    cfg.oracle_nuisances = get_or(tree, "study.oracle_nuisances", cfg.oracle_nuisances);
    cfg.output_dir = get_or(tree, "study.output_dir", cfg.output_dir);

    auto& o = cfg.ortho;
    o.mc_n = get_or(tree, "ortho.mc_n", o.mc_n);
    if (auto v = tree.get_optional<std::string>("ortho.lambdas")) o.lambdas = parse_list<double>(*v);
    if (auto v = tree.get_optional<std::string>("ortho.delta_T")) o.direction.delta_T = parse_named_function(*v);
    if (auto v = tree.get_optional<std::string>("ortho.delta_Y")) o.direction.delta_Y = parse_named_function(*v);
    o.outcome_bound = get_or(tree, "ortho.outcome_bound", o.outcome_bound);
    o.seed = get_or(tree, "ortho.seed", o.seed);

    cfg.data_path = get_or(tree, "data.path", cfg.data_path);
  } catch (const pt::ptree_bad_data& e) {
    throw ConfigError(std::string("config: bad value: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path.string() + "'");
  return parse_config(in);
}

/// Canonical INI rendering; parse_config(write_config(cfg)) reproduces cfg.
inline void write_config(std::ostream& os, const ExperimentConfig& cfg) {
  const auto& d = cfg.dgp;
  os << "[dgp]\n"
     << "theta0 = " << format_double(d.theta0) << "\n"
     << "g0 = " << to_string(d.g0) << "\n"
     << "f0T = " << to_string(d.f0T) << "\n"
     << "rho_x = " << format_double(d.rho_x) << "\n"
     << "noise_sd_u = " << format_double(d.noise_sd_u) << "\n"
     << "noise_sd_v = " << format_double(d.noise_sd_v) << "\n"
     << "n = " << d.n << "\n"
     << "d = " << d.d << "\n"
     << "burn_in = " << d.burn_in << "\n"
     << "seed = " << d.seed << "\n"
     << "y_noise = " << (d.y_noise == NoiseKind::gaussian ? "gaussian" : "student_t") << "\n\n";
  os << "[rules]\n"
     << "p_T = " << cfg.rule_T.smoothness << "\n"
     << "p_Y = " << cfg.rule_Y.smoothness << "\n"
     << "kappa = " << format_double(cfg.rule_Y.bound_rate) << "\n"
     << "c_L = " << format_double(cfg.rule_T.c_L) << "\n"
     << "c_H = " << format_double(cfg.rule_T.c_H) << "\n"
     << "c_B = " << format_double(cfg.rule_Y.c_B) << "\n\n";
  const auto& t = cfg.train;
  os << "[train]\n"
     << "epochs = " << t.epochs << "\n"
     << "batch = " << t.batch << "\n"
     << "step = " << format_double(t.step) << "\n"
     << "step_decay = " << format_double(t.step_decay) << "\n"
     << "restarts = " << t.restarts << "\n"
     << "seed = " << t.seed << "\n"
     << "early_stop_tol = " << format_double(t.early_stop_tol) << "\n"
     << "early_stop_window = " << t.early_stop_window << "\n"
     << "warm_start = " << (t.warm_start ? "true" : "false") << "\n\n";
  os << "[inference]\n"
     << "level = " << format_double(cfg.inference.level) << "\n"
     << "bandwidth = "
     << (cfg.inference.bandwidth ? std::to_string(*cfg.inference.bandwidth) : std::string("-1")) << "\n\n";
  os << "[study]\n"
     << "replications = " << cfg.replications << "\n"
     << "n_grid = ";
  for (std::size_t i = 0; i < cfg.n_grid.size(); ++i) os << (i ? "," : "") << cfg.n_grid[i];
  os << "\n"
     << "base_seed = " << cfg.base_seed << "\n"
     << "oracle_nuisances = " << (cfg.oracle_nuisances ? "true" : "false") << "\n"
     << "output_dir = " << cfg.output_dir << "\n\n";
  const auto& o = cfg.ortho;
  os << "[ortho]\n"
     << "mc_n = " << o.mc_n << "\n"
     << "lambdas = ";
  for (std::size_t i = 0; i < o.lambdas.size(); ++i) os << (i ? "," : "") << format_double(o.lambdas[i]);
  os << "\n"
     << "delta_T = " << to_string(o.direction.delta_T) << "\n"
     << "delta_Y = " << to_string(o.direction.delta_Y) << "\n"
     << "outcome_bound = " << format_double(o.outcome_bound) << "\n"
     << "seed = " << o.seed << "\n";
  if (!cfg.data_path.empty()) os << "\n[data]\npath = " << cfg.data_path << "\n";
}

/// FNV-1a over the canonical config text.
inline std::uint64_t config_hash(const ExperimentConfig& cfg) {
  std::ostringstream os;
  write_config(os, cfg);
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : os.str()) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// ---------------------------------------------------------------------------
// Replications

struct ReplicationResult {
  std::size_t index = 0;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string failure;
  Estimate estimate;
  bool covered = false;
  double mse_T = 0.0;
  double mse_Y = 0.0;
  double theta_n_T = 0.0;
  double theta_n_Y = 0.0;
  double eps_n = 0.0;
};

/// simulate -> fit nuisances (or use the oracle) -> estimate. Errors are
/// captured in the result rather than thrown.
inline ReplicationResult run_replication(const ExperimentConfig& cfg, std::size_t n, std::uint64_t seed,
                                         std::size_t index = 0) {
  ReplicationResult rep;
  rep.index = index;
  rep.n = n;
  rep.seed = seed;
  try {
    rep.eps_n = rate_eps(n, cfg.rule_T, cfg.rule_Y).eps_n;
    PlrDgpConfig dgp = cfg.dgp;
    dgp.n = n;
    dgp.seed = seed;
    const Simulation sim = simulate(dgp);
    if (cfg.oracle_nuisances) {
      const auto f0T = sim.oracle.f0T();
      const auto f0Y = sim.oracle.f0Y();
      rep.estimate = confidence_interval(sim.data, f0T, f0Y, cfg.inference.level, cfg.inference.bandwidth);
    } else {
      TrainConfig train = cfg.train;
      train.seed = seed;
      const NuisanceFits fits = fit_nuisances(sim.data, cfg.rule_T, cfg.rule_Y, train);
      rep.mse_T = fits.treatment.train_mse;
      rep.mse_Y = fits.outcome.train_mse;
      rep.theta_n_T = fits.treatment.theta_n;
      rep.theta_n_Y = fits.outcome.theta_n;
      rep.estimate = confidence_interval(sim.data, fits.treatment.network, fits.outcome.network,
                                         cfg.inference.level, cfg.inference.bandwidth);
    }
    rep.covered = rep.estimate.covers(cfg.dgp.theta0);
    rep.ok = true;
  } catch (const DegenerateDenominator& e) {
    rep.failure = "degenerate_denominator";
  } catch (const std::exception& e) {
    rep.failure = std::string("error: ") + e.what();
  }
  return rep;
}

/// PLR_THREADS caps the worker count; defaults to the hardware concurrency.
inline std::size_t worker_count() {
  std::size_t hw = std::max(1U, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("PLR_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v >= 1) hw = static_cast<std::size_t>(v);
  }
  return hw;
}

/// Evaluates fn(i) for i in [0, count) on a worker pool; results are ordered
/// by index regardless of scheduling.
template <class Fn>
auto parallel_map(std::size_t count, std::size_t threads, Fn fn) -> std::vector<decltype(fn(std::size_t{}))> {
  std::vector<decltype(fn(std::size_t{}))> out(count);
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) out[i] = fn(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) out[i] = fn(i);
    });
  }
  for (auto& t : pool) t.join();
  return out;
}

struct SummaryRow {
  std::size_t n = 0;
  std::size_t replications = 0;
  std::size_t failures = 0;
  double bias = 0.0;
  double rmse = 0.0;
  double mean_se = 0.0;
  double coverage = 0.0;
  double mean_eps = 0.0;
};

struct MonteCarloSummary {
  std::vector<SummaryRow> rows;
  std::vector<ReplicationResult> replications;
};

inline SummaryRow summarize(std::size_t n, const std::vector<ReplicationResult>& reps, double theta0) {
  SummaryRow row;
  row.n = n;
  row.replications = reps.size();
  std::size_t ok = 0, covered = 0;
  double err = 0.0, sq = 0.0, se = 0.0, eps = 0.0;
  for (const auto& r : reps) {
    eps += r.eps_n;
    if (!r.ok) {
      ++row.failures;
      continue;
    }
    ++ok;
    const double e = r.estimate.theta_hat - theta0;
    err += e;
    sq += e * e;
    se += r.estimate.se;
    covered += r.covered ? 1 : 0;
  }
  if (!reps.empty()) row.mean_eps = eps / static_cast<double>(reps.size());
  if (ok > 0) {
    const double k = static_cast<double>(ok);
    row.bias = err / k;
    row.rmse = std::sqrt(sq / k);
    row.mean_se = se / k;
    row.coverage = static_cast<double>(covered) / k;
  } else {
    row.bias = row.rmse = row.mean_se = row.coverage = std::numeric_limits<double>::quiet_NaN();
  }
  return row;
}

/// Replication i at sample size n uses seed base_seed + i.
inline MonteCarloSummary run_study(const ExperimentConfig& cfg, const std::vector<std::size_t>& grid) {
  cfg.validate();
  MonteCarloSummary summary;
  const std::size_t workers = worker_count();
  for (std::size_t n : grid) {
    auto reps = parallel_map(cfg.replications, workers,
                             [&](std::size_t i) { return run_replication(cfg, n, cfg.base_seed + i, i); });
    summary.rows.push_back(summarize(n, reps, cfg.dgp.theta0));
    summary.replications.insert(summary.replications.end(), reps.begin(), reps.end());
  }
  return summary;
}

struct RateStudyResult {
  MonteCarloSummary summary;
  double slope = 0.0;
  double slope_se = 0.0;  // NaN with only two grid points
};

/// OLS slope of log RMSE on log n.
inline std::pair<double, double> log_log_slope(const std::vector<SummaryRow>& rows) {
  const auto k = static_cast<double>(rows.size());
  double mx = 0.0, my = 0.0;
  for (const auto& r : rows) {
    mx += std::log(static_cast<double>(r.n));
    my += std::log(r.rmse);
  }
  mx /= k;
  my /= k;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& r : rows) {
    const double dx = std::log(static_cast<double>(r.n)) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(r.rmse) - my);
  }
  const double slope = sxy / sxx;
  if (rows.size() < 3) return {slope, std::numeric_limits<double>::quiet_NaN()};
  double ssr = 0.0;
  for (const auto& r : rows) {
    const double fitted = my + slope * (std::log(static_cast<double>(r.n)) - mx);
    const double res = std::log(r.rmse) - fitted;
    ssr += res * res;
  }
  return {slope, std::sqrt(ssr / (k - 2.0) / sxx)};
}

inline RateStudyResult run_rate_study(const ExperimentConfig& cfg) {
  if (cfg.n_grid.size() < 2) throw ConfigError("rate study: insufficient grid (need at least 2 sample sizes)");
  if (cfg.replications < 50) throw ConfigError("rate study: need at least 50 replications per grid point");
  RateStudyResult result;
  result.summary = run_study(cfg, cfg.n_grid);
  for (const auto& row : result.summary.rows) {
    if (!(row.rmse > 0.0)) throw std::runtime_error("rate study: no successful replications at n = " + std::to_string(row.n));
  }
  std::tie(result.slope, result.slope_se) = log_log_slope(result.summary.rows);
  return result;
}

/// Coverage per n over n_grid (or dgp.n when the grid is empty).
inline MonteCarloSummary run_coverage_study(const ExperimentConfig& cfg) {
  if (cfg.replications < 200) throw ConfigError("coverage study: need at least 200 replications");
  const std::vector<std::size_t> grid = cfg.n_grid.empty() ? std::vector<std::size_t>{cfg.dgp.n} : cfg.n_grid;
  return run_study(cfg, grid);
}

// ---------------------------------------------------------------------------
// Orthogonality diagnostic

struct OrthoRow {
  double lambda = 0.0;
  MonteCarloValue moment;
  double quadratic_prediction = 0.0;
};

struct OrthoReport {
  std::vector<OrthoRow> rows;
  MonteCarloValue first_derivative;
  MonteCarloValue second_derivative;
};

inline OrthoReport run_ortho_check(const ExperimentConfig& cfg) {
  cfg.validate();
  const Oracle oracle(cfg.dgp);
  validate_direction(cfg.ortho.direction, oracle, cfg.ortho.outcome_bound);
  const MomentPathSample sample(cfg.dgp, cfg.ortho.direction, cfg.ortho.mc_n, cfg.ortho.seed);
  const double theta0 = cfg.dgp.theta0;
  OrthoReport report;
  report.first_derivative = sample.first_derivative(theta0);
  report.second_derivative = sample.second_derivative_closed_form(theta0);
  for (double lambda : cfg.ortho.lambdas) {
    report.rows.push_back({lambda, sample.moment(theta0, lambda),
                           0.5 * lambda * lambda * report.second_derivative.value});
  }
  return report;
}

// ---------------------------------------------------------------------------
// CSV output. Numbers use the shortest round-trip form, so reruns are
// byte-identical.

inline void write_estimate_header(std::ostream& os) {
  os << "n,theta_hat,se,ci_low,ci_high,lrv,denom,bandwidth,seed\n";
}

inline void write_estimate_row(std::ostream& os, const Estimate& e, std::uint64_t seed) {
  os << e.n << ',' << format_double(e.theta_hat) << ',' << format_double(e.se) << ',' << format_double(e.ci_low)
     << ',' << format_double(e.ci_high) << ',' << format_double(e.lrv) << ',' << format_double(e.denom) << ','
     << e.bandwidth << ',' << seed << "\n";
}

inline void write_replications_csv(std::ostream& os, const std::vector<ReplicationResult>& reps) {
  os << "replication,n,seed,status,theta_hat,se,ci_low,ci_high,lrv,denom,bandwidth,covered,mse_T,mse_Y,"
        "theta_n_T,theta_n_Y,eps_n\n";
  for (const auto& r : reps) {
    os << r.index << ',' << r.n << ',' << r.seed << ',' << (r.ok ? "ok" : r.failure) << ',';
    if (r.ok) {
      const auto& e = r.estimate;
      os << format_double(e.theta_hat) << ',' << format_double(e.se) << ',' << format_double(e.ci_low) << ','
         << format_double(e.ci_high) << ',' << format_double(e.lrv) << ',' << format_double(e.denom) << ','
         << e.bandwidth << ',' << (r.covered ? 1 : 0);
    } else {
      os << ",,,,,,,";
    }
    os << ',' << format_double(r.mse_T) << ',' << format_double(r.mse_Y) << ',' << format_double(r.theta_n_T) << ','
       << format_double(r.theta_n_Y) << ',' << format_double(r.eps_n) << "\n";
  }
}

inline void write_summary_csv(std::ostream& os, const std::vector<SummaryRow>& rows) {
  os << "n,replications,failures,bias,rmse,mean_se,coverage,mean_eps\n";
  for (const auto& r : rows) {
    os << r.n << ',' << r.replications << ',' << r.failures << ',' << format_double(r.bias) << ','
       << format_double(r.rmse) << ',' << format_double(r.mean_se) << ',' << format_double(r.coverage) << ','
       << format_double(r.mean_eps) << "\n";
  }
}

inline void write_ortho_csv(std::ostream& os, const OrthoReport& report) {
  os << "lambda,M_lambda,mc_se,quadratic_prediction\n";
  for (const auto& r : report.rows) {
    os << format_double(r.lambda) << ',' << format_double(r.moment.value) << ',' << format_double(r.moment.mc_se)
       << ',' << format_double(r.quadratic_prediction) << "\n";
  }
}

/// manifest.txt: timestamp, version, schema and config hash. The only output
/// that differs between identical reruns is the timestamp line.
inline void write_manifest(const std::filesystem::path& dir, const ExperimentConfig& cfg, const std::string& command,
                           const std::vector<std::string>& files) {
  std::ofstream out(dir / "manifest.txt");
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char stamp[64];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  char hash[32];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(config_hash(cfg)));
  out << "# generated " << stamp << "\n";
  out << "command = " << command << "\n";
  out << "version = " << kVersion << "\n";
  out << "csv_schema = " << kCsvSchemaVersion << "\n";
  out << "config_hash = " << hash << "\n";
  out << "eigen = " << EIGEN_WORLD_VERSION << '.' << EIGEN_MAJOR_VERSION << '.' << EIGEN_MINOR_VERSION << "\n";
  for (const auto& f : files) out << "file = " << f << "\n";
}

}  // namespace plr
