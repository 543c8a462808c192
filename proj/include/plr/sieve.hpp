#pragma once

// Sieve estimation of conditional means with bounded ReLU networks:
// architecture growth rules in the sample size and approximate empirical
// risk minimization by Adam with restarts.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "plr/dgp.hpp"
#include "plr/errors.hpp"
#include "plr/mlp.hpp"
#include "plr/random.hpp"

namespace plr {

enum class NuisanceRole { treatment, outcome };

struct ScalingRule {
  int smoothness = 2;
  std::size_t input_dim = 1;
  double bound_rate = 0.0;  // kappa; ignored (zero) for the treatment role
  NuisanceRole role = NuisanceRole::treatment;
  double c_L = 1.0;
  double c_H = 1.0;
  double c_B = 1.0;

  static ScalingRule treatment(int p, std::size_t d) { return {p, d, 0.0, NuisanceRole::treatment}; }
  static ScalingRule outcome(int p, std::size_t d, double kappa) { return {p, d, kappa, NuisanceRole::outcome}; }

  double kappa() const noexcept { return role == NuisanceRole::treatment ? 0.0 : bound_rate; }

  /// Exponent r in H ~ n^r log^2 n.
  double width_exponent() const {
    const double ratio = static_cast<double>(input_dim) / (smoothness + static_cast<double>(input_dim));
    return role == NuisanceRole::treatment ? 0.5 * ratio : ratio * (0.5 - kappa());
  }

  /// Exponent of the L2 convergence rate n^{-rate}.
  double rate_exponent() const {
    const double ratio = smoothness / (smoothness + static_cast<double>(input_dim));
    return role == NuisanceRole::treatment ? 0.5 * ratio : ratio * (0.5 - kappa());
  }

  void validate() const {
    if (smoothness < 1) throw ConfigError("scaling rule: smoothness must be >= 1");
    if (input_dim < 1) throw ConfigError("scaling rule: input_dim must be >= 1");
    if (!(bound_rate >= 0.0 && bound_rate < 0.5)) throw ConfigError("scaling rule: kappa must lie in [0, 1/2)");
    if (!(c_L > 0.0 && c_H > 0.0 && c_B > 0.0)) throw ConfigError("scaling rule: constants must be positive");
  }
};

/// Slack in min{rate_T, rate_Y} > 1/4; positive when the rules support
/// root-n inference.
inline double rate_condition_margin(const ScalingRule& rule_T, const ScalingRule& rule_Y) {
  return std::min(rule_T.rate_exponent(), rule_Y.rate_exponent()) - 0.25;
}

inline bool satisfies_rate_condition(const ScalingRule& rule_T, const ScalingRule& rule_Y) {
  return rate_condition_margin(rule_T, rule_Y) > 0.0;
}

/// L = ceil(c_L ln n), H = ceil(c_H n^r ln^2 n) for every layer, B = 2 for the
/// treatment role and max(2, c_B n^kappa) for the outcome role.
inline Architecture architecture_for(std::size_t n, const ScalingRule& rule) {
  rule.validate();
  if (n < 2) throw ConfigError("architecture_for: n must be >= 2");
  const double nd = static_cast<double>(n);
  const double log_n = std::log(nd);
  const auto depth = static_cast<std::size_t>(std::max(1.0, std::ceil(rule.c_L * log_n)));
  const auto width =
      static_cast<std::size_t>(std::max(1.0, std::ceil(rule.c_H * std::pow(nd, rule.width_exponent()) * log_n * log_n)));
  const double bound =
      rule.role == NuisanceRole::treatment ? 2.0 : std::max(2.0, rule.c_B * std::pow(nd, rule.kappa()));
  return Architecture{rule.input_dim, std::vector<std::size_t>(depth, width), bound};
}

struct TrainConfig {
  std::size_t epochs = 200;
  std::size_t batch = 64;
  double step = 1e-3;
  double step_decay = 1.0;  // per-epoch multiplicative factor on the step size
  std::size_t restarts = 3;
  std::uint64_t seed = 0;
  double early_stop_tol = 1e-9;
  std::size_t early_stop_window = 10;
  bool warm_start = true;

  void validate() const {
    if (batch < 1) throw ConfigError("train: batch must be >= 1");
    if (!(step > 0.0)) throw ConfigError("train: step must be positive");
    if (!(step_decay > 0.0 && step_decay <= 1.0)) throw ConfigError("train: step_decay must lie in (0, 1]");
    if (restarts < 1) throw ConfigError("train: restarts must be >= 1");
    if (early_stop_window < 1) throw ConfigError("train: early_stop_window must be >= 1");
  }
};

/// A trained nuisance network with training diagnostics.
///
/// The returned network is the lowest-loss candidate among the restarts and
/// the best-constant warm start (ties broken by seed order). theta_n is the
/// loss gap between the primary restart (seeded with the config seed) and the
/// best restart: the slack a single optimizer run leaves relative to the best
/// point found, a computable stand-in for the distance to the infimum over the
/// sieve class.
struct FitResult {
  Network network;
  double train_mse = 0.0;
  double best_restart_mse = 0.0;
  double theta_n = 0.0;
  std::size_t epochs_run = 0;
  std::uint64_t seed = 0;
};

class Adam {
 public:
  explicit Adam(std::size_t size, double step, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : step_(step), beta1_(beta1), beta2_(beta2), eps_(eps), m_(size, 0.0), v_(size, 0.0) {}

  void set_step(double step) noexcept { step_ = step; }

  void update(std::span<double> params, std::span<const double> grad) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
      v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
      params[i] -= step_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
    }
  }

 private:
  double step_, beta1_, beta2_, eps_;
  std::vector<double> m_, v_;
  std::uint64_t t_ = 0;
};

inline double mean_squared_error(const Network& net, const RowMatrix& x, std::span<const double> target) {
  const Eigen::VectorXd pred = net.forward_batch(x);
  double s = 0.0;
  for (Eigen::Index i = 0; i < pred.size(); ++i) {
    const double r = target[static_cast<std::size_t>(i)] - pred(i);
    s += r * r;
  }
  return s / static_cast<double>(pred.size());
}

/// Network whose only nonzero parameter is the output bias, set to the
/// clipped target mean.
inline Network constant_network(const Architecture& arch, double value) {
  Network net = Network::zeros(arch);
  const std::size_t out = arch.num_layers() - 1;
  net.mutable_parameters().bias(out)(0) = std::clamp(value, -arch.output_bound, arch.output_bound);
  return net;
}

namespace detail {

struct RestartOutcome {
  Network network;
  double mse;
  std::size_t epochs;
};

inline RestartOutcome train_once(const RowMatrix& x, std::span<const double> target, const Architecture& arch,
                                 const TrainConfig& cfg, std::uint64_t seed) {
  Rng rng = make_rng(seed, 11);
  Network net = Network::he_uniform(arch, rng);
  const std::size_t n = target.size();
  const std::size_t batch = std::min(cfg.batch, n);
  const std::size_t steps_per_epoch = std::max<std::size_t>(1, n / batch);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);

  Parameters grad(arch);
  BatchWorkspace ws;
  Adam adam(grad.size(), cfg.step);
  std::vector<std::size_t> rows(batch);
  // Running minimum of the full-data MSE after each epoch.
  std::vector<double> best_so_far;
  best_so_far.reserve(cfg.epochs + 1);
  double current = mean_squared_error(net, x, target);
  best_so_far.push_back(current);

  std::size_t epoch = 0;
  while (epoch < cfg.epochs) {
    for (std::size_t s = 0; s < steps_per_epoch; ++s) {
      for (auto& r : rows) r = pick(rng);
      net.loss_gradient(x, target, rows, grad, ws);
      adam.update(net.mutable_parameters().flat(), grad.flat());
    }
    ++epoch;
    adam.set_step(cfg.step * std::pow(cfg.step_decay, static_cast<double>(epoch)));
    current = mean_squared_error(net, x, target);
    best_so_far.push_back(std::min(best_so_far.back(), current));
    if (epoch >= cfg.early_stop_window &&
        best_so_far[epoch - cfg.early_stop_window] - best_so_far[epoch] < cfg.early_stop_tol) {
      break;
    }
  }
  return {std::move(net), current, epoch};
}

}  // namespace detail

inline FitResult fit(const RowMatrix& x, std::span<const double> target, const Architecture& arch,
                     const TrainConfig& cfg) {
  arch.validate();
  cfg.validate();
  const std::size_t n = target.size();
  if (n == 0 || static_cast<std::size_t>(x.rows()) != n) throw ShapeError("fit: empty data or row mismatch");
  if (n < 2) throw ConfigError("fit: need at least 2 observations");
  if (static_cast<std::size_t>(x.cols()) != arch.input_dim) throw ShapeError("fit: covariate dimension mismatch");
  if (!x.allFinite() || !std::all_of(target.begin(), target.end(), [](double v) { return std::isfinite(v); })) {
    throw ConfigError("fit: non-finite inputs");
  }

  std::optional<detail::RestartOutcome> warm;
  if (cfg.warm_start) {
    const double mean = std::accumulate(target.begin(), target.end(), 0.0) / static_cast<double>(n);
    Network c = constant_network(arch, mean);
    const double mse = mean_squared_error(c, x, target);
    warm = detail::RestartOutcome{std::move(c), mse, 0};
  }

  std::vector<detail::RestartOutcome> runs;
  runs.reserve(cfg.restarts);
  for (std::size_t r = 0; r < cfg.restarts; ++r) {
    runs.push_back(detail::train_once(x, target, arch, cfg, derive_seed(cfg.seed, r)));
  }

  double best_restart = runs.front().mse;
  detail::RestartOutcome* chosen = &runs.front();
  for (auto& run : runs) {
    best_restart = std::min(best_restart, run.mse);
    if (run.mse < chosen->mse) chosen = &run;
  }
  if (warm && warm->mse < chosen->mse) chosen = &*warm;

  return FitResult{chosen->network,         chosen->mse, chosen->mse, std::max(0.0, runs.front().mse - best_restart),
                   runs.front().epochs, cfg.seed};
}

struct NuisanceFits {
  FitResult treatment;
  FitResult outcome;
};

/// Fits T on X and Y on X with architectures grown by the given rules.
inline NuisanceFits fit_nuisances(const Dataset& data, const ScalingRule& rule_T, const ScalingRule& rule_Y,
                                  const TrainConfig& cfg) {
  data.validate();
  rule_T.validate();
  rule_Y.validate();
  if (rule_T.input_dim != data.dim() || rule_Y.input_dim != data.dim()) {
    throw ConfigError("fit_nuisances: rule input_dim does not match data dimension");
  }
  const std::size_t n = data.size();
  TrainConfig cfg_T = cfg;
  TrainConfig cfg_Y = cfg;
  cfg_T.seed = derive_seed(cfg.seed, 101);
  cfg_Y.seed = derive_seed(cfg.seed, 102);
  std::span<const double> t(data.treat.data(), n);
  std::span<const double> y(data.y.data(), n);
  return {fit(data.x, t, architecture_for(n, rule_T), cfg_T), fit(data.x, y, architecture_for(n, rule_Y), cfg_Y)};
}

}  // namespace plr
