#pragma once

// Numerical checks of the orthogonality structure of the linear moment.
//
// Along the nuisance path F(lambda) = (f0T, f0Y) + lambda (hT - f0T, hY - f0Y)
// the population moment at theta0 is
//   M(lambda) = lambda^2 (theta0 E[dT^2] - E[dT dY]),
// so dM/dlambda(0) = 0 and d2M/dlambda2 = 2 theta0 E[dT^2] - 2 E[dT dY].
// Expectations are replaced by Monte Carlo averages over one simulated sample
// shared by every lambda (common random numbers), so M-hat is an exact
// quadratic in lambda.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "plr/dgp.hpp"
#include "plr/errors.hpp"
#include "plr/functions.hpp"

namespace plr {

/// Path endpoint offsets: hT = f0T + delta_T, hY = f0Y + delta_Y.
struct Direction {
  NamedFunction delta_T;
  NamedFunction delta_Y;

  bool is_zero() const { return delta_T.is_zero() && delta_Y.is_zero(); }
};

/// Checks |hT| <= 2 and |hY| <= outcome_bound on a dense grid of the
/// covariate index in [-1, 1].
inline void validate_direction(const Direction& dir, const Oracle& oracle, double outcome_bound,
                               std::size_t grid = 2001) {
  constexpr double tol = 1e-6;
  const std::size_t d = oracle.config().d;
  std::vector<double> x(d);
  for (std::size_t i = 0; i < grid; ++i) {
    const double u = -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(grid - 1);
    std::fill(x.begin(), x.end(), u);
    const double hT = oracle.treatment_mean(x) + dir.delta_T(x);
    const double hY = oracle.outcome_mean(x) + dir.delta_Y(x);
    if (!std::isfinite(hT) || !std::isfinite(hY)) throw ConfigError("direction: non-finite value");
    if (std::abs(hT) > 2.0 + tol) throw ConfigError("direction: |hT| exceeds 2");
    if (std::abs(hY) > outcome_bound + tol) throw ConfigError("direction: |hY| exceeds the outcome bound");
  }
}

struct MonteCarloValue {
  double value = 0.0;
  double mc_se = 0.0;
};

inline MonteCarloValue mc_mean(const Eigen::ArrayXd& draws) {
  const double n = static_cast<double>(draws.size());
  const double mean = draws.mean();
  const double var = draws.size() > 1 ? (draws - mean).square().sum() / (n - 1.0) : 0.0;
  return {mean, std::sqrt(var / n)};
}

/// One simulated sample with oracle residuals and direction values, reused
/// for every lambda.
class MomentPathSample {
 public:
  static constexpr std::size_t kMinDraws = 1000;

  MomentPathSample(const PlrDgpConfig& cfg, const Direction& dir, std::size_t mc_n, std::uint64_t seed) {
    if (mc_n < kMinDraws) throw std::invalid_argument("moment path: mc_n must be >= 1000");
    PlrDgpConfig sim_cfg = cfg;
    sim_cfg.n = mc_n;
    sim_cfg.seed = seed;
    const Simulation sim = simulate(sim_cfg);
    theta0_ = cfg.theta0;
    const auto n = static_cast<Eigen::Index>(mc_n);
    eT_.resize(n);
    eY_.resize(n);
    dT_.resize(n);
    dY_.resize(n);
    for (Eigen::Index t = 0; t < n; ++t) {
      const auto x = sim.data.row(static_cast<std::size_t>(t));
      eT_(t) = sim.data.treat(t) - sim.oracle.treatment_mean(x);
      eY_(t) = sim.data.y(t) - sim.oracle.outcome_mean(x);
      dT_(t) = dir.delta_T(x);
      dY_(t) = dir.delta_Y(x);
    }
  }

  std::size_t size() const noexcept { return static_cast<std::size_t>(eT_.size()); }
  double theta0() const noexcept { return theta0_; }

  /// psi_t(theta; F(lambda)) for every draw.
  Eigen::ArrayXd psi(double theta, double lambda) const {
    const Eigen::ArrayXd rt = eT_ - lambda * dT_;
    const Eigen::ArrayXd ry = eY_ - lambda * dY_;
    return rt.square() * theta - rt * ry;
  }

  MonteCarloValue moment(double theta, double lambda) const { return mc_mean(psi(theta, lambda)); }

  /// Central difference of M at 0 with step h; with richardson, combines
  /// steps h and h/2 as (4 D(h/2) - D(h)) / 3.
  MonteCarloValue first_derivative(double theta, double h = 1e-3, bool richardson = false) const {
    auto quotient = [&](double step) -> Eigen::ArrayXd {
      return (psi(theta, step) - psi(theta, -step)) / (2.0 * step);
    };
    if (!richardson) return mc_mean(quotient(h));
    return mc_mean((4.0 * quotient(0.5 * h) - quotient(h)) / 3.0);
  }

  /// Per-draw curvature terms theta dT^2 - dT dY; their mean is M''/2.
  Eigen::ArrayXd curvature(double theta) const { return theta * dT_.square() - dT_ * dY_; }

  /// 2 theta E[dT^2] - 2 E[dT dY].
  MonteCarloValue second_derivative_closed_form(double theta) const {
    const MonteCarloValue half = mc_mean(curvature(theta));
    return {2.0 * half.value, 2.0 * half.mc_se};
  }

  /// M(lambda) - lambda^2 (theta E[dT^2] - E[dT dY]) with its standard error.
  MonteCarloValue taylor_residual(double theta, double lambda) const {
    return mc_mean(psi(theta, lambda) - lambda * lambda * curvature(theta));
  }

 private:
  double theta0_ = 0.0;
  Eigen::ArrayXd eT_, eY_, dT_, dY_;
};

inline MonteCarloValue population_moment_path(const PlrDgpConfig& cfg, const Direction& dir, double theta,
                                              double lambda, std::size_t mc_n, std::uint64_t seed) {
  return MomentPathSample(cfg, dir, mc_n, seed).moment(theta, lambda);
}

/// Central difference [M(h) - M(-h)] / 2h of any scalar path.
inline double central_difference(const std::function<double(double)>& path, double h = 1e-3,
                                 bool richardson = false) {
  auto quotient = [&](double step) { return (path(step) - path(-step)) / (2.0 * step); };
  return richardson ? (4.0 * quotient(0.5 * h) - quotient(h)) / 3.0 : quotient(h);
}

inline MonteCarloValue gateaux_first_derivative(const PlrDgpConfig& cfg, const Direction& dir, double theta0,
                                                std::size_t mc_n, std::uint64_t seed) {
  if (dir.is_zero()) return {0.0, 0.0};
  return MomentPathSample(cfg, dir, mc_n, seed).first_derivative(theta0);
}

inline MonteCarloValue gateaux_second_derivative_closed_form(const PlrDgpConfig& cfg, const Direction& dir,
                                                             double theta0, std::size_t mc_n, std::uint64_t seed) {
  return MomentPathSample(cfg, dir, mc_n, seed).second_derivative_closed_form(theta0);
}

/// Random smooth perturbation: scale * base(freq * u + shift) + offset with
/// base drawn from {sin, tanh_scaled, poly3}.
inline NamedFunction random_named_function(Rng& rng, double max_scale) {
  std::uniform_int_distribution<int> pick(1, 3);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> freq(0.5, 2.0);
  NamedFunction f;
  f.base = static_cast<BaseFunction>(pick(rng));
  f.scale = max_scale * unit(rng);
  f.frequency = freq(rng);
  f.shift = unit(rng);
  f.offset = 0.3 * max_scale * unit(rng);
  return f;
}

/// Draws directions until one passes validate_direction.
inline Direction random_direction(Rng& rng, const Oracle& oracle, double outcome_bound, double max_scale = 0.5) {
  for (int attempt = 0; attempt < 1000; ++attempt) {
    Direction dir{random_named_function(rng, max_scale), random_named_function(rng, max_scale)};
    try {
      validate_direction(dir, oracle, outcome_bound, 201);
      return dir;
    } catch (const ConfigError&) {
    }
  }
  throw ConfigError("random_direction: could not draw a bounded direction");
}

}  // namespace plr
