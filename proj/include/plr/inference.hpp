#pragma once

// Long-run variance, standard errors and normal confidence intervals for the
// ratio estimator, plus first-stage rate bookkeeping.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "plr/dgp.hpp"
#include "plr/errors.hpp"
#include "plr/estimator.hpp"
#include "plr/sieve.hpp"

namespace plr {

/// Bartlett-kernel HAC estimate
///   gamma(0) + 2 sum_{j=1..bw} (1 - j/(bw+1)) gamma(j),
/// gamma(j) the demeaned sample autocovariance (divisor n). Floored at 0.
inline double long_run_variance(std::span<const double> series, std::size_t bandwidth) {
  const std::size_t n = series.size();
  if (n < 2) throw std::invalid_argument("long_run_variance: need at least 2 observations");
  if (bandwidth >= n) throw std::invalid_argument("long_run_variance: bandwidth must be < n");
  double mean = 0.0;
  for (double v : series) mean += v;
  mean /= static_cast<double>(n);
  std::vector<double> c(series.begin(), series.end());
  for (double& v : c) v -= mean;

  auto autocov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t t = lag; t < n; ++t) s += c[t] * c[t - lag];
    return s / static_cast<double>(n);
  };
  double lrv = autocov(0);
  for (std::size_t j = 1; j <= bandwidth; ++j) {
    const double w = 1.0 - static_cast<double>(j) / static_cast<double>(bandwidth + 1);
    lrv += 2.0 * w * autocov(j);
  }
  return std::max(0.0, lrv);
}

inline std::size_t default_bandwidth(std::size_t n) {
  auto bw = static_cast<std::size_t>(std::floor(std::cbrt(static_cast<double>(n))));
  // Guard against cbrt rounding just below an exact cube.
  while ((bw + 1) * (bw + 1) * (bw + 1) <= n) ++bw;
  return std::min(bw, n - 1);
}

/// Standard normal quantile: Acklam's rational approximation refined by one
/// Halley step against erfc.
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("normal_quantile: p must lie in (0, 1)");
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  const double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

struct Estimate {
  double theta_hat = 0.0;
  double se = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double level = 0.95;
  double lrv = 0.0;
  double denom = 0.0;  // mean of squared treatment residuals
  std::size_t n = 0;
  std::size_t bandwidth = 0;
  bool degenerate_variance = false;

  bool covers(double theta) const { return ci_low <= theta && theta <= ci_high; }
  double width() const { return ci_high - ci_low; }
};

/// theta +- z_{1-(1-level)/2} se.
inline std::pair<double, double> normal_interval(double theta, double se, double level) {
  if (!(level > 0.0 && level < 1.0)) throw std::domain_error("normal_interval: level must lie in (0, 1)");
  const double z = normal_quantile(1.0 - 0.5 * (1.0 - level));
  return {theta - z * se, theta + z * se};
}

/// Builds the full Estimate from moment parts: theta_hat, the HAC variance of
/// psi_t(theta_hat), se = sqrt(lrv) / (mean(a) sqrt(n)).
inline Estimate estimate_from_parts(const MomentParts& parts, double level,
                                    std::optional<std::size_t> bandwidth = std::nullopt) {
  if (!(level > 0.0 && level < 1.0)) throw std::domain_error("confidence_interval: level must lie in (0, 1)");
  const std::size_t n = parts.size();
  Estimate est;
  est.n = n;
  est.level = level;
  est.theta_hat = estimate_theta(parts);
  est.denom = parts.a_vals.mean();
  est.bandwidth = bandwidth.value_or(default_bandwidth(n));
  const Eigen::VectorXd psi = moment_series(parts, est.theta_hat);
  est.lrv = long_run_variance({psi.data(), n}, est.bandwidth);
  est.degenerate_variance = !(est.lrv > 0.0);
  est.se = std::sqrt(est.lrv) / (est.denom * std::sqrt(static_cast<double>(n)));
  std::tie(est.ci_low, est.ci_high) = normal_interval(est.theta_hat, est.se, level);
  return est;
}

template <class FT, class FY>
Estimate confidence_interval(const Dataset& data, const FT& fT, const FY& fY, double level,
                             std::optional<std::size_t> bandwidth = std::nullopt) {
  return estimate_from_parts(moment_parts(data, fT, fY), level, bandwidth);
}

struct RateInfo {
  double eps_n = 0.0;
  std::size_t n = 0;
  ScalingRule rule_T;
  ScalingRule rule_Y;
  double eps_times_quarter_root = 0.0;  // eps_n * n^{1/4}; must vanish for inference
};

/// eps_n = ln^6(n) max{ n^{-rate_T}, n^{-rate_Y} }.
inline RateInfo rate_eps(std::size_t n, const ScalingRule& rule_T, const ScalingRule& rule_Y) {
  rule_T.validate();
  rule_Y.validate();
  if (n < 2) throw ConfigError("rate_eps: n must be >= 2");
  if (rule_T.input_dim != rule_Y.input_dim) throw ConfigError("rate_eps: rules disagree on input_dim");
  const double nd = static_cast<double>(n);
  const double log6 = std::pow(std::log(nd), 6);
  const double eps = log6 * std::max(std::pow(nd, -rule_T.rate_exponent()), std::pow(nd, -rule_Y.rate_exponent()));
  return {eps, n, rule_T, rule_Y, eps * std::pow(nd, 0.25)};
}

}  // namespace plr
