#pragma once

// Seeded simulators for the partially linear model
//   Y_t = T_t * theta0 + g0(X_t) + u_t
// with geometrically beta-mixing covariates: each coordinate of X is a
// stationary Gaussian AR(1) squashed through tanh.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "plr/errors.hpp"
#include "plr/functions.hpp"
#include "plr/mlp.hpp"
#include "plr/random.hpp"

namespace plr {

struct Dataset {
  Eigen::VectorXd y;
  Eigen::VectorXd treat;
  RowMatrix x;

  std::size_t size() const noexcept { return static_cast<std::size_t>(y.size()); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(x.cols()); }

  std::span<const double> row(std::size_t t) const {
    return {x.data() + t * dim(), dim()};
  }

  void validate() const {
    const auto n = y.size();
    if (n < 2) throw ConfigError("dataset: need at least 2 observations");
    if (treat.size() != n || x.rows() != n) throw ShapeError("dataset: series lengths differ");
    if (x.cols() < 1) throw ShapeError("dataset: covariate dimension must be >= 1");
    if (!y.allFinite() || !treat.allFinite() || !x.allFinite()) {
      throw ConfigError("dataset: non-finite entries");
    }
    if (treat.cwiseAbs().maxCoeff() > 1.0) throw ConfigError("dataset: treatment outside [-1, 1]");
  }
};

enum class NoiseKind { gaussian, student_t };

struct PlrDgpConfig {
  double theta0 = 2.0;
  NamedFunction g0 = NamedFunction::of("sin");
  NamedFunction f0T = NamedFunction::of("tanh_scaled");  // treatment index before clipping
  double rho_x = 0.5;
  double noise_sd_u = 0.5;
  double noise_sd_v = 0.5;
  std::size_t n = 1000;
  std::size_t d = 1;
  std::size_t burn_in = 500;
  std::uint64_t seed = 0;
  NoiseKind y_noise = NoiseKind::gaussian;

  void validate() const {
    if (!(std::abs(rho_x) < 1.0)) throw ConfigError("dgp: rho_x must lie in (-1, 1)");
    if (!(noise_sd_u >= 0.0) || !(noise_sd_v >= 0.0)) throw ConfigError("dgp: noise sds must be >= 0");
    if (n < 2) throw ConfigError("dgp: n must be >= 2");
    if (d < 1) throw ConfigError("dgp: d must be >= 1");
    if (!std::isfinite(theta0)) throw ConfigError("dgp: theta0 must be finite");
  }
};

namespace detail {

inline double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }
inline double std_normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI); }

}  // namespace detail

/// E[clip(m + s*Z, -1, 1)] for standard normal Z.
inline double censored_normal_mean(double m, double s) {
  if (s <= 0.0) return std::clamp(m, -1.0, 1.0);
  const double lo = (-1.0 - m) / s;
  const double hi = (1.0 - m) / s;
  const double p_lo = detail::std_normal_cdf(lo);
  const double p_hi = detail::std_normal_cdf(hi);
  return -p_lo + (1.0 - p_hi) + m * (p_hi - p_lo) + s * (detail::std_normal_pdf(lo) - detail::std_normal_pdf(hi));
}

/// Ground-truth conditional means of a configured DGP.
///
/// Because T is clipped to [-1, 1], E[T | X] is the censored-normal mean of the
/// configured treatment index, not the index itself.
class Oracle {
 public:
  explicit Oracle(PlrDgpConfig cfg) : cfg_(std::move(cfg)) {}

  double theta0() const noexcept { return cfg_.theta0; }

  double treatment_mean(std::span<const double> x) const {
    return censored_normal_mean(cfg_.f0T(x), cfg_.noise_sd_v);
  }
  double outcome_mean(std::span<const double> x) const {
    return cfg_.theta0 * treatment_mean(x) + cfg_.g0(x);
  }

  auto f0T() const {
    return [self = *this](std::span<const double> x) { return self.treatment_mean(x); };
  }
  auto f0Y() const {
    return [self = *this](std::span<const double> x) { return self.outcome_mean(x); };
  }

  const PlrDgpConfig& config() const noexcept { return cfg_; }

 private:
  PlrDgpConfig cfg_;
};

struct Simulation {
  Dataset data;
  Oracle oracle;
};

inline Simulation simulate(const PlrDgpConfig& cfg) {
  cfg.validate();
  Rng x_rng = make_rng(cfg.seed, 1);
  Rng v_rng = make_rng(cfg.seed, 2);
  Rng u_rng = make_rng(cfg.seed, 3);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::student_t_distribution<double> student(8.0);

  const std::size_t n = cfg.n;
  const std::size_t d = cfg.d;
  const double innovation_sd = std::sqrt(1.0 - cfg.rho_x * cfg.rho_x);

  Dataset data;
  data.x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  data.treat.resize(static_cast<Eigen::Index>(n));
  data.y.resize(static_cast<Eigen::Index>(n));

  std::vector<double> latent(d);
  for (auto& z : latent) z = normal(x_rng);  // stationary start
  for (std::size_t t = 0; t < cfg.burn_in + n; ++t) {
    for (auto& z : latent) z = cfg.rho_x * z + innovation_sd * normal(x_rng);
    if (t < cfg.burn_in) continue;
    const auto row = static_cast<Eigen::Index>(t - cfg.burn_in);
    for (std::size_t j = 0; j < d; ++j) data.x(row, static_cast<Eigen::Index>(j)) = std::tanh(latent[j]);
  }

  // t-noise with 8 degrees of freedom is rescaled to unit variance.
  const double t_scale = std::sqrt(6.0 / 8.0);
  for (std::size_t t = 0; t < n; ++t) {
    const auto i = static_cast<Eigen::Index>(t);
    const auto x = data.row(t);
    const double v = cfg.noise_sd_v * normal(v_rng);
    const double u_draw = cfg.y_noise == NoiseKind::gaussian ? normal(u_rng) : t_scale * student(u_rng);
    const double u = cfg.noise_sd_u * u_draw;
    data.treat(i) = std::clamp(cfg.f0T(x) + v, -1.0, 1.0);
    data.y(i) = data.treat(i) * cfg.theta0 + cfg.g0(x) + u;
  }
  return {std::move(data), Oracle(cfg)};
}

/// eT_t = T_t - f0T(X_t), eY_t = Y_t - f0Y(X_t).
template <class FT, class FY>
std::pair<Eigen::VectorXd, Eigen::VectorXd> oracle_residuals(const Dataset& data, const FT& f0T, const FY& f0Y) {
  const auto n = static_cast<Eigen::Index>(data.size());
  Eigen::VectorXd eT(n), eY(n);
  for (Eigen::Index t = 0; t < n; ++t) {
    const auto x = data.row(static_cast<std::size_t>(t));
    eT(t) = data.treat(t) - f0T(x);
    eY(t) = data.y(t) - f0Y(x);
  }
  return {std::move(eT), std::move(eY)};
}

inline void write_dataset_csv(std::ostream& os, const Dataset& data) {
  os << "t,y,treat";
  for (std::size_t j = 1; j <= data.dim(); ++j) os << ",x" << j;
  os << "\n";
  char buf[32];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << ',' << buf;
  };
  for (std::size_t t = 0; t < data.size(); ++t) {
    os << (t + 1);
    put(data.y(static_cast<Eigen::Index>(t)));
    put(data.treat(static_cast<Eigen::Index>(t)));
    for (double v : data.row(t)) put(v);
    os << "\n";
  }
}

inline Dataset read_dataset_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("dataset csv: empty input");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  if (header.size() < 4 || header[0] != "t" || header[1] != "y" || header[2] != "treat") {
    throw ConfigError("dataset csv: header must be t,y,treat,x1..xd");
  }
  const std::size_t d = header.size() - 3;
  for (std::size_t j = 0; j < d; ++j) {
    if (header[3 + j] != "x" + std::to_string(j + 1)) throw ConfigError("dataset csv: bad covariate column");
  }

  std::vector<double> ys, ts, xs;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> cells;
    while (std::getline(ss, cell, ',')) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str()) throw ConfigError("dataset csv: bad number on line " + std::to_string(line_no));
      cells.push_back(v);
    }
    if (cells.size() != header.size()) throw ConfigError("dataset csv: wrong column count on line " + std::to_string(line_no));
    ys.push_back(cells[1]);
    ts.push_back(cells[2]);
    xs.insert(xs.end(), cells.begin() + 3, cells.end());
  }
  const auto n = static_cast<Eigen::Index>(ys.size());
  Dataset data;
  data.y = Eigen::Map<Eigen::VectorXd>(ys.data(), n);
  data.treat = Eigen::Map<Eigen::VectorXd>(ts.data(), n);
  data.x = Eigen::Map<RowMatrix>(xs.data(), n, static_cast<Eigen::Index>(d));
  data.validate();
  return data;
}

}  // namespace plr
