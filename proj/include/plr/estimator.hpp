#pragma once

// Two-stage ratio estimator for the scalar coefficient of the partially
// linear model, built on the linear moment
//   psi(Z; theta, fT, fY) = (T - fT(X))^2 theta - (T - fT(X)) (Y - fY(X)).

#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <stdexcept>

#include "plr/dgp.hpp"
#include "plr/errors.hpp"

namespace plr {

/// Per-observation pieces of the moment: psi_t(theta) = a_t * theta - b_t.
struct MomentParts {
  Eigen::VectorXd a_vals;  // (T_t - fT(X_t))^2
  Eigen::VectorXd b_vals;  // (T_t - fT(X_t)) (Y_t - fY(X_t))

  std::size_t size() const noexcept { return static_cast<std::size_t>(a_vals.size()); }

  static MomentParts from_residuals(const Eigen::VectorXd& treat_resid, const Eigen::VectorXd& outcome_resid) {
    if (treat_resid.size() != outcome_resid.size()) throw ShapeError("moment parts: residual lengths differ");
    return {treat_resid.array().square().matrix(), treat_resid.cwiseProduct(outcome_resid)};
  }
};

template <class FT, class FY>
double moment_psi(double y, double t_val, std::span<const double> x, double theta, const FT& fT, const FY& fY) {
  const double et = t_val - fT(x);
  const double ey = y - fY(x);
  const double psi = et * et * theta - et * ey;
  if (!std::isfinite(psi)) throw std::domain_error("moment_psi: non-finite evaluation");
  return psi;
}

template <class FT, class FY>
MomentParts moment_parts(const Dataset& data, const FT& fT, const FY& fY) {
  const auto n = static_cast<Eigen::Index>(data.size());
  MomentParts parts{Eigen::VectorXd(n), Eigen::VectorXd(n)};
  for (Eigen::Index t = 0; t < n; ++t) {
    const auto x = data.row(static_cast<std::size_t>(t));
    const double et = data.treat(t) - fT(x);
    const double ey = data.y(t) - fY(x);
    if (!std::isfinite(et) || !std::isfinite(ey)) throw std::domain_error("moment_parts: non-finite evaluation");
    parts.a_vals(t) = et * et;
    parts.b_vals(t) = et * ey;
  }
  return parts;
}

inline double default_denominator_tolerance(std::size_t n) { return 1e-10 * static_cast<double>(n); }

/// theta_hat = sum(b) / sum(a). Throws DegenerateDenominator when sum(a) <= tol.
inline double estimate_theta(const MomentParts& parts, double denom_tol) {
  if (parts.a_vals.size() != parts.b_vals.size() || parts.a_vals.size() == 0) {
    throw ShapeError("estimate_theta: moment parts must be non-empty and equal length");
  }
  const double denom = parts.a_vals.sum();
  if (!(denom > denom_tol)) throw DegenerateDenominator(denom);
  return parts.b_vals.sum() / denom;
}

inline double estimate_theta(const MomentParts& parts) {
  return estimate_theta(parts, default_denominator_tolerance(parts.size()));
}

/// (1/n) sum(a_t theta - b_t).
inline double empirical_moment(const MomentParts& parts, double theta) {
  return (parts.a_vals.array() * theta - parts.b_vals.array()).mean();
}

/// psi_t(theta) for every t.
inline Eigen::VectorXd moment_series(const MomentParts& parts, double theta) {
  return (parts.a_vals.array() * theta - parts.b_vals.array()).matrix();
}

}  // namespace plr
