#pragma once

#include <stdexcept>
#include <string>

namespace plr {

/// Tensor or vector dimensions that do not match the owning architecture.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Invalid user-supplied configuration (bad rule, bad DGP field, bad file).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Sum of squared treatment residuals too small for the ratio estimator to exist.
class DegenerateDenominator : public std::runtime_error {
 public:
  explicit DegenerateDenominator(double denominator_sum)
      : std::runtime_error("degenerate denominator: sum of squared treatment residuals = " +
                           std::to_string(denominator_sum)),
        sum_(denominator_sum) {}

  double denominator_sum() const noexcept { return sum_; }

 private:
  double sum_;
};

}  // namespace plr
