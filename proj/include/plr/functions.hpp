#pragma once

// Registry of named smooth scalar functions used as DGP components and as
// perturbation directions. A function of a covariate vector x is evaluated at
// the index u = mean(x), so every registered function is defined for any d.

#include <array>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <string_view>

#include "plr/errors.hpp"

namespace plr {

enum class BaseFunction { zero, sin, tanh_scaled, poly3 };

inline constexpr std::array<std::string_view, 4> kBaseFunctionNames{"zero", "sin", "tanh_scaled", "poly3"};

inline BaseFunction parse_base_function(std::string_view name) {
  for (std::size_t i = 0; i < kBaseFunctionNames.size(); ++i) {
    if (kBaseFunctionNames[i] == name) return static_cast<BaseFunction>(i);
  }
  throw ConfigError("unknown function id '" + std::string(name) +
                    "' (expected zero, sin, tanh_scaled or poly3)");
}

inline std::string_view to_string(BaseFunction f) { return kBaseFunctionNames[static_cast<std::size_t>(f)]; }

inline double evaluate_base(BaseFunction f, double u) {
  switch (f) {
    case BaseFunction::zero: return 0.0;
    case BaseFunction::sin: return std::sin(u);
    case BaseFunction::tanh_scaled: return 0.8 * std::tanh(u);
    case BaseFunction::poly3: return u - u * u * u / 3.0;
  }
  return 0.0;
}

/// offset + scale * base(frequency * u + shift), with u the mean of x.
struct NamedFunction {
  BaseFunction base = BaseFunction::zero;
  double scale = 1.0;
  double frequency = 1.0;
  double shift = 0.0;
  double offset = 0.0;

  static NamedFunction of(std::string_view name) { return {parse_base_function(name)}; }
  static NamedFunction constant(double c) { return {BaseFunction::zero, 1.0, 1.0, 0.0, c}; }

  double at_index(double u) const { return offset + scale * evaluate_base(base, frequency * u + shift); }

  double operator()(std::span<const double> x) const {
    if (x.empty()) throw ShapeError("named function: empty input");
    const double u = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    return at_index(u);
  }

  bool is_zero() const { return offset == 0.0 && (base == BaseFunction::zero || scale == 0.0); }
};

}  // namespace plr
