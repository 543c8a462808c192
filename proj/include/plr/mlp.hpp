#pragma once

// Bounded-output fully connected ReLU network.
//
// A network with hidden widths H_1..H_L maps x in R^d through L ReLU layers
// and a final affine unit; the affine output is hard-clipped to [-B, B].
// Parameters are stored flat, layer by layer, each layer as its weight
// matrix (out x in, row-major) followed by its bias vector.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "plr/errors.hpp"
#include "plr/random.hpp"

namespace plr {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Architecture {
  std::size_t input_dim = 1;
  std::vector<std::size_t> hidden_widths{1};
  double output_bound = 2.0;

  std::size_t depth() const noexcept { return hidden_widths.size(); }

  // Number of affine maps, hidden layers plus the output unit.
  std::size_t num_layers() const noexcept { return hidden_widths.size() + 1; }

  std::size_t fan_in(std::size_t layer) const {
    return layer == 0 ? input_dim : hidden_widths.at(layer - 1);
  }
  std::size_t fan_out(std::size_t layer) const {
    return layer < hidden_widths.size() ? hidden_widths[layer] : 1;
  }

  void validate() const {
    if (input_dim < 1) throw ConfigError("architecture: input_dim must be >= 1");
    if (hidden_widths.empty()) throw ConfigError("architecture: need at least one hidden layer");
    for (auto h : hidden_widths) {
      if (h < 1) throw ConfigError("architecture: hidden widths must be >= 1");
    }
    if (!(output_bound >= 2.0) || !std::isfinite(output_bound)) {
      throw ConfigError("architecture: output bound must be finite and >= 2");
    }
  }

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

/// W = (d+1)H_1 + sum_{l>=2} (H_{l-1}+1)H_l + (H_L+1).
inline std::size_t parameter_count(const Architecture& arch) {
  arch.validate();
  std::size_t total = 0;
  for (std::size_t l = 0; l < arch.num_layers(); ++l) {
    total += (arch.fan_in(l) + 1) * arch.fan_out(l);
  }
  return total;
}

class Parameters {
 public:
  using MatrixMap = Eigen::Map<RowMatrix>;
  using ConstMatrixMap = Eigen::Map<const RowMatrix>;
  using VectorMap = Eigen::Map<Eigen::VectorXd>;
  using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;

  Parameters() = default;

  explicit Parameters(const Architecture& arch) { layout(arch); values_.assign(total_, 0.0); }

  Parameters(const Architecture& arch, std::vector<double> flat) {
    layout(arch);
    if (flat.size() != total_) {
      throw ShapeError("parameters: flat length " + std::to_string(flat.size()) +
                       " does not match parameter count " + std::to_string(total_));
    }
    values_ = std::move(flat);
  }

  std::size_t size() const noexcept { return values_.size(); }
  std::size_t num_layers() const noexcept { return shapes_.size(); }

  ConstMatrixMap weights(std::size_t l) const {
    const auto& s = shapes_.at(l);
    return {values_.data() + s.offset, static_cast<Eigen::Index>(s.out),
            static_cast<Eigen::Index>(s.in)};
  }
  MatrixMap weights(std::size_t l) {
    const auto& s = shapes_.at(l);
    return {values_.data() + s.offset, static_cast<Eigen::Index>(s.out),
            static_cast<Eigen::Index>(s.in)};
  }
  ConstVectorMap bias(std::size_t l) const {
    const auto& s = shapes_.at(l);
    return {values_.data() + s.offset + s.in * s.out, static_cast<Eigen::Index>(s.out)};
  }
  VectorMap bias(std::size_t l) {
    const auto& s = shapes_.at(l);
    return {values_.data() + s.offset + s.in * s.out, static_cast<Eigen::Index>(s.out)};
  }

  std::span<const double> flat() const noexcept { return values_; }
  std::span<double> flat() noexcept { return values_; }

  bool compatible_with(const Architecture& arch) const {
    if (shapes_.size() != arch.num_layers()) return false;
    for (std::size_t l = 0; l < shapes_.size(); ++l) {
      if (shapes_[l].in != arch.fan_in(l) || shapes_[l].out != arch.fan_out(l)) return false;
    }
    return true;
  }

  void set_zero() { std::fill(values_.begin(), values_.end(), 0.0); }

 private:
  struct LayerShape {
    std::size_t in;
    std::size_t out;
    std::size_t offset;
  };

  void layout(const Architecture& arch) {
    arch.validate();
    shapes_.clear();
    std::size_t offset = 0;
    for (std::size_t l = 0; l < arch.num_layers(); ++l) {
      shapes_.push_back({arch.fan_in(l), arch.fan_out(l), offset});
      offset += (arch.fan_in(l) + 1) * arch.fan_out(l);
    }
    total_ = offset;
  }

  std::vector<LayerShape> shapes_;
  std::vector<double> values_;
  std::size_t total_ = 0;
};

// Scratch buffers for mini-batch passes; reused across steps to avoid reallocation.
struct BatchWorkspace {
  RowMatrix inputs;
  std::vector<RowMatrix> pre;   // pre-activations per hidden layer
  std::vector<RowMatrix> post;  // ReLU outputs per hidden layer
  Eigen::VectorXd raw;
  Eigen::VectorXd upstream;
  RowMatrix delta;
  RowMatrix delta_prev;
};

class Network {
 public:
  Network(Architecture arch, Parameters params) : arch_(std::move(arch)), params_(std::move(params)) {
    arch_.validate();
    if (!params_.compatible_with(arch_)) {
      throw ShapeError("network: parameter shapes do not match architecture");
    }
  }

  static Network zeros(const Architecture& arch) { return Network(arch, Parameters(arch)); }

  // Uniform(+-sqrt(6 / fan_in)) weights, zero biases.
  static Network he_uniform(const Architecture& arch, Rng& rng) {
    Parameters p(arch);
    for (std::size_t l = 0; l < arch.num_layers(); ++l) {
      const double limit = std::sqrt(6.0 / static_cast<double>(arch.fan_in(l)));
      std::uniform_real_distribution<double> dist(-limit, limit);
      auto w = p.weights(l);
      for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
    }
    return Network(arch, std::move(p));
  }

  const Architecture& architecture() const noexcept { return arch_; }
  const Parameters& parameters() const noexcept { return params_; }
  Parameters& mutable_parameters() noexcept { return params_; }
  double bound() const noexcept { return arch_.output_bound; }

  /// Affine output of the last layer before clipping.
  double raw_output(std::span<const double> x) const {
    check_input(x.size());
    Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
    for (std::size_t l = 0; l + 1 < params_.num_layers(); ++l) {
      a = (params_.weights(l) * a + params_.bias(l)).cwiseMax(0.0);
    }
    const std::size_t out = params_.num_layers() - 1;
    return (params_.weights(out) * a)(0) + params_.bias(out)(0);
  }

  double forward(std::span<const double> x) const {
    return std::clamp(raw_output(x), -bound(), bound());
  }

  double operator()(std::span<const double> x) const { return forward(x); }

  /// d(forward)/d(parameters) at x, scaled by upstream. ReLU kinks and the
  /// clipped region contribute zero.
  Parameters gradient(std::span<const double> x, double upstream) const {
    check_input(x.size());
    const std::size_t hidden = arch_.depth();
    std::vector<Eigen::VectorXd> acts;
    acts.reserve(hidden + 1);
    acts.emplace_back(Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size())));
    for (std::size_t l = 0; l < hidden; ++l) {
      acts.push_back(params_.weights(l) * acts.back() + params_.bias(l));  // pre-activation
      acts.back() = acts.back().cwiseMax(0.0);
    }
    const double raw = (params_.weights(hidden) * acts.back())(0) + params_.bias(hidden)(0);

    Parameters grad(arch_);
    if (std::abs(raw) > bound()) return grad;

    Eigen::VectorXd delta = Eigen::VectorXd::Constant(1, upstream);
    for (std::size_t l = hidden + 1; l-- > 0;) {
      grad.weights(l).noalias() = delta * acts[l].transpose();
      grad.bias(l) = delta;
      if (l == 0) break;
      Eigen::VectorXd back = params_.weights(l).transpose() * delta;
      // acts[l] > 0 exactly where the pre-activation was positive.
      delta = back.cwiseProduct((acts[l].array() > 0.0).cast<double>().matrix());
    }
    return grad;
  }

  /// Clipped outputs for every row of x.
  Eigen::VectorXd forward_batch(const RowMatrix& x) const {
    check_input(static_cast<std::size_t>(x.cols()));
    RowMatrix a = x;
    for (std::size_t l = 0; l + 1 < params_.num_layers(); ++l) {
      RowMatrix z = a * params_.weights(l).transpose();
      z.rowwise() += params_.bias(l).transpose();
      a = z.cwiseMax(0.0);
    }
    const std::size_t out = params_.num_layers() - 1;
    Eigen::VectorXd raw = a * params_.weights(out).transpose();
    raw.array() += params_.bias(out)(0);
    return raw.cwiseMax(-bound()).cwiseMin(bound());
  }

  /// Mean squared error over the selected rows; writes the gradient of that
  /// mean into grad (which must be shaped for this architecture).
  double loss_gradient(const RowMatrix& x, std::span<const double> targets,
                       std::span<const std::size_t> rows, Parameters& grad, BatchWorkspace& ws) const {
    check_input(static_cast<std::size_t>(x.cols()));
    const auto m = static_cast<Eigen::Index>(rows.size());
    ws.inputs.resize(m, x.cols());
    for (Eigen::Index i = 0; i < m; ++i) ws.inputs.row(i) = x.row(static_cast<Eigen::Index>(rows[i]));
    forward_workspace(ws);

    ws.upstream.resize(m);
    double loss = 0.0;
    const double scale = 2.0 / static_cast<double>(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      const double raw = ws.raw(i);
      const double r = std::clamp(raw, -bound(), bound()) - targets[rows[i]];
      loss += r * r;
      ws.upstream(i) = std::abs(raw) > bound() ? 0.0 : scale * r;
    }
    backprop_workspace(ws, grad);
    return loss / static_cast<double>(m);
  }

  /// sum_t w_t f(x_t) over all rows of x; writes its parameter gradient into grad.
  double weighted_sum_gradient(const RowMatrix& x, std::span<const double> weights, Parameters& grad,
                               BatchWorkspace& ws) const {
    check_input(static_cast<std::size_t>(x.cols()));
    if (weights.size() != static_cast<std::size_t>(x.rows())) throw ShapeError("weighted_sum_gradient: length mismatch");
    ws.inputs = x;
    forward_workspace(ws);
    ws.upstream.resize(x.rows());
    double total = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const double raw = ws.raw(i);
      const double w = weights[static_cast<std::size_t>(i)];
      total += w * std::clamp(raw, -bound(), bound());
      ws.upstream(i) = std::abs(raw) > bound() ? 0.0 : w;
    }
    backprop_workspace(ws, grad);
    return total;
  }

 private:
  void forward_workspace(BatchWorkspace& ws) const {
    const std::size_t hidden = arch_.depth();
    ws.pre.resize(hidden);
    ws.post.resize(hidden);
    for (std::size_t l = 0; l < hidden; ++l) {
      const RowMatrix& in = l == 0 ? ws.inputs : ws.post[l - 1];
      ws.pre[l].noalias() = in * params_.weights(l).transpose();
      ws.pre[l].rowwise() += params_.bias(l).transpose();
      ws.post[l] = ws.pre[l].cwiseMax(0.0);
    }
    ws.raw.noalias() = ws.post.back() * params_.weights(hidden).transpose();
    ws.raw.array() += params_.bias(hidden)(0);
  }

  // Expects ws.upstream = d(objective)/d(output) per row.
  void backprop_workspace(BatchWorkspace& ws, Parameters& grad) const {
    const std::size_t hidden = arch_.depth();
    grad.weights(hidden).noalias() = ws.upstream.transpose() * ws.post.back();
    grad.bias(hidden)(0) = ws.upstream.sum();
    ws.delta.noalias() = ws.upstream * params_.weights(hidden);
    for (std::size_t l = hidden; l-- > 0;) {
      ws.delta.array() *= (ws.pre[l].array() > 0.0).cast<double>();
      const RowMatrix& in = l == 0 ? ws.inputs : ws.post[l - 1];
      grad.weights(l).noalias() = ws.delta.transpose() * in;
      grad.bias(l) = ws.delta.colwise().sum().transpose();
      if (l == 0) break;
      ws.delta_prev.noalias() = ws.delta * params_.weights(l);
      ws.delta.swap(ws.delta_prev);
    }
  }

  void check_input(std::size_t dim) const {
    if (dim != arch_.input_dim) {
      throw ShapeError("network: input has dimension " + std::to_string(dim) + ", expected " +
                       std::to_string(arch_.input_dim));
    }
  }

  Architecture arch_;
  Parameters params_;
};

// Text record: header lines followed by one hex-float parameter per line.
// Hex floats make the round trip bit-exact.
inline void save_network(std::ostream& os, const Network& net) {
  const auto& arch = net.architecture();
  std::ostringstream body;
  body << "plr-mlp 1\n";
  body << "input_dim " << arch.input_dim << "\n";
  body << "hidden_layers " << arch.depth();
  for (auto h : arch.hidden_widths) body << ' ' << h;
  body << "\n";
  body << std::hexfloat;
  body << "output_bound " << arch.output_bound << "\n";
  body << "parameters " << std::dec << net.parameters().size() << "\n" << std::hexfloat;
  for (double v : net.parameters().flat()) body << v << "\n";
  os << body.str();
}

namespace detail {

inline double parse_double(const std::string& token) {
  char* end = nullptr;
  const double v = std::strtod(token.c_str(), &end);
  if (end == token.c_str() || *end != '\0') throw ConfigError("network file: bad number '" + token + "'");
  return v;
}

inline void expect_key(std::istream& is, const std::string& key) {
  std::string got;
  if (!(is >> got) || got != key) throw ConfigError("network file: expected '" + key + "', got '" + got + "'");
}

}  // namespace detail

inline Network load_network(std::istream& is) {
  detail::expect_key(is, "plr-mlp");
  int version = 0;
  if (!(is >> version) || version != 1) throw ConfigError("network file: unsupported version");
  Architecture arch;
  detail::expect_key(is, "input_dim");
  is >> arch.input_dim;
  detail::expect_key(is, "hidden_layers");
  std::size_t depth = 0;
  is >> depth;
  arch.hidden_widths.assign(depth, 0);
  for (auto& h : arch.hidden_widths) is >> h;
  detail::expect_key(is, "output_bound");
  std::string token;
  is >> token;
  arch.output_bound = detail::parse_double(token);
  detail::expect_key(is, "parameters");
  std::size_t count = 0;
  is >> count;
  if (!is) throw ConfigError("network file: truncated header");
  std::vector<double> flat(count);
  for (auto& v : flat) {
    if (!(is >> token)) throw ConfigError("network file: truncated parameter list");
    v = detail::parse_double(token);
  }
  return Network(arch, Parameters(arch, std::move(flat)));
}

}  // namespace plr
