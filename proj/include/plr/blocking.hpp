#pragma once

// Independent-block index partitions of {1..n} and an empirical Rademacher
// complexity diagnostic.
//
// Only index sets are produced here. The coupled independent-block sequence
// used in the asymptotic arguments has no computational counterpart.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "plr/errors.hpp"
#include "plr/mlp.hpp"
#include "plr/random.hpp"
#include "plr/sieve.hpp"

namespace plr {

/// 1-based inclusive range [first, last]; empty when last < first.
struct IndexRange {
  std::size_t first = 1;
  std::size_t last = 0;

  std::size_t size() const noexcept { return last >= first ? last - first + 1 : 0; }
  bool empty() const noexcept { return size() == 0; }
  friend bool operator==(const IndexRange&, const IndexRange&) = default;
};

struct BlockPartition {
  std::size_t n = 0;
  std::size_t a = 1;  // block length
  std::size_t b = 0;  // number of (odd, even) block pairs
  std::vector<IndexRange> odd_blocks;
  std::vector<IndexRange> even_blocks;
  IndexRange remainder;
};

/// odd_j = [2(j-1)a+1, (2j-1)a], even_j = [(2j-1)a+1, 2ja], remainder = [2ba+1, n],
/// with b = floor(n / 2a).
inline BlockPartition make_partition(std::size_t n, std::size_t a) {
  if (a < 1 || 2 * a > n) throw std::invalid_argument("make_partition: need 1 <= a <= n/2");
  BlockPartition p;
  p.n = n;
  p.a = a;
  p.b = n / (2 * a);
  p.odd_blocks.reserve(p.b);
  p.even_blocks.reserve(p.b);
  for (std::size_t j = 1; j <= p.b; ++j) {
    p.odd_blocks.push_back({2 * (j - 1) * a + 1, (2 * j - 1) * a});
    p.even_blocks.push_back({(2 * j - 1) * a + 1, 2 * j * a});
  }
  p.remainder = {2 * p.b * a + 1, n};
  return p;
}

/// ceil(2 ln n) clamped to [1, floor(n/2)].
inline std::size_t default_block_length(std::size_t n) {
  if (n < 2) throw std::invalid_argument("default_block_length: n must be >= 2");
  const auto raw = static_cast<std::size_t>(std::ceil(2.0 * std::log(static_cast<double>(n))));
  return std::clamp<std::size_t>(raw, 1, n / 2);
}

/// Rows (block_type, j, start, end) in time order; the remainder row has j = 0.
inline void write_partition_csv(std::ostream& os, const BlockPartition& p) {
  os << "block_type,j,start,end\n";
  for (std::size_t j = 0; j < p.b; ++j) {
    os << "odd," << (j + 1) << ',' << p.odd_blocks[j].first << ',' << p.odd_blocks[j].last << "\n";
    os << "even," << (j + 1) << ',' << p.even_blocks[j].first << ',' << p.even_blocks[j].last << "\n";
  }
  os << "remainder,0," << p.remainder.first << ',' << p.remainder.last << "\n";
}

// ---------------------------------------------------------------------------
// Rademacher complexity
//
// A function class exposes supremum(signs, x, restarts, rng), returning (an
// approximation from below of) sup_f (1/n) sum_t signs_t f(x_t).

template <class C>
concept RademacherClass = requires(const C& c, std::span<const double> signs, const RowMatrix& x, std::size_t r,
                                   Rng& rng) {
  { c.supremum(signs, x, r, rng) } -> std::convertible_to<double>;
  { c.empty() } -> std::convertible_to<bool>;
};

/// Explicit finite list of functions; the supremum is exact.
class FiniteFunctionClass {
 public:
  using Function = std::function<double(std::span<const double>)>;

  FiniteFunctionClass() = default;
  explicit FiniteFunctionClass(std::vector<Function> members) : members_(std::move(members)) {}

  void add(Function f) { members_.push_back(std::move(f)); }
  bool empty() const noexcept { return members_.empty(); }

  double supremum(std::span<const double> signs, const RowMatrix& x, std::size_t /*restarts*/, Rng& /*rng*/) const {
    const auto n = static_cast<std::size_t>(x.rows());
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& f : members_) {
      double s = 0.0;
      for (std::size_t t = 0; t < n; ++t) {
        s += signs[t] * f(std::span<const double>(x.data() + t * x.cols(), static_cast<std::size_t>(x.cols())));
      }
      best = std::max(best, s / static_cast<double>(n));
    }
    return best;
  }

 private:
  std::vector<Function> members_;
};

/// All networks of one architecture. The supremum is approximated by Adam
/// ascent from random starts, so the resulting complexity is a lower bound.
/// The zero network is always a candidate.
class NetworkFunctionClass {
 public:
  explicit NetworkFunctionClass(Architecture arch, std::size_t ascent_steps = 200, double step = 1e-2)
      : arch_(std::move(arch)), steps_(ascent_steps), step_(step) {
    arch_.validate();
  }

  bool empty() const noexcept { return false; }

  double supremum(std::span<const double> signs, const RowMatrix& x, std::size_t restarts, Rng& rng) const {
    const double n = static_cast<double>(x.rows());
    std::vector<double> weights(signs.begin(), signs.end());
    for (auto& w : weights) w /= n;
    std::vector<double> neg(weights.size());
    std::transform(weights.begin(), weights.end(), neg.begin(), [](double w) { return -w; });

    double best = 0.0;
    Parameters grad(arch_);
    BatchWorkspace ws;
    for (std::size_t r = 0; r < restarts; ++r) {
      Network net = Network::he_uniform(arch_, rng);
      Adam adam(grad.size(), step_);
      for (std::size_t s = 0; s < steps_; ++s) {
        const double value = -net.weighted_sum_gradient(x, neg, grad, ws);
        best = std::max(best, value);
        adam.update(net.mutable_parameters().flat(), grad.flat());
      }
      best = std::max(best, net.weighted_sum_gradient(x, weights, grad, ws));
    }
    return best;
  }

 private:
  Architecture arch_;
  std::size_t steps_;
  double step_;
};

/// Monte Carlo average over n_draws sign vectors of the class supremum.
template <RademacherClass C>
double empirical_rademacher(const C& cls, const RowMatrix& x, std::size_t n_draws, std::size_t n_restarts,
                            std::uint64_t seed) {
  if (cls.empty()) throw std::invalid_argument("empirical_rademacher: empty function class");
  if (n_draws < 1 || x.rows() < 1) throw std::invalid_argument("empirical_rademacher: need draws and data");
  Rng sign_rng = make_rng(seed, 21);
  Rng fit_rng = make_rng(seed, 22);
  std::bernoulli_distribution coin(0.5);
  std::vector<double> signs(static_cast<std::size_t>(x.rows()));
  double total = 0.0;
  for (std::size_t k = 0; k < n_draws; ++k) {
    for (auto& s : signs) s = coin(sign_rng) ? 1.0 : -1.0;
    total += cls.supremum(signs, x, n_restarts, fit_rng);
  }
  return total / static_cast<double>(n_draws);
}

/// Exact expectation over all 2^n sign vectors (n <= 24).
template <RademacherClass C>
double empirical_rademacher_exhaustive(const C& cls, const RowMatrix& x, std::size_t n_restarts,
                                       std::uint64_t seed) {
  if (cls.empty()) throw std::invalid_argument("empirical_rademacher: empty function class");
  const auto n = static_cast<std::size_t>(x.rows());
  if (n < 1 || n > 24) throw std::invalid_argument("empirical_rademacher_exhaustive: need 1 <= n <= 24");
  Rng fit_rng = make_rng(seed, 22);
  std::vector<double> signs(n);
  const std::uint64_t patterns = std::uint64_t{1} << n;
  double total = 0.0;
  for (std::uint64_t mask = 0; mask < patterns; ++mask) {
    for (std::size_t t = 0; t < n; ++t) signs[t] = (mask >> t) & 1U ? 1.0 : -1.0;
    total += cls.supremum(signs, x, n_restarts, fit_rng);
  }
  return total / static_cast<double>(patterns);
}

}  // namespace plr
