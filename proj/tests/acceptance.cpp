// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Set PLR_THREADS to parallelise the Monte Carlo studies.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "plr/plr.hpp"

using namespace plr;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

Outcome exact_zero_moment() {
  Rng rng(1);
  std::normal_distribution<double> z;
  std::uniform_int_distribution<std::size_t> size(2, 2000);
  std::uniform_real_distribution<double> log_scale(-3.0, 3.0);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto n = static_cast<Eigen::Index>(size(rng));
    const double st = std::pow(10.0, log_scale(rng)), sy = std::pow(10.0, log_scale(rng));
    Eigen::VectorXd eT(n), eY(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      eT(i) = st * z(rng);
      eY(i) = sy * z(rng);
    }
    const MomentParts parts = MomentParts::from_residuals(eT, eY);
    const double theta = estimate_theta(parts);
    const double bound = 1e-12 * (1.0 + parts.b_vals.cwiseAbs().mean());
    worst = std::max(worst, std::abs(empirical_moment(parts, theta)) / bound);
  }
  return {worst <= 1.0, fmt("1000 random parts, max |moment| / tolerance = %.3g", worst)};
}

Outcome root_n_rate() {
  ExperimentConfig cfg = default_experiment();
  cfg.n_grid = {500, 1000, 2000, 4000};
  cfg.replications = 200;
  const RateStudyResult res = run_rate_study(cfg);
  std::string rmse;
  for (const auto& row : res.summary.rows) rmse += fmt(" n=%zu:%.4f", row.n, row.rmse);
  return {res.slope >= -0.65 && res.slope <= -0.35,
          fmt("slope %.3f (se %.3f), band [-0.65, -0.35];", res.slope, res.slope_se) + rmse};
}

Outcome coverage() {
  ExperimentConfig cfg = default_experiment();
  cfg.n_grid = {2000};
  cfg.replications = 500;
  const SummaryRow trained = run_coverage_study(cfg).rows.front();
  cfg.oracle_nuisances = true;
  const SummaryRow oracle = run_coverage_study(cfg).rows.front();
  const bool pass = trained.coverage >= 0.90 && trained.coverage <= 0.98 && oracle.coverage >= 0.92 &&
                    oracle.coverage <= 0.975;
  return {pass, fmt("trained %.3f in [0.90, 0.98] (%zu failures), oracle %.3f in [0.92, 0.975]", trained.coverage,
                    trained.failures, oracle.coverage)};
}

Outcome orthogonality() {
  const PlrDgpConfig cfg;
  const Oracle oracle(cfg);
  Rng rng(4);
  const std::vector<double> grid{-0.2, -0.1, -0.05, 0.0, 0.05, 0.1, 0.2};
  double worst_first = 0.0, worst_curve = 0.0;
  for (int k = 0; k < 20; ++k) {
    const Direction dir = random_direction(rng, oracle, 3.0);
    const MomentPathSample sample(cfg, dir, 100000, 400 + static_cast<std::uint64_t>(k));
    const MonteCarloValue first = sample.first_derivative(cfg.theta0);
    worst_first = std::max(worst_first, first.mc_se > 0.0 ? std::abs(first.value) / first.mc_se : 0.0);
    for (double lambda : grid) {
      const MonteCarloValue r = sample.taylor_residual(cfg.theta0, lambda);
      if (r.mc_se > 0.0) {
        worst_curve = std::max(worst_curve, std::abs(r.value) / r.mc_se);
      } else if (r.value != 0.0) {
        worst_curve = std::numeric_limits<double>::infinity();
      }
    }
  }
  return {worst_first <= 5.0 && worst_curve <= 6.0,
          fmt("20 directions: max |dM/dlambda|/se = %.2f (<= 5), max curve residual/se = %.2f (<= 6)", worst_first,
              worst_curve)};
}

bool partition_ok(const BlockPartition& p) {
  if (p.b != p.n / (2 * p.a) || p.remainder.size() >= 2 * p.a) return false;
  std::vector<int> hits(p.n + 1, 0);
  auto mark = [&](const IndexRange& r) {
    if (r.empty()) return;
    for (std::size_t i = r.first; i <= r.last; ++i) ++hits[i];
  };
  for (std::size_t j = 0; j < p.b; ++j) {
    if (p.odd_blocks[j].size() != p.a || p.even_blocks[j].size() != p.a) return false;
    mark(p.odd_blocks[j]);
    mark(p.even_blocks[j]);
  }
  mark(p.remainder);
  return std::all_of(hits.begin() + 1, hits.end(), [](int h) { return h == 1; });
}

Outcome blocking() {
  Rng rng(5);
  int bad = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(2, 5000)(rng);
    const std::size_t a = std::uniform_int_distribution<std::size_t>(1, n / 2)(rng);
    bad += partition_ok(make_partition(n, a)) ? 0 : 1;
  }
  const BlockPartition ex = make_partition(20, 3);
  const bool example = ex.b == 3 && ex.odd_blocks == std::vector<IndexRange>{{1, 3}, {7, 9}, {13, 15}} &&
                       ex.even_blocks == std::vector<IndexRange>{{4, 6}, {10, 12}, {16, 18}} &&
                       ex.remainder == IndexRange{19, 20};
  return {bad == 0 && example, fmt("%d of 1000 random partitions invalid; n=20 a=3 example %s", bad,
                                   example ? "matches" : "differs")};
}

Outcome architecture_scaling() {
  const ScalingRule rule = ScalingRule::treatment(2, 1);
  const Architecture a = architecture_for(1000, rule);
  bool pinned = a.depth() == 7 && a.hidden_widths.front() == 151 && a.output_bound == 2.0;
  bool monotone = true;
  for (const ScalingRule& r : {rule, ScalingRule::outcome(2, 1, 0.1)}) {
    Architecture prev = architecture_for(100, r);
    for (std::size_t n : {1000u, 10000u, 100000u}) {
      const Architecture next = architecture_for(n, r);
      monotone = monotone && next.depth() >= prev.depth() && next.hidden_widths.front() >= prev.hidden_widths.front() &&
                 next.output_bound >= prev.output_bound;
      prev = next;
    }
  }
  return {pinned && monotone, fmt("n=1000: L=%zu H=%zu B=%g; monotone over 1e2..1e5: %s", a.depth(),
                                  a.hidden_widths.front(), a.output_bound, monotone ? "yes" : "no")};
}

Outcome gradients() {
  Rng rng(7);
  std::uniform_int_distribution<std::size_t> dim(1, 4), depth(1, 3), width(2, 8);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  double worst = 0.0;
  for (int k = 0; k < 10; ++k) {
    Architecture arch;
    arch.input_dim = dim(rng);
    arch.hidden_widths.assign(depth(rng), 0);
    for (auto& h : arch.hidden_widths) h = width(rng);
    arch.output_bound = 50.0;
    Network net = Network::he_uniform(arch, rng);
    for (std::size_t l = 0; l < arch.num_layers(); ++l) {
      for (auto& b : net.mutable_parameters().bias(l)) b = 0.5 * unit(rng);
    }
    const std::vector<double> base(net.parameters().flat().begin(), net.parameters().flat().end());
    int points = 0;
    while (points < 100) {
      std::vector<double> x(arch.input_dim);
      for (auto& v : x) v = unit(rng);
      if (std::abs(net.raw_output(x)) > arch.output_bound - 1e-3) continue;
      const auto f = [&](const std::vector<double>& p) {
        return oracle::loop_forward(arch.input_dim, arch.hidden_widths, arch.output_bound, p, x);
      };
      const auto fd = oracle::central_differences(f, base, 1e-6);
      const Parameters g = net.gradient(x, 1.0);
      for (std::size_t i = 0; i < fd.size(); ++i) {
        worst = std::max(worst, std::abs(g.flat()[i] - fd[i]) / std::max(1.0, std::abs(fd[i])));
      }
      ++points;
    }
  }
  return {worst <= 1e-4, fmt("10 architectures x 100 points, max relative error %.3g (<= 1e-4)", worst)};
}

Outcome hac() {
  std::normal_distribution<double> z;
  Rng rng_iid(8);
  std::vector<double> iid(100000);
  for (auto& v : iid) v = z(rng_iid);
  const double lrv_iid = long_run_variance(iid, default_bandwidth(iid.size()));

  Rng rng_ar(9);
  const double rho = 0.5;
  std::vector<double> ar(200000);
  double state = z(rng_ar) / std::sqrt(1.0 - rho * rho);
  for (auto& v : ar) {
    state = rho * state + z(rng_ar);
    v = state;
  }
  const double lrv_ar = long_run_variance(ar, default_bandwidth(ar.size()));
  return {lrv_iid >= 0.95 && lrv_iid <= 1.05 && std::abs(lrv_ar - 4.0) <= 0.2,
          fmt("iid %.4f in [0.95, 1.05]; AR(1) %.4f within 5%% of 4", lrv_iid, lrv_ar)};
}

Outcome rademacher() {
  RowMatrix x(4, 1);
  x << -1.0, -0.3, 0.3, 1.0;
  bool exact = true;
  std::string values;
  for (double c : {1.0, 0.5, 3.0}) {
    const FiniteFunctionClass cls({[c](std::span<const double>) { return c; }, [c](std::span<const double>) { return -c; }});
    const double r = empirical_rademacher_exhaustive(cls, x, 1, 0);
    exact = exact && r == 0.375 * c && r == oracle::constant_pair_rademacher(4, c);
    values += fmt(" c=%g:%.17g", c, r);
  }
  return {exact, "n=4 exhaustive over 16 sign vectors, expected 0.375c;" + values};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"exact-zero empirical moment", exact_zero_moment},
      {"root-n rate", root_n_rate},
      {"interval coverage", coverage},
      {"Neyman orthogonality", orthogonality},
      {"blocking partition", blocking},
      {"architecture scaling", architecture_scaling},
      {"gradient correctness", gradients},
      {"HAC variance", hac},
      {"Rademacher enumeration", rademacher},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = criteria[i].second();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failures += out.pass ? 0 : 1;
    std::printf("%s %zu %s: %s [%.1fs]\n", out.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, out.detail.c_str(),
                secs);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
