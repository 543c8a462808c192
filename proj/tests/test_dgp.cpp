#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "plr/dgp.hpp"

using namespace plr;

namespace {

double mean(const Eigen::VectorXd& v) { return v.mean(); }

double correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const Eigen::ArrayXd ca = a.array() - a.mean();
  const Eigen::ArrayXd cb = b.array() - b.mean();
  return (ca * cb).sum() / std::sqrt((ca * ca).sum() * (cb * cb).sum());
}

// Standard error of a mean from non-overlapping batch means.
double batch_mean_se(const Eigen::VectorXd& v, Eigen::Index batch) {
  const Eigen::Index k = v.size() / batch;
  Eigen::VectorXd means(k);
  for (Eigen::Index j = 0; j < k; ++j) means(j) = v.segment(j * batch, batch).mean();
  const double m = means.mean();
  return std::sqrt((means.array() - m).square().sum() / static_cast<double>(k - 1) / static_cast<double>(k));
}

double phi(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace

TEST(Simulate, AllZeroDegenerateCase) {
  PlrDgpConfig cfg;
  cfg.rho_x = 0.0;
  cfg.noise_sd_u = 0.0;
  cfg.noise_sd_v = 0.0;
  cfg.f0T = NamedFunction::of("zero");
  cfg.g0 = NamedFunction::of("zero");
  cfg.theta0 = 1.0;
  cfg.n = 200;
  const Simulation sim = simulate(cfg);
  EXPECT_TRUE((sim.data.y.array() == 0.0).all());
  EXPECT_TRUE((sim.data.treat.array() == 0.0).all());
}

TEST(Simulate, SeededDeterminism) {
  PlrDgpConfig cfg;
  cfg.n = 500;
  cfg.d = 2;
  cfg.seed = 99;
  const Simulation a = simulate(cfg);
  const Simulation b = simulate(cfg);
  EXPECT_TRUE((a.data.y.array() == b.data.y.array()).all());
  EXPECT_TRUE((a.data.treat.array() == b.data.treat.array()).all());
  EXPECT_TRUE((a.data.x.array() == b.data.x.array()).all());
  cfg.seed = 100;
  const Simulation c = simulate(cfg);
  EXPECT_FALSE((a.data.y.array() == c.data.y.array()).all());
}

TEST(Simulate, ShapesAndBounds) {
  PlrDgpConfig cfg;
  cfg.n = 300;
  cfg.d = 3;
  cfg.noise_sd_v = 2.0;
  const Simulation sim = simulate(cfg);
  EXPECT_NO_THROW(sim.data.validate());
  EXPECT_EQ(sim.data.size(), 300u);
  EXPECT_EQ(sim.data.dim(), 3u);
  EXPECT_LE(sim.data.treat.cwiseAbs().maxCoeff(), 1.0);
  EXPECT_LT(sim.data.x.cwiseAbs().maxCoeff(), 1.0);
}

TEST(Simulate, InvalidConfigRejected) {
  PlrDgpConfig cfg;
  cfg.rho_x = 1.0;
  EXPECT_THROW(simulate(cfg), ConfigError);
  cfg = PlrDgpConfig{};
  cfg.n = 1;
  EXPECT_THROW(simulate(cfg), ConfigError);
  cfg = PlrDgpConfig{};
  cfg.noise_sd_u = -1.0;
  EXPECT_THROW(simulate(cfg), ConfigError);
}

TEST(Simulate, TreatmentResidualUncorrelatedWithCovariate) {
  PlrDgpConfig cfg;
  cfg.n = 4000;
  cfg.seed = 5;
  const Simulation sim = simulate(cfg);
  const auto [eT, eY] = oracle_residuals(sim.data, sim.oracle.f0T(), sim.oracle.f0Y());
  EXPECT_LT(std::abs(correlation(eT, sim.data.x.col(0))), 0.05);
}

TEST(Simulate, StudentNoiseHasConfiguredVariance) {
  PlrDgpConfig cfg;
  cfg.n = 20000;
  cfg.theta0 = 0.0;
  cfg.g0 = NamedFunction::of("zero");
  cfg.noise_sd_u = 0.7;
  cfg.y_noise = NoiseKind::student_t;
  const Simulation sim = simulate(cfg);
  const double var = (sim.data.y.array() - sim.data.y.mean()).square().mean();
  EXPECT_NEAR(var, 0.49, 0.03);
}

TEST(CensoredNormalMean, MatchesQuadrature) {
  for (double m : {-2.5, -1.0, -0.3, 0.0, 0.45, 1.2, 3.0}) {
    for (double s : {0.05, 0.5, 1.0, 3.0}) {
      // Composite Simpson rule over z in [-12, 12].
      const int k = 20000;
      const double h = 24.0 / k;
      double acc = 0.0;
      for (int i = 0; i <= k; ++i) {
        const double z = -12.0 + i * h;
        const double w = (i == 0 || i == k) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        acc += w * std::clamp(m + s * z, -1.0, 1.0) * std::exp(-0.5 * z * z);
      }
      const double quad = acc * h / 3.0 / std::sqrt(2.0 * M_PI);
      EXPECT_NEAR(censored_normal_mean(m, s), quad, 1e-6) << "m=" << m << " s=" << s;
    }
  }
  EXPECT_EQ(censored_normal_mean(1.7, 0.0), 1.0);
  EXPECT_EQ(censored_normal_mean(0.3, 0.0), 0.3);
}

TEST(OracleResiduals, NoiselessCaseIsZero) {
  PlrDgpConfig cfg;
  cfg.noise_sd_u = 0.0;
  cfg.noise_sd_v = 0.0;
  cfg.n = 300;
  const Simulation sim = simulate(cfg);
  const auto [eT, eY] = oracle_residuals(sim.data, sim.oracle.f0T(), sim.oracle.f0Y());
  EXPECT_LE(eT.cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LE(eY.cwiseAbs().maxCoeff(), 1e-14);
}

TEST(OracleResiduals, ZeroEffectLeavesOutcomeNoise) {
  PlrDgpConfig cfg;
  cfg.theta0 = 0.0;
  cfg.n = 5000;
  cfg.noise_sd_u = 0.5;
  const Simulation sim = simulate(cfg);
  const auto [eT, eY] = oracle_residuals(sim.data, sim.oracle.f0T(), sim.oracle.f0Y());
  for (std::size_t t = 0; t < sim.data.size(); ++t) {
    const auto i = static_cast<Eigen::Index>(t);
    EXPECT_EQ(eY(i), sim.data.y(i) - cfg.g0(sim.data.row(t)));
  }
  EXPECT_NEAR(std::sqrt((eY.array() - eY.mean()).square().mean()), 0.5, 0.02);
}

TEST(OracleResiduals, StructuralResidualMeanWithinCltBand) {
  const std::size_t n = 10000;
  int inside = 0;
  const int seeds = 200;
  for (int s = 0; s < seeds; ++s) {
    PlrDgpConfig cfg;
    cfg.n = n;
    cfg.seed = static_cast<std::uint64_t>(s);
    const Simulation sim = simulate(cfg);
    const auto [eT, eY] = oracle_residuals(sim.data, sim.oracle.f0T(), sim.oracle.f0Y());
    const Eigen::VectorXd structural = eY - cfg.theta0 * eT;
    if (std::abs(mean(structural)) <= 4.0 * cfg.noise_sd_u / std::sqrt(static_cast<double>(n))) ++inside;
  }
  EXPECT_GE(inside, 190);
}

TEST(OracleResiduals, StructuralResidualOrthogonalToRegressors) {
  PlrDgpConfig cfg;
  cfg.n = 5000;
  cfg.seed = 77;
  const Simulation sim = simulate(cfg);
  const auto [eT, eY] = oracle_residuals(sim.data, sim.oracle.f0T(), sim.oracle.f0Y());
  const Eigen::VectorXd r = eY - cfg.theta0 * eT;
  Eigen::MatrixXd design(r.size(), 3);
  design.col(0).setOnes();
  design.col(1) = sim.data.treat;
  design.col(2) = sim.data.x.col(0);
  const Eigen::VectorXd beta = design.colPivHouseholderQr().solve(r);
  const Eigen::VectorXd fitted_resid = r - design * beta;
  const double sigma2 = fitted_resid.squaredNorm() / static_cast<double>(r.size() - 3);
  const Eigen::MatrixXd cov = sigma2 * (design.transpose() * design).inverse();
  for (int j = 0; j < 3; ++j) EXPECT_LE(std::abs(beta(j)), 4.0 * std::sqrt(cov(j, j))) << "coefficient " << j;
}

TEST(Stationarity, HalvesAgreeInFirstTwoMoments) {
  PlrDgpConfig cfg;
  cfg.n = 20000;
  cfg.rho_x = 0.8;
  cfg.seed = 3;
  const Simulation sim = simulate(cfg);
  const Eigen::VectorXd x = sim.data.x.col(0);
  const Eigen::Index half = x.size() / 2;
  const Eigen::VectorXd first = x.head(half), second = x.tail(half);
  const Eigen::VectorXd first_sq = first.array().square(), second_sq = second.array().square();
  const double se1 = std::hypot(batch_mean_se(first, 100), batch_mean_se(second, 100));
  const double se2 = std::hypot(batch_mean_se(first_sq, 100), batch_mean_se(second_sq, 100));
  EXPECT_LE(std::abs(first.mean() - second.mean()), 5.0 * se1);
  EXPECT_LE(std::abs(first_sq.mean() - second_sq.mean()), 5.0 * se2);
}

TEST(Stationarity, FirstObservationFollowsStationaryMarginal) {
  // Latent AR(1) has a standard normal marginal, so P(X_1 <= x) = Phi(atanh x).
  // Each block of 100 seeds is one KS test at the 5% level; 20 blocks give
  // Binomial(20, 0.05) rejections, and more than 3 has probability under 2%.
  const auto ks_stat = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const double m = static_cast<double>(v.size());
    double ks = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double f = phi(std::atanh(v[i]));
      ks = std::max({ks, std::abs((i + 1) / m - f), std::abs(f - i / m)});
    }
    return ks;
  };
  std::vector<double> pooled;
  int rejections = 0;
  for (std::uint64_t block = 0; block < 20; ++block) {
    std::vector<double> first;
    for (std::uint64_t s = 0; s < 100; ++s) {
      PlrDgpConfig cfg;
      cfg.n = 2;
      cfg.rho_x = 0.9;
      cfg.seed = block * 100 + s;
      first.push_back(simulate(cfg).data.x(0, 0));
    }
    if (ks_stat(first) >= 1.36 / std::sqrt(100.0)) ++rejections;
    pooled.insert(pooled.end(), first.begin(), first.end());
  }
  EXPECT_LE(rejections, 3);
  EXPECT_LT(ks_stat(pooled), 1.36 / std::sqrt(static_cast<double>(pooled.size())));
}

TEST(DatasetCsv, RoundTripIsExact) {
  PlrDgpConfig cfg;
  cfg.n = 50;
  cfg.d = 2;
  const Simulation sim = simulate(cfg);
  std::stringstream ss;
  write_dataset_csv(ss, sim.data);
  const std::string text = ss.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "t,y,treat,x1,x2");
  const Dataset back = read_dataset_csv(ss);
  EXPECT_TRUE((back.y.array() == sim.data.y.array()).all());
  EXPECT_TRUE((back.treat.array() == sim.data.treat.array()).all());
  EXPECT_TRUE((back.x.array() == sim.data.x.array()).all());
}

TEST(DatasetCsv, RejectsMalformedInput) {
  std::stringstream bad_header("a,b,c\n1,2,3\n");
  EXPECT_THROW(read_dataset_csv(bad_header), ConfigError);
  std::stringstream out_of_range("t,y,treat,x1\n1,0.5,1.5,0.1\n2,0.5,0.2,0.1\n");
  EXPECT_THROW(read_dataset_csv(out_of_range), ConfigError);
}
