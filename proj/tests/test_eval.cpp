#include "ade/eval.hpp"

#include <gtest/gtest.h>

#include "ade/data.hpp"

using ade::Mat;
using ade::MmdConfig;
using ade::QuadraticPotential;
using ade::Vec;

namespace {

// independent O(n^2) oracle with explicit loops
double mmd2_naive(const Mat& x, const Mat& y, double sigma) {
  const auto n = x.rows(), m = y.rows();
  const double gamma = 1.0 / (2.0 * sigma * sigma);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (i != j) sxx += std::exp(-gamma * (x.row(i) - x.row(j)).squaredNorm());
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      if (i != j) syy += std::exp(-gamma * (y.row(i) - y.row(j)).squaredNorm());
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      sxy += std::exp(-gamma * (x.row(i) - y.row(j)).squaredNorm());
  return sxx / static_cast<double>(n * (n - 1)) + syy / static_cast<double>(m * (m - 1)) -
         2.0 * sxy / static_cast<double>(n * m);
}

}  // namespace

TEST(Mmd, VectorizedMatchesNaiveOracle) {
  ade::Rng rng(1);
  Mat x = rng.normal_mat(50, 2);
  Mat y = rng.normal_mat(50, 2).array() + 0.3;
  MmdConfig cfg;
  cfg.bandwidth = 0.9;
  EXPECT_NEAR(ade::mmd2(x, y, cfg), mmd2_naive(x, y, 0.9), 1e-12);
}

TEST(Mmd, SeparatedGaussiansScoreHigh) {
  ade::Rng rng(2);
  Mat x = rng.normal_mat(1000, 1);
  Mat y = rng.normal_mat(1000, 1).array() + 3.0;
  MmdConfig cfg;
  cfg.bandwidth = 1.0;
  EXPECT_GT(ade::mmd2(x, y, cfg), 0.5);
}

TEST(Mmd, SameDistributionNullNearZero) {
  // U-statistic is unbiased: across repeats the mean sits near zero at the
  // 1/n scale, and single estimates stay within a few standard errors
  ade::Rng rng(3);
  double acc = 0.0;
  const int trials = 25;
  for (int k = 0; k < trials; ++k) {
    Mat x = rng.normal_mat(500, 2);
    Mat y = rng.normal_mat(500, 2);
    const double v = ade::mmd2(x, y);
    EXPECT_LT(std::abs(v), 0.01);
    acc += v;
  }
  EXPECT_LT(std::abs(acc / trials), 1e-3);
}

TEST(Mmd, MedianBandwidthSymmetricInArguments) {
  ade::Rng rng(4);
  Mat x = rng.normal_mat(64, 2);
  Mat y = rng.normal_mat(48, 2).array() * 1.5;
  Mat xy(x.rows() + y.rows(), 2), yx(x.rows() + y.rows(), 2);
  xy << x, y;
  yx << y, x;
  EXPECT_DOUBLE_EQ(ade::median_pairwise_distance(xy), ade::median_pairwise_distance(yx));
  // the estimate itself agrees up to summation order
  EXPECT_NEAR(ade::mmd2(x, y), ade::mmd2(y, x), 1e-12);
}

TEST(Mmd, DegenerateSampleRejected) {
  Mat x = Mat::Zero(10, 2), y = Mat::Zero(10, 2);
  EXPECT_THROW(ade::mmd2(x, y), ade::NumericError);
}

TEST(HmcSampler, RecoversStandardGaussianMoments) {
  QuadraticPotential pot(Vec::Zero(2), Vec::Ones(2));
  ade::Rng rng(5);
  ade::HmcSampleOptions opt;
  opt.eta = 0.25;
  Mat s = ade::hmc_sample_model(pot, 4000, 200, 10, rng, opt);
  // effective sample size is reduced by chain correlation; stay conservative
  const double n_eff = 1000.0;
  for (int j = 0; j < 2; ++j) {
    const double mean = s.col(j).mean();
    const double var = (s.col(j).array() - mean).square().sum() / (s.rows() - 1);
    EXPECT_LT(std::abs(mean), 3.0 / std::sqrt(n_eff));
    EXPECT_LT(std::abs(var - 1.0), 3.0 * std::sqrt(2.0 / n_eff));
  }
}

TEST(HmcSampler, ZeroStepsReturnsInitialization) {
  QuadraticPotential pot(Vec::Zero(2), Vec::Ones(2));
  ade::Rng rng(6);
  ade::HmcSampleOptions opt;
  opt.chains = 8;
  Mat s = ade::hmc_sample_model(pot, 8, 0, 0, rng, opt);
  ade::Rng replay(6);
  Mat want = replay.normal_mat(8, 2) * opt.init_scale;
  EXPECT_TRUE((s.array() == want.array()).all());
}

TEST(HmcSampler, TinyStepAcceptsEverything) {
  QuadraticPotential pot(Vec::Zero(2), Vec::Ones(2));
  ade::Rng rng(7);
  double rate = 0.0;
  ade::HmcSampleOptions opt;
  opt.eta = 1e-6;
  opt.accept_rate_out = &rate;
  ade::hmc_sample_model(pot, 128, 5, 3, rng, opt);
  EXPECT_DOUBLE_EQ(rate, 1.0);  // energy conserved, alpha = min(1, e^0) = 1
}

// Occupancy of a long chain against exp(f) on a 1d grid: chi-squared test
// with a conservative inflation for chain autocorrelation.
TEST(HmcSampler, DetailedBalanceOnGridTarget) {
  QuadraticPotential pot(Vec::Zero(1), Vec::Ones(1));
  ade::Rng rng(8);
  ade::HmcSampleOptions opt;
  opt.eta = 0.3;
  Mat s = ade::hmc_sample_model(pot, 20000, 300, 8, rng, opt);

  const int bins = 16;
  const double lo = -3.2, hi = 3.2;
  Vec counts = Vec::Zero(bins);
  int used = 0;
  for (int i = 0; i < s.rows(); ++i) {
    const double v = s(i, 0);
    if (v < lo || v >= hi) continue;
    ++used;
    counts(static_cast<int>((v - lo) / (hi - lo) * bins)) += 1.0;
  }
  Vec expected = Vec::Zero(bins);
  double mass = 0.0;
  for (int b = 0; b < bins; ++b) {
    const double mid = lo + (b + 0.5) * (hi - lo) / bins;
    expected(b) = std::exp(-0.5 * mid * mid);
    mass += expected(b);
  }
  expected *= used / mass;
  double chi2 = 0.0;
  for (int b = 0; b < bins; ++b) {
    chi2 += (counts(b) - expected(b)) * (counts(b) - expected(b)) / expected(b);
  }
  // 15 dof, p = 1e-3 critical is 37.7; allow 3x for autocorrelation
  EXPECT_LT(chi2, 113.0);
}

TEST(ParamError, ClosedFormCases) {
  Vec truth(3);
  truth << 1.0, -2.0, 0.5;
  auto same = ade::param_error(truth, truth);
  EXPECT_DOUBLE_EQ(same.max_rel, 0.0);

  Vec scaled = truth * 1.1;
  auto rep = ade::param_error(truth, scaled);
  EXPECT_NEAR(rep.max_rel, 0.1, 1e-12);
  EXPECT_NEAR(rep.mean_rel, 0.1, 1e-12);

  EXPECT_THROW(ade::param_error(truth, Vec::Zero(2)), ade::ContractViolation);
}

TEST(EnergyHistogram, IdenticalAndDisjointSets) {
  QuadraticPotential pot(Vec::Zero(2), Vec::Ones(2));
  ade::Rng rng(9);
  Mat a = rng.normal_mat(500, 2);
  auto same = ade::energy_histogram(pot, a, a, 20);
  EXPECT_NEAR(same.overlap, 1.0, 1e-12);
  EXPECT_TRUE((same.counts_model.array() == same.counts_data.array()).all());

  Mat far = a.array() + 50.0;  // f-ranges cannot overlap
  auto disjoint = ade::energy_histogram(pot, a, far, 20);
  EXPECT_NEAR(disjoint.overlap, 0.0, 1e-12);

  Mat b = rng.normal_mat(500, 2).array() * 1.3;
  auto mixed = ade::energy_histogram(pot, a, b, 20);
  EXPECT_GE(mixed.overlap, 0.0);
  EXPECT_LE(mixed.overlap, 1.0);
}
