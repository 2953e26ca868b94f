#include <algorithm>
#include <cmath>

#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/special_functions/hypergeometric_pFq.hpp>
#include <gtest/gtest.h>

#include "rankskew/black_scholes.hpp"
#include "rankskew/parallel.hpp"
#include "rankskew/rng.hpp"
#include "rankskew/volterra.hpp"

using namespace rankskew;

namespace {

// int_0^s x^a (x + d)^a dx via the Pfaff-transformed Gauss function, whose
// argument z / (z - 1) with z = -s/d lies in (0, 1).
double power_integral_oracle(double s, double d, double a) {
  const double z = -s / d;
  const double f = boost::math::hypergeometric_pFq({-a, 1.0}, {a + 2.0}, z / (z - 1.0));
  return std::pow(d, a) * std::pow(s, a + 1.0) / (a + 1.0) * std::pow(1.0 - z, a) * f;
}

FbmKernel kernel(double h) { return {h, KernelNormalization::unit_variance, DriverScheme::cholesky}; }

struct Moments {
  double cov, se;
};

Moments sample_cov(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= n, my /= n;
  double c = 0, c2 = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double p = (x[i] - mx) * (y[i] - my);
    c += p, c2 += p * p;
  }
  c /= n;
  return {c, std::sqrt((c2 / n - c * c) / n)};
}

}  // namespace

TEST(ShiftedPowerIntegral, MatchesHypergeometricOracle) {
  for (double a : {-0.3, -0.2, 0.1, 0.2})
    for (double s : {1e-3, 0.05, 1.0})
      for (double d : {1e-4, 0.01, 0.5, 3.0})
        EXPECT_NEAR(detail::shifted_power_integral(s, d, a) / power_integral_oracle(s, d, a), 1.0, 1e-10)
            << a << ' ' << s << ' ' << d;
}

TEST(ShiftedPowerIntegral, ZeroShiftIsClosedForm) {
  EXPECT_DOUBLE_EQ(detail::shifted_power_integral(2.0, 0.0, -0.3), std::pow(2.0, 0.4) / 0.4);
  EXPECT_EQ(detail::shifted_power_integral(0.0, 1.0, 0.2), 0.0);
}

TEST(VolterraCovariance, UnitVarianceNormalization) {
  for (double h : {0.1, 0.3, 0.5, 0.8})
    for (double t : {0.01, 0.5, 2.0}) EXPECT_NEAR(volterra_covariance(t, t, kernel(h)), std::pow(t, 2 * h), 1e-10);
}

TEST(VolterraCovariance, AsWrittenNormalization) {
  const double h = 0.3, t = 0.7;
  const FbmKernel k{h, KernelNormalization::as_written, DriverScheme::cholesky};
  const double g = boost::math::tgamma(h + 0.5);
  EXPECT_NEAR(volterra_covariance(t, t, k), std::pow(t, 2 * h) / (2 * h * g * g), 1e-10);
}

TEST(VolterraCovariance, HalfHurstIsBrownian) {
  EXPECT_NEAR(volterra_covariance(0.3, 0.8, kernel(0.5)), 0.3, 1e-10);
  EXPECT_NEAR(cross_covariance(0.3, 0.8, kernel(0.5)), 0.3, 1e-12);
}

TEST(VolterraCovariance, TerminalCorrelationWithDrivingBrownian) {
  for (double h : {0.2, 0.5, 0.7}) {
    const double t = 0.4;
    const double corr = cross_covariance(t, t, kernel(h)) / std::sqrt(t * volterra_covariance(t, t, kernel(h)));
    EXPECT_NEAR(corr, std::sqrt(2 * h) / (h + 0.5), 1e-10);
  }
}

TEST(VolterraCovariance, JointCovarianceIsSymmetricPositiveDefinite) {
  const auto grid = TimeGrid::uniform(1.0, 1.0 / 16);
  for (double h : {0.1, 0.5, 0.9}) {
    const auto c = joint_covariance(grid, kernel(h));
    EXPECT_LT((c - c.transpose()).norm(), 1e-12);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c);
    EXPECT_GT(es.eigenvalues().minCoeff(), -1e-12);
  }
}

class DriverLaw : public ::testing::TestWithParam<double> {};

TEST_P(DriverLaw, EmpiricalCovarianceWithinFiveStandardErrors) {
  const double h = GetParam();
  const auto grid = TimeGrid::uniform(0.5, 0.5 / 8);
  const std::size_t n = 20000;
  const auto d = sample_joint_driver(grid, kernel(h), n, {7, 0});
  const std::size_t nodes = grid.nodes();
  std::vector<std::vector<double>> b(nodes, std::vector<double>(n)), v(nodes, std::vector<double>(n));
  for (std::size_t p = 0; p < n; ++p) {
    double acc = 0.0;
    for (std::size_t i = 1; i < nodes; ++i) {
      acc += d.bm(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(i - 1));
      b[i][p] = acc;
      v[i][p] = d.volterra(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(i));
    }
  }
  for (std::size_t i = 1; i < nodes; ++i)
    for (std::size_t j = 1; j < nodes; ++j) {
      const double s = grid[i], t = grid[j];
      const auto bb = sample_cov(b[i], b[j]);
      const auto vv = sample_cov(v[i], v[j]);
      const auto bv = sample_cov(b[i], v[j]);
      EXPECT_NEAR(bb.cov, std::min(s, t), 5 * bb.se);
      EXPECT_NEAR(vv.cov, volterra_covariance(s, t, kernel(h)), 5 * vv.se);
      EXPECT_NEAR(bv.cov, cross_covariance(s, t, kernel(h)), 5 * bv.se);
    }
}

INSTANTIATE_TEST_SUITE_P(Hurst, DriverLaw, ::testing::Values(0.2, 0.5, 0.7));

TEST(Driver, TerminalValueIsStandardNormalAfterScaling) {
  // Kolmogorov-Smirnov at the 1% level: D < 1.63 / sqrt(n)
  const auto grid = TimeGrid::uniform(0.25, 0.25 / 32);
  const std::size_t n = 50000;
  const auto d = sample_joint_driver(grid, kernel(0.3), n, {11, 0});
  std::vector<double> z(n);
  const double sd = std::pow(0.25, 0.3);
  for (std::size_t p = 0; p < n; ++p) z[p] = d.volterra(static_cast<Eigen::Index>(p), 32) / sd;
  std::sort(z.begin(), z.end());
  double dmax = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double f = norm_cdf(z[i]);
    dmax = std::max({dmax, std::abs(f - double(i) / n), std::abs(f - double(i + 1) / n)});
  }
  EXPECT_LT(dmax, 1.63 / std::sqrt(double(n)));
}

TEST(Driver, HybridSchemeVarianceWithinTwoPercent) {
  const auto grid = TimeGrid::uniform(0.1, 0.1 / 200);
  for (double h : {0.1, 0.3, 0.7}) {
    const FbmKernel k{h, KernelNormalization::unit_variance, DriverScheme::hybrid};
    const auto f = hybrid_factor(grid, k);
    const Eigen::Index last = static_cast<Eigen::Index>(f.steps()) - 1;
    const double var = f.l21.row(last).squaredNorm() + f.l22.row(last).squaredNorm();
    EXPECT_NEAR(var / std::pow(0.1, 2 * h), 1.0, 0.02) << h;
  }
}

TEST(Driver, ReproducibleAndIndependentOfThreadCount) {
  const auto grid = TimeGrid::uniform(0.1, 0.1 / 20);
  g_max_threads = 1;
  const auto a = sample_joint_driver(grid, kernel(0.3), 3000, {5, 0});
  g_max_threads = 4;
  const auto b = sample_joint_driver(grid, kernel(0.3), 3000, {5, 0});
  g_max_threads = 0;
  EXPECT_TRUE(a.bm == b.bm);
  EXPECT_TRUE(a.volterra == b.volterra);
  const auto c = sample_joint_driver(grid, kernel(0.3), 3000, {6, 0});
  EXPECT_FALSE(a.bm == c.bm);
}

TEST(Rng, StreamsAreDistinctAndRepeatable) {
  EXPECT_EQ(standard_normals({1, 2}, 8), standard_normals({1, 2}, 8));
  EXPECT_NE(standard_normals({1, 2}, 8), standard_normals({1, 3}, 8));
  EXPECT_NE(mix_seed(1, 0), mix_seed(1, 1));
  EXPECT_NE(mix_seed(1, 0), mix_seed(2, 0));
}

TEST(Rng, NormalMomentsAreStandard) {
  const auto z = standard_normals({3, 0}, 200000);
  double m = 0, m2 = 0;
  for (double x : z) m += x, m2 += x * x;
  m /= z.size(), m2 /= z.size();
  EXPECT_NEAR(m, 0.0, 4.0 / std::sqrt(200000.0));
  EXPECT_NEAR(m2, 1.0, 4.0 * std::sqrt(2.0 / 200000.0));
}

TEST(Kernel, RejectsHurstOutsideUnitInterval) {
  EXPECT_THROW(kernel(0.0).validate(), ConfigError);
  EXPECT_THROW(kernel(1.0).validate(), ConfigError);
  EXPECT_NO_THROW(kernel(0.5).validate());
}
