#include <cmath>

#include <gtest/gtest.h>

#include "rankskew/asymptotics.hpp"
#include "rankskew/black_scholes.hpp"

using namespace rankskew;

namespace {

// E[X N(aX)] by a plain composite Simpson rule on [-12, 12].
double simpson_trunc(double a) {
  const int n = 4000;
  const double lo = -12, h = 24.0 / n;
  double acc = 0;
  for (int i = 0; i <= n; ++i) {
    const double x = lo + i * h;
    const double w = (i == 0 || i == n) ? 1 : (i % 2 ? 4 : 2);
    acc += w * x * norm_pdf(x) * norm_cdf(a * x);
  }
  return acc * h / 3;
}

double margrabe_slope(double s0, double s1, double s2) {
  return s0 * std::sqrt(s1 * s1 + s2 * s2) / std::sqrt(2 * M_PI);
}

double sup_error(double t) {
  const std::array<double, 2> sig{0.2, 0.6};
  double e = 0;
  for (double x1 = -4; x1 <= 4; x1 += 0.1)
    for (double x2 = -4; x2 <= 4; x2 += 0.1)
      e = std::max(e, std::abs(density_expansion_gbm2({x1, x2}, t, sig) - density_exact_gbm2({x1, x2}, t, sig)));
  return e;
}

}  // namespace

TEST(TruncatedMoment, ClosedFormMatchesIndependentQuadrature) {
  for (double a : {-3.0, -1.0, -0.2, 0.0, 0.5, 1.0, 4.0}) EXPECT_NEAR(trunc_gauss_moment(a), simpson_trunc(a), 1e-10);
  EXPECT_NEAR(trunc_gauss_moment(1.0), 0.2820948, 1e-7);
}

TEST(TruncatedMoment, ComplementIsOddMirror) {
  for (double a : {-2.0, -0.5, 0.3, 1.0, 3.0}) {
    EXPECT_NEAR(trunc_gauss_moment_complement(-a), trunc_gauss_moment(a), 1e-12);
    EXPECT_NEAR(trunc_gauss_moment_complement(a), -trunc_gauss_moment(a), 1e-12);
  }
}

TEST(M5, TiedGbmEqualsMargrabeSlope) {
  const IndexSpec spec{{100, 100}, {1}, 1};
  const std::vector<double> v0{0.04, 0.36};
  EXPECT_NEAR(m5_total(spec, v0, 2), margrabe_slope(100, 0.2, 0.6), 1e-6);
  EXPECT_NEAR(m5_total(spec, v0, 2, GaussianPair{}), margrabe_slope(100, 0.2, 0.6), 1e-6);
  EXPECT_NEAR(m5_total(spec, v0, 2), 25.2313, 1e-4);
}

TEST(M5, ClosedFormAndQuadratureAgreeAcrossVariances) {
  for (auto v : {std::vector<double>{0.01, 0.5}, {0.3, 0.3}, {0.0, 0.2}, {0.09, 0.0}}) {
    const IndexSpec spec{{100, 100}, {1}, 1};
    EXPECT_NEAR(m5_total(spec, v, 2), m5_total(spec, v, 2, GaussianPair{}), 1e-6);
  }
}

TEST(M5, BothTiedSlotsWeightedCancelUnderSymmetricBaseline) {
  // max + min = X1 + X2 has mean zero
  const IndexSpec spec{{100, 100}, {0.5, 0.5}, 2};
  const std::vector<double> v0{0.04, 0.36};
  EXPECT_NEAR(m5_total(spec, v0, 2), 0.0, 1e-12);
  EXPECT_NEAR(m5_total(spec, v0, 2, GaussianPair{}), 0.0, 1e-6);
}

TEST(M5, TieBelowTheTopSlotEntersWithNegativeSign) {
  // index = S^(1) + S^(2) of three assets tied in slots 2, 3: only the max of the pair counts
  const IndexSpec spec{{110, 100, 100}, {1, 1}, 2};
  const std::vector<double> v0{0.04, 0.04, 0.36};
  EXPECT_NEAR(m5_total(spec, v0, 3), margrabe_slope(100, 0.2, 0.6), 1e-6);
  EXPECT_THROW(m5_total(spec, v0, 2), ConfigError);
}

TEST(M5, CorrelatedBaselineUsesQuadrature) {
  // max(X, Y) for unit variances and correlation c has mean sqrt((1 - c) / pi)
  const IndexSpec spec{{1, 1}, {1}, 1};
  const std::vector<double> v0{1.0, 1.0};
  const GaussianPair law{{0, 0}, {1, 0.3, 1}};
  EXPECT_NEAR(m5_total(spec, v0, 2, law), std::sqrt(0.7 / M_PI), 1e-7);
}

TEST(M1, ZeroUnderCentredBaselineAndRejectsTies) {
  const IndexSpec spec{{100, 96}, {1}, 1};
  const std::vector<double> v0{0.04, 0.36};
  EXPECT_EQ(m1_coefficients(spec, v0), (std::vector<double>{0.0}));
  const std::vector<double> mu{0.5, 0.0};
  EXPECT_NEAR(m1_coefficients(spec, v0, mu)[0], 100 * 0.2 * 0.5, 1e-12);
  EXPECT_THROW(m1_coefficients({{100, 100}, {1}, 1}, v0), ConfigError);
}

TEST(Gaussian2d, MomentsOfBaseline) {
  const GaussianPair law{{0.3, -0.2}, {1.5, 0.4, 0.8}};
  EXPECT_NEAR(gaussian_expectation_2d([](double x, double) { return x; }, law), 0.3, 1e-8);
  EXPECT_NEAR(gaussian_expectation_2d([](double x, double y) { return (x - 0.3) * (y + 0.2); }, law), 0.4, 1e-8);
  EXPECT_NEAR(gaussian_expectation_2d([](double, double) { return 1.0; }, law), 1.0, 1e-8);
  EXPECT_LT(gaussian_tail_bound(kGaussianBox), 1e-14);
}

TEST(DensityExpansion, ValueAtOrigin) {
  EXPECT_NEAR(density_expansion_gbm2({0, 0}, 0.1, {0.2, 0.6}), 0.1583591, 5e-6);
  EXPECT_NEAR(density_exact_gbm2({0, 0}, 0.1, {0.2, 0.6}), density_expansion_gbm2({0, 0}, 0.1, {0.2, 0.6}), 5e-6);
}

TEST(DensityExpansion, ErrorIsThirdOrderInSqrtT) {
  const double e2 = sup_error(0.02), e1 = sup_error(0.01);
  EXPECT_GE(e2 / e1, 2.5);
  EXPECT_THROW(density_expansion_gbm2({0, 0}, 1.5, {0.2, 0.6}), ConfigError);
}

TEST(Expansion, HooksAreIntegratedUnderBaseline) {
  const IndexSpec spec{{100, 96}, {1}, 1};
  const std::vector<double> v0{0.04, 0.36};
  CoefficientHooks hooks{{"m2", [](double x, double) { return x * x; }}};
  const auto c = expansion_coefficients(spec, v0, hooks);
  EXPECT_FALSE(c.tie);
  EXPECT_NEAR(c.higher.at("m2"), 1.0, 1e-8);
  const auto t = expansion_coefficients({{100, 100}, {1}, 1}, v0);
  ASSERT_TRUE(t.m5);
  EXPECT_NEAR(*t.m5, margrabe_slope(100, 0.2, 0.6), 1e-6);
}

TEST(RatePrediction, RuleTable) {
  const std::vector<double> tie{100, 100}, apart{100, 90};
  EXPECT_EQ(predicted_rate(std::vector<double>{0.6, 0.7}, tie, {true, true, false}).kind, RateKind::rate_half);
  EXPECT_EQ(predicted_rate(std::vector<double>{0.6, 0.7}, tie, {true, true, true}).kind, RateKind::no_prediction);
  EXPECT_EQ(predicted_rate(std::vector<double>{0.6, 0.7}, apart, {true, true, true}).kind, RateKind::no_blow_up);
  const auto rough = predicted_rate(std::vector<double>{0.2, 0.3}, apart, {true, false, true});
  EXPECT_EQ(rough.kind, RateKind::rate_H_minus_half);
  EXPECT_NEAR(rough.exponent, 0.3, 1e-15);
  EXPECT_EQ(predicted_rate(std::vector<double>{0.2}, apart, {true, true, true}).kind, RateKind::no_prediction);
  EXPECT_EQ(predicted_rate(std::vector<double>{0.7}, apart, {false, true, true}).kind, RateKind::no_prediction);
}

TEST(RatePrediction, FromModels) {
  ModelSpec gbm;
  gbm.assets = {Gbm{0.2}, Gbm{0.6}};
  EXPECT_EQ(predicted_rate(gbm, {{100, 100}, {1}, 1}).kind, RateKind::rate_half);
  EXPECT_EQ(predicted_rate(gbm, {{100, 96}, {1}, 1}).kind, RateKind::no_blow_up);

  ModelSpec rough;
  rough.assets = {FractionalSteinStein{0.2, 0.2, -0.5}, FractionalSteinStein{0.6, 0.3, -0.5}};
  const auto p = predicted_rate(rough, {{100, 90}, {1}, 1});
  EXPECT_EQ(p.kind, RateKind::rate_H_minus_half);
  EXPECT_NEAR(p.exponent, 0.3, 1e-15);

  // only the top slot counts away from a tie
  ModelSpec mixed;
  mixed.assets = {FractionalSteinStein{0.2, 0.7, -0.5}, FractionalSteinStein{0.6, 0.2, -0.5}};
  EXPECT_EQ(predicted_rate(mixed, {{100, 90}, {1}, 1}).kind, RateKind::no_blow_up);
  EXPECT_NEAR(predicted_rate(mixed, {{100, 90}, {0.7, 0.3}, 2}).exponent, 0.3, 1e-15);

  ModelSpec no_leverage;
  no_leverage.assets = {FractionalSteinStein{0.2, 0.2, 0.0}, FractionalSteinStein{0.6, 0.3, 0.0}};
  EXPECT_EQ(predicted_rate(no_leverage, {{100, 90}, {1}, 1}).kind, RateKind::no_prediction);
}
