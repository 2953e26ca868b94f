#include <cmath>

#include <gtest/gtest.h>

#include "rankskew/black_scholes.hpp"
#include "rankskew/index.hpp"

using namespace rankskew;

TEST(Index, RankingIsStableAndDescending) {
  const std::vector<double> p{3.0, 7.0, 5.0, 7.0};
  EXPECT_EQ(rank_prices(p), (std::vector<double>{7.0, 7.0, 5.0, 3.0}));
}

TEST(Index, ValueUsesTopWeightedOrderStatistics) {
  const IndexSpec spec{{100, 90, 80}, {0.7, 0.3}, 2};
  const std::vector<double> p{50.0, 120.0, 80.0};
  EXPECT_DOUBLE_EQ(index_value(p, spec), 0.7 * 120.0 + 0.3 * 80.0);
  EXPECT_DOUBLE_EQ(spec.initial_value(), 0.7 * 100 + 0.3 * 90);
}

TEST(Index, ValueIsPermutationInvariantAndMonotone) {
  const IndexSpec spec{{100, 90, 80}, {0.5, 0.3}, 2};
  std::vector<double> p{81.0, 99.0, 93.0};
  const double v = index_value(p, spec);
  std::sort(p.begin(), p.end());
  do {
    EXPECT_DOUBLE_EQ(index_value(p, spec), v);
  } while (std::next_permutation(p.begin(), p.end()));
  p = {81.0, 99.0, 94.0};
  EXPECT_GE(index_value(p, spec), v);
}

TEST(Index, TiePosition) {
  EXPECT_EQ(IndexSpec({{100, 100}, {1}, 1}).tie_position(), 2u);
  EXPECT_EQ(IndexSpec({{100, 90, 90}, {1}, 1}).tie_position(), 3u);
  EXPECT_FALSE(IndexSpec({{100, 96}, {1}, 1}).tie_position());
}

TEST(Index, ValidationMessages) {
  auto msg = [](const IndexSpec& s) {
    try {
      s.validate();
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  EXPECT_NE(msg({{100, 90, 100}, {1}, 1}).find("adjacent"), std::string::npos);
  EXPECT_NE(msg({{100, 90}, {0.0}, 1}).find("positive"), std::string::npos);
  EXPECT_NE(msg({{100, 90}, {-1.0}, 1}).find("positive"), std::string::npos);
  EXPECT_NE(msg({{90, 100}, {1}, 1}).find("sorted"), std::string::npos);
  EXPECT_NE(msg({{100, 90}, {1, 1}, 1}).find("weights"), std::string::npos);
  EXPECT_NE(msg({{100, 100, 100}, {1}, 1}).find("at most one"), std::string::npos);
  EXPECT_TRUE(msg({{100, 90}, {0.7, 0.3}, 2}).empty());
}

TEST(Index, TiedGbmFuturesMatchMargrabe) {
  // E[max(S1, S2)] = s0 + s0 (2 N(sigma_hat sqrt(T) / 2) - 1) for independent lognormals
  ModelSpec m;
  m.assets = {Gbm{0.2}, Gbm{0.6}};
  const IndexSpec spec{{100, 100}, {1}, 1};
  const double t = 0.1;
  const auto f = futures_price(m, spec, t, {60000, 0.01, 2});
  const double sh = std::sqrt(0.04 + 0.36);
  const double exact = 100.0 * (2.0 * norm_cdf(0.5 * sh * std::sqrt(t)));
  EXPECT_NEAR(f.value, exact, 4 * f.std_error);
}

TEST(Index, McMeanStandardError) {
  const std::vector<double> x{1.0, 2.0, 3.0, 4.0};
  const auto m = mc_mean(x);
  EXPECT_DOUBLE_EQ(m.value, 2.5);
  EXPECT_NEAR(m.std_error, std::sqrt(5.0 / 3.0) / 2.0, 1e-15);
  EXPECT_EQ(m.n_paths, 4u);
}
