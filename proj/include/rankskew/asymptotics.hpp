#pragma once

// Small-time expansion coefficients of the futures price and the density of
// normalized log-returns, plus blow-up rate predictions.
//
// Normalized returns: X^j_t = log(S^j_t / s^j_0) / sqrt(v^j_0(0) t). With a
// Gaussian baseline X ~ N(mu, Gamma), S^j_T ~ s^j_0 (1 + sqrt(v^j_0 T) X^j) to
// first order, so the sqrt(T) coefficient of F_{0,T} - I_0 is
//   sum_k w_k E[(ranked s_0 sqrt(v_0) X)_k].
// Off a tie the ranking is frozen at small T and the k-th term is
// nu_k mu_k (m1). At a tie in positions (r-1, r) the two slots take the max
// and the min of the tied pair, which splits into two half-plane integrals
// whose integrands draw the swapped asset's (sqrt(v_0), X) (m5).

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "rankskew/black_scholes.hpp"
#include "rankskew/dynamics.hpp"
#include "rankskew/error.hpp"
#include "rankskew/index.hpp"

namespace rankskew {

/// Truncation half-width of the quadrature box, in standard deviations.
inline constexpr double kGaussianBox = 8.0;

/// P(|Z| > L) <= 2 phi(L) / L. At L = 8 this is about 1.3e-15.
inline double gaussian_tail_bound(double level) {
  if (!(level > 0.0)) throw ConfigError("gaussian_tail_bound needs L > 0");
  return 2.0 * norm_pdf(level) / level;
}

/// E[X 1{Y <= a X}] for independent standard normals X, Y.
inline double trunc_gauss_moment(double a) {
  return a / std::sqrt(2.0 * std::numbers::pi * (1.0 + a * a));
}

/// E[X 1{Y >= a X}] by 1-D quadrature of x phi(x) N(-a x) (independent of the
/// closed form above).
inline double trunc_gauss_moment_complement(double a) {
  auto f = [a](double x) { return x * norm_pdf(x) * norm_cdf(-a * x); };
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, -kGaussianBox, kGaussianBox, 15, 1e-14);
}

/// Bivariate normal law of (X^{r-1}, X^r) or any other pair.
struct GaussianPair {
  std::array<double, 2> mu{0.0, 0.0};
  std::array<double, 3> gamma{1.0, 0.0, 1.0};  ///< (var1, cov, var2)

  bool is_standard() const {
    return mu[0] == 0.0 && mu[1] == 0.0 && gamma[0] == 1.0 && gamma[1] == 0.0 && gamma[2] == 1.0;
  }

  void validate() const {
    if (!(gamma[0] > 0.0 && gamma[2] > 0.0 && gamma[0] * gamma[2] - gamma[1] * gamma[1] > 0.0))
      throw ConfigError("baseline covariance must be positive definite");
  }

  double density(double x1, double x2) const {
    const double det = gamma[0] * gamma[2] - gamma[1] * gamma[1];
    const double d1 = x1 - mu[0], d2 = x2 - mu[1];
    const double q = (gamma[2] * d1 * d1 - 2.0 * gamma[1] * d1 * d2 + gamma[0] * d2 * d2) / det;
    return std::exp(-0.5 * q) / (2.0 * std::numbers::pi * std::sqrt(det));
  }
};

/// E[f(X1, X2)] by nested adaptive Gauss-Kronrod over mu +- 8 sd. If f has a
/// kink along x2 = kink(x1), passing it splits the inner integral there.
inline double gaussian_expectation_2d(const std::function<double(double, double)>& f, const GaussianPair& law,
                                      double tol = 1e-8, const std::function<double(double)>& kink = {}) {
  law.validate();
  using gk = boost::math::quadrature::gauss_kronrod<double, 31>;
  const double sd1 = std::sqrt(law.gamma[0]), sd2 = std::sqrt(law.gamma[2]);
  const double lo2 = law.mu[1] - kGaussianBox * sd2, hi2 = law.mu[1] + kGaussianBox * sd2;
  auto inner = [&](double x1) {
    auto g = [&](double x2) { return f(x1, x2) * law.density(x1, x2); };
    if (kink) {
      const double b = kink(x1);
      if (b > lo2 && b < hi2) return gk::integrate(g, lo2, b, 12, tol) + gk::integrate(g, b, hi2, 12, tol);
    }
    return gk::integrate(g, lo2, hi2, 12, tol);
  };
  return gk::integrate(inner, law.mu[0] - kGaussianBox * sd1, law.mu[0] + kGaussianBox * sd1, 12, tol);
}

/// nu_k = w_k s^k_0 sqrt(v^k_0(0)) for k <= n_top.
inline std::vector<double> nu_coefficients(const IndexSpec& spec, std::span<const double> v0) {
  spec.validate();
  if (v0.size() != spec.n_assets()) throw ConfigError("need one initial variance per asset");
  std::vector<double> nu(spec.n_top);
  for (std::size_t k = 0; k < spec.n_top; ++k) {
    if (!(v0[k] >= 0.0)) throw ConfigError("initial variances must be >= 0");
    nu[k] = spec.weights[k] * spec.s0[k] * std::sqrt(v0[k]);
  }
  return nu;
}

/// m1^k = nu_k mu_k. Requires distinct initial prices.
inline std::vector<double> m1_coefficients(const IndexSpec& spec, std::span<const double> v0,
                                           std::span<const double> mu = {}) {
  if (spec.tie_position()) throw ConfigError("initial prices contain a tie; use m5_total");
  auto nu = nu_coefficients(spec, v0);
  if (!mu.empty() && mu.size() != spec.n_assets()) throw ConfigError("baseline mean needs one entry per asset");
  for (std::size_t k = 0; k < nu.size(); ++k) nu[k] *= mu.empty() ? 0.0 : mu[k];
  return nu;
}

namespace detail {

inline std::size_t checked_tie(const IndexSpec& spec, std::size_t r) {
  spec.validate();
  const auto tie = spec.tie_position();
  if (!tie) throw ConfigError("m5 needs a tie in the initial prices");
  if (r != *tie)
    throw ConfigError("tie is at positions (" + std::to_string(*tie - 1) + "," + std::to_string(*tie) +
                      "), not (" + std::to_string(r - 1) + "," + std::to_string(r) + ")");
  return r;
}

}  // namespace detail

/// Sum over k <= n_top of m5^k for a tie at 1-based positions (r-1, r).
/// Standard baseline: closed form via trunc_gauss_moment.
inline double m5_total(const IndexSpec& spec, std::span<const double> v0, std::size_t r) {
  detail::checked_tie(spec, r);
  if (v0.size() != spec.n_assets()) throw ConfigError("need one initial variance per asset");
  const std::size_t hi = r - 2, lo = r - 1;  // 0-based slots of the tied pair
  const double s = spec.s0[hi];
  const double sd_hi = std::sqrt(v0[hi]), sd_lo = std::sqrt(v0[lo]);
  if (sd_hi == 0.0 && sd_lo == 0.0) return 0.0;

  // Upper slot: E[max(sd_hi X, sd_lo Y)] = sd_hi E[X 1{Y <= cX}] + sd_lo E[Y 1{X <= Y/c}].
  // Lower slot: the min, equal to -max under the symmetric baseline.
  auto upper = [&] {
    if (sd_lo == 0.0) return sd_hi / std::sqrt(2.0 * std::numbers::pi);
    if (sd_hi == 0.0) return sd_lo / std::sqrt(2.0 * std::numbers::pi);
    const double c = sd_hi / sd_lo;
    return sd_hi * trunc_gauss_moment(c) + sd_lo * trunc_gauss_moment(1.0 / c);
  }();
  double total = 0.0;
  if (hi < spec.n_top) total += spec.weights[hi] * s * upper;
  if (lo < spec.n_top) total -= spec.weights[lo] * s * upper;
  return total;
}

/// Same quantity under an arbitrary baseline law of the tied pair, by 2-D quadrature.
inline double m5_total(const IndexSpec& spec, std::span<const double> v0, std::size_t r, const GaussianPair& law,
                       double tol = 1e-8) {
  detail::checked_tie(spec, r);
  if (v0.size() != spec.n_assets()) throw ConfigError("need one initial variance per asset");
  const std::size_t hi = r - 2, lo = r - 1;
  const double s = spec.s0[hi];
  const double sd_hi = std::sqrt(v0[hi]), sd_lo = std::sqrt(v0[lo]);
  const double w_hi = hi < spec.n_top ? spec.weights[hi] : 0.0;
  const double w_lo = lo < spec.n_top ? spec.weights[lo] : 0.0;
  auto f = [&](double x1, double x2) {
    const double a = sd_hi * x1, b = sd_lo * x2;
    return s * (w_hi * std::max(a, b) + w_lo * std::min(a, b));
  };
  if (sd_lo == 0.0) return gaussian_expectation_2d(f, law, tol);
  return gaussian_expectation_2d(f, law, tol, [&](double x1) { return sd_hi * x1 / sd_lo; });
}

/// Two-asset GBM density of (X^1_t, X^2_t), identity baseline, expanded to
/// second order in sqrt(t):
///   phi(x) [1 - sum a_j x_j + sum a_j^2 (x_j^2 - 1)/2 + sum_{j<k} a_j a_k x_j x_k],
/// a_j = sigma_j sqrt(t) / 2. Not a density: may go negative in the tails.
inline double density_expansion_gbm2(std::array<double, 2> x, double t, std::array<double, 2> sigmas) {
  if (!(t > 0.0 && t < 1.0)) throw ConfigError("density expansion needs t in (0,1)");
  const double a1 = 0.5 * sigmas[0] * std::sqrt(t), a2 = 0.5 * sigmas[1] * std::sqrt(t);
  const double phi = norm_pdf(x[0]) * norm_pdf(x[1]);
  const double first = -(a1 * x[0] + a2 * x[1]);
  const double second = 0.5 * a1 * a1 * (x[0] * x[0] - 1.0) + 0.5 * a2 * a2 * (x[1] * x[1] - 1.0) +
                        a1 * a2 * x[0] * x[1];
  return phi * (1.0 + first + second);
}

/// Exact law of the same normalized returns: independent N(-sigma_j sqrt(t)/2, 1).
inline double density_exact_gbm2(std::array<double, 2> x, double t, std::array<double, 2> sigmas) {
  return norm_pdf(x[0] + 0.5 * sigmas[0] * std::sqrt(t)) * norm_pdf(x[1] + 0.5 * sigmas[1] * std::sqrt(t));
}

/// User-supplied integrands for the higher coefficients (m2..m4, m6..m8).
/// Each maps the baseline pair (x1, x2) to the integrand; the coefficient is
/// its expectation under the baseline law.
using CoefficientHooks = std::map<std::string, std::function<double(double, double)>>;

struct ExpansionCoeffs {
  std::vector<double> m1;               ///< empty at a tie
  std::optional<double> m5;             ///< only at a tie
  std::optional<std::size_t> tie;       ///< r, 1-based
  std::map<std::string, double> higher;
};

inline ExpansionCoeffs expansion_coefficients(const IndexSpec& spec, std::span<const double> v0,
                                              const CoefficientHooks& hooks = {}, const GaussianPair& law = {}) {
  ExpansionCoeffs out;
  out.tie = spec.tie_position();
  if (out.tie) {
    out.m5 = law.is_standard() ? m5_total(spec, v0, *out.tie) : m5_total(spec, v0, *out.tie, law);
  } else {
    // a non-zero baseline mean is only expressible for a two-asset index
    const bool use_mu = spec.n_assets() == 2 && !(law.mu[0] == 0.0 && law.mu[1] == 0.0);
    out.m1 = m1_coefficients(spec, v0, use_mu ? std::span<const double>(law.mu) : std::span<const double>{});
  }
  for (const auto& [name, fn] : hooks) out.higher[name] = gaussian_expectation_2d(fn, law);
  return out;
}

enum class RateKind { no_prediction, no_blow_up, rate_half, rate_H_minus_half };

inline const char* to_string(RateKind k) {
  switch (k) {
    case RateKind::no_blow_up: return "no_blow_up";
    case RateKind::rate_half: return "rate_half";
    case RateKind::rate_H_minus_half: return "rate_H_minus_half";
    default: return "no_prediction";
  }
}

struct MFlags {
  bool m1_zero = true;
  bool m2_zero = true;
  bool m5_zero = true;
};

struct RatePrediction {
  RateKind kind = RateKind::no_prediction;
  double exponent = 0.0;               ///< alpha in |skew| ~ T^{-alpha}
  std::optional<double> hurst;         ///< H_j driving a rate_H_minus_half
  std::string rationale;
};

/// Blow-up rate from the Hurst exponents, the tie structure and the
/// zero/non-zero pattern of the expansion coefficients.
inline RatePrediction predicted_rate(std::span<const double> hurst, std::span<const double> s0, MFlags flags) {
  if (hurst.empty()) return {RateKind::no_prediction, 0.0, std::nullopt, "no assets"};
  bool tie = false;
  for (std::size_t j = 1; j < s0.size(); ++j) tie = tie || s0[j] == s0[j - 1];
  const double h_min = *std::min_element(hurst.begin(), hurst.end());

  if (tie) {
    if (!flags.m5_zero) return {RateKind::rate_half, 0.5, std::nullopt, "tied starts, m5 != 0"};
    return {RateKind::no_prediction, 0.0, std::nullopt, "tied starts with m5 = 0"};
  }
  if (!flags.m1_zero) return {RateKind::no_prediction, 0.0, std::nullopt, "m1 != 0"};
  if (h_min >= 0.5) return {RateKind::no_blow_up, 0.0, std::nullopt, "distinct starts, all H >= 1/2, m1 = 0"};
  if (!flags.m2_zero)
    return {RateKind::rate_H_minus_half, 0.5 - h_min, h_min, "distinct starts, H_min < 1/2, m1 = 0, m2 != 0"};
  return {RateKind::no_prediction, 0.0, std::nullopt, "distinct starts, H_min < 1/2, m2 = 0"};
}

/// Flags and Hurst exponents for a concrete model. Only assets that occupy a
/// weighted slot at small T count: ranks 1..n_top, plus the tie partner.
/// m1 = 0 under the standard baseline; m2 != 0 iff some counted asset is
/// rough (H < 1/2) with non-zero leverage.
struct RateInputs {
  std::vector<double> hurst;
  MFlags flags;
};

inline RateInputs rate_inputs(const ModelSpec& model, const IndexSpec& spec) {
  spec.validate();
  if (model.size() != spec.n_assets()) throw ConfigError("model and index disagree on the number of assets");
  std::size_t counted = spec.n_top;
  const auto tie = spec.tie_position();
  if (tie && *tie - 1 == spec.n_top) counted = spec.n_top + 1;

  RateInputs out;
  for (std::size_t j = 0; j < counted; ++j) {
    const auto& a = model.assets[j];
    const double h = ModelSpec::hurst_of(a);
    const double rho = std::visit(
        [](const auto& m) -> double {
          if constexpr (std::is_same_v<std::decay_t<decltype(m)>, Gbm>) return 0.0;
          else return m.rho;
        },
        a);
    out.hurst.push_back(h);
    if (h < 0.5 && rho != 0.0) out.flags.m2_zero = false;
  }
  if (tie) {
    std::vector<double> v0(model.size());
    for (std::size_t j = 0; j < v0.size(); ++j) v0[j] = model.spot_variance(j);
    out.flags.m5_zero = std::abs(m5_total(spec, v0, *tie)) <= 1e-12 * spec.initial_value();
  }
  return out;
}

inline RatePrediction predicted_rate(const ModelSpec& model, const IndexSpec& spec) {
  const auto in = rate_inputs(model, spec);
  return predicted_rate(in.hurst, spec.s0, in.flags);
}

}  // namespace rankskew
