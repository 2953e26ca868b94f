#pragma once

// Zero-rate Black-Scholes in log-strike form: strike = x e^k,
//   C = x N(d1) - x e^k N(d2),  d1 = (-k + sigma^2 T / 2) / (sigma sqrt T).

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "rankskew/error.hpp"

namespace rankskew {

inline double norm_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }
inline double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

struct BsInputs {
  double maturity = 1.0;
  double spot = 100.0;  ///< x: spot or forward
  double log_strike = 0.0;
  double sigma = 0.2;
};

namespace detail {

// Value of the out-of-the-money side: the call for k >= 0, the put for k < 0.
inline double bs_otm_value(double maturity, double x, double k, double sigma) {
  const double sd = sigma * std::sqrt(maturity);
  if (!(sd > 0.0)) return 0.0;
  const double d1 = (-k + 0.5 * sd * sd) / sd;
  const double d2 = d1 - sd;
  if (k >= 0.0) return x * (norm_cdf(d1) - std::exp(k) * norm_cdf(d2));
  return x * (std::exp(k) * norm_cdf(-d2) - norm_cdf(-d1));
}

inline double intrinsic(double x, double k) { return k < 0.0 ? x * -std::expm1(k) : 0.0; }

}  // namespace detail

inline double bs_price(const BsInputs& in) {
  if (std::isinf(in.log_strike)) return in.log_strike > 0.0 ? 0.0 : in.spot;
  return detail::intrinsic(in.spot, in.log_strike) +
         detail::bs_otm_value(in.maturity, in.spot, in.log_strike, in.sigma);
}

/// dC/dsigma = x sqrt(T) phi(d1).
inline double bs_vega(const BsInputs& in) {
  const double sd = in.sigma * std::sqrt(in.maturity);
  if (!(sd > 0.0)) return 0.0;
  const double d1 = (-in.log_strike + 0.5 * sd * sd) / sd;
  return in.spot * std::sqrt(in.maturity) * norm_pdf(d1);
}

/// ATM vega: x sqrt(T) e^{-sigma^2 T / 8} / sqrt(2 pi).
inline double bs_vega_atm(double maturity, double x, double sigma) {
  return x * std::sqrt(maturity) * std::exp(-sigma * sigma * maturity / 8.0) / std::sqrt(2.0 * std::numbers::pi);
}

/// dC/dk = -x e^k N(d2).
inline double bs_dk(const BsInputs& in) {
  const double sd = in.sigma * std::sqrt(in.maturity);
  if (!(sd > 0.0)) return in.log_strike < 0.0 ? -in.spot * std::exp(in.log_strike) : 0.0;
  const double d2 = (-in.log_strike - 0.5 * sd * sd) / sd;
  return -in.spot * std::exp(in.log_strike) * norm_cdf(d2);
}

/// dC/dk at k = 0: -x N(-sigma sqrt(T) / 2).
inline double bs_dk_atm(double maturity, double x, double sigma) {
  return -x * norm_cdf(-0.5 * sigma * std::sqrt(maturity));
}

/// Solves bs_price(sigma) = price. Brackets on [1e-8, 10] and runs Newton,
/// falling back to bisection whenever a step leaves the bracket.
inline double implied_vol(double price, double maturity, double x, double k) {
  if (!(maturity > 0.0) || !(x > 0.0)) throw ConfigError("implied_vol needs T > 0 and x > 0");
  const double lower = detail::intrinsic(x, k);
  if (!(price > lower)) throw ArbitrageBoundError(ArbitrageBoundError::Bound::lower, price, lower);
  if (!(price < x)) throw ArbitrageBoundError(ArbitrageBoundError::Bound::upper, price, x);

  const double target = price - lower;
  auto f = [&](double s) { return detail::bs_otm_value(maturity, x, k, s) - target; };
  double lo = 1e-8, hi = 10.0;
  if (f(lo) > 0.0 || f(hi) < 0.0)
    throw NumericalError("implied vol not bracketed in [1e-8, 10] for price " + std::to_string(price));

  const double sqrt_t = std::sqrt(maturity);
  double s = std::clamp(std::sqrt(2.0 * std::numbers::pi) * target / (x * sqrt_t), 0.05, 2.0);
  for (int iter = 0; iter < 200; ++iter) {
    const double fs = f(s);
    if (fs == 0.0) return s;
    (fs > 0.0 ? hi : lo) = s;
    const double vega = bs_vega({maturity, x, k, s});
    double next = vega > 0.0 ? s - fs / vega : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - s) <= 1e-15 * std::max(1.0, s) || hi - lo <= 1e-15 * hi) {
      s = next;
      break;
    }
    s = next;
  }
  if (std::abs(f(s)) > 1e-12 * x)
    throw NumericalError("implied vol did not converge for price " + std::to_string(price));
  return s;
}

}  // namespace rankskew
