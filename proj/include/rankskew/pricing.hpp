#pragma once

// Monte Carlo index options and two ATM-skew estimators that share one set of
// simulated index values (common random numbers across strikes):
//
//  * finite_difference: (sigma_IV(+dk) - sigma_IV(-dk)) / (2 dk);
//  * formula: the implicit-function identity
//      skew = sqrt(2 pi) e^{sigma^2 T / 8} / sqrt(T) * (C_k / F + N(-sigma sqrt(T) / 2))
//    with C_k = dC/dk at k = 0 = -F Q(I_T > F) and sigma the ATM implied vol.
//
// Standard errors come from per-path influence functions (delta method),
// including the sensitivity to the estimated futures price F, which is
// also the ATM strike.

#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rankskew/black_scholes.hpp"
#include "rankskew/index.hpp"

namespace rankskew {

enum class SkewMethod { finite_difference, formula };

inline const char* to_string(SkewMethod m) {
  return m == SkewMethod::finite_difference ? "finite_difference" : "formula";
}

struct SkewEstimate {
  double maturity = 0.0;
  double skew = 0.0;
  double std_error = 0.0;
  SkewMethod method = SkewMethod::finite_difference;
  double dk = 0.0;  ///< log-strike bump (finite_difference only)
};

/// Both estimators at one maturity, plus the quantities they were built from.
struct SkewPair {
  SkewEstimate finite_difference;
  SkewEstimate formula;
  McEstimate futures;
  double atm_vol = 0.0;
  double digital = 0.0;  ///< Q(I_T > F)
};

/// ATM skew from dC/dk / F at k = 0 and the ATM implied volatility.
inline double atm_skew_formula(double dc_dk_over_f, double sigma_iv, double maturity) {
  const double sd = sigma_iv * std::sqrt(maturity);
  return std::sqrt(2.0 * std::numbers::pi) * std::exp(sd * sd / 8.0) / std::sqrt(maturity) *
         (dc_dk_over_f + norm_cdf(-0.5 * sd));
}

/// E[(I_T - F e^k)^+] over a sample of index values.
inline McEstimate call_from_sample(std::span<const double> index, double forward, double k) {
  const double strike = forward * std::exp(k);
  std::vector<double> payoff(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) payoff[i] = std::max(index[i] - strike, 0.0);
  return mc_mean(payoff);
}

/// Q(I_T > strike) over a sample of index values.
inline McEstimate digital_from_sample(std::span<const double> index, double strike) {
  std::vector<double> hit(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) hit[i] = index[i] > strike ? 1.0 : 0.0;
  return mc_mean(hit);
}

inline McEstimate mc_call_price(const ModelSpec& model, const IndexSpec& spec, double maturity, double k,
                                double forward, const McSettings& mc) {
  if (!(forward > 0.0)) throw ConfigError("mc_call_price needs F > 0");
  const auto batch = simulate_index_assets(model, spec, maturity, mc);
  return call_from_sample(index_values(batch, spec), forward, k);
}

inline McEstimate mc_digital(const ModelSpec& model, const IndexSpec& spec, double maturity, double forward,
                             const McSettings& mc) {
  const auto batch = simulate_index_assets(model, spec, maturity, mc);
  return digital_from_sample(index_values(batch, spec), forward);
}

namespace detail {

struct StrikeSlice {
  double k, call, digital, vol, vega;
};

inline StrikeSlice slice(std::span<const double> index, double forward, double k, double maturity) {
  const double strike = forward * std::exp(k);
  double call = 0.0, hits = 0.0;
  for (double v : index) {
    call += std::max(v - strike, 0.0);
    hits += v > strike ? 1.0 : 0.0;
  }
  const auto n = static_cast<double>(index.size());
  call /= n;
  hits /= n;
  const double vol = implied_vol(call, maturity, forward, k);
  return {k, call, hits, vol, bs_vega({maturity, forward, k, vol})};
}

// Influence of path value v on sigma_IV(k).
inline double vol_influence(const StrikeSlice& s, double v, double forward) {
  const double payoff = std::max(v - forward * std::exp(s.k), 0.0);
  const double dprice_dforward = -std::exp(s.k) * s.digital - s.call / forward;
  return ((payoff - s.call) + dprice_dforward * (v - forward)) / s.vega;
}

inline double rms(const std::vector<double>& psi) {
  double ss = 0.0;
  for (double x : psi) ss += x * x;
  const auto n = static_cast<double>(psi.size());
  return psi.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
}

}  // namespace detail

/// Default bump, as a multiple of the ATM standard deviation sigma sqrt(T).
inline constexpr double kSkewBumpFactor = 0.25;
inline constexpr double kSkewBumpFloor = 1e-3;

/// Both skew estimators from one sample of I_T. The ATM strike is the sample
/// mean. dk defaults to max(kSkewBumpFactor sigma_ATM sqrt(T), kSkewBumpFloor).
inline SkewPair skew_from_sample(std::span<const double> index, double maturity,
                                 std::optional<double> dk = std::nullopt) {
  if (index.size() < 2) throw ConfigError("skew estimation needs at least two paths");
  if (dk && !(*dk > 0.0)) throw ConfigError("finite-difference bump dk must be > 0");
  const McEstimate fut = mc_mean(index);
  const double forward = fut.value;

  const auto atm = detail::slice(index, forward, 0.0, maturity);
  const double bump = dk.value_or(std::max(kSkewBumpFactor * atm.vol * std::sqrt(maturity), kSkewBumpFloor));
  const auto up = detail::slice(index, forward, bump, maturity);
  const auto down = detail::slice(index, forward, -bump, maturity);

  const double fd = (up.vol - down.vol) / (2.0 * bump);

  const double sd = atm.vol * std::sqrt(maturity);
  const double dc_dk_over_f = -atm.digital;
  const double formula = atm_skew_formula(dc_dk_over_f, atm.vol, maturity);
  const double amp = std::sqrt(2.0 * std::numbers::pi) * std::exp(sd * sd / 8.0) / std::sqrt(maturity);
  const double bracket = dc_dk_over_f + norm_cdf(-0.5 * sd);
  const double dskew_dvol =
      amp * (atm.vol * maturity / 4.0) * bracket - amp * 0.5 * std::sqrt(maturity) * norm_pdf(0.5 * sd);
  // density of I_T at F, from the digitals at the bumped strikes
  const double density = (down.digital - up.digital) / (forward * (std::exp(bump) - std::exp(-bump)));

  std::vector<double> psi_fd(index.size()), psi_formula(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    const double v = index[i];
    psi_fd[i] = (detail::vol_influence(up, v, forward) - detail::vol_influence(down, v, forward)) / (2.0 * bump);
    const double hit = v > forward ? 1.0 : 0.0;
    const double d_influence = -(hit - atm.digital) + density * (v - forward);
    psi_formula[i] = amp * d_influence + dskew_dvol * detail::vol_influence(atm, v, forward);
  }

  SkewPair out;
  out.finite_difference = {maturity, fd, detail::rms(psi_fd), SkewMethod::finite_difference, bump};
  out.formula = {maturity, formula, detail::rms(psi_formula), SkewMethod::formula, 0.0};
  out.futures = fut;
  out.atm_vol = atm.vol;
  out.digital = atm.digital;
  return out;
}

inline SkewPair atm_skew(const ModelSpec& model, const IndexSpec& spec, double maturity, const McSettings& mc,
                         std::optional<double> dk = std::nullopt) {
  const auto batch = simulate_index_assets(model, spec, maturity, mc);
  return skew_from_sample(index_values(batch, spec), maturity, dk);
}

inline SkewEstimate atm_skew_fd(const ModelSpec& model, const IndexSpec& spec, double maturity,
                                const McSettings& mc, std::optional<double> dk = std::nullopt) {
  return atm_skew(model, spec, maturity, mc, dk).finite_difference;
}

}  // namespace rankskew
