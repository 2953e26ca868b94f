#pragma once

// ATM-skew term structures, power-law fits and the quasi-blow-up classifier.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rankskew/asymptotics.hpp"
#include "rankskew/error.hpp"
#include "rankskew/pricing.hpp"
#include "rankskew/rng.hpp"

namespace rankskew {

/// n points log-spaced on [lo, hi], endpoints exact.
inline std::vector<double> log_grid(double lo, double hi, std::size_t n) {
  if (!(lo > 0.0 && hi > lo) || n < 2) throw ConfigError("log_grid needs 0 < lo < hi and n >= 2");
  std::vector<double> g(n);
  const double step = std::log(hi / lo) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) g[i] = lo * std::exp(step * static_cast<double>(i));
  g.front() = lo;
  g.back() = hi;
  return g;
}

inline std::vector<double> default_maturity_grid() { return log_grid(1.0 / 365.0, 0.25, 16); }

inline void validate_maturities(std::span<const double> grid) {
  if (grid.empty()) throw ConfigError("maturity grid is empty");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > 0.0) || !std::isfinite(grid[i])) throw ConfigError("maturities must be positive");
    if (i > 0 && !(grid[i] > grid[i - 1])) throw ConfigError("maturity grid must be strictly increasing");
  }
}

struct MissingPoint {
  double maturity;
  std::string reason;
};

struct SkewCurve {
  SkewMethod method = SkewMethod::finite_difference;
  std::vector<SkewEstimate> points;  ///< ordered by T
  std::vector<MissingPoint> missing;
  std::uint64_t model_fingerprint = 0;
  std::vector<double> s0;
  std::uint64_t seed = 0;

  std::vector<double> maturities() const {
    std::vector<double> t;
    for (const auto& p : points) t.push_back(p.maturity);
    return t;
  }
  double max_abs_skew() const {
    double m = 0.0;
    for (const auto& p : points) m = std::max(m, std::abs(p.skew));
    return m;
  }
  const SkewEstimate* at(double maturity) const {
    for (const auto& p : points)
      if (p.maturity == maturity) return &p;
    return nullptr;
  }
};

struct CurvePair {
  SkewCurve finite_difference;
  SkewCurve formula;
};

/// Seed for the i-th maturity of a sweep.
inline std::uint64_t maturity_seed(std::uint64_t master, std::size_t i) { return mix_seed(master, 0x5eed0000ULL + i); }

/// Both estimators along a maturity grid. Maturity i simulates with
/// maturity_seed(mc.seed, i); strikes and estimators share that batch.
inline CurvePair skew_curves(const ModelSpec& model, const IndexSpec& spec, std::span<const double> grid,
                             const McSettings& mc, std::optional<double> dk = std::nullopt) {
  validate_maturities(grid);
  model.validate();
  spec.validate();
  CurvePair out;
  out.formula.method = SkewMethod::formula;
  for (auto* c : {&out.finite_difference, &out.formula}) {
    c->model_fingerprint = model.fingerprint();
    c->s0 = spec.s0;
    c->seed = mc.seed;
  }
  for (std::size_t i = 0; i < grid.size(); ++i) {
    McSettings local = mc;
    local.seed = maturity_seed(mc.seed, i);
    try {
      const auto pair = atm_skew(model, spec, grid[i], local, dk);
      out.finite_difference.points.push_back(pair.finite_difference);
      out.formula.points.push_back(pair.formula);
    } catch (const NumericalError& e) {
      out.finite_difference.missing.push_back({grid[i], e.what()});
      out.formula.missing.push_back({grid[i], e.what()});
    }
  }
  return out;
}

inline SkewCurve skew_curve(const ModelSpec& model, const IndexSpec& spec, std::span<const double> grid,
                            const McSettings& mc, SkewMethod method = SkewMethod::finite_difference) {
  auto both = skew_curves(model, spec, grid, mc);
  return method == SkewMethod::finite_difference ? std::move(both.finite_difference) : std::move(both.formula);
}

/// |skew| ~ c T^{-alpha} by OLS of ln|skew| on ln T.
struct PowerLawFit {
  double c = 0.0;
  double alpha = 0.0;
  double r2 = 0.0;
  double alpha_stderr = 0.0;
  std::pair<double, double> t_range{0.0, 0.0};
  std::size_t n_points = 0;
};

/// Fit over points with lo <= T <= hi and |skew| > 3 stderr. Needs >= 4 such points.
inline PowerLawFit fit_power_law(std::span<const double> maturities, std::span<const double> skews,
                                 std::span<const double> std_errors,
                                 std::pair<double, double> range = {0.0, INFINITY}) {
  if (maturities.size() != skews.size() || maturities.size() != std_errors.size())
    throw ConfigError("fit_power_law: column lengths differ");
  std::vector<double> x, y;
  for (std::size_t i = 0; i < maturities.size(); ++i) {
    const double t = maturities[i];
    if (t < range.first || t > range.second) continue;
    if (!(t > 0.0) || !(std::abs(skews[i]) > 3.0 * std_errors[i])) continue;
    x.push_back(std::log(t));
    y.push_back(std::log(std::abs(skews[i])));
  }
  const std::size_t n = x.size();
  if (n < 4)
    throw InsufficientDataError("power-law fit needs >= 4 significant points, got " + std::to_string(n));

  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) mx += x[i], my += y[i];
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw InsufficientDataError("power-law fit needs distinct maturities");

  PowerLawFit fit;
  fit.n_points = n;
  fit.t_range = {std::exp(*std::min_element(x.begin(), x.end())), std::exp(*std::max_element(x.begin(), x.end()))};
  // constant curve: ln|skew| carries only rounding noise
  const bool flat = syy <= 1e-26 * static_cast<double>(n) * std::max(1.0, my * my);
  const double slope = flat ? 0.0 : sxy / sxx;
  fit.alpha = -slope;
  fit.c = std::exp(my - slope * mx);
  double ss_res = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = y[i] - (my + slope * (x[i] - mx));
    ss_res += e * e;
  }
  fit.r2 = flat ? 1.0 : std::clamp(1.0 - ss_res / syy, 0.0, 1.0);
  fit.alpha_stderr = n > 2 ? std::sqrt(ss_res / static_cast<double>(n - 2) / sxx) : 0.0;
  return fit;
}

inline PowerLawFit fit_power_law(const SkewCurve& curve, std::pair<double, double> range = {0.0, INFINITY}) {
  std::vector<double> t, s, e;
  for (const auto& p : curve.points) {
    t.push_back(p.maturity);
    s.push_back(p.skew);
    e.push_back(p.std_error);
  }
  return fit_power_law(t, s, e, range);
}

/// Tunables of the operationalized classification.
struct ClassifierSettings {
  double blow_up_alpha = 0.3;     ///< clause (i)
  double blow_up_r2 = 0.9;        ///< clause (i)
  double continuity_sigmas = 2.0; ///< clause (iii)
  double flatten_ratio = 0.8;     ///< empirical no-blow-up: |skew(T_min)| < ratio * max
  double half_rate_alpha = 0.4;   ///< empirical rate_half vs rate_H_minus_half split
  double flat_alpha = 0.15;       ///< empirical no-blow-up below this exponent
};

/// |skew(T_min)| / max_T |skew(T)|.
inline double flattening_ratio(const SkewCurve& curve) {
  if (curve.points.empty()) throw InsufficientDataError("empty skew curve");
  const double m = curve.max_abs_skew();
  return m > 0.0 ? std::abs(curve.points.front().skew) / m : 1.0;
}

struct EmpiricalRate {
  RateKind kind = RateKind::no_prediction;
  std::optional<PowerLawFit> fit;
  double flattening = 1.0;
  std::string note;
};

/// Kind read off a single curve: flattening near T = 0 means no blow-up;
/// otherwise the fitted exponent picks the rate.
inline EmpiricalRate classify_curve(const SkewCurve& curve, const ClassifierSettings& cs = {}) {
  EmpiricalRate out;
  out.flattening = flattening_ratio(curve);
  try {
    out.fit = fit_power_law(curve);
  } catch (const InsufficientDataError& e) {
    out.note = e.what();
  }
  if (out.flattening < cs.flatten_ratio) {
    out.kind = RateKind::no_blow_up;
    out.note = "flattens near T = 0";
  } else if (!out.fit || out.fit->alpha < cs.flat_alpha) {
    out.kind = RateKind::no_blow_up;
    if (out.note.empty()) out.note = "exponent below blow-up range";
  } else {
    out.kind = out.fit->alpha >= cs.half_rate_alpha ? RateKind::rate_half : RateKind::rate_H_minus_half;
  }
  return out;
}

struct FamilyMember {
  std::vector<double> s0;
  SkewCurve curve;
  bool tied = false;
  std::optional<PowerLawFit> fit;
  double flattening = 1.0;
  bool flattens = false;
  double gap = 0.0;     ///< |skew(T*) - skew_tie(T*)|
  double gap_se = 0.0;  ///< stderr of this member's skew at T*
};

struct QuasiBlowUpReport {
  std::vector<FamilyMember> members;  ///< untied ordered far to near, then the tie
  double t_star = 0.0;
  bool clause_i = false;
  bool clause_ii = false;
  bool clause_iii = false;
  std::vector<std::string> notes;

  bool quasi_blow_up() const { return clause_i && clause_ii && clause_iii; }
  const FamilyMember& tied() const { return members.back(); }
};

namespace detail {

inline double distance(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d += std::abs(a[i] - b[i]);
  return d;
}

inline bool has_tie(const std::vector<double>& s0) {
  for (std::size_t j = 1; j < s0.size(); ++j)
    if (s0[j] == s0[j - 1]) return true;
  return false;
}

}  // namespace detail

/// Pure fold over precomputed curves, one per family member.
inline QuasiBlowUpReport classify_quasi_blow_up(std::vector<SkewCurve> curves, const ClassifierSettings& cs = {}) {
  std::size_t n_tied = 0;
  for (const auto& c : curves) n_tied += detail::has_tie(c.s0) ? 1 : 0;
  if (n_tied != 1 || curves.size() < 3)
    throw ConfigError("family needs exactly one tied configuration and at least two untied ones");
  for (const auto& c : curves)
    if (c.points.empty()) throw InsufficientDataError("family member has no skew points");

  auto tie_it = std::find_if(curves.begin(), curves.end(), [](const SkewCurve& c) { return detail::has_tie(c.s0); });
  SkewCurve tie_curve = std::move(*tie_it);
  curves.erase(tie_it);
  for (const auto& c : curves)
    if (c.s0.size() != tie_curve.s0.size()) throw ConfigError("family members differ in asset count");
  std::stable_sort(curves.begin(), curves.end(), [&](const SkewCurve& a, const SkewCurve& b) {
    return detail::distance(a.s0, tie_curve.s0) > detail::distance(b.s0, tie_curve.s0);
  });

  QuasiBlowUpReport rep;
  const auto grid = tie_curve.maturities();
  rep.t_star = grid[(grid.size() - 1) / 2];
  const SkewEstimate* tie_star = tie_curve.at(rep.t_star);

  FamilyMember tie_member;
  tie_member.s0 = tie_curve.s0;
  tie_member.curve = tie_curve;
  tie_member.tied = true;
  tie_member.flattening = flattening_ratio(tie_curve);
  try {
    tie_member.fit = fit_power_law(tie_curve);
    rep.clause_i = tie_member.fit->alpha >= cs.blow_up_alpha && tie_member.fit->r2 >= cs.blow_up_r2;
  } catch (const InsufficientDataError& e) {
    rep.notes.push_back(std::string("tied fit: ") + e.what());
  }

  rep.clause_ii = true;
  rep.clause_iii = tie_star != nullptr;
  if (!tie_star) rep.notes.push_back("tied curve has no point at T*");
  for (auto& c : curves) {
    FamilyMember m;
    m.s0 = c.s0;
    m.curve = std::move(c);
    m.flattening = flattening_ratio(m.curve);
    m.flattens = m.flattening < 1.0;
    rep.clause_ii = rep.clause_ii && m.flattens;
    try {
      m.fit = fit_power_law(m.curve);
    } catch (const InsufficientDataError&) {
    }
    if (const auto* p = m.curve.at(rep.t_star); p && tie_star) {
      m.gap = std::abs(p->skew - tie_star->skew);
      m.gap_se = p->std_error;
    } else {
      rep.clause_iii = false;
      rep.notes.push_back("member without a point at T*");
    }
    rep.members.push_back(std::move(m));
  }
  // gaps shrink toward the tie, up to noise; the tie's own error is common to both gaps
  for (std::size_t i = 1; i < rep.members.size() && rep.clause_iii; ++i) {
    const auto& far = rep.members[i - 1];
    const auto& near = rep.members[i];
    const double tol = cs.continuity_sigmas * std::hypot(far.gap_se, near.gap_se);
    if (near.gap > far.gap + tol) rep.clause_iii = false;
  }
  rep.members.push_back(std::move(tie_member));
  return rep;
}

/// Simulates every family member with the base model and weights, then classifies.
inline QuasiBlowUpReport classify_quasi_blow_up(const ModelSpec& model, const IndexSpec& base_spec,
                                                const std::vector<std::vector<double>>& s0_family,
                                                std::span<const double> grid, const McSettings& mc,
                                                const ClassifierSettings& cs = {}) {
  if (s0_family.size() < 3) throw ConfigError("family needs exactly one tied configuration and at least two untied ones");
  std::vector<SkewCurve> curves;
  for (const auto& s0 : s0_family) {
    IndexSpec spec = base_spec;
    spec.s0 = s0;
    curves.push_back(skew_curve(model, spec, grid, mc));
  }
  return classify_quasi_blow_up(std::move(curves), cs);
}

}  // namespace rankskew
