#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rankskew/dynamics.hpp"
#include "rankskew/error.hpp"

namespace rankskew {

/// I_t = sum_{j <= n_top} w_j S^{(j)}_t over the ranked prices.
struct IndexSpec {
  std::vector<double> s0;       ///< initial prices, non-increasing
  std::vector<double> weights;  ///< w_1..w_{n_top}, all > 0
  std::size_t n_top = 1;

  std::size_t n_assets() const noexcept { return s0.size(); }

  void validate() const {
    if (s0.empty()) throw ConfigError("index needs at least one asset");
    if (n_top == 0 || n_top > s0.size())
      throw ConfigError("n_top must satisfy 0 < n_top <= n (got " + std::to_string(n_top) + ")");
    if (weights.size() != n_top)
      throw ConfigError("expected " + std::to_string(n_top) + " weights, got " + std::to_string(weights.size()));
    for (double w : weights)
      if (!(w > 0.0) || !std::isfinite(w)) throw ConfigError("index weights must be positive");
    for (double s : s0)
      if (!(s > 0.0) || !std::isfinite(s)) throw ConfigError("initial prices must be positive");
    for (std::size_t i = 0; i < s0.size(); ++i)
      for (std::size_t j = i + 2; j < s0.size(); ++j)
        if (s0[i] == s0[j] && s0[i + 1] != s0[i])
          throw ConfigError("tied initial prices must be adjacent (positions " + std::to_string(i + 1) + " and " +
                            std::to_string(j + 1) + ")");
    std::size_t ties = 0;
    for (std::size_t j = 1; j < s0.size(); ++j) {
      if (s0[j] > s0[j - 1]) throw ConfigError("initial prices must be sorted non-increasing");
      if (s0[j] == s0[j - 1]) ++ties;
    }
    if (ties > 1) throw ConfigError("at most one pair of initial prices may be tied");
  }

  /// 1-based r with s0[r-2] == s0[r-1], if the starts contain a tie.
  std::optional<std::size_t> tie_position() const {
    for (std::size_t j = 1; j < s0.size(); ++j)
      if (s0[j] == s0[j - 1]) return j + 1;
    return std::nullopt;
  }

  double initial_value() const;

  friend bool operator==(const IndexSpec&, const IndexSpec&) = default;
};

/// Monte Carlo mean with standard error (sample sd / sqrt(n)).
struct McEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t n_paths = 0;
};

inline McEstimate mc_mean(std::span<const double> xs) {
  const std::size_t n = xs.size();
  if (n == 0) return {};
  double sum = 0.0;
  for (double x : xs) sum += x;
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  const double sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
  return {mean, sd / std::sqrt(static_cast<double>(n)), n};
}

/// Prices sorted non-increasing; equal prices keep their input order.
inline std::vector<double> rank_prices(std::span<const double> prices) {
  std::vector<double> out(prices.begin(), prices.end());
  std::stable_sort(out.begin(), out.end(), std::greater<>());
  return out;
}

inline double index_value(std::span<const double> prices, const IndexSpec& spec) {
  if (prices.size() != spec.n_assets())
    throw ConfigError("index_value: got " + std::to_string(prices.size()) + " prices for a " +
                      std::to_string(spec.n_assets()) + "-asset index");
  const auto ranked = rank_prices(prices);
  double v = 0.0;
  for (std::size_t j = 0; j < spec.n_top; ++j) v += spec.weights[j] * ranked[j];
  return v;
}

inline double IndexSpec::initial_value() const { return index_value(s0, *this); }

/// I_T on every path of a batch.
inline std::vector<double> index_values(const PathBatch& batch, const IndexSpec& spec) {
  std::vector<double> out(batch.n_paths());
  for (std::size_t p = 0; p < out.size(); ++p) out[p] = index_value(batch.path(p), spec);
  return out;
}

/// Path count, Euler step and seed for a Monte Carlo pricer; the time grid is
/// the uniform grid on [0, T] with step <= dt.
struct McSettings {
  std::size_t n_paths = 10000;
  double dt = 0.05 / 365.0;
  std::uint64_t seed = 1;

  friend bool operator==(const McSettings&, const McSettings&) = default;
};

inline SimConfig sim_config(double maturity, const McSettings& mc) {
  if (!(maturity > 0.0)) throw ConfigError("maturity must be > 0");
  return {mc.n_paths, TimeGrid::uniform(maturity, mc.dt), mc.seed, false};
}

inline PathBatch simulate_index_assets(const ModelSpec& model, const IndexSpec& spec, double maturity,
                                       const McSettings& mc) {
  spec.validate();
  return euler_simulate(model, spec.s0, sim_config(maturity, mc));
}

/// F_{0,T} = E[I_T].
inline McEstimate futures_price(const ModelSpec& model, const IndexSpec& spec, double maturity,
                                const McSettings& mc) {
  const auto batch = simulate_index_assets(model, spec, maturity, mc);
  const auto values = index_values(batch, spec);
  return mc_mean(values);
}

}  // namespace rankskew
