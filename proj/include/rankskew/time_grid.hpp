#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "rankskew/error.hpp"

namespace rankskew {

/// Simulation times t_0 = 0 < t_1 < ... < t_N, in years.
class TimeGrid {
 public:
  explicit TimeGrid(std::vector<double> times) : t_(std::move(times)) {
    if (t_.size() < 2) throw ConfigError("time grid needs at least two nodes");
    if (t_.front() != 0.0) throw ConfigError("time grid must start at 0");
    for (std::size_t i = 1; i < t_.size(); ++i) {
      if (!std::isfinite(t_[i]) || !(t_[i] > t_[i - 1]))
        throw ConfigError("time grid must be finite and strictly increasing (node " + std::to_string(i) + ")");
    }
  }

  /// Uniform grid on [0, horizon] whose step is the largest value <= max_dt
  /// dividing the horizon evenly.
  static TimeGrid uniform(double horizon, double max_dt) {
    if (!(horizon > 0.0) || !(max_dt > 0.0)) throw ConfigError("uniform grid needs horizon > 0 and dt > 0");
    const auto steps = static_cast<std::size_t>(std::max(1.0, std::ceil(horizon / max_dt - 1e-9)));
    std::vector<double> t(steps + 1);
    for (std::size_t i = 0; i <= steps; ++i) t[i] = horizon * static_cast<double>(i) / static_cast<double>(steps);
    t.back() = horizon;
    return TimeGrid(std::move(t));
  }

  std::span<const double> times() const noexcept { return t_; }
  std::size_t nodes() const noexcept { return t_.size(); }
  std::size_t steps() const noexcept { return t_.size() - 1; }
  double operator[](std::size_t i) const { return t_[i]; }
  double horizon() const noexcept { return t_.back(); }
  double dt(std::size_t step) const { return t_[step + 1] - t_[step]; }

  bool is_uniform(double rtol = 1e-10) const {
    const double h = horizon() / static_cast<double>(steps());
    for (std::size_t i = 0; i < steps(); ++i)
      if (std::abs(dt(i) - h) > rtol * h) return false;
    return true;
  }

  friend bool operator==(const TimeGrid&, const TimeGrid&) = default;

 private:
  std::vector<double> t_;
};

}  // namespace rankskew
