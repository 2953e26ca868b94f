#pragma once

#include <stdexcept>
#include <string>

namespace rankskew {

/// Invalid user input: malformed configs, bad parameters, precondition breaches.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A computation produced something it cannot recover from (non-finite
/// log-prices, a covariance that will not factor, a root that will not bracket).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An option price fell outside the strict no-arbitrage interior, so no
/// implied volatility exists. Usually Monte Carlo noise; more paths help.
class ArbitrageBoundError : public NumericalError {
 public:
  enum class Bound { lower, upper };

  ArbitrageBoundError(Bound bound, double price, double limit)
      : NumericalError(describe(bound, price, limit)), bound_(bound), price_(price), limit_(limit) {}

  Bound bound() const noexcept { return bound_; }
  double price() const noexcept { return price_; }
  double limit() const noexcept { return limit_; }

 private:
  static std::string describe(Bound bound, double price, double limit) {
    return std::string(bound == Bound::lower ? "lower" : "upper") +
           " arbitrage bound violated: price " + std::to_string(price) +
           (bound == Bound::lower ? " <= intrinsic " : " >= forward ") + std::to_string(limit);
  }

  Bound bound_;
  double price_;
  double limit_;
};

/// Too few usable data points for a fit.
class InsufficientDataError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace rankskew
