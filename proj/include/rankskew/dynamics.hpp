#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "rankskew/error.hpp"
#include "rankskew/parallel.hpp"
#include "rankskew/rng.hpp"
#include "rankskew/time_grid.hpp"
#include "rankskew/volterra.hpp"

namespace rankskew {

/// dS = S sigma dB.
struct Gbm {
  double sigma = 0.2;
  friend bool operator==(const Gbm&, const Gbm&) = default;
};

/// Volatility sigma_t = sigma0 / sqrt(1 + t^{2H}) * (1 + V_t), signed, with
/// dS = S sigma_t (rho dB + sqrt(1 - rho^2) dW) and V driven by B.
struct FractionalSteinStein {
  double sigma0 = 0.2;
  double hurst = 0.5;
  double rho = 0.0;
  friend bool operator==(const FractionalSteinStein&, const FractionalSteinStein&) = default;
};

/// Variance sigma_t = var0 exp(eta sqrt(2H) int_0^t (t-s)^{H-1/2} dB_s - eta^2 t^{2H} / 2),
/// with dZ = -sigma_t/2 dt + sqrt(sigma_t) (rho dB + sqrt(1 - rho^2) dW).
struct FractionalBergomi {
  double var0 = 0.04;
  double eta = 1.0;
  double hurst = 0.5;
  double rho = 0.0;
  friend bool operator==(const FractionalBergomi&, const FractionalBergomi&) = default;
};

using AssetModel = std::variant<Gbm, FractionalSteinStein, FractionalBergomi>;

/// n independent assets. Asset j is driven by its own (B^j, W^j).
struct ModelSpec {
  std::vector<AssetModel> assets;
  KernelNormalization normalization = KernelNormalization::unit_variance;
  DriverScheme scheme = DriverScheme::cholesky;

  std::size_t size() const noexcept { return assets.size(); }

  static bool is_fractional(const AssetModel& m) { return !std::holds_alternative<Gbm>(m); }

  static double hurst_of(const AssetModel& m) {
    return std::visit(
        [](const auto& a) -> double {
          if constexpr (std::is_same_v<std::decay_t<decltype(a)>, Gbm>) {
            return 0.5;
          } else {
            return a.hurst;
          }
        },
        m);
  }

  /// Hurst exponents, with GBM assets reported as 1/2.
  std::vector<double> hurst() const {
    std::vector<double> h;
    for (const auto& a : assets) h.push_back(hurst_of(a));
    return h;
  }

  FbmKernel kernel(std::size_t j) const { return {hurst_of(assets.at(j)), normalization, scheme}; }

  /// v_0^j(0): initial forward variance of asset j.
  double spot_variance(std::size_t j) const {
    return std::visit(
        [](const auto& a) -> double {
          using T = std::decay_t<decltype(a)>;
          if constexpr (std::is_same_v<T, Gbm>) return a.sigma * a.sigma;
          else if constexpr (std::is_same_v<T, FractionalSteinStein>) return a.sigma0 * a.sigma0;
          else return a.var0;
        },
        assets.at(j));
  }

  void validate() const {
    if (assets.empty()) throw ConfigError("model needs at least one asset");
    for (std::size_t j = 0; j < assets.size(); ++j) {
      const std::string who = "asset " + std::to_string(j + 1) + ": ";
      std::visit(
          [&](const auto& a) {
            using T = std::decay_t<decltype(a)>;
            if constexpr (std::is_same_v<T, Gbm>) {
              if (!(a.sigma >= 0.0) || !std::isfinite(a.sigma)) throw ConfigError(who + "sigma must be >= 0");
            } else {
              if (!(a.hurst > 0.0 && a.hurst < 1.0)) throw ConfigError(who + "H must lie in (0,1)");
              if (!(a.rho >= -1.0 && a.rho <= 1.0)) throw ConfigError(who + "rho must lie in [-1,1]");
              if constexpr (std::is_same_v<T, FractionalSteinStein>) {
                if (!(a.sigma0 > 0.0)) throw ConfigError(who + "sigma0 must be > 0");
              } else {
                if (!(a.var0 > 0.0)) throw ConfigError(who + "var0 must be > 0");
                if (!(a.eta >= 0.0)) throw ConfigError(who + "eta must be >= 0");
              }
            }
          },
          assets[j]);
    }
  }

  /// Canonical text form; identical models give identical strings.
  std::string describe() const {
    std::ostringstream os;
    os.precision(17);
    os << "norm=" << static_cast<int>(normalization) << ";scheme=" << static_cast<int>(scheme);
    for (const auto& a : assets) {
      std::visit(
          [&](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, Gbm>) os << ";gbm(" << m.sigma << ")";
            else if constexpr (std::is_same_v<T, FractionalSteinStein>)
              os << ";fss(" << m.sigma0 << "," << m.hurst << "," << m.rho << ")";
            else os << ";fbergomi(" << m.var0 << "," << m.eta << "," << m.hurst << "," << m.rho << ")";
          },
          a);
    }
    return os.str();
  }

  std::uint64_t fingerprint() const {
    std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
    for (unsigned char ch : describe()) h = (h ^ ch) * 1099511628211ULL;
    return h;
  }

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

struct SimConfig {
  std::size_t n_paths = 10000;
  TimeGrid grid = TimeGrid::uniform(1.0, 1.0);
  std::uint64_t seed = 0;
  bool store_full_paths = false;
};

/// Simulated prices. Immutable once built; `full` is filled only when requested.
struct PathBatch {
  RowMatrix terminal;         ///< paths x assets, S^j_T
  std::vector<double> full;   ///< paths x nodes x assets, row-major; empty unless requested
  std::uint64_t model_fingerprint = 0;
  SimConfig config;

  std::size_t n_paths() const noexcept { return static_cast<std::size_t>(terminal.rows()); }
  std::size_t n_assets() const noexcept { return static_cast<std::size_t>(terminal.cols()); }
  std::span<const double> path(std::size_t p) const {
    return {terminal.data() + p * n_assets(), n_assets()};
  }
};

/// Volatility (GBM, Stein-Stein) or variance (Bergomi) of asset j at every
/// grid node, per path (paths x nodes).
inline RowMatrix vol_path(const ModelSpec& model, std::size_t asset, const DriverPaths& driver,
                          const TimeGrid& grid) {
  if (!(driver.grid == grid)) throw ConfigError("vol_path: driver was sampled on a different grid");
  const auto rows = driver.volterra.rows();
  const auto cols = static_cast<Eigen::Index>(grid.nodes());
  RowMatrix out(rows, cols);
  const FbmKernel kernel = model.kernel(asset);
  std::visit(
      [&](const auto& a) {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, Gbm>) {
          out.setConstant(a.sigma);
        } else {
          for (Eigen::Index i = 0; i < cols; ++i) {
            const double t2h = std::pow(grid[static_cast<std::size_t>(i)], 2.0 * a.hurst);
            if constexpr (std::is_same_v<T, FractionalSteinStein>) {
              out.col(i) = (a.sigma0 / std::sqrt(1.0 + t2h)) * (1.0 + driver.volterra.col(i).array());
            } else {
              const double scale = a.eta * std::sqrt(2.0 * a.hurst) / kernel.constant();
              out.col(i) = (a.var0 * (scale * driver.volterra.col(i).array() - 0.5 * a.eta * a.eta * t2h).exp())
                               .max(0.0);
            }
          }
        }
      },
      model.assets.at(asset));
  return out;
}

namespace detail {

// Accumulates log-returns X^j of one chunk of m paths into x (m x assets).
// Normals are consumed asset by asset: GBM draws N per path; fractional
// assets draw their driver (2N per path) then W (N per path).
inline void euler_chunk(const ModelSpec& model, const TimeGrid& grid, NormalSampler& normals, std::size_t m,
                        RowMatrix& x, std::vector<double>* full, std::size_t full_offset) {
  const std::size_t n = grid.steps();
  const std::size_t n_assets = model.size();
  x.setZero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n_assets));
  std::vector<double> sqrt_dt(n), t2h(n);
  for (std::size_t i = 0; i < n; ++i) sqrt_dt[i] = std::sqrt(grid.dt(i));

  auto record = [&](std::size_t p, std::size_t node, std::size_t j, double value) {
    if (full) (*full)[((full_offset + p) * grid.nodes() + node) * n_assets + j] = value;
  };
  auto check = [&](double z, std::size_t p, std::size_t step, std::size_t j) {
    if (!std::isfinite(z))
      throw NumericalError("non-finite log-price for asset " + std::to_string(j + 1) + " on path " +
                           std::to_string(full_offset + p) + " at step " + std::to_string(step));
  };

  for (std::size_t j = 0; j < n_assets; ++j) {
    const AssetModel& asset = model.assets[j];
    if (const auto* gbm = std::get_if<Gbm>(&asset)) {
      std::vector<double> xi(n);
      const double drift = -0.5 * gbm->sigma * gbm->sigma;
      for (std::size_t p = 0; p < m; ++p) {
        normals.fill(xi);
        double z = 0.0;
        record(p, 0, j, z);
        for (std::size_t i = 0; i < n; ++i) {
          z += drift * grid.dt(i) + gbm->sigma * sqrt_dt[i] * xi[i];
          record(p, i + 1, j, z);
        }
        check(z, p, n, j);
        x(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(j)) = z;
      }
      continue;
    }

    const FbmKernel kernel = model.kernel(j);
    const auto factor = shared_factor(grid, kernel);
    Eigen::MatrixXd db, v;
    sample_driver_chunk(*factor, normals, m, db, v);
    Eigen::MatrixXd dw(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
    for (Eigen::Index p = 0; p < dw.cols(); ++p) normals.fill(std::span<double>(dw.col(p).data(), n));
    for (std::size_t i = 0; i < n; ++i) t2h[i] = std::pow(grid[i], 2.0 * kernel.hurst);

    const auto* fss = std::get_if<FractionalSteinStein>(&asset);
    const auto* berg = std::get_if<FractionalBergomi>(&asset);
    const double rho = fss ? fss->rho : berg->rho;
    const double rho_bar = std::sqrt(std::max(0.0, 1.0 - rho * rho));
    const double berg_scale = berg ? berg->eta * std::sqrt(2.0 * kernel.hurst) / kernel.constant() : 0.0;

    for (std::size_t p = 0; p < m; ++p) {
      const auto pi = static_cast<Eigen::Index>(p);
      double z = 0.0;
      record(p, 0, j, z);
      for (std::size_t i = 0; i < n; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        // left-point volatility: V at node t_i (V_{t_0} = 0)
        const double vt = i == 0 ? 0.0 : v(ii - 1, pi);
        const double shock = rho * db(ii, pi) + rho_bar * dw(ii, pi) * sqrt_dt[i];
        if (fss) {
          const double vol = fss->sigma0 / std::sqrt(1.0 + t2h[i]) * (1.0 + vt);
          z += -0.5 * vol * vol * grid.dt(i) + vol * shock;
        } else {
          const double var =
              std::max(0.0, berg->var0 * std::exp(berg_scale * vt - 0.5 * berg->eta * berg->eta * t2h[i]));
          z += -0.5 * var * grid.dt(i) + std::sqrt(var) * shock;
        }
        record(p, i + 1, j, z);
        if (!std::isfinite(z)) check(z, p, i + 1, j);
      }
      x(pi, static_cast<Eigen::Index>(j)) = z;
    }
  }
}

}  // namespace detail

/// Euler scheme on log-prices with volatility frozen at the left end of each
/// step. Chunk c of kChunkSize paths uses stream (cfg.seed, c).
inline PathBatch euler_simulate(const ModelSpec& model, std::span<const double> s0, const SimConfig& cfg) {
  model.validate();
  if (s0.size() != model.size())
    throw ConfigError("s0 has " + std::to_string(s0.size()) + " entries, model has " + std::to_string(model.size()));
  for (double s : s0)
    if (!(s > 0.0) || !std::isfinite(s)) throw ConfigError("initial prices must be positive and finite");
  if (cfg.n_paths == 0) throw ConfigError("n_paths must be >= 1");

  const std::size_t n_assets = model.size();
  const std::size_t nodes = cfg.grid.nodes();
  PathBatch batch;
  batch.model_fingerprint = model.fingerprint();
  batch.config = cfg;
  batch.terminal.resize(static_cast<Eigen::Index>(cfg.n_paths), static_cast<Eigen::Index>(n_assets));
  if (cfg.store_full_paths) batch.full.assign(cfg.n_paths * nodes * n_assets, 0.0);

  const std::size_t chunks = (cfg.n_paths + kChunkSize - 1) / kChunkSize;
  parallel_for(chunks, [&](std::size_t c) {
    const std::size_t first = c * kChunkSize;
    const std::size_t m = std::min(kChunkSize, cfg.n_paths - first);
    NormalSampler normals({cfg.seed, c});
    RowMatrix x;
    detail::euler_chunk(model, cfg.grid, normals, m, x, cfg.store_full_paths ? &batch.full : nullptr, first);
    for (std::size_t p = 0; p < m; ++p)
      for (std::size_t j = 0; j < n_assets; ++j)
        batch.terminal(static_cast<Eigen::Index>(first + p), static_cast<Eigen::Index>(j)) =
            s0[j] * std::exp(x(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(j)));
  });
  if (cfg.store_full_paths) {
    for (std::size_t p = 0; p < cfg.n_paths; ++p)
      for (std::size_t i = 0; i < nodes; ++i)
        for (std::size_t j = 0; j < n_assets; ++j) {
          double& v = batch.full[(p * nodes + i) * n_assets + j];
          v = s0[j] * std::exp(v);
        }
  }
  return batch;
}

}  // namespace rankskew
