#pragma once

// Riemann-Liouville (one-sided) fractional processes
//
//   V_t = c * int_0^t (t - s)^(H - 1/2) dB_s
//
// sampled jointly with the Brownian motion B that drives them. Both samplers
// are linear maps of i.i.d. standard normals: per path we draw Z1, Z2 in R^N
// (N = grid steps) and set
//
//   dB = sqrt(dt) * Z1,     V = L21 * Z1 + L22 * Z2,
//
// with (L21, L22) either the exact Cholesky blocks of the joint covariance of
// (dB, V) or the first-order hybrid scheme weights.

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "rankskew/error.hpp"
#include "rankskew/parallel.hpp"
#include "rankskew/rng.hpp"
#include "rankskew/time_grid.hpp"

namespace rankskew {

enum class KernelNormalization {
  as_written,     ///< c = 1 / Gamma(H + 1/2); Var(V_t) = t^{2H} / (2H Gamma(H+1/2)^2)
  unit_variance,  ///< c = sqrt(2H); Var(V_t) = t^{2H}
};

enum class DriverScheme { cholesky, hybrid };

struct FbmKernel {
  double hurst = 0.5;
  KernelNormalization normalization = KernelNormalization::unit_variance;
  DriverScheme scheme = DriverScheme::cholesky;

  void validate() const {
    if (!(hurst > 0.0 && hurst < 1.0))
      throw ConfigError("Hurst exponent must lie in (0,1), got " + std::to_string(hurst));
  }

  double exponent() const noexcept { return hurst - 0.5; }

  double constant() const {
    validate();
    return normalization == KernelNormalization::unit_variance ? std::sqrt(2.0 * hurst)
                                                               : 1.0 / std::tgamma(hurst + 0.5);
  }

  friend bool operator==(const FbmKernel&, const FbmKernel&) = default;
};

namespace detail {

// int_0^s x^a (x + d)^a dx for d >= 0. Double-exponential quadrature absorbs
// the x^a endpoint singularity.
inline double shifted_power_integral(double s, double d, double a) {
  if (s <= 0.0) return 0.0;
  if (d == 0.0) return std::pow(s, 2.0 * a + 1.0) / (2.0 * a + 1.0);
  // the rule grows its abscissa tables lazily, so each thread keeps its own
  thread_local boost::math::quadrature::tanh_sinh<double> rule;
  auto f = [=](double x) { return std::pow(x, a) * std::pow(x + d, a); };
  return rule.integrate(f, 0.0, s, 1e-13);
}

// G(i, j) = int_0^{min(i,j)} (i - u)^a (j - u)^a du on the integer lattice
// 1..n, so that on a uniform grid Cov(V_{t_i}, V_{t_j}) = c^2 dt^{2H} G(i, j).
inline Eigen::MatrixXd lattice_covariance(std::size_t n, double a) {
  Eigen::MatrixXd g(n, n);
  const double two_h = 2.0 * a + 1.0;
  for (std::size_t i = 1; i <= n; ++i) g(i - 1, i - 1) = std::pow(static_cast<double>(i), two_h) / two_h;

  using gl = boost::math::quadrature::gauss<double, 16>;
  // For a fixed gap d, G(i, i+d) accumulates unit-interval pieces
  // e(m, d) = int_m^{m+1} x^a (x+d)^a dx, m = 0..i-1. Pieces with m >= 1 are
  // smooth, so a fixed 16-point rule is exact to rounding.
  for (std::size_t d = 1; d < n; ++d) {
    const double dd = static_cast<double>(d);
    auto f = [a, dd](double x) { return std::exp(a * std::log(x * (x + dd))); };
    double acc = shifted_power_integral(1.0, dd, a);
    g(0, d) = g(d, 0) = acc;
    for (std::size_t i = 2; i + d <= n; ++i) {
      const double m = static_cast<double>(i - 1);
      acc += gl::integrate(f, m, m + 1.0);
      g(i - 1, i - 1 + d) = g(i - 1 + d, i - 1) = acc;
    }
  }
  return g;
}

inline std::string bits(double v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(std::bit_cast<std::uint64_t>(v)));
  return buf;
}

}  // namespace detail

/// Cov(V_s, V_t) under the kernel. Computed by adaptive quadrature.
inline double volterra_covariance(double s, double t, const FbmKernel& kernel) {
  kernel.validate();
  if (!(s >= 0.0) || !(t >= 0.0)) throw ConfigError("volterra_covariance needs s, t >= 0");
  const double c = kernel.constant();
  const double lo = std::min(s, t);
  const double hi = std::max(s, t);
  return c * c * detail::shifted_power_integral(lo, hi - lo, kernel.exponent());
}

/// Cov(B_b - B_a, V_t) for a <= b: c * int_a^{min(b,t)} (t - u)^{H-1/2} du.
inline double increment_cross_covariance(double a, double b, double t, const FbmKernel& kernel) {
  if (a >= t) return 0.0;
  const double e = kernel.exponent() + 1.0;
  return kernel.constant() / e * (std::pow(t - a, e) - std::pow(t - std::min(b, t), e));
}

/// Cov(B_s, V_t).
inline double cross_covariance(double s, double t, const FbmKernel& kernel) {
  return increment_cross_covariance(0.0, s, t, kernel);
}

/// Linear map from normals to (dB, V) on a fixed grid; see file comment.
struct VolterraFactor {
  std::vector<double> sqrt_dt;  // per step
  Eigen::MatrixXd l21;          // N x N, lower triangular
  Eigen::MatrixXd l22;          // N x N, lower triangular (diagonal for hybrid)
  bool l22_diagonal = false;
  bool ridge_applied = false;

  std::size_t steps() const noexcept { return sqrt_dt.size(); }
};

/// Covariance of the stacked vector (dB_1..dB_N, V_{t_1}..V_{t_N}).
inline Eigen::MatrixXd joint_covariance(const TimeGrid& grid, const FbmKernel& kernel) {
  kernel.validate();
  const std::size_t n = grid.steps();
  const double c = kernel.constant();
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  for (std::size_t j = 0; j < n; ++j) cov(j, j) = grid.dt(j);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      const double v = increment_cross_covariance(grid[j], grid[j + 1], grid[i + 1], kernel);
      cov(n + i, j) = cov(j, n + i) = v;
    }
  if (grid.is_uniform()) {
    const double h = grid.horizon() / static_cast<double>(n);
    const Eigen::MatrixXd g = detail::lattice_covariance(n, kernel.exponent());
    cov.bottomRightCorner(n, n) = (c * c * std::pow(h, 2.0 * kernel.hurst)) * g;
  } else {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j <= i; ++j)
        cov(n + i, n + j) = cov(n + j, n + i) = volterra_covariance(grid[i + 1], grid[j + 1], kernel);
  }
  return cov;
}

inline VolterraFactor cholesky_factor(const TimeGrid& grid, const FbmKernel& kernel) {
  Eigen::MatrixXd cov = joint_covariance(grid, kernel);
  const std::size_t n = grid.steps();
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  bool ridged = false;
  if (llt.info() != Eigen::Success) {
    const double ridge = 1e-12 * cov.trace() / static_cast<double>(cov.rows());
    cov.diagonal().array() += ridge;
    llt.compute(cov);
    ridged = true;
    if (llt.info() != Eigen::Success)
      throw NumericalError("joint (B, B^H) covariance is not positive definite for grid with " +
                           std::to_string(n) + " steps and H=" + std::to_string(kernel.hurst) +
                           " even after ridge regularisation");
  }
  const Eigen::MatrixXd l = llt.matrixL();
  VolterraFactor f;
  f.sqrt_dt.resize(n);
  for (std::size_t j = 0; j < n; ++j) f.sqrt_dt[j] = l(j, j);
  f.l21 = l.bottomLeftCorner(n, n);
  f.l22 = l.bottomRightCorner(n, n);
  f.ridge_applied = ridged;
  return f;
}

/// First-order hybrid scheme: the nearest cell is integrated exactly, older
/// cells use the kernel at the optimal evaluation point b_k. Uniform grids only.
inline VolterraFactor hybrid_factor(const TimeGrid& grid, const FbmKernel& kernel) {
  kernel.validate();
  if (!grid.is_uniform()) throw ConfigError("hybrid scheme requires a uniform time grid");
  const std::size_t n = grid.steps();
  const double h = grid.horizon() / static_cast<double>(n);
  const double a = kernel.exponent();
  const double c = kernel.constant();
  const double sh = std::sqrt(h);

  // (b_k h)^a = h^a * (k^{a+1} - (k-1)^{a+1}) / (a+1)
  std::vector<double> w(n + 1, 0.0);
  for (std::size_t k = 2; k <= n; ++k) {
    const double kk = static_cast<double>(k);
    w[k] = c * std::pow(h, a) * (std::pow(kk, a + 1.0) - std::pow(kk - 1.0, a + 1.0)) / (a + 1.0) * sh;
  }
  const double cell_cov = std::pow(h, a + 1.0) / (a + 1.0);
  const double cell_var = std::pow(h, 2.0 * a + 1.0) / (2.0 * a + 1.0);
  const double diag1 = c * cell_cov / sh;
  const double diag2 = c * std::sqrt(std::max(0.0, cell_var - cell_cov * cell_cov / h));

  VolterraFactor f;
  f.sqrt_dt.assign(n, sh);
  f.l21 = Eigen::MatrixXd::Zero(n, n);
  f.l22 = Eigen::MatrixXd::Zero(n, n);
  f.l22_diagonal = true;
  for (std::size_t i = 0; i < n; ++i) {
    f.l21(i, i) = diag1;
    for (std::size_t j = 0; j < i; ++j) f.l21(i, j) = w[i - j + 1];
    f.l22(i, i) = diag2;
  }
  return f;
}

/// Factor for (grid, kernel), built once per process and shared read-only.
inline std::shared_ptr<const VolterraFactor> shared_factor(const TimeGrid& grid, const FbmKernel& kernel) {
  kernel.validate();
  std::string key = std::to_string(static_cast<int>(kernel.scheme)) +
                    std::to_string(static_cast<int>(kernel.normalization)) + detail::bits(kernel.hurst) + ":" +
                    std::to_string(grid.steps()) + ":";
  if (grid.is_uniform()) {
    key += detail::bits(grid.horizon());
  } else {
    for (double t : grid.times()) key += detail::bits(t);
  }

  static std::mutex mutex;
  static std::map<std::string, std::shared_ptr<const VolterraFactor>> cache;
  std::lock_guard lock(mutex);
  if (auto it = cache.find(key); it != cache.end()) return it->second;
  auto factor = std::make_shared<const VolterraFactor>(
      kernel.scheme == DriverScheme::cholesky ? cholesky_factor(grid, kernel) : hybrid_factor(grid, kernel));
  cache.emplace(std::move(key), factor);
  return factor;
}

/// Samples one chunk of m paths. Column p of `db` / `v` is path p; row i is
/// step i (for db) or node t_{i+1} (for v). Normals are consumed path by path,
/// Z1 then Z2.
inline void sample_driver_chunk(const VolterraFactor& f, NormalSampler& normals, std::size_t m,
                                Eigen::MatrixXd& db, Eigen::MatrixXd& v) {
  const auto n = static_cast<Eigen::Index>(f.steps());
  Eigen::MatrixXd z(2 * n, static_cast<Eigen::Index>(m));
  for (Eigen::Index p = 0; p < z.cols(); ++p) normals.fill(std::span<double>(z.col(p).data(), z.rows()));
  const auto z1 = z.topRows(n);
  const auto z2 = z.bottomRows(n);
  db.resize(n, z.cols());
  for (Eigen::Index i = 0; i < n; ++i) db.row(i) = f.sqrt_dt[static_cast<std::size_t>(i)] * z1.row(i);
  v.noalias() = f.l21.triangularView<Eigen::Lower>() * z1;
  if (f.l22_diagonal) {
    v.noalias() += f.l22.diagonal().asDiagonal() * z2;
  } else {
    v.noalias() += f.l22.triangularView<Eigen::Lower>() * z2;
  }
}

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Joint driver samples. Row p is path p.
struct DriverPaths {
  TimeGrid grid;
  RowMatrix bm;        ///< paths x steps: Brownian increments over [t_i, t_{i+1}]
  RowMatrix volterra;  ///< paths x nodes: V_{t_i}, column 0 identically 0

  std::size_t n_paths() const noexcept { return static_cast<std::size_t>(bm.rows()); }
};

/// Chunk c uses stream (stream.seed, stream.stream_id + c).
inline DriverPaths sample_joint_driver(const TimeGrid& grid, const FbmKernel& kernel, std::size_t n_paths,
                                       RngStream stream) {
  if (n_paths == 0) throw ConfigError("sample_joint_driver needs n_paths >= 1");
  const auto factor = shared_factor(grid, kernel);
  const auto n = static_cast<Eigen::Index>(grid.steps());
  DriverPaths out{grid, RowMatrix(static_cast<Eigen::Index>(n_paths), n),
                  RowMatrix::Zero(static_cast<Eigen::Index>(n_paths), n + 1)};
  const std::size_t chunks = (n_paths + kChunkSize - 1) / kChunkSize;
  parallel_for(chunks, [&](std::size_t c) {
    const std::size_t first = c * kChunkSize;
    const std::size_t m = std::min(kChunkSize, n_paths - first);
    NormalSampler normals({stream.seed, stream.stream_id + c});
    Eigen::MatrixXd db, v;
    sample_driver_chunk(*factor, normals, m, db, v);
    const auto rows = static_cast<Eigen::Index>(first);
    const auto cnt = static_cast<Eigen::Index>(m);
    out.bm.middleRows(rows, cnt) = db.transpose();
    out.volterra.block(rows, 1, cnt, n) = v.transpose();
  });
  return out;
}

}  // namespace rankskew
