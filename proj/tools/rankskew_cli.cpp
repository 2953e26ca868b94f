// rankskew command-line front end. Exit codes: 0 ok, 2 config error, 3 numerical failure.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "rankskew/black_scholes.hpp"
#include "rankskew/config.hpp"
#include "rankskew/parallel.hpp"
#include "rankskew/pricing.hpp"
#include "rankskew/runner.hpp"
#include "rankskew/volterra.hpp"

namespace {

using namespace rankskew;

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

// Where an experiment comes from, plus the one-for-one field overrides.
struct Source {
  std::string config_path;
  std::string preset_name;
  std::optional<std::size_t> paths;
  std::optional<std::uint64_t> seed;
  std::optional<double> dt;
  std::optional<std::string> out;
  std::optional<std::string> experiment;

  void attach(CLI::App* app, bool positional) {
    if (positional)
      app->add_option("config", config_path, "YAML experiment file")->check(CLI::ExistingFile);
    else
      app->add_option("--config", config_path, "YAML experiment file")->check(CLI::ExistingFile);
    app->add_option("--preset", preset_name, "named preset (see list-presets)");
    app->add_option("--paths", paths, "override simulation.paths");
    app->add_option("--seed", seed, "override simulation.seed");
    app->add_option("--dt", dt, "override simulation.dt");
    app->add_option("--out", out, "override output directory");
    app->add_option("--experiment", experiment, "override experiment name");
  }

  ExperimentConfig resolve() const {
    if (config_path.empty() == preset_name.empty()) throw ConfigError("give exactly one of a config file or --preset");
    ExperimentConfig cfg = config_path.empty() ? preset(preset_name) : load_config(config_path);
    if (paths) cfg.sim.n_paths = *paths;
    if (seed) cfg.sim.seed = *seed;
    if (dt) cfg.sim.dt = *dt;
    if (out) cfg.output = *out;
    if (experiment) cfg.name = *experiment;
    cfg.validate();
    return cfg;
  }
};

std::string join(const std::vector<double>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + detail::number(xs[i]);
  return s;
}

// dt as a multiple of one day, rounded for display only.
std::string dt_text(double dt) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g/365", dt * 365.0);
  return buf;
}

void list_presets() {
  std::printf("%-6s %-8s %-10s %-12s %-9s %-6s %-14s %-22s %s\n", "name", "model", "hurst", "s0", "weights",
              "paths", "dt", "maturities", "params");
  for (const auto& [name, c] : presets()) {
    std::string model, params;
    std::vector<double> hurst;
    for (const auto& a : c.model.assets) {
      std::visit(
          [&](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, Gbm>) {
              model = "gbm";
              params += (params.empty() ? "sigma=" : ",") + detail::number(m.sigma);
            } else if constexpr (std::is_same_v<T, FractionalSteinStein>) {
              model = "fss";
              hurst.push_back(m.hurst);
              params += (params.empty() ? "" : " ") + ("sigma0=" + detail::number(m.sigma0) +
                                                       ",rho=" + detail::number(m.rho));
            } else {
              model = "bergomi";
              hurst.push_back(m.hurst);
              params += (params.empty() ? "" : " ") + ("var0=" + detail::number(m.var0) + ",eta=" +
                                                       detail::number(m.eta) + ",rho=" + detail::number(m.rho));
            }
          },
          a);
    }
    if (c.model.scheme == DriverScheme::hybrid) params += " scheme=hybrid";
    if (!c.family.empty()) {
      params += " family=";
      for (std::size_t i = 0; i < c.family.size(); ++i) params += (i ? "|" : "") + join(c.family[i]);
    }
    const auto& m = c.maturities;
    const std::string grid = m.explicit_points.empty()
                                 ? "log[" + dt_text(m.lo) + "," + detail::number(m.hi) + "]x" +
                                       std::to_string(m.n)
                                 : std::to_string(m.explicit_points.size()) + " points";
    std::printf("%-6s %-8s %-10s %-12s %-9s %-6zu %-14s %-22s %s\n", name.c_str(), model.c_str(),
                hurst.empty() ? "-" : join(hurst).c_str(), join(c.index.s0).c_str(), join(c.index.weights).c_str(),
                c.sim.n_paths, dt_text(c.sim.dt).c_str(), grid.c_str(), params.c_str());
  }
}

McSettings mc_of(const ExperimentConfig& c) { return c.sim; }

void dump_driver(const ExperimentConfig& cfg, double maturity, std::size_t asset, std::size_t rows,
                 const std::string& path) {
  if (asset >= cfg.model.size()) throw ConfigError("--asset out of range");
  const auto grid = TimeGrid::uniform(maturity, cfg.sim.dt);
  const auto d = sample_joint_driver(grid, cfg.model.kernel(asset), std::min(rows, cfg.sim.n_paths),
                                     {cfg.sim.seed, 0});
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << "# rankskew driver v1\npath_id,t,B,B_H\n";
  for (std::size_t p = 0; p < d.n_paths(); ++p) {
    double b = 0.0;
    for (std::size_t i = 0; i < grid.nodes(); ++i) {
      if (i > 0) b += d.bm(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(i - 1));
      out << p << ',' << detail::number(grid[i]) << ',' << detail::number(b) << ','
          << detail::number(d.volterra(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(i))) << '\n';
    }
  }
}

void dump_paths(const ExperimentConfig& cfg, double maturity, const std::string& path) {
  const auto batch = simulate_index_assets(cfg.model, cfg.index, maturity, mc_of(cfg));
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << "# rankskew terminal_prices v1\npath_id,asset,S_T\n";
  for (std::size_t p = 0; p < batch.n_paths(); ++p)
    for (std::size_t j = 0; j < batch.n_assets(); ++j)
      out << p << ',' << j << ',' << detail::number(batch.path(p)[j]) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ranked-index ATM skew experiments"};
  app.require_subcommand(1);
  app.fallthrough();
  unsigned threads = 0;
  app.add_option("--threads", threads, "worker cap (0 = all cores); results do not depend on it");

  Source run_src;
  auto* run = app.add_subcommand("run", "run an experiment and write its artifacts");
  run_src.attach(run, true);

  app.add_subcommand("list-presets", "print the preset table");

  Source show_src;
  auto* show = app.add_subcommand("show-config", "print the resolved config as YAML");
  show_src.attach(show, true);

  Source skew_src;
  double skew_t = 1.0 / 52.0;
  std::string dump_driver_path, dump_paths_path;
  std::size_t dump_asset = 0, dump_rows = 100;
  auto* skew = app.add_subcommand("skew", "ATM skew at one maturity, both estimators");
  skew_src.attach(skew, false);
  skew->add_option("-T,--maturity", skew_t, "maturity in years")->check(CLI::PositiveNumber);
  skew->add_option("--dump-driver", dump_driver_path, "write (path_id,t,B,B_H) CSV of the driver");
  skew->add_option("--dump-asset", dump_asset, "asset whose kernel --dump-driver uses");
  skew->add_option("--dump-rows", dump_rows, "paths written by --dump-driver");
  skew->add_option("--dump-paths", dump_paths_path, "write (path_id,asset,S_T) CSV of terminal prices");

  Source price_src;
  double price_t = 1.0 / 52.0, price_k = 0.0;
  auto* price = app.add_subcommand("price", "Monte Carlo call on the index and its implied volatility");
  price_src.attach(price, false);
  price->add_option("-T,--maturity", price_t, "maturity in years")->check(CLI::PositiveNumber);
  price->add_option("-k,--log-strike", price_k, "log(K / F)");

  Source fut_src;
  double fut_t = 1.0 / 52.0;
  auto* futures = app.add_subcommand("futures", "index futures price E[I_T]");
  fut_src.attach(futures, false);
  futures->add_option("-T,--maturity", fut_t, "maturity in years")->check(CLI::PositiveNumber);

  std::string fit_csv, fit_method = "finite_difference";
  double fit_lo = 0.0, fit_hi = INFINITY;
  auto* fit = app.add_subcommand("fit", "refit a skew_curve.csv offline");
  fit->add_option("csv", fit_csv, "skew_curve.csv")->required()->check(CLI::ExistingFile);
  fit->add_option("--method", fit_method, "finite_difference or formula")
      ->check(CLI::IsMember({"finite_difference", "formula"}));
  fit->add_option("--t-min", fit_lo, "lower maturity bound");
  fit->add_option("--t-max", fit_hi, "upper maturity bound");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }
  g_max_threads = threads;

  try {
    if (run->parsed()) {
      auto r = run_experiment(run_src.resolve());
      std::cout << "experiment " << r.config.name << " -> " << r.config.output << '\n';
      if (r.fit)
        std::printf("alpha = %.4f  c = %.4g  r2 = %.4f  (%zu points)\n", r.fit->alpha, r.fit->c, r.fit->r2,
                    r.fit->n_points);
      std::cout << "empirical: " << to_string(r.empirical.kind) << "  predicted: " << to_string(r.prediction.kind)
                << '\n';
      if (r.family)
        std::printf("quasi-blow-up clauses: i=%d ii=%d iii=%d\n", r.family->clause_i, r.family->clause_ii,
                    r.family->clause_iii);
      for (const auto& why : r.low_confidence_reasons) std::cout << "low confidence: " << why << '\n';
      for (const auto& f : r.files) std::cout << "wrote " << f.string() << '\n';
    } else if (app.got_subcommand("list-presets")) {
      list_presets();
    } else if (show->parsed()) {
      std::cout << to_yaml(show_src.resolve());
    } else if (skew->parsed()) {
      const auto cfg = skew_src.resolve();
      if (!dump_driver_path.empty()) dump_driver(cfg, skew_t, dump_asset, dump_rows, dump_driver_path);
      if (!dump_paths_path.empty()) dump_paths(cfg, skew_t, dump_paths_path);
      const auto s = atm_skew(cfg.model, cfg.index, skew_t, mc_of(cfg));
      std::printf("T = %.8g  F = %.6f (se %.2g)  atm_vol = %.6f  Q(I>F) = %.6f\n", skew_t, s.futures.value,
                  s.futures.std_error, s.atm_vol, s.digital);
      std::printf("finite_difference  skew = %+.6f  se = %.6f  dk = %.3g\n", s.finite_difference.skew,
                  s.finite_difference.std_error, s.finite_difference.dk);
      std::printf("formula            skew = %+.6f  se = %.6f\n", s.formula.skew, s.formula.std_error);
    } else if (price->parsed()) {
      const auto cfg = price_src.resolve();
      const auto fut = futures_price(cfg.model, cfg.index, price_t, mc_of(cfg));
      const auto c = mc_call_price(cfg.model, cfg.index, price_t, price_k, fut.value, mc_of(cfg));
      std::printf("F = %.6f  call(k = %g) = %.6f (se %.2g)\n", fut.value, price_k, c.value, c.std_error);
      std::printf("implied vol = %.6f\n", implied_vol(c.value, price_t, fut.value, price_k));
    } else if (futures->parsed()) {
      const auto cfg = fut_src.resolve();
      const auto f = futures_price(cfg.model, cfg.index, fut_t, mc_of(cfg));
      std::printf("I_0 = %.6f  F = %.6f  se = %.3g  paths = %zu\n", cfg.index.initial_value(), f.value, f.std_error,
                  f.n_paths);
    } else if (fit->parsed()) {
      std::ifstream in(fit_csv);
      const auto method = fit_method == "formula" ? SkewMethod::formula : SkewMethod::finite_difference;
      const auto curve = read_skew_csv(in, method);
      const auto f = fit_power_law(curve, {fit_lo, fit_hi});
      std::cout << to_json(f).dump(2) << '\n';
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const YAML::Exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  return 0;
}
