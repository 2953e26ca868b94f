#pragma once

// Experiment configuration: YAML schema, validation, presets.
//
//   experiment: fig2b
//   description: free text
//   model:
//     normalization: unit_variance | as_written
//     scheme: cholesky | hybrid
//     assets:
//       - {type: gbm, sigma: 0.2}
//       - {type: fss, sigma0: 0.2, hurst: 0.6, rho: -0.5}
//       - {type: bergomi, var0: 0.04, eta: 3.61, hurst: 0.7, rho: 0}
//   index: {s0: [100, 100], weights: [1], n_top: 1}
//   simulation: {paths: 50000, dt: 0.000136986301369863, seed: 1}
//   maturities: {lo: 0.00273972602739726, hi: 0.25, n: 16}   # or a list
//   family: [[100, 94], [100, 96], [100, 98], [100, 100]]      # optional
//   method: finite_difference | formula
//   output: out/fig2b                                           # optional
//
// Unknown keys are rejected.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "rankskew/dynamics.hpp"
#include "rankskew/error.hpp"
#include "rankskew/index.hpp"
#include "rankskew/pricing.hpp"
#include "rankskew/termstructure.hpp"

namespace rankskew {

inline constexpr std::string_view kArtifactVersion = "1.0.0";

/// Either n log-spaced points on [lo, hi] or an explicit list.
struct MaturitySpec {
  double lo = 1.0 / 365.0;
  double hi = 0.25;
  std::size_t n = 16;
  std::vector<double> explicit_points;

  std::vector<double> resolve() const {
    auto g = explicit_points.empty() ? log_grid(lo, hi, n) : explicit_points;
    validate_maturities(g);
    return g;
  }
  friend bool operator==(const MaturitySpec&, const MaturitySpec&) = default;
};

struct ExperimentConfig {
  std::string name = "custom";
  std::string description;
  ModelSpec model;
  IndexSpec index;
  McSettings sim;
  MaturitySpec maturities;
  std::vector<std::vector<double>> family;
  SkewMethod method = SkewMethod::finite_difference;
  std::string output;  ///< empty: $RANKSKEW_OUT_DIR/<name>, else out/<name>

  void validate() const {
    model.validate();
    index.validate();
    if (model.size() != index.n_assets())
      throw ConfigError("model has " + std::to_string(model.size()) + " assets but index.s0 has " +
                        std::to_string(index.n_assets()));
    if (sim.n_paths < 2) throw ConfigError("simulation.paths must be >= 2");
    if (!(sim.dt > 0.0)) throw ConfigError("simulation.dt must be > 0");
    if (!maturities.explicit_points.empty()) {
      validate_maturities(maturities.explicit_points);
    } else if (!(maturities.lo > 0.0 && maturities.hi > maturities.lo) || maturities.n < 2) {
      throw ConfigError("maturities need 0 < lo < hi and n >= 2");
    }
    if (!family.empty()) {
      std::size_t ties = 0;
      for (const auto& s0 : family) {
        IndexSpec member = index;
        member.s0 = s0;
        if (s0.size() != index.n_assets()) throw ConfigError("family members must have one price per asset");
        member.validate();
        ties += member.tie_position() ? 1 : 0;
      }
      if (ties != 1 || family.size() < 3)
        throw ConfigError("family needs exactly one tied configuration and at least two untied ones");
    }
  }

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

namespace detail {

inline std::string mark(const YAML::Node& n) {
  const auto m = n.Mark();
  return m.line >= 0 ? "line " + std::to_string(m.line + 1) + ": " : "";
}

inline void check_keys(const YAML::Node& n, std::initializer_list<std::string_view> allowed, const std::string& where) {
  if (!n.IsMap()) throw ConfigError(mark(n) + where + " must be a mapping");
  for (const auto& kv : n) {
    const auto key = kv.first.as<std::string>();
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError(mark(kv.first) + "unknown key '" + key + "' in " + where);
  }
}

inline const YAML::Node required(const YAML::Node& n, const char* key, const std::string& where) {
  const YAML::Node v = n[key];
  if (!v) throw ConfigError(mark(n) + where + " is missing '" + key + "'");
  return v;
}

template <class T>
T scalar(const YAML::Node& n, const std::string& field) {
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(mark(n) + field + ": cannot read '" + (n.IsScalar() ? n.Scalar() : std::string("<node>")) +
                      "'");
  }
}

inline std::vector<double> number_list(const YAML::Node& n, const std::string& field) {
  if (!n.IsSequence()) throw ConfigError(mark(n) + field + " must be a list");
  std::vector<double> out;
  for (const auto& x : n) out.push_back(scalar<double>(x, field));
  return out;
}

inline AssetModel parse_asset(const YAML::Node& n, std::size_t j) {
  const std::string where = "model.assets[" + std::to_string(j) + "]";
  const auto type = scalar<std::string>(required(n, "type", where), where + ".type");
  auto get = [&](const char* key, double fallback) {
    return n[key] ? scalar<double>(n[key], where + "." + key) : fallback;
  };
  if (type == "gbm") {
    check_keys(n, {"type", "sigma"}, where);
    return Gbm{scalar<double>(required(n, "sigma", where), where + ".sigma")};
  }
  if (type == "fss") {
    check_keys(n, {"type", "sigma0", "hurst", "rho"}, where);
    return FractionalSteinStein{scalar<double>(required(n, "sigma0", where), where + ".sigma0"),
                                scalar<double>(required(n, "hurst", where), where + ".hurst"), get("rho", 0.0)};
  }
  if (type == "bergomi") {
    check_keys(n, {"type", "var0", "eta", "hurst", "rho"}, where);
    return FractionalBergomi{scalar<double>(required(n, "var0", where), where + ".var0"),
                             scalar<double>(required(n, "eta", where), where + ".eta"),
                             scalar<double>(required(n, "hurst", where), where + ".hurst"), get("rho", 0.0)};
  }
  throw ConfigError(mark(n) + where + ".type: expected gbm, fss or bergomi, got '" + type + "'");
}

// Shortest text that parses back to the same double.
inline std::string number(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace detail

inline ExperimentConfig parse_config(const YAML::Node& root) {
  using namespace detail;
  if (!root || root.IsNull()) throw ConfigError("config is empty");
  check_keys(root, {"experiment", "description", "model", "index", "simulation", "maturities", "family", "method",
                    "output"},
             "top level");
  ExperimentConfig cfg;
  if (root["experiment"]) cfg.name = scalar<std::string>(root["experiment"], "experiment");
  if (root["description"]) cfg.description = scalar<std::string>(root["description"], "description");

  const auto model = required(root, "model", "config");
  check_keys(model, {"normalization", "scheme", "assets"}, "model");
  if (model["normalization"]) {
    const auto s = scalar<std::string>(model["normalization"], "model.normalization");
    if (s == "unit_variance") cfg.model.normalization = KernelNormalization::unit_variance;
    else if (s == "as_written") cfg.model.normalization = KernelNormalization::as_written;
    else throw ConfigError(mark(model["normalization"]) + "model.normalization: expected unit_variance or as_written");
  }
  if (model["scheme"]) {
    const auto s = scalar<std::string>(model["scheme"], "model.scheme");
    if (s == "cholesky") cfg.model.scheme = DriverScheme::cholesky;
    else if (s == "hybrid") cfg.model.scheme = DriverScheme::hybrid;
    else throw ConfigError(mark(model["scheme"]) + "model.scheme: expected cholesky or hybrid");
  }
  const auto assets = required(model, "assets", "model");
  if (!assets.IsSequence() || assets.size() == 0) throw ConfigError(mark(assets) + "model.assets must be a non-empty list");
  for (std::size_t j = 0; j < assets.size(); ++j) cfg.model.assets.push_back(parse_asset(assets[j], j));

  const auto index = required(root, "index", "config");
  check_keys(index, {"s0", "weights", "n_top"}, "index");
  cfg.index.s0 = number_list(required(index, "s0", "index"), "index.s0");
  cfg.index.weights = number_list(required(index, "weights", "index"), "index.weights");
  cfg.index.n_top = index["n_top"] ? scalar<std::size_t>(index["n_top"], "index.n_top") : cfg.index.weights.size();

  if (const auto sim = root["simulation"]) {
    check_keys(sim, {"paths", "dt", "seed"}, "simulation");
    if (sim["paths"]) cfg.sim.n_paths = scalar<std::size_t>(sim["paths"], "simulation.paths");
    if (sim["dt"]) cfg.sim.dt = scalar<double>(sim["dt"], "simulation.dt");
    if (sim["seed"]) cfg.sim.seed = scalar<std::uint64_t>(sim["seed"], "simulation.seed");
  }

  if (const auto mat = root["maturities"]) {
    if (mat.IsSequence()) {
      cfg.maturities.explicit_points = number_list(mat, "maturities");
      try {
        validate_maturities(cfg.maturities.explicit_points);
      } catch (const ConfigError& e) {
        throw ConfigError(mark(mat) + "maturities: " + e.what());
      }
    } else {
      check_keys(mat, {"lo", "hi", "n"}, "maturities");
      if (mat["lo"]) cfg.maturities.lo = scalar<double>(mat["lo"], "maturities.lo");
      if (mat["hi"]) cfg.maturities.hi = scalar<double>(mat["hi"], "maturities.hi");
      if (mat["n"]) cfg.maturities.n = scalar<std::size_t>(mat["n"], "maturities.n");
    }
  }

  if (const auto fam = root["family"]) {
    if (!fam.IsSequence()) throw ConfigError(mark(fam) + "family must be a list of s0 lists");
    for (const auto& s0 : fam) cfg.family.push_back(number_list(s0, "family"));
  }
  if (root["method"]) {
    const auto s = scalar<std::string>(root["method"], "method");
    if (s == "finite_difference") cfg.method = SkewMethod::finite_difference;
    else if (s == "formula") cfg.method = SkewMethod::formula;
    else throw ConfigError(mark(root["method"]) + "method: expected finite_difference or formula");
  }
  if (root["output"]) cfg.output = scalar<std::string>(root["output"], "output");

  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  return cfg;
}

inline ExperimentConfig parse_config_text(const std::string& text) {
  try {
    return parse_config(YAML::Load(text));
  } catch (const YAML::ParserException& e) {
    throw ConfigError(std::string("config syntax error: ") + e.what());
  }
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config_text(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

inline std::string to_yaml(const ExperimentConfig& cfg) {
  using detail::number;
  YAML::Emitter out;
  auto num_list = [&](const std::vector<double>& xs) {
    out << YAML::Flow << YAML::BeginSeq;
    for (double x : xs) out << number(x);
    out << YAML::EndSeq;
  };
  out << YAML::BeginMap;
  out << YAML::Key << "experiment" << YAML::Value << cfg.name;
  if (!cfg.description.empty()) out << YAML::Key << "description" << YAML::Value << YAML::DoubleQuoted << cfg.description;

  out << YAML::Key << "model" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "normalization" << YAML::Value
      << (cfg.model.normalization == KernelNormalization::unit_variance ? "unit_variance" : "as_written");
  out << YAML::Key << "scheme" << YAML::Value << (cfg.model.scheme == DriverScheme::cholesky ? "cholesky" : "hybrid");
  out << YAML::Key << "assets" << YAML::Value << YAML::BeginSeq;
  for (const auto& a : cfg.model.assets) {
    out << YAML::Flow << YAML::BeginMap;
    std::visit(
        [&](const auto& m) {
          using T = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<T, Gbm>) {
            out << YAML::Key << "type" << YAML::Value << "gbm" << YAML::Key << "sigma" << YAML::Value << number(m.sigma);
          } else if constexpr (std::is_same_v<T, FractionalSteinStein>) {
            out << YAML::Key << "type" << YAML::Value << "fss" << YAML::Key << "sigma0" << YAML::Value
                << number(m.sigma0) << YAML::Key << "hurst" << YAML::Value << number(m.hurst) << YAML::Key << "rho"
                << YAML::Value << number(m.rho);
          } else {
            out << YAML::Key << "type" << YAML::Value << "bergomi" << YAML::Key << "var0" << YAML::Value
                << number(m.var0) << YAML::Key << "eta" << YAML::Value << number(m.eta) << YAML::Key << "hurst"
                << YAML::Value << number(m.hurst) << YAML::Key << "rho" << YAML::Value << number(m.rho);
          }
        },
        a);
    out << YAML::EndMap;
  }
  out << YAML::EndSeq << YAML::EndMap;

  out << YAML::Key << "index" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "s0" << YAML::Value;
  num_list(cfg.index.s0);
  out << YAML::Key << "weights" << YAML::Value;
  num_list(cfg.index.weights);
  out << YAML::Key << "n_top" << YAML::Value << cfg.index.n_top << YAML::EndMap;

  out << YAML::Key << "simulation" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "paths" << YAML::Value << cfg.sim.n_paths;
  out << YAML::Key << "dt" << YAML::Value << number(cfg.sim.dt);
  out << YAML::Key << "seed" << YAML::Value << cfg.sim.seed << YAML::EndMap;

  out << YAML::Key << "maturities" << YAML::Value;
  if (!cfg.maturities.explicit_points.empty()) {
    num_list(cfg.maturities.explicit_points);
  } else {
    out << YAML::Flow << YAML::BeginMap << YAML::Key << "lo" << YAML::Value << number(cfg.maturities.lo) << YAML::Key
        << "hi" << YAML::Value << number(cfg.maturities.hi) << YAML::Key << "n" << YAML::Value << cfg.maturities.n
        << YAML::EndMap;
  }
  if (!cfg.family.empty()) {
    out << YAML::Key << "family" << YAML::Value << YAML::BeginSeq;
    for (const auto& s0 : cfg.family) num_list(s0);
    out << YAML::EndSeq;
  }
  out << YAML::Key << "method" << YAML::Value << to_string(cfg.method);
  if (!cfg.output.empty()) out << YAML::Key << "output" << YAML::Value << cfg.output;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

// ---------------------------------------------------------------------------
// Presets

namespace detail {

inline ExperimentConfig gbm_preset(std::string name, std::string description, std::vector<double> s0) {
  ExperimentConfig c;
  c.name = std::move(name);
  c.description = std::move(description);
  c.model.assets = {Gbm{0.2}, Gbm{0.6}};
  c.index = {std::move(s0), {1.0}, 1};
  c.sim = {50000, 0.05 / 365.0, 1};
  return c;
}

inline ExperimentConfig fss_preset(std::string name, std::string description, double h1, double h2,
                                   std::vector<double> s0, std::vector<double> weights = {1.0}) {
  ExperimentConfig c;
  c.name = std::move(name);
  c.description = std::move(description);
  c.model.assets = {FractionalSteinStein{0.2, h1, -0.5}, FractionalSteinStein{0.6, h2, -0.5}};
  const std::size_t top = weights.size();
  c.index = {std::move(s0), std::move(weights), top};
  c.sim = {30000, 0.1 / 365.0, 1};
  return c;
}

inline ExperimentConfig bergomi_preset(std::string name, std::string description, std::vector<double> s0) {
  ExperimentConfig c;
  c.name = std::move(name);
  c.description = std::move(description);
  c.model.assets = {FractionalBergomi{0.04, 3.61, 0.7, 0.0}, FractionalBergomi{0.36, 3.61, 0.6, 0.0}};
  c.model.scheme = DriverScheme::hybrid;
  c.index = {std::move(s0), {1.0}, 1};
  c.sim = {30000, 0.1 / 365.0, 1};
  return c;
}

// Extended grid for configurations whose flattening sets in below T = 1/365.
inline MaturitySpec extended_grid() { return {0.25 / 365.0, 0.25, 16, {}}; }

inline std::vector<std::vector<double>> standard_family() { return {{100, 94}, {100, 96}, {100, 98}, {100, 100}}; }

}  // namespace detail

/// All presets, sorted by name.
inline std::map<std::string, ExperimentConfig> presets() {
  using namespace detail;
  std::map<std::string, ExperimentConfig> p;
  auto add = [&](ExperimentConfig c) { p.emplace(c.name, std::move(c)); };

  add(gbm_preset("fig2a", "two GBM stocks, distinct starts", {100, 96}));
  add(gbm_preset("fig2b", "two GBM stocks, tied starts", {100, 100}));
  {
    auto c = gbm_preset("fig2c", "two GBM stocks, s2 approaching s1", {100, 100});
    c.maturities = extended_grid();
    c.family = standard_family();
    add(std::move(c));
  }
  add(fss_preset("fig3a", "two fractional Stein-Stein stocks, H > 1/2, tied starts", 0.6, 0.7, {100, 100}));
  {
    auto c = fss_preset("fig3b", "two fractional Stein-Stein stocks, H > 1/2, close starts", 0.6, 0.7, {100, 97});
    c.maturities = extended_grid();
    add(std::move(c));
  }
  {
    auto c = fss_preset("fig3c", "two fractional Stein-Stein stocks, H > 1/2, s2 approaching s1", 0.6, 0.7,
                        {100, 100});
    c.sim.n_paths = 15000;
    c.maturities = extended_grid();
    c.family = standard_family();
    add(std::move(c));
  }
  add(fss_preset("fig4a", "two fractional Stein-Stein stocks, H < 1/2, tied starts", 0.3, 0.4, {100, 100}));
  add(fss_preset("fig4b", "two fractional Stein-Stein stocks, mixed H, tied starts", 0.2, 0.7, {100, 100}));
  add(fss_preset("fig4c", "two fractional Stein-Stein stocks, H < 1/2, distinct starts", 0.2, 0.3, {100, 90}));
  add(fss_preset("fig4d", "two fractional Stein-Stein stocks, mixed H, both weights", 0.7, 0.2, {100, 90},
                 {0.7, 0.3}));
  add(bergomi_preset("fig5a", "two fractional Bergomi stocks, tied starts", {100, 100}));
  {
    auto c = bergomi_preset("fig5b", "two fractional Bergomi stocks, s2 approaching s1", {100, 100});
    c.maturities = extended_grid();
    c.family = standard_family();
    add(std::move(c));
  }
  return p;
}

inline ExperimentConfig preset(const std::string& name) {
  auto all = presets();
  auto it = all.find(name);
  if (it == all.end()) throw ConfigError("unknown preset '" + name + "' (see list-presets)");
  return it->second;
}

}  // namespace rankskew
