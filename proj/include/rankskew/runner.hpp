#pragma once

// Experiment runner and its on-disk artifacts:
//   skew_curve.csv     both estimators on the configured grid
//   fit.json           resolved config, power-law fits, classification, predicted rate
//   family_curves.csv  one curve per s0 in the family (family configs only)
//   plot_skew.py       matplotlib script with the data inlined
// Outputs carry no timestamps, so identical configs give identical bytes.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>
#include <yaml-cpp/yaml.h>

#include "rankskew/asymptotics.hpp"
#include "rankskew/config.hpp"
#include "rankskew/error.hpp"
#include "rankskew/termstructure.hpp"

namespace rankskew {

inline constexpr std::string_view kSkewCsvHeader = "# rankskew skew_curve v1";
inline constexpr std::string_view kFamilyCsvHeader = "# rankskew family_curves v1";
inline constexpr std::size_t kLowConfidencePaths = 10000;

struct RunResult {
  ExperimentConfig config;  ///< with output resolved
  CurvePair curves;
  std::optional<PowerLawFit> fit;  ///< on the curve of config.method
  EmpiricalRate empirical;
  RatePrediction prediction;
  std::vector<std::string> low_confidence_reasons;
  std::vector<CurvePair> family_curves;  ///< parallel to config.family
  std::optional<QuasiBlowUpReport> family;
  std::vector<std::filesystem::path> files;

  bool low_confidence() const { return !low_confidence_reasons.empty(); }
  const SkewCurve& primary() const {
    return config.method == SkewMethod::finite_difference ? curves.finite_difference : curves.formula;
  }
};

/// --out beats the config's output key, which beats $RANKSKEW_OUT_DIR/<name>,
/// which beats out/<name>.
inline std::string resolve_output_dir(const ExperimentConfig& cfg) {
  if (!cfg.output.empty()) return cfg.output;
  if (const char* env = std::getenv("RANKSKEW_OUT_DIR"); env && *env) return std::string(env) + "/" + cfg.name;
  return "out/" + cfg.name;
}

// ---------------------------------------------------------------------------
// CSV

inline void write_curve_rows(std::ostream& os, const SkewCurve& c, const std::string& prefix = "") {
  for (const auto& p : c.points)
    os << prefix << detail::number(p.maturity) << ',' << detail::number(p.skew) << ','
       << detail::number(p.std_error) << ',' << to_string(c.method) << '\n';
  for (const auto& m : c.missing)
    os << "# missing " << prefix << "T=" << detail::number(m.maturity) << " method=" << to_string(c.method) << ": "
       << m.reason << '\n';
}

inline std::string skew_curve_csv(const CurvePair& curves, const std::string& experiment) {
  std::ostringstream os;
  os << kSkewCsvHeader << '\n' << "# experiment " << experiment << '\n' << "T,skew,stderr,method\n";
  write_curve_rows(os, curves.finite_difference);
  write_curve_rows(os, curves.formula);
  return os.str();
}

inline std::string family_curves_csv(const std::vector<std::vector<double>>& family,
                                     const std::vector<CurvePair>& curves) {
  std::ostringstream os;
  os << kFamilyCsvHeader << '\n' << "s0,T,skew,stderr,method\n";
  for (std::size_t i = 0; i < family.size(); ++i) {
    std::string s0;
    for (std::size_t j = 0; j < family[i].size(); ++j) s0 += (j ? ";" : "") + detail::number(family[i][j]);
    write_curve_rows(os, curves[i].finite_difference, s0 + ",");
    write_curve_rows(os, curves[i].formula, s0 + ",");
  }
  return os.str();
}

/// Reads one method's rows back from a skew_curve.csv.
inline SkewCurve read_skew_csv(std::istream& in, SkewMethod method) {
  std::string line;
  if (!std::getline(in, line) || line != kSkewCsvHeader)
    throw ConfigError("not a skew_curve v1 file (expected '" + std::string(kSkewCsvHeader) + "' on line 1)");
  SkewCurve curve;
  curve.method = method;
  bool header = false;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line != "T,skew,stderr,method") throw ConfigError("line " + std::to_string(lineno) + ": bad column header");
      header = true;
      continue;
    }
    std::stringstream ss(line);
    std::string t, s, e, m;
    if (!std::getline(ss, t, ',') || !std::getline(ss, s, ',') || !std::getline(ss, e, ',') || !std::getline(ss, m))
      throw ConfigError("line " + std::to_string(lineno) + ": expected 4 fields");
    if (m != to_string(method)) continue;
    try {
      curve.points.push_back({std::stod(t), std::stod(s), std::stod(e), method, 0.0});
    } catch (const std::exception&) {
      throw ConfigError("line " + std::to_string(lineno) + ": non-numeric field");
    }
  }
  return curve;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json yaml_to_json(const YAML::Node& n) {
  switch (n.Type()) {
    case YAML::NodeType::Sequence: {
      auto a = nlohmann::json::array();
      for (const auto& x : n) a.push_back(yaml_to_json(x));
      return a;
    }
    case YAML::NodeType::Map: {
      auto o = nlohmann::json::object();
      for (const auto& kv : n) o[kv.first.as<std::string>()] = yaml_to_json(kv.second);
      return o;
    }
    case YAML::NodeType::Scalar: {
      const auto& s = n.Scalar();
      if (n.Tag() != "!") {  // quoted scalars stay strings
        std::size_t pos = 0;
        try {
          const double v = std::stod(s, &pos);
          if (pos == s.size()) {
            if (s.find_first_of(".eE") == std::string::npos) return std::stoll(s);
            return v;
          }
        } catch (const std::exception&) {
        }
      }
      return s;
    }
    default:
      return nullptr;
  }
}

inline nlohmann::json to_json(const PowerLawFit& f) {
  return {{"c", f.c},
          {"alpha", f.alpha},
          {"r2", f.r2},
          {"alpha_stderr", f.alpha_stderr},
          {"t_min", f.t_range.first},
          {"t_max", f.t_range.second},
          {"n_points", f.n_points}};
}

inline nlohmann::json fit_or_error(const SkewCurve& c) {
  try {
    return to_json(fit_power_law(c));
  } catch (const InsufficientDataError& e) {
    return {{"error", e.what()}};
  }
}

inline nlohmann::json to_json(const QuasiBlowUpReport& r) {
  nlohmann::json members = nlohmann::json::array();
  for (const auto& m : r.members) {
    nlohmann::json j = {{"s0", m.s0},
                        {"tied", m.tied},
                        {"flattening", m.flattening},
                        {"flattens", m.flattens},
                        {"gap", m.gap},
                        {"gap_stderr", m.gap_se}};
    j["fit"] = m.fit ? to_json(*m.fit) : nlohmann::json(nullptr);
    members.push_back(std::move(j));
  }
  return {{"t_star", r.t_star},
          {"clause_i", r.clause_i},
          {"clause_ii", r.clause_ii},
          {"clause_iii", r.clause_iii},
          {"quasi_blow_up", r.quasi_blow_up()},
          {"members", members},
          {"notes", r.notes}};
}

inline nlohmann::json fit_json(const RunResult& r) {
  nlohmann::json j;
  j["version"] = kArtifactVersion;
  j["config"] = yaml_to_json(YAML::Load(to_yaml(r.config)));
  j["method"] = to_string(r.config.method);
  j["fit"] = r.fit ? to_json(*r.fit) : nlohmann::json(nullptr);
  j["fits"] = {{"finite_difference", fit_or_error(r.curves.finite_difference)},
               {"formula", fit_or_error(r.curves.formula)}};
  j["low_confidence"] = r.low_confidence();
  j["low_confidence_reasons"] = r.low_confidence_reasons;
  j["classification"] = {{"kind", to_string(r.empirical.kind)},
                         {"flattening", r.empirical.flattening},
                         {"note", r.empirical.note}};
  j["predicted_rate"] = {{"kind", to_string(r.prediction.kind)},
                         {"exponent", r.prediction.exponent},
                         {"hurst", r.prediction.hurst ? nlohmann::json(*r.prediction.hurst) : nlohmann::json(nullptr)},
                         {"rationale", r.prediction.rationale}};
  j["prediction_matches"] = r.empirical.kind == r.prediction.kind;
  nlohmann::json missing = nlohmann::json::array();
  for (const auto& m : r.primary().missing) missing.push_back({{"T", m.maturity}, {"reason", m.reason}});
  j["missing"] = missing;
  if (r.family) j["family"] = to_json(*r.family);
  return j;
}

// ---------------------------------------------------------------------------
// Plot script

inline std::string py_list(const std::vector<double>& xs) {
  std::string s = "[";
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? ", " : "") + detail::number(xs[i]);
  return s + "]";
}

inline std::string plot_script(const RunResult& r) {
  std::ostringstream os;
  os << "#!/usr/bin/env python3\n"
     << "# |ATM skew| against maturity on log axes, with the fitted power law.\n"
     << "import sys\n"
     << "import matplotlib\n"
     << "matplotlib.use(\"Agg\")\n"
     << "import matplotlib.pyplot as plt\n\n"
     << "EXPERIMENT = \"" << r.config.name << "\"\n"
     << "CURVES = {\n";
  auto emit = [&](const std::string& label, const SkewCurve& c) {
    std::vector<double> t, s;
    for (const auto& p : c.points) {
      t.push_back(p.maturity);
      s.push_back(std::abs(p.skew));
    }
    os << "    \"" << label << "\": (" << py_list(t) << ", " << py_list(s) << "),\n";
  };
  if (r.family_curves.empty()) {
    emit(to_string(SkewMethod::finite_difference), r.curves.finite_difference);
    emit(to_string(SkewMethod::formula), r.curves.formula);
  } else {
    for (std::size_t i = 0; i < r.family_curves.size(); ++i) {
      std::string label = "s0=";
      for (std::size_t j = 0; j < r.config.family[i].size(); ++j)
        label += (j ? "," : "") + detail::number(r.config.family[i][j]);
      emit(label, r.config.method == SkewMethod::finite_difference ? r.family_curves[i].finite_difference
                                                                    : r.family_curves[i].formula);
    }
  }
  os << "}\n";
  if (r.fit)
    os << "FIT = (" << detail::number(r.fit->c) << ", " << detail::number(r.fit->alpha) << ", "
       << detail::number(r.fit->t_range.first) << ", " << detail::number(r.fit->t_range.second) << ")\n";
  else
    os << "FIT = None\n";
  os << "\n"
     << "def main(out):\n"
     << "    fig, ax = plt.subplots(figsize=(6, 4))\n"
     << "    for label, (t, s) in CURVES.items():\n"
     << "        ax.plot(t, s, \"o-\", ms=3, label=label)\n"
     << "    if FIT is not None:\n"
     << "        c, alpha, lo, hi = FIT\n"
     << "        grid = [lo * (hi / lo) ** (i / 50) for i in range(51)]\n"
     << "        ax.plot(grid, [c * x ** (-alpha) for x in grid], \"k--\",\n"
     << "                label=\"fit T^-%.3f\" % alpha)\n"
     << "    ax.set_xscale(\"log\")\n"
     << "    ax.set_yscale(\"log\")\n"
     << "    ax.set_xlabel(\"T (years)\")\n"
     << "    ax.set_ylabel(\"|ATM skew|\")\n"
     << "    ax.set_title(EXPERIMENT)\n"
     << "    ax.legend()\n"
     << "    fig.tight_layout()\n"
     << "    fig.savefig(out, dpi=150)\n\n\n"
     << "if __name__ == \"__main__\":\n"
     << "    main(sys.argv[1] if len(sys.argv) > 1 else EXPERIMENT + \".png\")\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Run

/// Computes everything without touching the filesystem.
inline RunResult compute_experiment(ExperimentConfig cfg, const ClassifierSettings& cs = {}) {
  cfg.validate();
  cfg.output = resolve_output_dir(cfg);
  RunResult r;
  const auto grid = cfg.maturities.resolve();
  r.curves = skew_curves(cfg.model, cfg.index, grid, cfg.sim);
  const auto& primary = r.primary();
  try {
    r.fit = fit_power_law(primary);
  } catch (const InsufficientDataError& e) {
    r.low_confidence_reasons.push_back(std::string("fit failed: ") + e.what());
  }
  if (cfg.sim.n_paths < kLowConfidencePaths)
    r.low_confidence_reasons.push_back("fewer than " + std::to_string(kLowConfidencePaths) + " paths");
  if (r.fit && r.fit->r2 < 0.9) r.low_confidence_reasons.push_back("fit r2 below 0.9");
  if (!primary.missing.empty()) r.low_confidence_reasons.push_back("maturities missing from the curve");
  if (!primary.points.empty()) r.empirical = classify_curve(primary, cs);
  r.prediction = predicted_rate(cfg.model, cfg.index);

  if (!cfg.family.empty()) {
    std::vector<SkewCurve> curves;
    for (const auto& s0 : cfg.family) {
      if (s0 == cfg.index.s0) {
        r.family_curves.push_back(r.curves);
      } else {
        IndexSpec spec = cfg.index;
        spec.s0 = s0;
        r.family_curves.push_back(skew_curves(cfg.model, spec, grid, cfg.sim));
      }
      const auto& pair = r.family_curves.back();
      curves.push_back(cfg.method == SkewMethod::finite_difference ? pair.finite_difference : pair.formula);
    }
    try {
      r.family = classify_quasi_blow_up(std::move(curves), cs);
    } catch (const InsufficientDataError& e) {
      r.low_confidence_reasons.push_back(std::string("family classification failed: ") + e.what());
    }
  }
  r.config = std::move(cfg);
  return r;
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + p.string() + "'");
  out << text;
}

inline void write_outputs(RunResult& r) {
  const std::filesystem::path dir = r.config.output;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + dir.string() + "': " + ec.message());
  r.files.clear();
  auto put = [&](const char* name, const std::string& text) {
    write_text(dir / name, text);
    r.files.push_back(dir / name);
  };
  put("skew_curve.csv", skew_curve_csv(r.curves, r.config.name));
  put("fit.json", fit_json(r).dump(2) + "\n");
  put("plot_skew.py", plot_script(r));
  if (!r.family_curves.empty()) put("family_curves.csv", family_curves_csv(r.config.family, r.family_curves));
}

inline RunResult run_experiment(const ExperimentConfig& cfg, const ClassifierSettings& cs = {}) {
  auto r = compute_experiment(cfg, cs);
  write_outputs(r);
  return r;
}

}  // namespace rankskew
