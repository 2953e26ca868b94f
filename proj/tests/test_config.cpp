#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "rankskew/config.hpp"
#include "rankskew/runner.hpp"

using namespace rankskew;
namespace fs = std::filesystem;

namespace {

const char* kBase = R"(experiment: probe
model:
  assets:
    - {type: fss, sigma0: 0.2, hurst: 0.3, rho: -0.5}
    - {type: fss, sigma0: 0.6, hurst: 0.4, rho: -0.5}
index: {s0: [100, 90], weights: [1], n_top: 1}
simulation: {paths: 200, dt: 0.001, seed: 3}
maturities: [0.01, 0.02, 0.04, 0.08]
)";

std::string error_of(const std::string& text) {
  try {
    parse_config_text(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

std::string replace(std::string s, const std::string& from, const std::string& to) {
  const auto at = s.find(from);
  if (at != std::string::npos) s.replace(at, from.size(), to);
  return s;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("rankskew_test_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(Config, ParsesMinimalFile) {
  const auto c = parse_config_text(kBase);
  EXPECT_EQ(c.name, "probe");
  EXPECT_EQ(c.sim.n_paths, 200u);
  EXPECT_EQ(c.maturities.resolve().size(), 4u);
  EXPECT_EQ(std::get<FractionalSteinStein>(c.model.assets[1]).hurst, 0.4);
  EXPECT_EQ(c.method, SkewMethod::finite_difference);
}

TEST(Config, EveryPresetRoundTripsLosslessly) {
  for (const auto& [name, c] : presets()) {
    const auto text = to_yaml(c);
    const auto back = parse_config_text(text);
    EXPECT_TRUE(back == c) << name << "\n" << text;
    EXPECT_EQ(to_yaml(back), text);
  }
}

TEST(Config, UnknownKeysAreErrorsWithLineNumbers) {
  const auto e = error_of(replace(kBase, "simulation: {paths", "simulation: {pathz"));
  EXPECT_NE(e.find("unknown key 'pathz'"), std::string::npos) << e;
  EXPECT_NE(e.find("line 7"), std::string::npos) << e;
  EXPECT_NE(error_of(std::string(kBase) + "colour: red\n").find("unknown key 'colour'"), std::string::npos);
}

TEST(Config, TargetedValidationMessages) {
  auto e = error_of(replace(replace(kBase, "[100, 90]", "[100, 90, 100]"),
                            "    - {type: fss, sigma0: 0.6, hurst: 0.4, rho: -0.5}\n",
                            "    - {type: fss, sigma0: 0.6, hurst: 0.4, rho: -0.5}\n    - {type: gbm, sigma: 0.1}\n"));
  EXPECT_NE(e.find("adjacent"), std::string::npos) << e;
  e = error_of(replace(kBase, "weights: [1]", "weights: [0]"));
  EXPECT_NE(e.find("weights must be positive"), std::string::npos) << e;
  e = error_of(replace(kBase, "hurst: 0.3", "hurst: 1.3"));
  EXPECT_NE(e.find("H must lie in (0,1)"), std::string::npos) << e;
  e = error_of(replace(kBase, "[0.01, 0.02, 0.04, 0.08]", "[0.01, 0.04, 0.02, 0.08]"));
  EXPECT_NE(e.find("increasing"), std::string::npos) << e;
  EXPECT_NE(e.find("line 8"), std::string::npos) << e;
  e = error_of(replace(kBase, "type: fss", "type: heston"));
  EXPECT_NE(e.find("expected gbm, fss or bergomi"), std::string::npos) << e;
  e = error_of(replace(kBase, "paths: 200", "paths: lots"));
  EXPECT_NE(e.find("simulation.paths"), std::string::npos) << e;
  EXPECT_NE(error_of("model: [").find("syntax"), std::string::npos);
}

TEST(Presets, SortedAndCarryReferenceParameters) {
  const auto p = presets();
  std::vector<std::string> names;
  for (const auto& [n, c] : p) names.push_back(n);
  EXPECT_EQ(names, (std::vector<std::string>{"fig2a", "fig2b", "fig2c", "fig3a", "fig3b", "fig3c", "fig4a", "fig4b",
                                             "fig4c", "fig4d", "fig5a", "fig5b"}));
  const auto& b = p.at("fig2b");
  EXPECT_EQ(b.sim.n_paths, 50000u);
  EXPECT_DOUBLE_EQ(b.sim.dt, 0.05 / 365);
  EXPECT_EQ(b.index.s0, (std::vector<double>{100, 100}));
  EXPECT_EQ(std::get<Gbm>(b.model.assets[1]).sigma, 0.6);

  const auto& f5 = p.at("fig5a");
  for (std::size_t j = 0; j < 2; ++j) {
    const auto& a = std::get<FractionalBergomi>(f5.model.assets[j]);
    EXPECT_DOUBLE_EQ(a.eta, 1.9 * 1.9);
    EXPECT_EQ(a.rho, 0.0);
    EXPECT_EQ(a.hurst, j == 0 ? 0.7 : 0.6);
  }
  EXPECT_DOUBLE_EQ(f5.sim.dt, 0.1 / 365);

  const auto& d = p.at("fig4d");
  EXPECT_EQ(d.index.weights, (std::vector<double>{0.7, 0.3}));
  EXPECT_EQ(d.index.n_top, 2u);
  EXPECT_EQ(d.sim.n_paths, 30000u);
  EXPECT_THROW(preset("fig9z"), ConfigError);
  for (const auto& [n, c] : p) EXPECT_NO_THROW(c.validate()) << n;
}

TEST(Runner, SmokeRunWritesArtifactsAndFlagsLowConfidence) {
  auto cfg = preset("fig2c");
  cfg.sim.n_paths = 100;
  cfg.output = scratch("smoke").string();
  const auto r = run_experiment(cfg);
  for (const char* f : {"skew_curve.csv", "fit.json", "plot_skew.py", "family_curves.csv"})
    EXPECT_TRUE(fs::exists(fs::path(cfg.output) / f)) << f;
  EXPECT_TRUE(r.low_confidence());
  const auto j = nlohmann::json::parse(slurp(fs::path(cfg.output) / "fit.json"));
  EXPECT_EQ(j["version"], std::string(kArtifactVersion));
  EXPECT_TRUE(j["low_confidence"].get<bool>());
  EXPECT_EQ(j["config"]["simulation"]["paths"], 100);
  EXPECT_TRUE(j.contains("family"));
  EXPECT_TRUE(j["predicted_rate"].contains("kind"));
}

TEST(Runner, IdenticalConfigGivesByteIdenticalOutputs) {
  auto cfg = parse_config_text(kBase);
  cfg.output = scratch("a").string();
  run_experiment(cfg);
  auto cfg2 = cfg;
  cfg2.output = scratch("b").string();
  run_experiment(cfg2);
  EXPECT_EQ(slurp(fs::path(cfg.output) / "skew_curve.csv"), slurp(fs::path(cfg2.output) / "skew_curve.csv"));
  EXPECT_EQ(slurp(fs::path(cfg.output) / "plot_skew.py"), slurp(fs::path(cfg2.output) / "plot_skew.py"));
}

TEST(Runner, CsvReadsBackExactly) {
  auto cfg = parse_config_text(kBase);
  const auto r = compute_experiment(cfg);
  std::istringstream in(skew_curve_csv(r.curves, cfg.name));
  const auto back = read_skew_csv(in, SkewMethod::formula);
  ASSERT_EQ(back.points.size(), r.curves.formula.points.size());
  for (std::size_t i = 0; i < back.points.size(); ++i) {
    EXPECT_EQ(back.points[i].maturity, r.curves.formula.points[i].maturity);
    EXPECT_EQ(back.points[i].skew, r.curves.formula.points[i].skew);
  }
  std::istringstream bad("T,skew\n");
  EXPECT_THROW(read_skew_csv(bad, SkewMethod::formula), ConfigError);
}

TEST(Runner, OutputDirectoryResolution) {
  ExperimentConfig c;
  c.name = "x";
  c.output = "given";
  EXPECT_EQ(resolve_output_dir(c), "given");
  c.output.clear();
  ::setenv("RANKSKEW_OUT_DIR", "/tmp/envdir", 1);
  EXPECT_EQ(resolve_output_dir(c), "/tmp/envdir/x");
  ::unsetenv("RANKSKEW_OUT_DIR");
  EXPECT_EQ(resolve_output_dir(c), "out/x");
}

TEST(Runner, PlotScriptIsValidPython) {
  auto cfg = parse_config_text(kBase);
  cfg.output = scratch("plot").string();
  run_experiment(cfg);
  const auto script = fs::path(cfg.output) / "plot_skew.py";
  const std::string text = slurp(script);
  EXPECT_NE(text.find("set_xscale(\"log\")"), std::string::npos);
  if (std::system("python3 --version > /dev/null 2>&1") != 0) GTEST_SKIP() << "python3 unavailable";
  const std::string cmd = "python3 -c \"import ast,sys; ast.parse(open(sys.argv[1]).read())\" " + script.string();
  EXPECT_EQ(std::system(cmd.c_str()), 0);
}
