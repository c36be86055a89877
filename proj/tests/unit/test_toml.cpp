#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>

#include "app/run_config.hpp"
#include "app/toml.hpp"
#include "dld/io.hpp"

using dld::ConfigError;
using dld::app::parse_toml;

namespace {

std::string error_of(const std::string& text) {
  try {
    (void)parse_toml(text, "cfg.toml");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("toml scalars") {
  const auto j = parse_toml(R"(
# comment
a = 1
b = -2_000
c = 3.5e-2
d = true
e = "tab\tquote\" \u00e9"
f = 'C:\raw'
g = inf
h = +12
"quoted key" = 0
x.y.z = 7   # dotted key
)",
                            "t");
  CHECK(j["a"] == 1);
  CHECK(j["b"] == -2000);
  CHECK(j["c"].get<double>() == 0.035);
  CHECK(j["d"] == true);
  CHECK(j["e"] == "tab\tquote\" \xc3\xa9");
  CHECK(j["f"] == "C:\\raw");
  CHECK(std::isinf(j["g"].get<double>()));
  CHECK(j["h"] == 12);
  CHECK(j["quoted key"] == 0);
  CHECK(j["x"]["y"]["z"] == 7);
}

TEST_CASE("toml tables and arrays") {
  const auto j = parse_toml(R"(
[sweep]
periods = [6, 12,
           24, 48,]
sizes_um = [1.0, 2.5]

[ml.knn_reg]
k = 5
point = { x = 1, y = [2, 3] }
)",
                            "t");
  CHECK(j["sweep"]["periods"] == nlohmann::json::array({6, 12, 24, 48}));
  CHECK(j["sweep"]["sizes_um"][1].get<double>() == 2.5);
  CHECK(j["ml"]["knn_reg"]["k"] == 5);
  CHECK(j["ml"]["knn_reg"]["point"]["y"][1] == 3);
}

TEST_CASE("toml errors name the line") {
  CHECK(error_of("a = 1\na = 2\n").find("cfg.toml:2") != std::string::npos);
  CHECK(error_of("[t]\nx=1\n[t]\n").find("cfg.toml:3") != std::string::npos);
  CHECK_FALSE(error_of("a = \n").empty());
  CHECK_FALSE(error_of("a = \"open\n").empty());
  CHECK_FALSE(error_of("[[runs]]\n").empty());
  CHECK_FALSE(error_of("a = 1 2\n").empty());
  CHECK_FALSE(error_of("a = \"\"\"x\"\"\"\n").empty());
  CHECK_FALSE(error_of("d = 1979-05-27\n").empty());
}

TEST_CASE("run config resolves every block") {
  const auto doc = parse_toml(R"(
seed = 7
output_dir = "runs/a"
jobs = 2
[design]
n = 12
g_um = 40.0
d_p_um = 50.0
[fluid]
viscosity = 2e-3
[solver]
cells_per_gap = 16
reynolds = 0.5
[tracer]
dt_s = 5e-7
lift_coefficient = 0.0
[sweep]
periods = [6, 12]
size_min_um = 2
size_max_um = 5
size_count = 4
[ml]
split_ratio = 0.25
folds = 4
search = false
models = ["knn_reg", "mlp_clf"]
[ml.knn_reg]
k = 9
weighting = "inverse-distance"
)",
                              "run.toml");
  const auto cfg = dld::app::apply_config(dld::app::RunConfig{}, doc);
  CHECK(cfg.seed == 7);
  CHECK(cfg.jobs == 2);
  CHECK(cfg.output_dir == std::filesystem::path("runs/a"));
  CHECK(cfg.design.period == 12);
  CHECK(cfg.design.gap_um == 40.0);
  CHECK(cfg.design.post_diameter_um == 50.0);
  CHECK(cfg.fluid.viscosity == 2e-3);
  CHECK(cfg.fluid.density == 1000.0);
  CHECK(cfg.solver.cells_per_gap == 16);
  CHECK(cfg.tracer.dt == 5e-7);
  CHECK(cfg.periods == std::vector<int>{6, 12});
  CHECK(cfg.sizes_um == std::vector<double>{2, 3, 4, 5});
  CHECK(cfg.ml.split_ratio == 0.25);
  CHECK(cfg.ml.folds == 4);
  CHECK_FALSE(cfg.ml.search);
  CHECK(cfg.ml.models.size() == 2);
  CHECK(cfg.ml.params_for(dld::ml::ModelKind::KnnReg).k == 9);
  CHECK(cfg.from_file("solver.cells_per_gap"));
  CHECK_FALSE(cfg.from_file("solver.tolerance"));

  const auto sweep = cfg.sweep();
  CHECK(sweep.design.gap_um == 40.0);
  CHECK(sweep.seed == 7);
  CHECK(sweep.solver.reynolds == 0.5);
}

TEST_CASE("run config rejects unknown keys") {
  using dld::app::apply_config;
  using dld::app::RunConfig;
  CHECK_THROWS_AS(apply_config(RunConfig{}, parse_toml("colour = 1\n", "t")), ConfigError);
  CHECK_THROWS_AS(apply_config(RunConfig{}, parse_toml("[solver]\ncells = 3\n", "t")), ConfigError);
  CHECK_THROWS_AS(apply_config(RunConfig{}, parse_toml("[ml.knn_reg]\nn_trees = 3\n", "t")), ConfigError);
  CHECK_THROWS_AS(apply_config(RunConfig{}, parse_toml("[ml.svm]\nk = 3\n", "t")), ConfigError);
  CHECK_THROWS_AS(apply_config(RunConfig{}, parse_toml("[sweep]\nsizes_um = [1]\nsize_count = 3\n", "t")),
                  ConfigError);
  CHECK_THROWS_AS(apply_config(RunConfig{}, parse_toml("[design]\nn = \"ten\"\n", "t")), ConfigError);
}

TEST_CASE("run config round trips through its json view") {
  const auto base = dld::app::apply_config(dld::app::RunConfig{}, parse_toml("[design]\nn = 24\n", "t"));
  const auto j = base.to_json();
  CHECK(j.at("design").at("n") == 24);
  CHECK(j.at("sweep").at("periods") == nlohmann::json::array({6, 12, 24, 48}));
}

TEST_CASE("output root precedence") {
  dld::app::RunConfig cfg;
  ::setenv("DLD_OUTPUT_ROOT", "/tmp/env_root", 1);
  CHECK(dld::app::resolve_output_root(std::string("/tmp/flag"), cfg) == "/tmp/flag");
  CHECK(dld::app::resolve_output_root(std::nullopt, cfg) == "/tmp/env_root");
  cfg.output_dir = "/tmp/file_root";
  CHECK(dld::app::resolve_output_root(std::nullopt, cfg) == "/tmp/file_root");
  ::unsetenv("DLD_OUTPUT_ROOT");
  cfg.output_dir.reset();
  CHECK(dld::app::resolve_output_root(std::nullopt, cfg) == "dld_output");
}
