#include "run_config.hpp"

#include <algorithm>
#include <cstdlib>

#include "dld/io.hpp"
#include "toml.hpp"

namespace dld::app {

namespace {

void require_known(const nlohmann::json& j, const std::vector<std::string>& known, const std::string& what) {
  if (!j.is_object()) throw ConfigError(what + " must be a table");
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ConfigError("unknown key '" + key + "' in " + what);
    }
  }
}

template <class T>
T get_as(const nlohmann::json& j, const std::string& what) {
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(what + " has the wrong type");
  }
}

void collect_keys(const nlohmann::json& j, const std::string& prefix, std::vector<std::string>& out) {
  for (const auto& [key, value] : j.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    out.push_back(path);
    if (value.is_object()) collect_keys(value, path, out);
  }
}

}  // namespace

ml::Hyperparameters MlSettings::params_for(ml::ModelKind k) const {
  const auto it = fixed.find(k);
  return it == fixed.end() ? ml::Hyperparameters{} : it->second;
}

bool RunConfig::from_file(const std::string& dotted) const {
  return std::find(keys_from_file.begin(), keys_from_file.end(), dotted) != keys_from_file.end();
}

SweepConfig RunConfig::sweep() const {
  SweepConfig s;
  s.periods = periods;
  s.sizes_um = sizes_um;
  s.design = design;
  s.fluid = fluid;
  s.solver = solver;
  s.tracer = tracer;
  s.seed = seed;
  s.jobs = jobs;
  return s;
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json models = nlohmann::json::array();
  for (auto k : ml.models) models.push_back(ml::to_string(k));
  nlohmann::json mlj = {{"split_ratio", ml.split_ratio}, {"folds", ml.folds}, {"search", ml.search},
                        {"models", models}};
  for (const auto& [k, h] : ml.fixed) mlj[ml::to_string(k)] = ml::hyperparameters_to_json(k, h);
  nlohmann::json j = {{"seed", seed},
                      {"design", design},
                      {"fluid", fluid},
                      {"solver", solver},
                      {"tracer", tracer},
                      {"sweep", {{"periods", periods}, {"sizes_um", sizes_um}}},
                      {"ml", mlj}};
  if (output_dir) j["output_dir"] = output_dir->string();
  return j;
}

RunConfig apply_config(RunConfig cfg, const nlohmann::json& doc) {
  require_known(doc, {"seed", "output_dir", "jobs", "design", "fluid", "solver", "tracer", "sweep", "ml"}, "config");
  collect_keys(doc, "", cfg.keys_from_file);
  if (doc.contains("seed")) {
    const auto s = get_as<std::int64_t>(doc["seed"], "seed");
    if (s < 0) throw ConfigError("seed must be >= 0");
    cfg.seed = static_cast<std::uint64_t>(s);
  }
  if (doc.contains("output_dir")) cfg.output_dir = get_as<std::string>(doc["output_dir"], "output_dir");
  if (doc.contains("jobs")) cfg.jobs = get_as<int>(doc["jobs"], "jobs");
  if (doc.contains("design")) {
    // Merge over the current design so a partial block keeps other defaults.
    nlohmann::json merged = cfg.design;
    merged.erase("n_rows");
    if (cfg.design.n_rows) merged["n_rows"] = *cfg.design.n_rows;
    require_known(doc["design"], {"d_p_um", "g_um", "n", "m_columns", "n_rows", "margins_um", "lateral"}, "design");
    merged.update(doc["design"]);
    cfg.design = merged.get<DldDesign>();
  }
  auto merge = [](auto& target, const nlohmann::json& block) {
    nlohmann::json merged = target;
    merged.update(block);
    using T = std::decay_t<decltype(target)>;
    target = merged.template get<T>();
  };
  if (doc.contains("fluid")) {
    require_known(doc["fluid"], {"density", "viscosity", "body_force"}, "fluid");
    merge(cfg.fluid, doc["fluid"]);
  }
  if (doc.contains("solver")) {
    require_known(doc["solver"], {"reynolds", "cells_per_gap", "tolerance", "max_iterations", "zero_mean_lateral_flux"},
                  "solver");
    merge(cfg.solver, doc["solver"]);
  }
  if (doc.contains("tracer")) {
    const auto& t = doc["tracer"];
    require_known(t, {"dt_s", "max_time_s", "particle_density", "lift_coefficient", "target_samples", "release_x_um",
                      "release_y_um"},
                  "tracer");
    nlohmann::json merged = cfg.tracer;
    merged.update(t);
    cfg.tracer = merged.get<TracerConfig>();
  }
  if (doc.contains("sweep")) {
    const auto& s = doc["sweep"];
    require_known(s, {"periods", "sizes_um", "size_min_um", "size_max_um", "size_count"}, "sweep");
    if (s.contains("periods")) cfg.periods = get_as<std::vector<int>>(s["periods"], "sweep.periods");
    const bool range = s.contains("size_min_um") || s.contains("size_max_um") || s.contains("size_count");
    if (range && s.contains("sizes_um")) throw ConfigError("give either sweep.sizes_um or a size range, not both");
    if (s.contains("sizes_um")) cfg.sizes_um = get_as<std::vector<double>>(s["sizes_um"], "sweep.sizes_um");
    if (range) {
      cfg.sizes_um = SweepConfig::uniform_sizes(get_as<double>(s.value("size_min_um", nlohmann::json(1.0)), "size_min_um"),
                                                get_as<double>(s.value("size_max_um", nlohmann::json(14.0)), "size_max_um"),
                                                get_as<int>(s.value("size_count", nlohmann::json(14)), "size_count"));
    }
  }
  if (doc.contains("ml")) {
    const auto& m = doc["ml"];
    std::vector<std::string> known = {"split_ratio", "folds", "search", "models"};
    for (auto k : ml::all_model_kinds()) known.push_back(ml::to_string(k));
    require_known(m, known, "ml");
    if (m.contains("split_ratio")) cfg.ml.split_ratio = get_as<double>(m["split_ratio"], "ml.split_ratio");
    if (m.contains("folds")) cfg.ml.folds = get_as<int>(m["folds"], "ml.folds");
    if (m.contains("search")) cfg.ml.search = get_as<bool>(m["search"], "ml.search");
    if (m.contains("models")) {
      cfg.ml.models.clear();
      for (const auto& name : get_as<std::vector<std::string>>(m["models"], "ml.models")) {
        cfg.ml.models.push_back(ml::model_kind_from_string(name));
      }
    }
    for (auto k : ml::all_model_kinds()) {
      const auto name = ml::to_string(k);
      if (m.contains(name)) cfg.ml.fixed[k] = ml::hyperparameters_from_json(k, m[name]);
    }
    if (!(cfg.ml.split_ratio > 0.0 && cfg.ml.split_ratio < 1.0)) throw ConfigError("ml.split_ratio must be in (0, 1)");
    if (cfg.ml.folds < 2) throw ConfigError("ml.folds must be >= 2");
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return apply_config(RunConfig{}, parse_toml(text, path.string()));
}

std::filesystem::path resolve_output_root(const std::optional<std::string>& flag, const RunConfig& cfg) {
  if (flag) return *flag;
  if (cfg.output_dir) return *cfg.output_dir;
  if (const char* env = std::getenv("DLD_OUTPUT_ROOT"); env != nullptr && *env != '\0') return env;
  return "dld_output";
}

}  // namespace dld::app
