#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dld/dataset.hpp"
#include "dld/ml.hpp"

namespace dld::app {

struct MlSettings {
  double split_ratio = 0.2;
  int folds = 5;
  /// Grid-search each model; when false the fixed hyperparameters are used.
  bool search = true;
  std::vector<ml::ModelKind> models = ml::all_model_kinds();
  std::map<ml::ModelKind, ml::Hyperparameters> fixed;

  [[nodiscard]] ml::Hyperparameters params_for(ml::ModelKind k) const;
};

/// One experiment: every block resolves to a module config.
///
///   seed = 42
///   output_dir = "runs/desk"
///   jobs = 0
///   [design]   d_p_um, g_um, n, m_columns, n_rows, margins_um, lateral
///   [fluid]    density, viscosity, body_force
///   [solver]   reynolds, cells_per_gap, tolerance, max_iterations, zero_mean_lateral_flux
///   [tracer]   dt_s, max_time_s, particle_density, lift_coefficient, target_samples,
///              release_x_um, release_y_um
///   [sweep]    periods, sizes_um | size_min_um + size_max_um + size_count
///   [ml]       split_ratio, folds, search, models
///   [ml.<kind>] fixed hyperparameters for that model
struct RunConfig {
  DldDesign design;
  FluidProperties fluid;
  SolverConfig solver;
  TracerConfig tracer;
  std::vector<int> periods = SweepConfig{}.periods;
  std::vector<double> sizes_um = SweepConfig{}.sizes_um;
  MlSettings ml;
  std::optional<std::filesystem::path> output_dir;
  std::uint64_t seed = 42;
  int jobs = 0;

  /// Dotted paths of the keys the file set, e.g. "solver.cells_per_gap".
  std::vector<std::string> keys_from_file;
  [[nodiscard]] bool from_file(const std::string& dotted) const;

  [[nodiscard]] SweepConfig sweep() const;
  [[nodiscard]] nlohmann::json to_json() const;
};

/// Applies a parsed document on top of `base`. Unknown keys are ConfigErrors.
RunConfig apply_config(RunConfig base, const nlohmann::json& doc);
RunConfig load_run_config(const std::filesystem::path& path);

/// --output, then the config file, then $DLD_OUTPUT_ROOT, then ./dld_output.
std::filesystem::path resolve_output_root(const std::optional<std::string>& flag, const RunConfig& cfg);

}  // namespace dld::app
