#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "plots.hpp"
#include "run_config.hpp"

namespace dld::app {

/// Where each command reads and writes under one output root.
struct OutputLayout {
  std::filesystem::path root;

  [[nodiscard]] std::filesystem::path dataset() const { return root / "dataset"; }
  [[nodiscard]] std::filesystem::path split() const { return root / "split.json"; }
  [[nodiscard]] std::filesystem::path models() const { return root / "models"; }
  [[nodiscard]] std::filesystem::path model(ml::ModelKind k) const { return models() / (ml::to_string(k) + ".json"); }
  [[nodiscard]] std::filesystem::path search(ml::ModelKind k) const {
    return models() / (ml::to_string(k) + "_search.json");
  }
  [[nodiscard]] std::filesystem::path reports() const { return root / "reports"; }
  [[nodiscard]] std::filesystem::path plots() const { return root / "plots"; }
  [[nodiscard]] std::filesystem::path summaries() const { return root / "summaries"; }
};

/// Generates the dataset, saves it and draws one overlay per period.
SweepResult run_sweep(const RunConfig& cfg, const OutputLayout& out, const SweepProgress& progress = {});

/// Case-level stratified split of the saved dataset.
SplitDataset run_split(const OutputLayout& out, double ratio, std::uint64_t seed);

/// Train/test partition of a record view.
struct Partitioned {
  ml::Table x_train;
  ml::Table x_test;
  std::vector<double> y_train;
  std::vector<double> y_test;
  std::vector<std::string> ids_train;
  std::vector<std::string> ids_test;
};
Partitioned partition(const ml::Table& x, const std::vector<double>& y, const std::vector<std::string>& ids,
                      const SplitDataset& split);

/// Loads the saved dataset view the model kind trains on.
Partitioned load_partitioned(const OutputLayout& out, ml::ModelKind kind, const SplitDataset& split);

struct TrainOutcome {
  std::unique_ptr<ml::Model> model;
  std::optional<ml::GridSearchResult> search;
};

/// Grid-searches (unless disabled), refits on the whole training partition
/// and saves the model plus its search table.
TrainOutcome run_train(ml::ModelKind kind, const RunConfig& cfg, const OutputLayout& out);

/// Evaluates a saved model on the saved split; writes the report JSON, the
/// confusion CSV (classifiers), a plot and the plot's CSV.
ml::EvalReport run_evaluate(ml::ModelKind kind, const std::filesystem::path& model_path, const OutputLayout& out);

/// Report JSON as written by run_evaluate, search table included when present.
nlohmann::json eval_report_json(const ml::EvalReport& report, const OutputLayout& out);

/// Simulated critical-diameter intervals against both closed forms.
std::vector<DcRow> run_validate_davis(const RunConfig& cfg, const std::vector<int>& periods, double resolution_um,
                                      int jobs);
void write_dc_table(const std::vector<DcRow>& rows, std::ostream& out);

/// Writes summaries/<command>.json. Timings and timestamps live only here.
void write_summary(const OutputLayout& out, const std::string& command, double wall_seconds,
                   const nlohmann::json& results);

}  // namespace dld::app
