#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "dld/flowfield.hpp"
#include "dld/geometry.hpp"
#include "dld/tracer.hpp"

namespace dld {

/// Parametric sweep over period numbers and particle sizes.
struct SweepConfig {
  std::vector<int> periods{6, 12, 24, 48};
  std::vector<double> sizes_um = uniform_sizes(1.0, 14.0, 14);
  /// Geometry template; `period` is replaced per case.
  DldDesign design;
  FluidProperties fluid;
  SolverConfig solver;
  TracerConfig tracer;
  std::uint64_t seed = 42;
  /// Worker threads; 0 = one per core.
  int jobs = 0;

  void validate() const;
  [[nodiscard]] DldDesign design_for(int period) const;

  /// `count` evenly spaced values from lo to hi inclusive.
  static std::vector<double> uniform_sizes(double lo, double hi, int count);
  /// 4 periods x 14 sizes at dataset resolution.
  static SweepConfig desk();
  /// N = 3..48 x 28 sizes over [1, 14] um.
  static SweepConfig full();
};

void to_json(nlohmann::json& j, const SweepConfig& c);

enum class CaseStatus { Labeled, Inconclusive, Incomplete, Failed };

std::string to_string(CaseStatus s);
CaseStatus case_status_from_string(const std::string& s);

struct SweepCase {
  std::string case_id;
  int period = 0;
  double size_um = 0.0;
  CaseStatus status = CaseStatus::Failed;
  std::string reason;  // empty for labelled cases
  Trajectory trajectory;

  [[nodiscard]] bool labeled() const { return status == CaseStatus::Labeled; }
  bool operator==(const SweepCase& o) const;
};

struct FlowSummary {
  int period = 0;
  int nx = 0;
  int ny = 0;
  int iterations = 0;
  double residual = 0.0;
  double divergence = 0.0;
  double lateral_body_force = 0.0;
  std::string error;  // non-empty when the solve failed

  bool operator==(const FlowSummary&) const = default;
};

struct SweepResult {
  std::vector<FlowSummary> flows;  // ascending period
  std::vector<SweepCase> cases;    // ascending (period, size)

  [[nodiscard]] std::size_t count(CaseStatus s) const;
  bool operator==(const SweepResult&) const = default;
};

using SweepProgress = std::function<void(const SweepCase&)>;

/// Solves one flow per period, traces every size through it and labels the
/// result. Failures are recorded per case and never abort the sweep.
/// `progress` is called from worker threads, one call at a time.
SweepResult generate_sweep(const SweepConfig& config, const SweepProgress& progress = {});

struct RegressionRecord {
  double x_um = 0.0;
  double size_um = 0.0;
  int period = 0;
  double y_um = 0.0;

  bool operator==(const RegressionRecord&) const = default;
};

struct ClassificationRecord {
  double size_um = 0.0;
  int period = 0;
  ModeLabel mode = ModeLabel::Zigzag;

  bool operator==(const ClassificationRecord&) const = default;
};

/// One record per stored sample of every labelled case, ordered by (N, size, t).
std::vector<RegressionRecord> flatten_for_regression(const std::vector<SweepCase>& cases);
/// One record per labelled case.
std::vector<ClassificationRecord> flatten_for_classification(const std::vector<SweepCase>& cases);

enum class Partition { Train, Test };

std::string to_string(Partition p);

struct LabeledCase {
  std::string case_id;
  ModeLabel mode = ModeLabel::Zigzag;
};

std::vector<LabeledCase> labeled_cases(const std::vector<SweepCase>& cases);
std::vector<LabeledCase> labeled_cases(const std::vector<ClassificationRecord>& records);

/// Case-level train/test partition, stratified by transport mode.
struct SplitDataset {
  std::uint64_t seed = 0;
  double ratio = 0.2;
  std::map<std::string, Partition> assignment;

  [[nodiscard]] std::vector<std::string> ids(Partition p) const;
  /// Throws DataError for a case the split does not know.
  [[nodiscard]] Partition of(const std::string& case_id) const;
  bool operator==(const SplitDataset&) const = default;
};

/// Per class, round(ratio * count) cases chosen by a seeded shuffle go to test.
SplitDataset stratified_split(const std::vector<LabeledCase>& cases, double ratio, std::uint64_t seed);

void write_regression_csv(const std::vector<RegressionRecord>& records, std::ostream& out);
std::vector<RegressionRecord> read_regression_csv(std::istream& in, const std::string& name);
void write_classification_csv(const std::vector<ClassificationRecord>& records, std::ostream& out);
std::vector<ClassificationRecord> read_classification_csv(std::istream& in, const std::string& name);
/// Header: case_id,n,size_um,mode,migration_ratio
void write_mode_summary_csv(const std::vector<SweepCase>& cases, std::ostream& out);

nlohmann::json split_to_json(const SplitDataset& split);
SplitDataset split_from_json(const nlohmann::json& j);
void save_split(const SplitDataset& split, const std::filesystem::path& path);
SplitDataset load_split(const std::filesystem::path& path);

/// File names inside a dataset directory.
struct DatasetFiles {
  static constexpr const char* regression = "regression.csv";
  static constexpr const char* classification = "classification.csv";
  static constexpr const char* trajectories = "trajectories.csv";
  static constexpr const char* modes = "modes.csv";
  static constexpr const char* report = "sweep_report.json";
};

/// Writes every dataset artifact under `dir`. The files depend only on the
/// sweep content, never on wall-clock time.
void save_dataset(const SweepResult& result, const SweepConfig& config, const std::filesystem::path& dir);
/// Rebuilds the sweep from sweep_report.json and trajectories.csv.
SweepResult load_dataset(const std::filesystem::path& dir);

std::vector<RegressionRecord> load_regression(const std::filesystem::path& dir);
std::vector<ClassificationRecord> load_classification(const std::filesystem::path& dir);

}  // namespace dld
