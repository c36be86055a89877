#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "dld/dataset.hpp"
#include "dld/tracer.hpp"

namespace dld::ml {

/// Dense row-major feature matrix.
class Table {
 public:
  Table() = default;
  explicit Table(std::size_t cols) : cols_(cols) {}
  Table(std::size_t rows, std::size_t cols) : cols_(cols), values_(rows * cols, 0.0) {}

  [[nodiscard]] std::size_t rows() const { return cols_ == 0 ? 0 : values_.size() / cols_; }
  [[nodiscard]] std::size_t cols() const { return cols_; }
  [[nodiscard]] const double* row(std::size_t i) const { return values_.data() + i * cols_; }
  [[nodiscard]] double* row(std::size_t i) { return values_.data() + i * cols_; }
  [[nodiscard]] double operator()(std::size_t i, std::size_t j) const { return values_[i * cols_ + j]; }
  [[nodiscard]] const std::vector<double>& values() const { return values_; }

  void push_row(std::span<const double> r);
  void reserve(std::size_t rows) { values_.reserve(rows * cols_); }
  [[nodiscard]] Table select(std::span<const std::size_t> rows) const;

  bool operator==(const Table&) const = default;

 private:
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

/// Min-max scaling fitted on training data only. Constant features map to 0;
/// values outside the training range are not clipped.
class FeatureScaler {
 public:
  static FeatureScaler fit(const Table& train);

  [[nodiscard]] Table transform(const Table& x) const;
  void transform_row(const double* in, double* out) const;
  [[nodiscard]] const std::vector<double>& min() const { return min_; }
  [[nodiscard]] const std::vector<double>& max() const { return max_; }

  [[nodiscard]] nlohmann::json to_json() const;
  static FeatureScaler from_json(const nlohmann::json& j);

 private:
  std::vector<double> min_;
  std::vector<double> max_;
};

/// 1 - SS_res / SS_tot. Throws DataError when y has no variance.
double r2_score(std::span<const double> y, std::span<const double> y_hat);

/// Bumped is the positive class.
struct ConfusionMatrix {
  long long tp = 0;
  long long fp = 0;
  long long fn = 0;
  long long tn = 0;

  [[nodiscard]] long long total() const { return tp + fp + fn + tn; }
  bool operator==(const ConfusionMatrix&) const = default;
};

struct ClassificationMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
};

/// Precision and recall are 0 when their denominators vanish; F1 is 0 when
/// precision + recall = 0.
ClassificationMetrics classification_metrics(const ConfusionMatrix& cm);
ConfusionMatrix confusion_matrix(std::span<const double> truth, std::span<const double> predicted);

/// Class indices used by the classifiers.
constexpr double kZigzag = 0.0;
constexpr double kBumped = 1.0;
double class_index(ModeLabel m);
ModeLabel class_label(double index);

enum class ModelKind { KnnReg, RfReg, GbReg, KnnClf, MlpClf };

std::string to_string(ModelKind k);
ModelKind model_kind_from_string(const std::string& s);
bool is_regressor(ModelKind k);
std::vector<ModelKind> all_model_kinds();

enum class Weighting { Uniform, InverseDistance };
std::string to_string(Weighting w);
Weighting weighting_from_string(const std::string& s);

/// Union of every trainer's settings; each model reads its own subset.
struct Hyperparameters {
  // kNN
  int k = 5;
  Weighting weighting = Weighting::Uniform;
  // Trees. max_depth < 0 means unlimited.
  int n_trees = 100;
  int max_depth = -1;
  int min_leaf = 5;
  double feature_subsample = 1.0;
  int n_stages = 100;
  double learning_rate = 0.1;
  /// Tree learners fit on at most this many records (seeded subsample).
  int max_train_records = 20000;
  // MLP
  std::vector<int> layers{16, 16};
  std::string activation = "relu";
  double mlp_learning_rate = 1e-2;
  int max_epochs = 500;
  int batch_size = 16;
  int patience = 25;
  double validation_fraction = 0.2;

  bool operator==(const Hyperparameters&) const = default;
};

/// Only the fields the given model kind uses.
nlohmann::json hyperparameters_to_json(ModelKind kind, const Hyperparameters& h);
Hyperparameters hyperparameters_from_json(ModelKind kind, const nlohmann::json& j);

/// A fitted model. Inputs are raw features; the model applies its own scaler.
class Model {
 public:
  virtual ~Model() = default;

  [[nodiscard]] ModelKind kind() const { return kind_; }
  [[nodiscard]] const Hyperparameters& hyperparameters() const { return params_; }
  [[nodiscard]] std::uint64_t seed() const { return seed_; }
  [[nodiscard]] const FeatureScaler& scaler() const { return scaler_; }
  [[nodiscard]] bool converged() const { return converged_; }
  [[nodiscard]] double final_loss() const { return final_loss_; }
  [[nodiscard]] const std::string& warning() const { return warning_; }
  [[nodiscard]] std::size_t n_features() const { return scaler_.min().size(); }

  /// Regression target or class index (0 zigzag, 1 bumped).
  [[nodiscard]] double predict(std::span<const double> features) const;
  [[nodiscard]] std::vector<double> predict(const Table& x) const;

  void fit(const Table& x, std::span<const double> y);

  [[nodiscard]] nlohmann::json to_json() const;
  static std::unique_ptr<Model> from_json(const nlohmann::json& j);

 protected:
  Model(ModelKind kind, Hyperparameters params, std::uint64_t seed)
      : kind_(kind), params_(std::move(params)), seed_(seed) {}

  virtual void fit_scaled(const Table& x, std::span<const double> y) = 0;
  [[nodiscard]] virtual double predict_scaled(const double* row) const = 0;
  [[nodiscard]] virtual nlohmann::json state_json() const = 0;
  virtual void load_state(const nlohmann::json& j) = 0;

  bool converged_ = true;
  double final_loss_ = 0.0;
  std::string warning_;

 private:
  friend std::unique_ptr<Model> make_model(ModelKind, const Hyperparameters&, std::uint64_t);
  ModelKind kind_;
  Hyperparameters params_;
  std::uint64_t seed_;
  FeatureScaler scaler_;
};

std::unique_ptr<Model> make_model(ModelKind kind, const Hyperparameters& params, std::uint64_t seed);
std::unique_ptr<Model> train(ModelKind kind, const Hyperparameters& params, const Table& x,
                             std::span<const double> y, std::uint64_t seed);

void save_model(const Model& model, const std::filesystem::path& path);
std::unique_ptr<Model> load_model(const std::filesystem::path& path);

/// Features (x_um, size_um, n) and target y_um.
struct RegressionData {
  Table x{3};
  std::vector<double> y;
  std::vector<std::string> case_ids;  // per record
};
RegressionData regression_data(const std::vector<RegressionRecord>& records);

/// Features (size_um, n) and class index.
struct ClassificationData {
  Table x{2};
  std::vector<double> y;
  std::vector<std::string> case_ids;
};
ClassificationData classification_data(const std::vector<ClassificationRecord>& records);

inline double predict_y(const Model& m, double x_um, double size_um, int period) {
  const double f[3] = {x_um, size_um, static_cast<double>(period)};
  return m.predict(f);
}
inline ModeLabel predict_mode(const Model& m, double size_um, int period) {
  const double f[2] = {size_um, static_cast<double>(period)};
  return class_label(m.predict(f));
}

/// Assigns each group (a case) to one of `folds` folds. Within each class the
/// groups are shuffled and dealt round-robin, continuing the deal across
/// classes, so fold sizes and per-class counts differ by at most one.
std::vector<int> stratified_folds(std::span<const int> group_labels, int folds, std::uint64_t seed);

struct CvRow {
  Hyperparameters params;
  std::vector<double> fold_scores;
  double mean = 0.0;
};

struct GridSearchResult {
  ModelKind kind{};
  std::vector<CvRow> table;  // grid order
  std::size_t best = 0;
  int folds = 5;
  std::uint64_t seed = 0;
  [[nodiscard]] const Hyperparameters& best_params() const { return table.at(best).params; }
};

/// Records grouped into cases; `group_of[i]` indexes `group_labels`.
struct Grouping {
  std::vector<int> group_of;
  std::vector<int> group_labels;
};
Grouping group_by_case(std::span<const std::string> case_ids,
                       const std::map<std::string, ModeLabel>& mode_of_case);

/// Per-fold validation score (R^2 for regressors, accuracy for classifiers).
std::vector<double> stratified_kfold_cv(ModelKind kind, const Hyperparameters& params, const Table& x,
                                        std::span<const double> y, const Grouping& groups, int folds,
                                        std::uint64_t seed, int jobs = 1);

/// Default search grid, ordered from simplest to most complex.
std::vector<Hyperparameters> default_grid(ModelKind kind);
/// Complexity key for tie-breaking; smaller is simpler.
std::vector<double> complexity(ModelKind kind, const Hyperparameters& h);

/// Cross-validates every grid point; the best mean score wins and ties go to
/// the simpler model.
GridSearchResult grid_search(ModelKind kind, std::vector<Hyperparameters> grid, const Table& x,
                             std::span<const double> y, const Grouping& groups, int folds, std::uint64_t seed,
                             int jobs = 1);
nlohmann::json grid_search_to_json(const GridSearchResult& g);

struct EvalReport {
  ModelKind kind{};
  Hyperparameters params;
  std::uint64_t seed = 0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  // Regressors
  double r2_train = 0.0;
  double r2_test = 0.0;
  // Classifiers
  ConfusionMatrix confusion_train;
  ConfusionMatrix confusion_test;
  ClassificationMetrics metrics_train;
  ClassificationMetrics metrics_test;
  bool converged = true;
  std::string warning;
  std::optional<GridSearchResult> search;
};

EvalReport evaluate(const Model& model, const Table& x_train, std::span<const double> y_train,
                    const Table& x_test, std::span<const double> y_test);
nlohmann::json to_json(const EvalReport& r);
/// Header: partition,actual,predicted_zigzag,predicted_bumped
void write_confusion_csv(const EvalReport& r, std::ostream& out);

}  // namespace dld::ml
