#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

#include "../json_keys.hpp"
#include "dld/io.hpp"
#include "dld/ml.hpp"
#include "models.hpp"

namespace dld::ml {

void Table::push_row(std::span<const double> r) {
  if (r.size() != cols_) throw DataError("row has " + std::to_string(r.size()) + " values, table has " +
                                         std::to_string(cols_) + " columns");
  values_.insert(values_.end(), r.begin(), r.end());
}

Table Table::select(std::span<const std::size_t> rows) const {
  Table out(cols_);
  out.reserve(rows.size());
  for (std::size_t i : rows) out.push_row({row(i), cols_});
  return out;
}

FeatureScaler FeatureScaler::fit(const Table& train) {
  if (train.rows() == 0) throw DataError("cannot fit a scaler on an empty table");
  FeatureScaler s;
  s.min_.assign(train.cols(), 0.0);
  s.max_.assign(train.cols(), 0.0);
  for (std::size_t j = 0; j < train.cols(); ++j) {
    s.min_[j] = s.max_[j] = train(0, j);
  }
  for (std::size_t i = 1; i < train.rows(); ++i) {
    for (std::size_t j = 0; j < train.cols(); ++j) {
      s.min_[j] = std::min(s.min_[j], train(i, j));
      s.max_[j] = std::max(s.max_[j], train(i, j));
    }
  }
  return s;
}

void FeatureScaler::transform_row(const double* in, double* out) const {
  for (std::size_t j = 0; j < min_.size(); ++j) {
    const double span = max_[j] - min_[j];
    out[j] = span > 0.0 ? (in[j] - min_[j]) / span : 0.0;
  }
}

Table FeatureScaler::transform(const Table& x) const {
  if (x.cols() != min_.size()) throw DataError("feature count does not match the scaler");
  Table out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) transform_row(x.row(i), out.row(i));
  return out;
}

nlohmann::json FeatureScaler::to_json() const { return {{"min", min_}, {"max", max_}}; }

FeatureScaler FeatureScaler::from_json(const nlohmann::json& j) {
  FeatureScaler s;
  s.min_ = j.at("min").get<std::vector<double>>();
  s.max_ = j.at("max").get<std::vector<double>>();
  if (s.min_.size() != s.max_.size()) throw ModelError("scaler min/max lengths differ");
  return s;
}

double r2_score(std::span<const double> y, std::span<const double> y_hat) {
  if (y.size() != y_hat.size()) throw DataError("r2_score: length mismatch");
  if (y.size() < 2) throw DataError("r2_score needs at least two values");
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  double ss_res = 0.0;
  double ss_tot = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    ss_res += (y[i] - y_hat[i]) * (y[i] - y_hat[i]);
    ss_tot += (y[i] - mean) * (y[i] - mean);
  }
  if (ss_tot == 0.0) throw DataError("r2_score undefined: target has zero variance");
  return 1.0 - ss_res / ss_tot;
}

ClassificationMetrics classification_metrics(const ConfusionMatrix& cm) {
  if (cm.tp < 0 || cm.fp < 0 || cm.fn < 0 || cm.tn < 0) throw DataError("confusion counts must be >= 0");
  if (cm.total() == 0) throw DataError("confusion matrix is empty");
  ClassificationMetrics m;
  const auto tp = static_cast<double>(cm.tp);
  m.precision = cm.tp + cm.fp > 0 ? tp / static_cast<double>(cm.tp + cm.fp) : 0.0;
  m.recall = cm.tp + cm.fn > 0 ? tp / static_cast<double>(cm.tp + cm.fn) : 0.0;
  m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  m.accuracy = static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());
  return m;
}

ConfusionMatrix confusion_matrix(std::span<const double> truth, std::span<const double> predicted) {
  if (truth.size() != predicted.size()) throw DataError("confusion_matrix: length mismatch");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool t = truth[i] == kBumped;
    const bool p = predicted[i] == kBumped;
    if (t && p) ++cm.tp;
    else if (!t && p) ++cm.fp;
    else if (t && !p) ++cm.fn;
    else ++cm.tn;
  }
  return cm;
}

double class_index(ModeLabel m) {
  switch (m) {
    case ModeLabel::Zigzag: return kZigzag;
    case ModeLabel::Bumped: return kBumped;
    case ModeLabel::Inconclusive: break;
  }
  throw DataError("inconclusive cases have no class index");
}

ModeLabel class_label(double index) { return index == kBumped ? ModeLabel::Bumped : ModeLabel::Zigzag; }

std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::KnnReg: return "knn_reg";
    case ModelKind::RfReg: return "rf_reg";
    case ModelKind::GbReg: return "gb_reg";
    case ModelKind::KnnClf: return "knn_clf";
    case ModelKind::MlpClf: return "mlp_clf";
  }
  return "knn_reg";
}

ModelKind model_kind_from_string(const std::string& s) {
  for (ModelKind k : all_model_kinds()) {
    if (to_string(k) == s) return k;
  }
  throw ConfigError("unknown model kind '" + s + "' (expected knn_reg|rf_reg|gb_reg|knn_clf|mlp_clf)");
}

bool is_regressor(ModelKind k) { return k == ModelKind::KnnReg || k == ModelKind::RfReg || k == ModelKind::GbReg; }

std::vector<ModelKind> all_model_kinds() {
  return {ModelKind::KnnReg, ModelKind::RfReg, ModelKind::GbReg, ModelKind::KnnClf, ModelKind::MlpClf};
}

std::string to_string(Weighting w) { return w == Weighting::Uniform ? "uniform" : "inverse-distance"; }

Weighting weighting_from_string(const std::string& s) {
  if (s == "uniform") return Weighting::Uniform;
  if (s == "inverse-distance" || s == "distance") return Weighting::InverseDistance;
  throw ConfigError("unknown weighting '" + s + "' (expected uniform|inverse-distance)");
}

nlohmann::json hyperparameters_to_json(ModelKind kind, const Hyperparameters& h) {
  switch (kind) {
    case ModelKind::KnnReg:
    case ModelKind::KnnClf:
      return {{"k", h.k}, {"weighting", to_string(h.weighting)}};
    case ModelKind::RfReg:
      return {{"n_trees", h.n_trees},
              {"max_depth", h.max_depth},
              {"min_leaf", h.min_leaf},
              {"feature_subsample", h.feature_subsample},
              {"max_train_records", h.max_train_records}};
    case ModelKind::GbReg:
      return {{"n_stages", h.n_stages},
              {"learning_rate", h.learning_rate},
              {"max_depth", h.max_depth},
              {"min_leaf", h.min_leaf},
              {"max_train_records", h.max_train_records}};
    case ModelKind::MlpClf:
      return {{"layers", h.layers},
              {"activation", h.activation},
              {"learning_rate", h.mlp_learning_rate},
              {"max_epochs", h.max_epochs},
              {"batch_size", h.batch_size},
              {"patience", h.patience},
              {"validation_fraction", h.validation_fraction}};
  }
  return {};
}

Hyperparameters hyperparameters_from_json(ModelKind kind, const nlohmann::json& j) {
  Hyperparameters h;
  const std::string what = to_string(kind) + " hyperparameters";
  switch (kind) {
    case ModelKind::KnnReg:
    case ModelKind::KnnClf: {
      dld::detail::check_keys(j, {"k", "weighting"}, what);
      dld::detail::read_opt(j, "k", h.k, what);
      std::string w = to_string(h.weighting);
      dld::detail::read_opt(j, "weighting", w, what);
      h.weighting = weighting_from_string(w);
      if (h.k < 1) throw ConfigError("k must be >= 1");
      break;
    }
    case ModelKind::RfReg:
      dld::detail::check_keys(j, {"n_trees", "max_depth", "min_leaf", "feature_subsample", "max_train_records"}, what);
      dld::detail::read_opt(j, "n_trees", h.n_trees, what);
      dld::detail::read_opt(j, "max_depth", h.max_depth, what);
      dld::detail::read_opt(j, "min_leaf", h.min_leaf, what);
      dld::detail::read_opt(j, "feature_subsample", h.feature_subsample, what);
      dld::detail::read_opt(j, "max_train_records", h.max_train_records, what);
      if (h.n_trees < 1) throw ConfigError("n_trees must be >= 1");
      if (!(h.feature_subsample > 0.0 && h.feature_subsample <= 1.0)) {
        throw ConfigError("feature_subsample must be in (0, 1]");
      }
      break;
    case ModelKind::GbReg:
      dld::detail::check_keys(j, {"n_stages", "learning_rate", "max_depth", "min_leaf", "max_train_records"}, what);
      dld::detail::read_opt(j, "n_stages", h.n_stages, what);
      dld::detail::read_opt(j, "learning_rate", h.learning_rate, what);
      dld::detail::read_opt(j, "max_depth", h.max_depth, what);
      dld::detail::read_opt(j, "min_leaf", h.min_leaf, what);
      dld::detail::read_opt(j, "max_train_records", h.max_train_records, what);
      if (h.n_stages < 0) throw ConfigError("n_stages must be >= 0");
      if (!(h.learning_rate >= 0.0 && h.learning_rate <= 1.0)) throw ConfigError("learning_rate must be in [0, 1]");
      break;
    case ModelKind::MlpClf:
      dld::detail::check_keys(j, {"layers", "activation", "learning_rate", "max_epochs", "batch_size", "patience",
                             "validation_fraction"},
                         what);
      dld::detail::read_opt(j, "layers", h.layers, what);
      dld::detail::read_opt(j, "activation", h.activation, what);
      dld::detail::read_opt(j, "learning_rate", h.mlp_learning_rate, what);
      dld::detail::read_opt(j, "max_epochs", h.max_epochs, what);
      dld::detail::read_opt(j, "batch_size", h.batch_size, what);
      dld::detail::read_opt(j, "patience", h.patience, what);
      dld::detail::read_opt(j, "validation_fraction", h.validation_fraction, what);
      if (h.activation != "relu") throw ConfigError("only the relu activation is supported");
      if (h.layers.empty() || std::any_of(h.layers.begin(), h.layers.end(), [](int n) { return n < 1; })) {
        throw ConfigError("layers must be a non-empty list of positive widths");
      }
      if (!(h.mlp_learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
      if (h.batch_size < 1 || h.max_epochs < 1 || h.patience < 1) {
        throw ConfigError("batch_size, max_epochs and patience must be >= 1");
      }
      if (!(h.validation_fraction >= 0.0 && h.validation_fraction < 1.0)) {
        throw ConfigError("validation_fraction must be in [0, 1)");
      }
      break;
  }
  if ((kind == ModelKind::RfReg || kind == ModelKind::GbReg) && (h.min_leaf < 1 || h.max_train_records < 2)) {
    throw ConfigError("min_leaf must be >= 1 and max_train_records >= 2");
  }
  return h;
}

double Model::predict(std::span<const double> features) const {
  if (features.size() != n_features()) {
    throw DataError("model expects " + std::to_string(n_features()) + " features, got " +
                    std::to_string(features.size()));
  }
  std::vector<double> scaled(features.size());
  scaler_.transform_row(features.data(), scaled.data());
  return predict_scaled(scaled.data());
}

std::vector<double> Model::predict(const Table& x) const {
  if (x.cols() != n_features()) throw DataError("feature count does not match the model");
  std::vector<double> out(x.rows());
  std::vector<double> scaled(x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    scaler_.transform_row(x.row(i), scaled.data());
    out[i] = predict_scaled(scaled.data());
  }
  return out;
}

void Model::fit(const Table& x, std::span<const double> y) {
  if (x.rows() == 0) throw DataError("empty training set");
  if (x.rows() != y.size()) throw DataError("feature and target counts differ");
  if (!is_regressor(kind_)) {
    bool zig = false;
    bool bump = false;
    for (double v : y) {
      if (v == kZigzag) zig = true;
      else if (v == kBumped) bump = true;
      else throw DataError("class targets must be 0 (zigzag) or 1 (bumped)");
    }
    if (!zig || !bump) throw DataError("classifier training data needs both classes");
  }
  scaler_ = FeatureScaler::fit(x);
  converged_ = true;
  final_loss_ = 0.0;
  warning_.clear();
  fit_scaled(scaler_.transform(x), y);
}

nlohmann::json Model::to_json() const {
  return {{"format", "dld-model"},
          {"version", 1},
          {"kind", to_string(kind_)},
          {"hyperparameters", hyperparameters_to_json(kind_, params_)},
          {"seed", seed_},
          {"scaler", scaler_.to_json()},
          {"converged", converged_},
          {"final_loss", final_loss_},
          {"warning", warning_},
          {"state", state_json()}};
}

std::unique_ptr<Model> Model::from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "dld-model") throw ModelError("not a model file");
    if (j.at("version").get<int>() != 1) throw ModelError("unsupported model file version");
    const ModelKind kind = model_kind_from_string(j.at("kind").get<std::string>());
    auto m = make_model(kind, hyperparameters_from_json(kind, j.at("hyperparameters")),
                        j.at("seed").get<std::uint64_t>());
    m->scaler_ = FeatureScaler::from_json(j.at("scaler"));
    m->converged_ = j.at("converged").get<bool>();
    m->final_loss_ = j.at("final_loss").get<double>();
    m->warning_ = j.at("warning").get<std::string>();
    m->load_state(j.at("state"));
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ModelError(std::string("malformed model: ") + e.what());
  } catch (const ConfigError& e) {
    throw ModelError(std::string("malformed model: ") + e.what());
  }
}

std::unique_ptr<Model> make_model(ModelKind kind, const Hyperparameters& params, std::uint64_t seed) {
  switch (kind) {
    case ModelKind::KnnReg:
    case ModelKind::KnnClf:
      return std::make_unique<detail::KnnModel>(kind, params, seed);
    case ModelKind::RfReg:
    case ModelKind::GbReg:
      return std::make_unique<detail::TreeEnsemble>(kind, params, seed);
    case ModelKind::MlpClf:
      return std::make_unique<detail::MlpModel>(kind, params, seed);
  }
  throw ConfigError("unknown model kind");
}

std::unique_ptr<Model> train(ModelKind kind, const Hyperparameters& params, const Table& x,
                             std::span<const double> y, std::uint64_t seed) {
  auto m = make_model(kind, params, seed);
  m->fit(x, y);
  return m;
}

void save_model(const Model& model, const std::filesystem::path& path) {
  write_file(path, model.to_json().dump() + "\n");
}

std::unique_ptr<Model> load_model(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const DataError& e) {
    throw ModelError(e.what());
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ModelError(path.string() + ": " + e.what());
  }
  return Model::from_json(j);
}

RegressionData regression_data(const std::vector<RegressionRecord>& records) {
  RegressionData d;
  d.x.reserve(records.size());
  d.y.reserve(records.size());
  d.case_ids.reserve(records.size());
  std::string last_id;
  int last_n = -1;
  double last_size = -1.0;
  for (const auto& r : records) {
    const double row[3] = {r.x_um, r.size_um, static_cast<double>(r.period)};
    d.x.push_row(row);
    d.y.push_back(r.y_um);
    if (r.period != last_n || r.size_um != last_size) {
      last_id = case_id(r.period, r.size_um);
      last_n = r.period;
      last_size = r.size_um;
    }
    d.case_ids.push_back(last_id);
  }
  return d;
}

ClassificationData classification_data(const std::vector<ClassificationRecord>& records) {
  ClassificationData d;
  for (const auto& r : records) {
    const double row[2] = {r.size_um, static_cast<double>(r.period)};
    d.x.push_row(row);
    d.y.push_back(class_index(r.mode));
    d.case_ids.push_back(case_id(r.period, r.size_um));
  }
  return d;
}

}  // namespace dld::ml
