#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>

#include <nlohmann/json.hpp>

#include "dld/ml.hpp"
#include "dld/parallel.hpp"
#include "dld/random.hpp"

namespace dld::ml {

std::vector<int> stratified_folds(std::span<const int> group_labels, int folds, std::uint64_t seed) {
  if (folds < 2) throw ConfigError("cross-validation needs at least 2 folds");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < group_labels.size(); ++i) by_class[group_labels[i]].push_back(i);
  for (const auto& [label, members] : by_class) {
    if (members.size() < static_cast<std::size_t>(folds)) {
      throw DataError("class " + std::to_string(label) + " has " + std::to_string(members.size()) +
                      " groups, fewer than the " + std::to_string(folds) + " folds");
    }
  }
  Rng rng(seed);
  std::vector<int> fold(group_labels.size(), 0);
  std::size_t deal = 0;
  for (auto& [label, members] : by_class) {
    rng.shuffle(members);
    for (std::size_t m : members) fold[m] = static_cast<int>(deal++ % static_cast<std::size_t>(folds));
  }
  return fold;
}

Grouping group_by_case(std::span<const std::string> case_ids,
                       const std::map<std::string, ModeLabel>& mode_of_case) {
  Grouping g;
  std::map<std::string, int> index;
  g.group_of.reserve(case_ids.size());
  for (const auto& id : case_ids) {
    auto it = index.find(id);
    if (it == index.end()) {
      const auto m = mode_of_case.find(id);
      if (m == mode_of_case.end()) throw DataError("no mode label for case " + id);
      it = index.emplace(id, static_cast<int>(g.group_labels.size())).first;
      g.group_labels.push_back(static_cast<int>(class_index(m->second)));
    }
    g.group_of.push_back(it->second);
  }
  return g;
}

namespace {

double fold_score(ModelKind kind, const Hyperparameters& params, const Table& x, std::span<const double> y,
                  const Grouping& groups, std::span<const int> fold_of_group, int fold, std::uint64_t seed) {
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> val_rows;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const int f = fold_of_group[static_cast<std::size_t>(groups.group_of[i])];
    (f == fold ? val_rows : train_rows).push_back(i);
  }
  const Table xt = x.select(train_rows);
  std::vector<double> yt(train_rows.size());
  for (std::size_t i = 0; i < train_rows.size(); ++i) yt[i] = y[train_rows[i]];
  const auto model = train(kind, params, xt, yt, seed);

  const auto pred = model->predict(x.select(val_rows));
  std::vector<double> yv(val_rows.size());
  for (std::size_t i = 0; i < val_rows.size(); ++i) yv[i] = y[val_rows[i]];
  if (is_regressor(kind)) return r2_score(yv, pred);
  return classification_metrics(confusion_matrix(yv, pred)).accuracy;
}

void check_groups(const Table& x, std::span<const double> y, const Grouping& groups) {
  if (x.rows() != y.size() || groups.group_of.size() != y.size()) {
    throw DataError("features, targets and groups differ in length");
  }
}

}  // namespace

std::vector<double> stratified_kfold_cv(ModelKind kind, const Hyperparameters& params, const Table& x,
                                        std::span<const double> y, const Grouping& groups, int folds,
                                        std::uint64_t seed, int jobs) {
  check_groups(x, y, groups);
  const auto fold_of_group = stratified_folds(groups.group_labels, folds, seed);
  std::vector<double> scores(static_cast<std::size_t>(folds));
  parallel_for(scores.size(), jobs, [&](std::size_t f) {
    scores[f] = fold_score(kind, params, x, y, groups, fold_of_group, static_cast<int>(f), seed);
  });
  return scores;
}

std::vector<Hyperparameters> default_grid(ModelKind kind) {
  std::vector<Hyperparameters> grid;
  Hyperparameters h;
  switch (kind) {
    case ModelKind::KnnReg:
    case ModelKind::KnnClf:
      for (int k : {1, 3, 5, 7, 11, 15}) {
        for (Weighting w : {Weighting::Uniform, Weighting::InverseDistance}) {
          h.k = k;
          h.weighting = w;
          grid.push_back(h);
        }
      }
      break;
    case ModelKind::RfReg:
      for (int n : {50, 100, 200}) {
        for (int d : {8, 16, -1}) {
          h.n_trees = n;
          h.max_depth = d;
          grid.push_back(h);
        }
      }
      break;
    case ModelKind::GbReg:
      h.max_depth = 3;
      for (int n : {100, 300}) {
        for (double lr : {0.05, 0.1}) {
          h.n_stages = n;
          h.learning_rate = lr;
          grid.push_back(h);
        }
      }
      break;
    case ModelKind::MlpClf:
      for (int width : {16, 32}) {
        for (double lr : {1e-2, 1e-3}) {
          h.layers = {width, width};
          h.mlp_learning_rate = lr;
          grid.push_back(h);
        }
      }
      break;
  }
  return grid;
}

std::vector<double> complexity(ModelKind kind, const Hyperparameters& h) {
  constexpr double kUnlimited = std::numeric_limits<double>::infinity();
  const double depth = h.max_depth < 0 ? kUnlimited : h.max_depth;
  switch (kind) {
    case ModelKind::KnnReg:
    case ModelKind::KnnClf:
      return {static_cast<double>(h.k), h.weighting == Weighting::Uniform ? 0.0 : 1.0};
    case ModelKind::RfReg:
      return {static_cast<double>(h.n_trees), depth};
    case ModelKind::GbReg:
      return {static_cast<double>(h.n_stages), depth};
    case ModelKind::MlpClf:
      return {static_cast<double>(std::accumulate(h.layers.begin(), h.layers.end(), 0)),
              static_cast<double>(h.layers.size())};
  }
  return {};
}

GridSearchResult grid_search(ModelKind kind, std::vector<Hyperparameters> grid, const Table& x,
                             std::span<const double> y, const Grouping& groups, int folds, std::uint64_t seed,
                             int jobs) {
  if (grid.empty()) throw ConfigError("empty hyperparameter grid");
  check_groups(x, y, groups);
  const auto fold_of_group = stratified_folds(groups.group_labels, folds, seed);
  const auto nf = static_cast<std::size_t>(folds);

  GridSearchResult res;
  res.kind = kind;
  res.folds = folds;
  res.seed = seed;
  res.table.resize(grid.size());
  for (std::size_t g = 0; g < grid.size(); ++g) {
    res.table[g].params = grid[g];
    res.table[g].fold_scores.assign(nf, 0.0);
  }
  parallel_for(grid.size() * nf, jobs, [&](std::size_t task) {
    const std::size_t g = task / nf;
    const std::size_t f = task % nf;
    res.table[g].fold_scores[f] =
        fold_score(kind, grid[g], x, y, groups, fold_of_group, static_cast<int>(f), seed);
  });
  for (auto& row : res.table) {
    row.mean = std::accumulate(row.fold_scores.begin(), row.fold_scores.end(), 0.0) / static_cast<double>(nf);
  }

  // Visit from simplest to most complex; only a strictly better mean moves the pick.
  std::vector<std::size_t> order(grid.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return complexity(kind, grid[a]) < complexity(kind, grid[b]); });
  res.best = order.front();
  for (std::size_t g : order) {
    if (res.table[g].mean > res.table[res.best].mean) res.best = g;
  }
  return res;
}

nlohmann::json grid_search_to_json(const GridSearchResult& g) {
  nlohmann::json table = nlohmann::json::array();
  for (const auto& row : g.table) {
    table.push_back({{"hyperparameters", hyperparameters_to_json(g.kind, row.params)},
                     {"fold_scores", row.fold_scores},
                     {"mean", row.mean}});
  }
  return {{"kind", to_string(g.kind)},
          {"folds", g.folds},
          {"seed", g.seed},
          {"score", is_regressor(g.kind) ? "r2" : "accuracy"},
          {"best", g.best},
          {"best_hyperparameters", hyperparameters_to_json(g.kind, g.best_params())},
          {"table", std::move(table)}};
}

EvalReport evaluate(const Model& model, const Table& x_train, std::span<const double> y_train,
                    const Table& x_test, std::span<const double> y_test) {
  EvalReport r;
  r.kind = model.kind();
  r.params = model.hyperparameters();
  r.seed = model.seed();
  r.n_train = x_train.rows();
  r.n_test = x_test.rows();
  r.converged = model.converged();
  r.warning = model.warning();
  const auto p_train = model.predict(x_train);
  const auto p_test = model.predict(x_test);
  if (is_regressor(r.kind)) {
    r.r2_train = r2_score(y_train, p_train);
    r.r2_test = r2_score(y_test, p_test);
  } else {
    r.confusion_train = confusion_matrix(y_train, p_train);
    r.confusion_test = confusion_matrix(y_test, p_test);
    r.metrics_train = classification_metrics(r.confusion_train);
    r.metrics_test = classification_metrics(r.confusion_test);
  }
  return r;
}

namespace {

nlohmann::json partition_json(const ConfusionMatrix& cm, const ClassificationMetrics& m) {
  return {{"confusion", {{"tp", cm.tp}, {"fp", cm.fp}, {"fn", cm.fn}, {"tn", cm.tn}}},
          {"precision", m.precision},
          {"recall", m.recall},
          {"f1", m.f1},
          {"accuracy", m.accuracy}};
}

}  // namespace

nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json j = {{"format", "dld-eval"},
                      {"version", 1},
                      {"kind", to_string(r.kind)},
                      {"hyperparameters", hyperparameters_to_json(r.kind, r.params)},
                      {"seed", r.seed},
                      {"n_train", r.n_train},
                      {"n_test", r.n_test},
                      {"converged", r.converged},
                      {"warning", r.warning}};
  if (is_regressor(r.kind)) {
    j["train"] = {{"r2", r.r2_train}};
    j["test"] = {{"r2", r.r2_test}};
  } else {
    j["positive_class"] = "bumped";
    j["train"] = partition_json(r.confusion_train, r.metrics_train);
    j["test"] = partition_json(r.confusion_test, r.metrics_test);
  }
  if (r.search) j["search"] = grid_search_to_json(*r.search);
  return j;
}

void write_confusion_csv(const EvalReport& r, std::ostream& out) {
  out << "partition,actual,predicted_zigzag,predicted_bumped\n";
  auto rows = [&](const char* part, const ConfusionMatrix& cm) {
    out << part << ",zigzag," << cm.tn << ',' << cm.fp << '\n';
    out << part << ",bumped," << cm.fn << ',' << cm.tp << '\n';
  };
  rows("train", r.confusion_train);
  rows("test", r.confusion_test);
}

}  // namespace dld::ml
