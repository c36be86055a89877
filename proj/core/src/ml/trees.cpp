#include <algorithm>
#include <cmath>
#include <numeric>

#include "models.hpp"

namespace dld::ml::detail {

namespace {

constexpr int kMaxBins = 64;

nlohmann::json node_json(const Tree& t, int i) {
  const auto n = static_cast<std::size_t>(i);
  if (t.feature[n] < 0) return {{"value", t.value[n]}};
  return {{"feature", t.feature[n]},
          {"threshold", t.threshold[n]},
          {"left", node_json(t, t.left[n])},
          {"right", node_json(t, t.right[n])}};
}

int read_node(Tree& t, const nlohmann::json& j, int depth) {
  if (depth > 4096) throw ModelError("tree nesting too deep");
  const auto id = static_cast<int>(t.size());
  t.feature.push_back(-1);
  t.threshold.push_back(0.0);
  t.left.push_back(-1);
  t.right.push_back(-1);
  t.value.push_back(0.0);
  const auto n = static_cast<std::size_t>(id);
  if (j.contains("value")) {
    t.value[n] = j.at("value").get<double>();
    return id;
  }
  const int f = j.at("feature").get<int>();
  if (f < 0) throw ModelError("negative split feature");
  t.feature[n] = f;
  t.threshold[n] = j.at("threshold").get<double>();
  const int l = read_node(t, j.at("left"), depth + 1);
  const int r = read_node(t, j.at("right"), depth + 1);
  t.left[n] = l;
  t.right[n] = r;
  return id;
}

/// Seeded subsample without replacement, in original order.
std::vector<std::uint32_t> capped_rows(std::size_t n, int cap, std::uint64_t seed) {
  std::vector<std::uint32_t> rows(n);
  std::iota(rows.begin(), rows.end(), 0u);
  if (n <= static_cast<std::size_t>(cap)) return rows;
  Rng rng(seed ^ 0x5eed5eed5eedULL);
  rng.shuffle(rows);
  rows.resize(static_cast<std::size_t>(cap));
  std::sort(rows.begin(), rows.end());
  return rows;
}

class Grower {
 public:
  Grower(const BinnedTable& bins, std::span<const double> target, const TreeParams& p, Rng& rng)
      : bins_(bins), target_(target), params_(p), rng_(rng) {}

  Tree grow(std::vector<std::uint32_t> rows) {
    rows_ = std::move(rows);
    node(0, static_cast<std::uint32_t>(rows_.size()), 0);
    return std::move(tree_);
  }

 private:
  int add_leaf(double value) {
    tree_.feature.push_back(-1);
    tree_.threshold.push_back(0.0);
    tree_.left.push_back(-1);
    tree_.right.push_back(-1);
    tree_.value.push_back(value);
    return static_cast<int>(tree_.size()) - 1;
  }

  int node(std::uint32_t begin, std::uint32_t end, int depth) {
    const double count = end - begin;
    double sum = 0.0;
    for (std::uint32_t i = begin; i < end; ++i) sum += target_[rows_[i]];
    const int id = add_leaf(sum / count);
    const auto min_leaf = static_cast<std::uint32_t>(std::max(1, params_.min_leaf));
    if ((params_.max_depth >= 0 && depth >= params_.max_depth) || end - begin < 2 * min_leaf) return id;

    std::vector<std::size_t> features(bins_.cols());
    std::iota(features.begin(), features.end(), std::size_t{0});
    std::size_t use = features.size();
    if (params_.features_per_split > 0 && params_.features_per_split < use) {
      use = params_.features_per_split;
      for (std::size_t i = 0; i < use; ++i) std::swap(features[i], features[i + rng_.below(features.size() - i)]);
      std::sort(features.begin(), features.begin() + static_cast<std::ptrdiff_t>(use));
    }

    const double parent = sum * sum / count;
    double best_gain = 1e-12 * std::max(1.0, std::abs(parent));
    int best_feature = -1;
    std::size_t best_bin = 0;
    double cnt[kMaxBins];
    double sm[kMaxBins];
    for (std::size_t fi = 0; fi < use; ++fi) {
      const std::size_t f = features[fi];
      const std::size_t nb = bins_.n_bins(f);
      if (nb < 2) continue;
      std::fill(cnt, cnt + nb, 0.0);
      std::fill(sm, sm + nb, 0.0);
      for (std::uint32_t i = begin; i < end; ++i) {
        const std::uint32_t r = rows_[i];
        const auto b = bins_.bin(r, f);
        cnt[b] += 1.0;
        sm[b] += target_[r];
      }
      double cl = 0.0;
      double sl = 0.0;
      for (std::size_t b = 0; b + 1 < nb; ++b) {
        cl += cnt[b];
        sl += sm[b];
        const double cr = count - cl;
        if (cl < min_leaf) continue;
        if (cr < min_leaf) break;
        const double sr = sum - sl;
        const double gain = sl * sl / cl + sr * sr / cr - parent;
        if (gain > best_gain) {
          best_gain = gain;
          best_feature = static_cast<int>(f);
          best_bin = b;
        }
      }
    }
    if (best_feature < 0) return id;

    const auto f = static_cast<std::size_t>(best_feature);
    const auto mid_it = std::stable_partition(rows_.begin() + begin, rows_.begin() + end,
                                              [&](std::uint32_t r) { return bins_.bin(r, f) <= best_bin; });
    const auto mid = static_cast<std::uint32_t>(mid_it - rows_.begin());
    const int l = node(begin, mid, depth + 1);
    const int r = node(mid, end, depth + 1);
    const auto n = static_cast<std::size_t>(id);
    tree_.feature[n] = best_feature;
    tree_.threshold[n] = bins_.edge(f, best_bin);
    tree_.left[n] = l;
    tree_.right[n] = r;
    return id;
  }

  const BinnedTable& bins_;
  std::span<const double> target_;
  TreeParams params_;
  Rng& rng_;
  std::vector<std::uint32_t> rows_;
  Tree tree_;
};

/// Replaces every leaf value by the mean target of the given rows reaching it.
void refit_leaves(Tree& t, const Table& x, std::span<const double> y, std::span<const std::uint32_t> rows) {
  std::vector<double> sum(t.size(), 0.0);
  std::vector<double> cnt(t.size(), 0.0);
  for (std::uint32_t r : rows) {
    const auto leaf = static_cast<std::size_t>(t.leaf_of(x.row(r)));
    sum[leaf] += y[r];
    cnt[leaf] += 1.0;
  }
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t.feature[i] < 0 && cnt[i] > 0.0) t.value[i] = sum[i] / cnt[i];
  }
}

}  // namespace

int Tree::leaf_of(const double* row) const {
  int i = 0;
  while (feature[static_cast<std::size_t>(i)] >= 0) {
    const auto n = static_cast<std::size_t>(i);
    i = row[feature[n]] <= threshold[n] ? left[n] : right[n];
  }
  return i;
}

nlohmann::json Tree::to_json() const { return node_json(*this, 0); }

Tree Tree::from_json(const nlohmann::json& j) {
  Tree t;
  read_node(t, j, 0);
  return t;
}

BinnedTable::BinnedTable(const Table& x, int max_bins) : cols_(x.cols()), edges_(x.cols()) {
  max_bins = std::clamp(max_bins, 2, kMaxBins);
  const std::size_t n = x.rows();
  std::vector<double> col(n);
  for (std::size_t c = 0; c < cols_; ++c) {
    for (std::size_t i = 0; i < n; ++i) col[i] = x(i, c);
    std::sort(col.begin(), col.end());
    std::vector<double> uniq(col.begin(), std::unique(col.begin(), col.end()));
    auto& e = edges_[c];
    if (uniq.size() <= static_cast<std::size_t>(max_bins)) {
      for (std::size_t i = 0; i + 1 < uniq.size(); ++i) e.push_back(0.5 * (uniq[i] + uniq[i + 1]));
    } else {
      // Quantile cuts, each placed midway between two distinct values.
      for (int q = 1; q < max_bins; ++q) {
        const std::size_t at = n * static_cast<std::size_t>(q) / static_cast<std::size_t>(max_bins);
        const double v = col[at];
        const auto next = std::upper_bound(uniq.begin(), uniq.end(), v);
        if (next == uniq.end()) break;
        const double cut = 0.5 * (v + *next);
        if (e.empty() || cut > e.back()) e.push_back(cut);
      }
    }
  }
  codes_.resize(n * cols_);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < cols_; ++c) {
      const auto& e = edges_[c];
      codes_[i * cols_ + c] =
          static_cast<std::uint8_t>(std::lower_bound(e.begin(), e.end(), x(i, c)) - e.begin());
    }
  }
}

Tree grow_tree(const BinnedTable& bins, std::span<const double> target, std::vector<std::uint32_t> rows,
               const TreeParams& params, Rng& rng) {
  if (rows.empty()) throw DataError("cannot grow a tree on zero rows");
  return Grower(bins, target, params, rng).grow(std::move(rows));
}

void TreeEnsemble::fit_scaled(const Table& x, std::span<const double> y) {
  if (x.rows() < 2) throw DataError("tree ensembles need at least two training records");
  const auto rows = capped_rows(x.rows(), hyperparameters().max_train_records, seed());
  trees_.clear();
  stage_losses_.clear();
  if (kind() == ModelKind::RfReg) fit_forest(x, y, rows);
  else fit_boosting(x, y, rows);
}

void TreeEnsemble::fit_forest(const Table& x, std::span<const double> y, std::span<const std::uint32_t> rows) {
  const auto& h = hyperparameters();
  const BinnedTable bins(x, kMaxBins);
  TreeParams tp;
  tp.max_depth = h.max_depth;
  tp.min_leaf = h.min_leaf;
  tp.features_per_split = static_cast<std::size_t>(
      std::max(1L, std::lround(h.feature_subsample * static_cast<double>(x.cols()))));
  base_ = 0.0;
  shrinkage_ = 1.0 / h.n_trees;
  Rng rng(seed());
  for (int t = 0; t < h.n_trees; ++t) {
    std::vector<std::uint32_t> boot(rows.size());
    for (auto& r : boot) r = rows[rng.below(rows.size())];
    std::sort(boot.begin(), boot.end());
    Tree tree = grow_tree(bins, y, std::move(boot), tp, rng);
    // The bootstrap picks the structure; leaf values come from every record
    // in the fitting sample.
    refit_leaves(tree, x, y, rows);
    trees_.push_back(std::move(tree));
  }
}

void TreeEnsemble::fit_boosting(const Table& x, std::span<const double> y, std::span<const std::uint32_t> rows) {
  const auto& h = hyperparameters();
  const BinnedTable bins(x, kMaxBins);
  TreeParams tp;
  tp.max_depth = h.max_depth;
  tp.min_leaf = h.min_leaf;
  double mean = 0.0;
  for (std::uint32_t r : rows) mean += y[r];
  mean /= static_cast<double>(rows.size());
  base_ = mean;
  shrinkage_ = h.learning_rate;

  std::vector<double> fitted(x.rows(), mean);
  std::vector<double> residual(x.rows(), 0.0);
  auto loss = [&] {
    double s = 0.0;
    for (std::uint32_t r : rows) s += (y[r] - fitted[r]) * (y[r] - fitted[r]);
    return s / static_cast<double>(rows.size());
  };
  stage_losses_.push_back(loss());
  Rng rng(seed());
  const std::vector<std::uint32_t> all(rows.begin(), rows.end());
  for (int s = 0; s < h.n_stages; ++s) {
    for (std::uint32_t r : rows) residual[r] = y[r] - fitted[r];
    Tree tree = grow_tree(bins, residual, all, tp, rng);
    for (std::uint32_t r : rows) fitted[r] += shrinkage_ * tree.predict(x.row(r));
    stage_losses_.push_back(loss());
    trees_.push_back(std::move(tree));
  }
  final_loss_ = stage_losses_.back();
}

double TreeEnsemble::predict_scaled(const double* row) const {
  double s = 0.0;
  for (const auto& t : trees_) s += t.predict(row);
  return base_ + shrinkage_ * s;
}

nlohmann::json TreeEnsemble::state_json() const {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : trees_) trees.push_back(t.to_json());
  nlohmann::json j = {{"base", base_}, {"shrinkage", shrinkage_}, {"trees", std::move(trees)}};
  if (kind() == ModelKind::GbReg) j["stage_losses"] = stage_losses_;
  return j;
}

void TreeEnsemble::load_state(const nlohmann::json& j) {
  base_ = j.at("base").get<double>();
  shrinkage_ = j.at("shrinkage").get<double>();
  trees_.clear();
  for (const auto& t : j.at("trees")) trees_.push_back(Tree::from_json(t));
  stage_losses_ = j.value("stage_losses", std::vector<double>{});
  for (const auto& t : trees_) {
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (t.feature[i] >= static_cast<int>(n_features())) throw ModelError("tree splits on a missing feature");
    }
  }
}

}  // namespace dld::ml::detail
