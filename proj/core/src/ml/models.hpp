#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "dld/ml.hpp"
#include "dld/random.hpp"

namespace dld::ml::detail {

/// Exact k-nearest-neighbour search in a static point set. Ties in distance
/// are broken by point index, so results do not depend on tree shape.
class KdTree {
 public:
  KdTree() = default;
  KdTree(std::vector<double> points, std::size_t dims);

  struct Hit {
    double dist2;
    std::uint32_t index;
    bool operator<(const Hit& o) const { return dist2 < o.dist2 || (dist2 == o.dist2 && index < o.index); }
  };

  /// Up to k hits, nearest first.
  [[nodiscard]] std::vector<Hit> nearest(const double* query, std::size_t k) const;
  [[nodiscard]] std::size_t size() const { return dims_ == 0 ? 0 : points_.size() / dims_; }
  [[nodiscard]] std::size_t dims() const { return dims_; }
  [[nodiscard]] const std::vector<double>& points() const { return points_; }

 private:
  struct Node {
    std::uint32_t begin;
    std::uint32_t end;
    std::int32_t left = -1;
    std::int32_t right = -1;
  };
  std::int32_t build(std::uint32_t begin, std::uint32_t end, int depth);
  void search(std::int32_t node, const double* q, std::size_t k, std::vector<Hit>& heap) const;
  [[nodiscard]] double box_dist2(std::int32_t node, const double* q) const;

  std::vector<double> points_;
  std::size_t dims_ = 0;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
  std::vector<double> bounds_;  // per node: lo[dims], hi[dims]
};

class KnnModel final : public Model {
 public:
  KnnModel(ModelKind kind, const Hyperparameters& p, std::uint64_t seed) : Model(kind, p, seed) {}

 protected:
  void fit_scaled(const Table& x, std::span<const double> y) override;
  [[nodiscard]] double predict_scaled(const double* row) const override;
  [[nodiscard]] nlohmann::json state_json() const override;
  void load_state(const nlohmann::json& j) override;

 private:
  KdTree tree_;
  std::vector<double> targets_;
};

/// Flat CART regression tree: `feature < 0` marks a leaf.
struct Tree {
  std::vector<int> feature;
  std::vector<double> threshold;  // go left when x <= threshold
  std::vector<int> left;
  std::vector<int> right;
  std::vector<double> value;

  [[nodiscard]] int leaf_of(const double* row) const;
  [[nodiscard]] double predict(const double* row) const { return value[static_cast<std::size_t>(leaf_of(row))]; }
  [[nodiscard]] std::size_t size() const { return feature.size(); }
  [[nodiscard]] nlohmann::json to_json() const;
  static Tree from_json(const nlohmann::json& j);
};

/// Quantile-binned copy of a training table for fast split search.
class BinnedTable {
 public:
  BinnedTable(const Table& x, int max_bins);

  [[nodiscard]] std::uint8_t bin(std::size_t row, std::size_t col) const { return codes_[row * cols_ + col]; }
  [[nodiscard]] std::size_t n_bins(std::size_t col) const { return edges_[col].size() + 1; }
  /// Split value between bin b and b + 1 of column col.
  [[nodiscard]] double edge(std::size_t col, std::size_t b) const { return edges_[col][b]; }
  [[nodiscard]] std::size_t cols() const { return cols_; }

 private:
  std::size_t cols_;
  std::vector<std::vector<double>> edges_;
  std::vector<std::uint8_t> codes_;
};

struct TreeParams {
  int max_depth = -1;
  int min_leaf = 1;
  std::size_t features_per_split = 0;  // 0 = all
};

/// Grows a tree on the rows listed in `rows` (duplicates act as weights).
Tree grow_tree(const BinnedTable& bins, std::span<const double> target, std::vector<std::uint32_t> rows,
               const TreeParams& params, Rng& rng);

/// Random forest or gradient boosting over histogram CART trees.
class TreeEnsemble final : public Model {
 public:
  TreeEnsemble(ModelKind kind, const Hyperparameters& p, std::uint64_t seed) : Model(kind, p, seed) {}
  [[nodiscard]] const std::vector<double>& stage_losses() const { return stage_losses_; }

 protected:
  void fit_scaled(const Table& x, std::span<const double> y) override;
  [[nodiscard]] double predict_scaled(const double* row) const override;
  [[nodiscard]] nlohmann::json state_json() const override;
  void load_state(const nlohmann::json& j) override;

 private:
  void fit_forest(const Table& x, std::span<const double> y, std::span<const std::uint32_t> rows);
  void fit_boosting(const Table& x, std::span<const double> y, std::span<const std::uint32_t> rows);

  double base_ = 0.0;
  double shrinkage_ = 1.0;
  std::vector<Tree> trees_;
  std::vector<double> stage_losses_;
};

class MlpModel final : public Model {
 public:
  MlpModel(ModelKind kind, const Hyperparameters& p, std::uint64_t seed) : Model(kind, p, seed) {}

  struct Layer {
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<double> w;  // out x in, row-major
    std::vector<double> b;
  };

  /// Softmax probabilities of the two classes for a scaled row.
  [[nodiscard]] std::vector<double> probabilities(const double* row) const;

 protected:
  void fit_scaled(const Table& x, std::span<const double> y) override;
  [[nodiscard]] double predict_scaled(const double* row) const override;
  [[nodiscard]] nlohmann::json state_json() const override;
  void load_state(const nlohmann::json& j) override;

 private:
  std::vector<Layer> layers_;
};

}  // namespace dld::ml::detail
