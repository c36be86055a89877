#include <algorithm>
#include <cmath>
#include <numeric>

#include "models.hpp"

namespace dld::ml::detail {

KdTree::KdTree(std::vector<double> points, std::size_t dims) : points_(std::move(points)), dims_(dims) {
  order_.resize(size());
  std::iota(order_.begin(), order_.end(), 0u);
  if (!order_.empty()) build(0, static_cast<std::uint32_t>(order_.size()), 0);
}

std::int32_t KdTree::build(std::uint32_t begin, std::uint32_t end, int depth) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back({begin, end});
  bounds_.resize(nodes_.size() * 2 * dims_);
  double* lo = &bounds_[static_cast<std::size_t>(id) * 2 * dims_];
  double* hi = lo + dims_;
  for (std::size_t d = 0; d < dims_; ++d) {
    lo[d] = hi[d] = points_[order_[begin] * dims_ + d];
    for (std::uint32_t i = begin; i < end; ++i) {
      const double v = points_[order_[i] * dims_ + d];
      lo[d] = std::min(lo[d], v);
      hi[d] = std::max(hi[d], v);
    }
  }
  constexpr std::uint32_t kLeafSize = 16;
  if (end - begin <= kLeafSize) return id;

  // Split on the widest dimension.
  int dim = 0;
  double widest = -1.0;
  for (std::size_t d = 0; d < dims_; ++d) {
    const auto at = static_cast<std::size_t>(id) * 2 * dims_ + d;
    if (bounds_[at + dims_] - bounds_[at] > widest) {
      widest = bounds_[at + dims_] - bounds_[at];
      dim = static_cast<int>(d);
    }
  }
  if (widest <= 0.0) return id;

  const std::uint32_t mid = begin + (end - begin) / 2;
  auto key = [&](std::uint32_t p) { return points_[p * dims_ + static_cast<std::size_t>(dim)]; };
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) { return key(a) < key(b) || (key(a) == key(b) && a < b); });
  const std::int32_t l = build(begin, mid, depth + 1);
  const std::int32_t r = build(mid, end, depth + 1);
  auto& n = nodes_[static_cast<std::size_t>(id)];
  n.left = l;
  n.right = r;
  return id;
}

double KdTree::box_dist2(std::int32_t node, const double* q) const {
  const double* lo = &bounds_[static_cast<std::size_t>(node) * 2 * dims_];
  const double* hi = lo + dims_;
  double d2 = 0.0;
  for (std::size_t d = 0; d < dims_; ++d) {
    const double t = q[d] < lo[d] ? lo[d] - q[d] : (q[d] > hi[d] ? q[d] - hi[d] : 0.0);
    d2 += t * t;
  }
  return d2;
}

void KdTree::search(std::int32_t node, const double* q, std::size_t k, std::vector<Hit>& heap) const {
  const Node& n = nodes_[static_cast<std::size_t>(node)];
  if (n.left < 0) {
    for (std::uint32_t i = n.begin; i < n.end; ++i) {
      const std::uint32_t p = order_[i];
      double d2 = 0.0;
      for (std::size_t d = 0; d < dims_; ++d) {
        const double t = points_[p * dims_ + d] - q[d];
        d2 += t * t;
      }
      const Hit h{d2, p};
      if (heap.size() < k) {
        heap.push_back(h);
        std::push_heap(heap.begin(), heap.end());
      } else if (h < heap.front()) {
        std::pop_heap(heap.begin(), heap.end());
        heap.back() = h;
        std::push_heap(heap.begin(), heap.end());
      }
    }
    return;
  }
  // Children are pruned on their bounding boxes. Boxes at exactly the current
  // k-th distance are still visited so index tie-breaks stay exact.
  double dl = box_dist2(n.left, q);
  double dr = box_dist2(n.right, q);
  std::int32_t first = n.left;
  std::int32_t second = n.right;
  if (dr < dl) {
    std::swap(first, second);
    std::swap(dl, dr);
  }
  if (heap.size() < k || dl <= heap.front().dist2) search(first, q, k, heap);
  if (heap.size() < k || dr <= heap.front().dist2) search(second, q, k, heap);
}

std::vector<KdTree::Hit> KdTree::nearest(const double* query, std::size_t k) const {
  std::vector<Hit> heap;
  k = std::min(k, size());
  if (k == 0) return heap;
  heap.reserve(k);
  search(0, query, k, heap);
  std::sort_heap(heap.begin(), heap.end());
  return heap;
}

void KnnModel::fit_scaled(const Table& x, std::span<const double> y) {
  const auto k = static_cast<std::size_t>(hyperparameters().k);
  if (k > x.rows()) {
    throw DataError("k = " + std::to_string(k) + " exceeds the training size " + std::to_string(x.rows()));
  }
  tree_ = KdTree(x.values(), x.cols());
  targets_.assign(y.begin(), y.end());
}

double KnnModel::predict_scaled(const double* row) const {
  const auto& h = hyperparameters();
  const auto hits = tree_.nearest(row, static_cast<std::size_t>(h.k));
  std::vector<double> weights(hits.size(), 1.0);
  if (h.weighting == Weighting::InverseDistance) {
    // Exact matches take all the weight.
    const bool exact = hits.front().dist2 == 0.0;
    for (std::size_t i = 0; i < hits.size(); ++i) {
      if (exact) weights[i] = hits[i].dist2 == 0.0 ? 1.0 : 0.0;
      else weights[i] = 1.0 / std::sqrt(hits[i].dist2);
    }
  }
  if (is_regressor(kind())) {
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < hits.size(); ++i) {
      num += weights[i] * targets_[hits[i].index];
      den += weights[i];
    }
    return num / den;
  }
  double votes[2] = {0.0, 0.0};
  for (std::size_t i = 0; i < hits.size(); ++i) votes[targets_[hits[i].index] == kBumped ? 1 : 0] += weights[i];
  return votes[1] > votes[0] ? kBumped : kZigzag;
}

nlohmann::json KnnModel::state_json() const {
  return {{"dims", tree_.dims()}, {"points", tree_.points()}, {"targets", targets_}};
}

void KnnModel::load_state(const nlohmann::json& j) {
  const auto dims = j.at("dims").get<std::size_t>();
  auto points = j.at("points").get<std::vector<double>>();
  targets_ = j.at("targets").get<std::vector<double>>();
  if (dims != n_features() || points.size() != dims * targets_.size() || targets_.empty()) {
    throw ModelError("kNN state has inconsistent shapes");
  }
  tree_ = KdTree(std::move(points), dims);
}

}  // namespace dld::ml::detail
