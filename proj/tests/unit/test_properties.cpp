#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include "dld/dataset.hpp"
#include "dld/geometry.hpp"
#include "dld/io.hpp"
#include "dld/ml.hpp"
#include "dld/random.hpp"

using namespace dld;

TEST_CASE("rng streams depend only on the seed") {
  Rng a(99);
  Rng b(99);
  Rng c(100);
  bool differs = false;
  for (int k = 0; k < 1000; ++k) {
    const auto x = a.bits();
    CHECK(x == b.bits());
    differs = differs || x != c.bits();
  }
  CHECK(differs);
  Rng u(5);
  for (int k = 0; k < 10000; ++k) {
    const double v = u.uniform();
    CHECK(v >= 0.0);
    CHECK(v < 1.0);
    CHECK(u.below(7) < 7);
  }
  std::vector<int> v(50);
  for (int k = 0; k < 50; ++k) v[k] = k;
  auto w = v;
  Rng s(1);
  s.shuffle(w);
  CHECK(w != v);
  std::sort(w.begin(), w.end());
  CHECK(w == v);
}

TEST_CASE("format_double round trips exactly") {
  Rng rng(17);
  for (int k = 0; k < 5000; ++k) {
    const double v = std::ldexp(rng.uniform() - 0.5, static_cast<int>(rng.below(200)) - 100);
    CHECK(parse_double(format_double(v), "prop") == v);
  }
  for (double v : {0.0, 1.0, -2.5, 1e-300, 1e300, std::numeric_limits<double>::denorm_min(),
                   std::numeric_limits<double>::max()}) {
    CHECK(parse_double(format_double(v), "prop") == v);
  }
}

TEST_CASE("closed forms are monotone and positive") {
  for (double g : {10.0, 45.0, 80.0}) {
    for (int n = 3; n < 200; ++n) {
      const double di = critical_diameter_inglis(g, n);
      const double dd = critical_diameter_davis(g, 1.0 / n);
      CHECK(di > 0.0);
      CHECK(dd > 0.0);
      CHECK(di < g);
      CHECK(dd < g);
      CHECK(critical_diameter_inglis(g, n + 1) < di);
      CHECK(critical_diameter_davis(g, 1.0 / (n + 1)) < dd);
    }
  }
}

TEST_CASE("folds partition groups with per-class balance") {
  Rng rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    const int folds = 2 + static_cast<int>(rng.below(6));
    const std::size_t n = 2 * folds + rng.below(120);
    std::vector<int> labels(n);
    // Each class needs at least one group per fold.
    for (std::size_t i = 0; i < n; ++i) labels[i] = i < 2 * static_cast<std::size_t>(folds) ? static_cast<int>(i % 2) : static_cast<int>(rng.below(2));
    const auto assign = ml::stratified_folds(labels, folds, rng.bits());
    REQUIRE(assign.size() == n);
    for (int cls = 0; cls < 2; ++cls) {
      std::vector<int> count(folds, 0);
      for (std::size_t i = 0; i < n; ++i) {
        CHECK(assign[i] >= 0);
        CHECK(assign[i] < folds);
        if (labels[i] == cls) ++count[assign[i]];
      }
      const auto [lo, hi] = std::minmax_element(count.begin(), count.end());
      CHECK(*hi - *lo <= 1);
    }
    std::vector<int> sizes(folds, 0);
    for (int f : assign) ++sizes[f];
    const auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end());
    CHECK(*hi - *lo <= 1);
  }
}

TEST_CASE("case split is a disjoint cover") {
  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<LabeledCase> cases;
    const int z = 2 + static_cast<int>(rng.below(40));
    const int b = 2 + static_cast<int>(rng.below(40));
    for (int k = 0; k < z; ++k) cases.push_back({"z" + std::to_string(k), ModeLabel::Zigzag});
    for (int k = 0; k < b; ++k) cases.push_back({"b" + std::to_string(k), ModeLabel::Bumped});
    const auto split = stratified_split(cases, 0.1 + 0.8 * rng.uniform(), rng.bits());
    const auto train = split.ids(Partition::Train);
    const auto test = split.ids(Partition::Test);
    std::set<std::string> all(train.begin(), train.end());
    for (const auto& id : test) CHECK(all.insert(id).second);
    CHECK(all.size() == cases.size());
  }
}
