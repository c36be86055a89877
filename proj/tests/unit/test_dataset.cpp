#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dld/dataset.hpp"
#include "dld/io.hpp"
#include "dld/random.hpp"

using namespace dld;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("dld_test_dataset_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<LabeledCase> synthetic_cases(int zigzag, int bumped) {
  std::vector<LabeledCase> out;
  for (int k = 0; k < zigzag; ++k) out.push_back({"z" + std::to_string(k), ModeLabel::Zigzag});
  for (int k = 0; k < bumped; ++k) out.push_back({"b" + std::to_string(k), ModeLabel::Bumped});
  return out;
}

SweepCase fake_case(int n, double size, std::size_t samples, CaseStatus status, ModeLabel mode) {
  SweepCase c;
  c.case_id = case_id(n, size);
  c.period = n;
  c.size_um = size;
  c.status = status;
  c.trajectory.case_id = c.case_id;
  c.trajectory.period = n;
  c.trajectory.size_um = size;
  c.trajectory.gap_um = 45;
  c.trajectory.post_diameter_um = 45;
  c.trajectory.mode = mode;
  c.trajectory.complete = status != CaseStatus::Incomplete;
  for (std::size_t k = 0; k < samples; ++k) {
    c.trajectory.samples.push_back({1e-6 * static_cast<double>(k), 0.3 * static_cast<double>(k), 40.0 + 1e-3 * k});
  }
  return c;
}

/// Small real sweep: one period, a few sizes on each side of the transition.
SweepConfig small_sweep() {
  SweepConfig cfg;
  cfg.periods = {6};
  cfg.sizes_um = {2.0, 6.0, 21.0, 24.0};
  return cfg;
}

}  // namespace

TEST_CASE("uniform sizes") {
  const auto s = SweepConfig::uniform_sizes(1.0, 14.0, 28);
  REQUIRE(s.size() == 28);
  CHECK(s.front() == 1.0);
  CHECK(s.back() == 14.0);
  CHECK(s[1] - s[0] == doctest::Approx(13.0 / 27.0));
  const auto desk = SweepConfig::desk();
  CHECK(desk.periods == std::vector<int>{6, 12, 24, 48});
  CHECK(desk.sizes_um == SweepConfig::uniform_sizes(1.0, 14.0, 14));
  CHECK(desk.solver.cells_per_gap == 12);
  const auto full = SweepConfig::full();
  CHECK(full.periods.size() * full.sizes_um.size() == 1288);
}

TEST_CASE("sweep validation") {
  SweepConfig cfg = small_sweep();
  cfg.sizes_um.push_back(45.0);
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = small_sweep();
  cfg.periods = {6, 6};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = small_sweep();
  cfg.periods = {1};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("stratified split proportions") {
  const auto split = stratified_split(synthetic_cases(60, 40), 0.2, 7);
  int z = 0;
  int b = 0;
  for (const auto& id : split.ids(Partition::Test)) (id[0] == 'z' ? z : b)++;
  CHECK(z == 12);
  CHECK(b == 8);
  CHECK(split.ids(Partition::Train).size() == 80);
  CHECK(stratified_split(synthetic_cases(60, 40), 0.2, 7) == split);
  CHECK_FALSE(stratified_split(synthetic_cases(60, 40), 0.2, 8) == split);
  CHECK_THROWS_AS((void)split.of("nope"), DataError);
}

TEST_CASE("split input order does not matter") {
  auto cases = synthetic_cases(17, 9);
  const auto a = stratified_split(cases, 0.3, 11);
  std::reverse(cases.begin(), cases.end());
  CHECK(stratified_split(cases, 0.3, 11) == a);
}

TEST_CASE("split errors") {
  CHECK_THROWS_AS(stratified_split(synthetic_cases(10, 0), 0.2, 1), DataError);
  CHECK_THROWS_AS(stratified_split(synthetic_cases(10, 5), 1.0, 1), ConfigError);
  auto dup = synthetic_cases(3, 3);
  dup.push_back(dup.front());
  CHECK_THROWS_AS(stratified_split(dup, 0.2, 1), DataError);
  auto inc = synthetic_cases(3, 3);
  inc.push_back({"i0", ModeLabel::Inconclusive});
  CHECK_THROWS_AS(stratified_split(inc, 0.2, 1), DataError);
}

TEST_CASE("stratification bounds hold for random class sizes") {
  Rng rng(2024);
  for (int trial = 0; trial < 300; ++trial) {
    const int z = 2 + static_cast<int>(rng.below(80));
    const int b = 2 + static_cast<int>(rng.below(80));
    const double ratio = 0.05 + 0.9 * rng.uniform();
    const auto split = stratified_split(synthetic_cases(z, b), ratio, rng.bits());
    int tz = 0;
    int tb = 0;
    for (const auto& id : split.ids(Partition::Test)) (id[0] == 'z' ? tz : tb)++;
    CHECK(std::abs(static_cast<double>(tz) / z - ratio) <= 1.0 / z);
    CHECK(std::abs(static_cast<double>(tb) / b - ratio) <= 1.0 / b);
    CHECK(split.assignment.size() == static_cast<std::size_t>(z + b));
  }
}

TEST_CASE("flattening") {
  std::vector<SweepCase> cases{fake_case(10, 5.0, 10000, CaseStatus::Labeled, ModeLabel::Zigzag)};
  CHECK(flatten_for_regression(cases).size() == 10000);
  CHECK(flatten_for_classification(cases).size() == 1);

  std::vector<SweepCase> excluded{fake_case(10, 5.0, 300, CaseStatus::Inconclusive, ModeLabel::Inconclusive),
                                  fake_case(10, 6.0, 300, CaseStatus::Incomplete, ModeLabel::Inconclusive)};
  CHECK(flatten_for_regression(excluded).empty());
  CHECK(flatten_for_classification(excluded).empty());

  std::vector<SweepCase> mixed{fake_case(12, 3.0, 17, CaseStatus::Labeled, ModeLabel::Zigzag),
                               fake_case(6, 9.0, 5, CaseStatus::Labeled, ModeLabel::Bumped),
                               fake_case(6, 2.0, 11, CaseStatus::Inconclusive, ModeLabel::Inconclusive)};
  const auto reg = flatten_for_regression(mixed);
  CHECK(reg.size() == 17 + 5);
  CHECK(reg.front().period == 6);  // ordered by (N, size)
  const auto cls = flatten_for_classification(mixed);
  REQUIRE(cls.size() == 2);
  CHECK(cls[0].mode == ModeLabel::Bumped);
  CHECK(labeled_cases(mixed).size() == 2);
}

TEST_CASE("csv record round trips") {
  std::vector<RegressionRecord> reg{{0.1, 1.0, 6, 45.000000000000007}, {1e-300, 13.999999999, 48, -2.5}};
  std::stringstream rs;
  write_regression_csv(reg, rs);
  CHECK(read_regression_csv(rs, "reg") == reg);

  std::vector<ClassificationRecord> cls{{1.0, 6, ModeLabel::Zigzag}, {14.0, 48, ModeLabel::Bumped}};
  std::stringstream cs;
  write_classification_csv(cls, cs);
  CHECK(cs.str() == "size_um,n,mode\n1,6,zigzag\n14,48,bumped\n");
  CHECK(read_classification_csv(cs, "cls") == cls);

  std::stringstream bad("size_um,n,mode\n1,6,zigzag\n2,6,sideways\n");
  try {
    (void)read_classification_csv(bad, "bad.csv");
    FAIL("expected a parse error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("bad.csv:3") != std::string::npos);
  }
}

TEST_CASE("split json round trip") {
  const auto split = stratified_split(synthetic_cases(9, 6), 0.2, 3);
  const auto dir = scratch_dir("split");
  save_split(split, dir / "split.json");
  CHECK(load_split(dir / "split.json") == split);
  const auto j = split_to_json(split);
  CHECK(j.contains("seed"));
  CHECK(j.contains("ratio"));
}

TEST_CASE("empty dataset round trips") {
  const auto dir = scratch_dir("empty");
  save_dataset(SweepResult{}, SweepConfig::desk(), dir);
  CHECK(load_dataset(dir) == SweepResult{});
  CHECK(load_regression(dir).empty());
  CHECK(load_classification(dir).empty());
}

TEST_CASE("real sweep: statuses, determinism, persistence") {
  const auto cfg = small_sweep();
  int progress_calls = 0;
  const auto result = generate_sweep(cfg, [&](const SweepCase&) { ++progress_calls; });
  REQUIRE(result.cases.size() == 4);
  CHECK(progress_calls == 4);
  REQUIRE(result.flows.size() == 1);
  CHECK(result.flows[0].error.empty());
  CHECK(result.cases[0].labeled());
  CHECK(result.cases[0].trajectory.mode == ModeLabel::Zigzag);
  CHECK(result.cases[3].trajectory.mode == ModeLabel::Bumped);
  for (const auto& c : result.cases) {
    if (c.labeled()) CHECK(c.trajectory.samples.size() > 1000);
  }

  CHECK(generate_sweep(cfg) == result);

  const auto dir = scratch_dir("real");
  save_dataset(result, cfg, dir);
  CHECK(load_dataset(dir) == result);
  const auto reg = load_regression(dir);
  CHECK(reg == flatten_for_regression(result.cases));
  std::size_t total = 0;
  for (const auto& c : result.cases) {
    if (c.labeled()) total += c.trajectory.samples.size();
  }
  CHECK(reg.size() == total);

  const auto first = read_file(dir / DatasetFiles::report);
  save_dataset(load_dataset(dir), cfg, dir);
  CHECK(read_file(dir / DatasetFiles::report) == first);

  SUBCASE("truncated trajectory file") {
    const auto path = dir / DatasetFiles::trajectories;
    auto text = read_file(path);
    text.resize(text.size() - 7);
    write_file(path, text);
    try {
      (void)load_dataset(dir);
      FAIL("expected a parse error");
    } catch (const DataError& e) {
      const std::string what = e.what();
      CHECK(what.find("trajectories.csv:") != std::string::npos);
    }
  }
  SUBCASE("missing report") {
    fs::remove(dir / DatasetFiles::report);
    CHECK_THROWS_AS((void)load_dataset(dir), DataError);
  }
}

TEST_CASE("a failing flow solve is recorded per case") {
  SweepConfig cfg = small_sweep();
  cfg.solver.reynolds = 5.0;
  cfg.solver.max_iterations = 1;
  cfg.solver.tolerance = 1e-300;
  const auto result = generate_sweep(cfg);
  REQUIRE(result.cases.size() == 4);
  CHECK_FALSE(result.flows[0].error.empty());
  for (const auto& c : result.cases) {
    CHECK(c.status == CaseStatus::Failed);
    CHECK_FALSE(c.reason.empty());
  }
  CHECK(result.count(CaseStatus::Failed) == 4);
}
