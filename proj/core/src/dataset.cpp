#include "dld/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dld/io.hpp"
#include "dld/parallel.hpp"
#include "dld/random.hpp"
#include "json_keys.hpp"

namespace dld {

std::vector<double> SweepConfig::uniform_sizes(double lo, double hi, int count) {
  if (count < 1) throw ConfigError("size count must be >= 1");
  if (count == 1) return {lo};
  std::vector<double> out(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) out[static_cast<std::size_t>(k)] = lo + (hi - lo) * k / (count - 1);
  out.back() = hi;
  return out;
}

SweepConfig SweepConfig::desk() { return SweepConfig{}; }

SweepConfig SweepConfig::full() {
  SweepConfig c;
  c.periods.clear();
  for (int n = 3; n <= 48; ++n) c.periods.push_back(n);
  c.sizes_um = uniform_sizes(1.0, 14.0, 28);
  return c;
}

void SweepConfig::validate() const {
  if (periods.empty()) throw ConfigError("sweep needs at least one period number");
  if (sizes_um.empty()) throw ConfigError("sweep needs at least one particle size");
  std::set<int> seen_n;
  for (int n : periods) {
    if (n < 2) throw ConfigError("period number must be >= 2, got " + std::to_string(n));
    if (!seen_n.insert(n).second) throw ConfigError("duplicate period number " + std::to_string(n));
  }
  std::set<std::string> seen_id;
  for (double s : sizes_um) {
    if (!(s > 0.0 && s < design.gap_um)) {
      throw ConfigError("particle size " + format_double(s) + " um must lie in (0, gap)");
    }
    if (!seen_id.insert(case_id(periods.front(), s)).second) {
      throw ConfigError("particle sizes " + format_double(s) + " um collide at case-id precision (0.001 um)");
    }
  }
  design_for(periods.front()).validate();
  fluid.validate();
  solver.validate();
  tracer.validate();
}

DldDesign SweepConfig::design_for(int period) const {
  DldDesign d = design;
  d.period = period;
  return d;
}

void to_json(nlohmann::json& j, const SweepConfig& c) {
  nlohmann::json design = c.design;
  design.erase("n");
  if (!c.design.n_rows) design.erase("n_rows");
  j = nlohmann::json{{"periods", c.periods},
                     {"sizes_um", c.sizes_um},
                     {"design", design},
                     {"fluid", c.fluid},
                     {"solver", c.solver},
                     {"tracer", c.tracer},
                     {"seed", c.seed}};
}

std::string to_string(CaseStatus s) {
  switch (s) {
    case CaseStatus::Labeled: return "labeled";
    case CaseStatus::Inconclusive: return "inconclusive";
    case CaseStatus::Incomplete: return "incomplete";
    case CaseStatus::Failed: return "failed";
  }
  return "failed";
}

CaseStatus case_status_from_string(const std::string& s) {
  if (s == "labeled") return CaseStatus::Labeled;
  if (s == "inconclusive") return CaseStatus::Inconclusive;
  if (s == "incomplete") return CaseStatus::Incomplete;
  if (s == "failed") return CaseStatus::Failed;
  throw DataError("unknown case status '" + s + "'");
}

bool SweepCase::operator==(const SweepCase& o) const {
  const Trajectory& a = trajectory;
  const Trajectory& b = o.trajectory;
  return case_id == o.case_id && period == o.period && size_um == o.size_um && status == o.status &&
         reason == o.reason && a.case_id == b.case_id && a.period == b.period && a.gap_um == b.gap_um &&
         a.post_diameter_um == b.post_diameter_um && a.size_um == b.size_um && a.samples == b.samples &&
         a.mode == b.mode && a.migration_ratio == b.migration_ratio && a.complete == b.complete &&
         a.steps == b.steps;
}

std::size_t SweepResult::count(CaseStatus s) const {
  return static_cast<std::size_t>(
      std::count_if(cases.begin(), cases.end(), [s](const SweepCase& c) { return c.status == s; }));
}

SweepResult generate_sweep(const SweepConfig& config, const SweepProgress& progress) {
  config.validate();
  std::vector<int> periods = config.periods;
  std::sort(periods.begin(), periods.end());
  std::vector<double> sizes = config.sizes_um;
  std::sort(sizes.begin(), sizes.end());

  SweepResult result;
  result.flows.resize(periods.size());
  std::vector<FlowField> fields(periods.size());

  // One flow per period, shared read-only by all sizes.
  parallel_for(periods.size(), config.jobs, [&](std::size_t k) {
    FlowSummary& s = result.flows[k];
    s.period = periods[k];
    try {
      fields[k] = solve_steady_flow(build_post_array(config.design_for(periods[k])), config.fluid, config.solver);
      s.nx = fields[k].nx();
      s.ny = fields[k].ny();
      s.iterations = fields[k].report.iterations;
      s.residual = fields[k].report.residual;
      s.divergence = fields[k].divergence_norm();
      s.lateral_body_force = fields[k].report.lateral_body_force;
    } catch (const Error& e) {
      s.error = e.what();
    }
  });

  const std::size_t n_sizes = sizes.size();
  result.cases.resize(periods.size() * n_sizes);
  std::mutex progress_mutex;
  parallel_for(result.cases.size(), config.jobs, [&](std::size_t idx) {
    const std::size_t k = idx / n_sizes;
    const double size = sizes[idx % n_sizes];
    SweepCase& c = result.cases[idx];
    c.period = periods[k];
    c.size_um = size;
    c.case_id = case_id(c.period, size);
    if (!result.flows[k].error.empty()) {
      c.status = CaseStatus::Failed;
      c.reason = "flow solve failed: " + result.flows[k].error;
    } else {
      try {
        c.trajectory = trace(config.design_for(c.period), fields[k], size, config.tracer);
        if (!c.trajectory.complete) {
          c.status = CaseStatus::Incomplete;
          c.reason = "time limit reached before the array end";
        } else if (c.trajectory.mode == ModeLabel::Inconclusive) {
          c.status = CaseStatus::Inconclusive;
          c.reason = "migration ratio " + format_double(c.trajectory.migration_ratio) + " between thresholds";
        } else {
          c.status = CaseStatus::Labeled;
        }
      } catch (const Error& e) {
        c.status = CaseStatus::Failed;
        c.reason = e.what();
        c.trajectory = Trajectory{};
      }
    }
    if (progress) {
      std::lock_guard lock(progress_mutex);
      progress(c);
    }
  });
  return result;
}

std::vector<RegressionRecord> flatten_for_regression(const std::vector<SweepCase>& cases) {
  std::vector<const SweepCase*> order;
  std::size_t total = 0;
  for (const auto& c : cases) {
    if (!c.labeled()) continue;
    order.push_back(&c);
    total += c.trajectory.samples.size();
  }
  std::stable_sort(order.begin(), order.end(), [](const SweepCase* a, const SweepCase* b) {
    return std::tie(a->period, a->size_um) < std::tie(b->period, b->size_um);
  });
  std::vector<RegressionRecord> out;
  out.reserve(total);
  for (const SweepCase* c : order) {
    for (const auto& s : c->trajectory.samples) out.push_back({s.x_um, c->size_um, c->period, s.y_um});
  }
  return out;
}

std::vector<ClassificationRecord> flatten_for_classification(const std::vector<SweepCase>& cases) {
  std::vector<ClassificationRecord> out;
  for (const auto& c : cases) {
    if (c.labeled()) out.push_back({c.size_um, c.period, c.trajectory.mode});
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return std::tie(a.period, a.size_um) < std::tie(b.period, b.size_um);
  });
  return out;
}

std::string to_string(Partition p) { return p == Partition::Train ? "train" : "test"; }

std::vector<LabeledCase> labeled_cases(const std::vector<SweepCase>& cases) {
  std::vector<LabeledCase> out;
  for (const auto& c : cases) {
    if (c.labeled()) out.push_back({c.case_id, c.trajectory.mode});
  }
  return out;
}

std::vector<LabeledCase> labeled_cases(const std::vector<ClassificationRecord>& records) {
  std::vector<LabeledCase> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back({case_id(r.period, r.size_um), r.mode});
  return out;
}

std::vector<std::string> SplitDataset::ids(Partition p) const {
  std::vector<std::string> out;
  for (const auto& [id, part] : assignment) {
    if (part == p) out.push_back(id);
  }
  return out;
}

Partition SplitDataset::of(const std::string& case_id) const {
  const auto it = assignment.find(case_id);
  if (it == assignment.end()) throw DataError("case '" + case_id + "' is not in the split");
  return it->second;
}

SplitDataset stratified_split(const std::vector<LabeledCase>& cases, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("split ratio must be in (0, 1)");
  std::map<ModeLabel, std::vector<std::string>> by_class;
  std::set<std::string> seen;
  for (const auto& c : cases) {
    if (c.mode == ModeLabel::Inconclusive) throw DataError("inconclusive case '" + c.case_id + "' cannot be split");
    if (!seen.insert(c.case_id).second) throw DataError("duplicate case id '" + c.case_id + "'");
    by_class[c.mode].push_back(c.case_id);
  }
  if (by_class.size() < 2) throw DataError("stratified split needs both transport modes");
  for (const auto& [mode, ids] : by_class) {
    if (ids.size() < 2) throw DataError("class '" + to_string(mode) + "' has fewer than 2 cases");
  }

  SplitDataset split;
  split.seed = seed;
  split.ratio = ratio;
  Rng rng(seed);
  for (auto& [mode, ids] : by_class) {
    // Sorting first makes the result independent of input order.
    std::sort(ids.begin(), ids.end());
    rng.shuffle(ids);
    const auto n_test = static_cast<std::size_t>(std::lround(ratio * static_cast<double>(ids.size())));
    for (std::size_t k = 0; k < ids.size(); ++k) {
      split.assignment[ids[k]] = k < n_test ? Partition::Test : Partition::Train;
    }
  }
  return split;
}

void write_regression_csv(const std::vector<RegressionRecord>& records, std::ostream& out) {
  out << "x_um,size_um,n,y_um\n";
  for (const auto& r : records) {
    out << format_double(r.x_um) << ',' << format_double(r.size_um) << ',' << r.period << ','
        << format_double(r.y_um) << '\n';
  }
}

std::vector<RegressionRecord> read_regression_csv(std::istream& in, const std::string& name) {
  CsvReader csv(in, name, {"x_um", "size_um", "n", "y_um"});
  std::vector<RegressionRecord> out;
  while (csv.next()) {
    out.push_back({csv.number(0), csv.number(1), static_cast<int>(csv.integer(2)), csv.number(3)});
  }
  return out;
}

void write_classification_csv(const std::vector<ClassificationRecord>& records, std::ostream& out) {
  out << "size_um,n,mode\n";
  for (const auto& r : records) out << format_double(r.size_um) << ',' << r.period << ',' << to_string(r.mode) << '\n';
}

std::vector<ClassificationRecord> read_classification_csv(std::istream& in, const std::string& name) {
  CsvReader csv(in, name, {"size_um", "n", "mode"});
  std::vector<ClassificationRecord> out;
  while (csv.next()) {
    ModeLabel mode{};
    try {
      mode = mode_from_string(csv.text(2));
    } catch (const DataError& e) {
      csv.fail(e.what());
    }
    if (mode == ModeLabel::Inconclusive) csv.fail("inconclusive cases do not belong in classification data");
    out.push_back({csv.number(0), static_cast<int>(csv.integer(1)), mode});
  }
  return out;
}

void write_mode_summary_csv(const std::vector<SweepCase>& cases, std::ostream& out) {
  out << "case_id,n,size_um,mode,migration_ratio\n";
  for (const auto& c : cases) {
    out << c.case_id << ',' << c.period << ',' << format_double(c.size_um) << ',' << to_string(c.trajectory.mode)
        << ',' << format_double(c.trajectory.migration_ratio) << '\n';
  }
}

nlohmann::json split_to_json(const SplitDataset& split) {
  nlohmann::json cases = nlohmann::json::object();
  for (const auto& [id, p] : split.assignment) cases[id] = to_string(p);
  return {{"seed", split.seed}, {"ratio", split.ratio}, {"stratify", "mode"}, {"cases", cases}};
}

SplitDataset split_from_json(const nlohmann::json& j) {
  try {
    SplitDataset s;
    s.seed = j.at("seed").get<std::uint64_t>();
    s.ratio = j.at("ratio").get<double>();
    for (const auto& [id, p] : j.at("cases").items()) {
      const auto text = p.get<std::string>();
      if (text != "train" && text != "test") throw DataError("case '" + id + "' has partition '" + text + "'");
      s.assignment[id] = text == "train" ? Partition::Train : Partition::Test;
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed split: ") + e.what());
  }
}

namespace {

nlohmann::json parse_json_file(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    // Byte offset to line number.
    const auto upto = std::min<std::size_t>(e.byte, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n');
    throw DataError(path.string() + ":" + std::to_string(line) + ": " + e.what());
  }
}

}  // namespace

void save_split(const SplitDataset& split, const std::filesystem::path& path) {
  write_file(path, split_to_json(split).dump(2) + "\n");
}

SplitDataset load_split(const std::filesystem::path& path) { return split_from_json(parse_json_file(path)); }

void save_dataset(const SweepResult& result, const SweepConfig& config, const std::filesystem::path& dir) {
  {
    std::ostringstream out;
    write_regression_csv(flatten_for_regression(result.cases), out);
    write_file(dir / DatasetFiles::regression, out.str());
  }
  {
    std::ostringstream out;
    write_classification_csv(flatten_for_classification(result.cases), out);
    write_file(dir / DatasetFiles::classification, out.str());
  }
  {
    std::ostringstream out;
    write_trajectory_csv_header(out);
    for (const auto& c : result.cases) write_trajectory_csv_rows(c.trajectory, out);
    write_file(dir / DatasetFiles::trajectories, out.str());
  }
  {
    std::ostringstream out;
    write_mode_summary_csv(result.cases, out);
    write_file(dir / DatasetFiles::modes, out.str());
  }

  nlohmann::json flows = nlohmann::json::array();
  for (const auto& f : result.flows) {
    flows.push_back({{"n", f.period},
                     {"nx", f.nx},
                     {"ny", f.ny},
                     {"iterations", f.iterations},
                     {"residual", f.residual},
                     {"divergence", f.divergence},
                     {"lateral_body_force", f.lateral_body_force},
                     {"error", f.error}});
  }
  nlohmann::json cases = nlohmann::json::array();
  for (const auto& c : result.cases) {
    const Trajectory& t = c.trajectory;
    cases.push_back({{"case_id", c.case_id},
                     {"n", c.period},
                     {"size_um", c.size_um},
                     {"status", to_string(c.status)},
                     {"reason", c.reason},
                     {"mode", to_string(t.mode)},
                     {"migration_ratio", t.migration_ratio},
                     {"complete", t.complete},
                     {"steps", t.steps},
                     {"simulated_time_s", t.samples.empty() ? 0.0 : t.samples.back().t},
                     {"samples", t.samples.size()},
                     {"g_um", t.gap_um},
                     {"dp_um", t.post_diameter_um}});
  }
  const nlohmann::json report{{"format", "dld-sweep-report"},
                              {"version", 1},
                              {"config", config},
                              {"counts",
                               {{"total", result.cases.size()},
                                {"labeled", result.count(CaseStatus::Labeled)},
                                {"inconclusive", result.count(CaseStatus::Inconclusive)},
                                {"incomplete", result.count(CaseStatus::Incomplete)},
                                {"failed", result.count(CaseStatus::Failed)}}},
                              {"flows", flows},
                              {"cases", cases}};
  write_file(dir / DatasetFiles::report, report.dump(2) + "\n");
}

SweepResult load_dataset(const std::filesystem::path& dir) {
  const nlohmann::json report = parse_json_file(dir / DatasetFiles::report);
  SweepResult result;
  std::map<std::string, std::size_t> index;
  try {
    for (const auto& f : report.at("flows")) {
      FlowSummary s;
      s.period = f.at("n").get<int>();
      s.nx = f.at("nx").get<int>();
      s.ny = f.at("ny").get<int>();
      s.iterations = f.at("iterations").get<int>();
      s.residual = f.at("residual").get<double>();
      s.divergence = f.at("divergence").get<double>();
      s.lateral_body_force = f.at("lateral_body_force").get<double>();
      s.error = f.at("error").get<std::string>();
      result.flows.push_back(s);
    }
    for (const auto& c : report.at("cases")) {
      SweepCase sc;
      sc.case_id = c.at("case_id").get<std::string>();
      sc.period = c.at("n").get<int>();
      sc.size_um = c.at("size_um").get<double>();
      sc.status = case_status_from_string(c.at("status").get<std::string>());
      sc.reason = c.at("reason").get<std::string>();
      Trajectory& t = sc.trajectory;
      t.mode = mode_from_string(c.at("mode").get<std::string>());
      t.migration_ratio = c.at("migration_ratio").get<double>();
      t.complete = c.at("complete").get<bool>();
      t.steps = c.at("steps").get<long long>();
      t.gap_um = c.at("g_um").get<double>();
      t.post_diameter_um = c.at("dp_um").get<double>();
      if (c.at("samples").get<std::size_t>() > 0) {
        t.case_id = sc.case_id;
        t.period = sc.period;
        t.size_um = sc.size_um;
      }
      if (!index.emplace(sc.case_id, result.cases.size()).second) {
        throw DataError("duplicate case '" + sc.case_id + "' in sweep report");
      }
      result.cases.push_back(std::move(sc));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError((dir / DatasetFiles::report).string() + ": malformed report: " + e.what());
  }

  const auto path = dir / DatasetFiles::trajectories;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  CsvReader csv(in, path.string(), {"case_id", "n", "g_um", "dp_um", "size_um", "t_s", "x_um", "y_um"});
  while (csv.next()) {
    const auto it = index.find(csv.text(0));
    if (it == index.end()) csv.fail("case '" + csv.text(0) + "' is not in the sweep report");
    Trajectory& t = result.cases[it->second].trajectory;
    if (csv.integer(1) != t.period) csv.fail("period does not match the sweep report");
    const TrajectorySample s{csv.number(5), csv.number(6), csv.number(7)};
    if (!t.samples.empty() && !(s.t > t.samples.back().t)) csv.fail("sample times must increase");
    t.samples.push_back(s);
  }
  std::size_t k = 0;
  for (const auto& c : report.at("cases")) {
    if (result.cases[k].trajectory.samples.size() != c.at("samples").get<std::size_t>()) {
      throw DataError(path.string() + ": case '" + result.cases[k].case_id + "' has " +
                      std::to_string(result.cases[k].trajectory.samples.size()) + " samples, report says " +
                      std::to_string(c.at("samples").get<std::size_t>()));
    }
    ++k;
  }
  return result;
}

std::vector<RegressionRecord> load_regression(const std::filesystem::path& dir) {
  const auto path = dir / DatasetFiles::regression;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return read_regression_csv(in, path.string());
}

std::vector<ClassificationRecord> load_classification(const std::filesystem::path& dir) {
  const auto path = dir / DatasetFiles::classification;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return read_classification_csv(in, path.string());
}

}  // namespace dld
