// Runs the ten acceptance criteria and prints one PASS/FAIL line for each.
// Exits nonzero when a criterion could not run. With --strict a FAIL also
// gives a nonzero exit.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "app/pipeline.hpp"
#include "app/run_config.hpp"
#include "dld/dataset.hpp"
#include "dld/flowfield.hpp"
#include "dld/geometry.hpp"
#include "dld/io.hpp"
#include "dld/ml.hpp"
#include "dld/tracer.hpp"

using namespace dld;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id = 0;
  std::string title;
  std::function<Outcome()> run;
};

class Stopwatch {
 public:
  [[nodiscard]] double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string num(double v, int digits = 4) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(digits);
  s << v;
  return s.str();
}

int run_cli(const std::string& args, std::string* output = nullptr) {
  const std::string cmd = std::string(DLD_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (pipe == nullptr) throw std::runtime_error("cannot start " + cmd);
  std::string text;
  char buf[4096];
  std::size_t n = 0;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) text.append(buf, n);
  const int status = ::pclose(pipe);
  if (output != nullptr) *output = text;
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

/// sweep, split, train every model with grid search, evaluate every model.
double run_pipeline(const fs::path& root) {
  fs::remove_all(root);
  fs::create_directories(root);
  Stopwatch sw;
  for (const char* step : {"sweep", "split", "train --model all", "evaluate --model all"}) {
    std::string out;
    const int code = run_cli("-q --seed 42 --output " + root.string() + " " + step, &out);
    if (code != 0) {
      throw std::runtime_error(std::string("'") + step + "' exited with " + std::to_string(code) + ":\n" + out);
    }
  }
  return sw.seconds();
}

std::map<std::string, std::string> artifacts(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), root).generic_string();
    if (rel.rfind("summaries/", 0) == 0) continue;
    out[rel] = read_file(e.path());
  }
  return out;
}

nlohmann::json load_json(const fs::path& p) { return nlohmann::json::parse(read_file(p)); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::string workdir = "acceptance_runs";
  std::optional<std::string> report_path;
  bool strict = false;
  app.add_option("--workdir", workdir, "Scratch directory for the pipeline runs");
  app.add_option("--report", report_path, "Write the results as JSON");
  app.add_flag("--strict", strict, "Exit nonzero when any criterion fails");
  CLI11_PARSE(app, argc, argv);

  const fs::path run_a = fs::path(workdir) / "run_a";
  const fs::path run_b = fs::path(workdir) / "run_b";
  std::optional<double> pipeline_seconds;
  std::vector<app::DcRow> dc_rows;
  nlohmann::json info = nlohmann::json::object();

  auto ensure_run_a = [&] {
    if (!pipeline_seconds) pipeline_seconds = run_pipeline(run_a);
  };

  std::vector<Criterion> criteria;

  criteria.push_back({1, "closed-form critical diameters", [] {
                        Stopwatch sw;
                        const double g = 45.0;
                        double worst = 0.0;
                        for (int n = 3; n <= 48; ++n) {
                          const double inglis = 2.0 * g / std::sqrt(3.0 * n);
                          const double davis = 1.4 * g * std::exp(-0.48 * std::log(static_cast<double>(n)));
                          worst = std::max(worst, std::abs(critical_diameter_inglis(g, n) - inglis) / inglis);
                          worst = std::max(worst, std::abs(critical_diameter_davis(g, 1.0 / n) - davis) / davis);
                        }
                        const double t = sw.seconds();
                        return Outcome{worst <= 1e-9 && t < 1.0,
                                       "max relative error " + format_double(worst) + ", " + num(t, 3) + " s"};
                      }});

  criteria.push_back({2, "plane Poiseuille channel", [] {
                        Stopwatch sw;
                        const double height = 45.0;
                        const PostArray channel({}, 0.0, Rect{0.0, 0.0, 6.0 * height, height}, LateralBoundary::Walls,
                                                height);
                        SolverConfig cfg;
                        cfg.cells_per_gap = 32;
                        const auto field = solve_steady_flow(channel, FluidProperties{}, cfg);
                        const double x = 4.0 * height;
                        const double centre = field.sample({x, 0.5 * height}).x;
                        const int face = static_cast<int>(std::lround(x / field.h_um()));
                        const double mean = field.flux_through_face_line(face) / (height * kMicron);
                        const double ratio = centre / mean;
                        const double div = field.divergence_norm();
                        const double t = sw.seconds();
                        const bool ok = std::abs(ratio - 1.5) <= 0.02 * 1.5 && div <= 1e-6 && t < 60.0;
                        return Outcome{ok, "centre/mean " + num(ratio, 5) + ", divergence " + format_double(div) +
                                               ", " + num(t, 2) + " s"};
                      }});

  criteria.push_back({3, "uniform-flow relaxation", [] {
                        Stopwatch sw;
                        const double u = 1e-4;
                        const PostArray box({}, 0.0, Rect{0, 0, 1000, 1000}, LateralBoundary::Periodic, 45.0);
                        FlowField field(box, FluidProperties{}, 10.0, 100, 100, u);
                        for (int i = 0; i <= 100; ++i)
                          for (int j = 0; j < 100; ++j) field.u(i, j) = u;
                        ParticleState p;
                        p.position_um = {500, 500};
                        p.diameter_um = 10.0;
                        const double tau = particle_relaxation_time(10.0, p.density, FluidProperties{}.viscosity, 0.0);
                        const double dt = 1e-6;
                        double worst = 0.0;
                        for (int step = 1; step * dt <= 5 * tau; ++step) {
                          p = advance(p, field, dt, 0.0);
                          const double exact = u * (1.0 - std::exp(-step * dt / tau));
                          worst = std::max(worst, std::abs(p.velocity.norm() - exact) / exact);
                        }
                        const double t = sw.seconds();
                        return Outcome{worst <= 0.01 && t < 1.0,
                                       "max relative error " + format_double(worst) + ", " + num(t, 3) + " s"};
                      }});

  criteria.push_back({4, "simulated critical diameter against the empirical fit", [&] {
                        Stopwatch sw;
                        app::RunConfig cfg;
                        cfg.solver.cells_per_gap = 32;
                        cfg.solver.reynolds = 1.0;
                        dc_rows = app::run_validate_davis(cfg, {10, 20, 40}, 0.25, 0);
                        const double t = sw.seconds();
                        bool ok = t <= 15 * 60.0;
                        std::string detail;
                        for (const auto& r : dc_rows) {
                          ok = ok && std::abs(r.error_pct()) <= 10.0;
                          detail += "N=" + std::to_string(r.period) + " [" + num(r.lower_um, 2) + ", " +
                                    num(r.upper_um, 2) + "] vs " + num(r.davis_um, 2) + " (" + num(r.error_pct(), 1) +
                                    "%); ";
                        }
                        return Outcome{ok, detail + num(t, 1) + " s"};
                      }});

  criteria.push_back({5, "desk dataset", [&] {
                        ensure_run_a();
                        const auto summary = load_json(run_a / "summaries" / "sweep.json");
                        const double t = summary.at("wall_seconds").get<double>();
                        const auto data = load_dataset(run_a / "dataset");
                        int zigzag = 0;
                        int bumped = 0;
                        for (const auto& c : data.cases) {
                          if (!c.labeled()) continue;
                          (c.trajectory.mode == ModeLabel::Bumped ? bumped : zigzag)++;
                        }
                        const bool ok = data.cases.size() == 56 && zigzag + bumped >= 45 && zigzag > 0 && bumped > 0 &&
                                        t <= 30 * 60.0;
                        return Outcome{ok, std::to_string(data.cases.size()) + " cases, " +
                                               std::to_string(zigzag + bumped) + " labeled (" +
                                               std::to_string(zigzag) + " zigzag, " + std::to_string(bumped) +
                                               " bumped), sweep " + num(t, 1) + " s"};
                      }});

  criteria.push_back({6, "kNN regressor test R2", [&] {
                        ensure_run_a();
                        for (const char* kind : {"knn_reg", "rf_reg", "gb_reg"}) {
                          const auto r = load_json(run_a / "reports" / (std::string(kind) + ".json"));
                          info[kind] = {{"r2_train", r["train"]["r2"]}, {"r2_test", r["test"]["r2"]}};
                          std::cout << "  info: " << kind << " R2 train " << num(r["train"]["r2"].get<double>())
                                    << " test " << num(r["test"]["r2"].get<double>()) << '\n';
                        }
                        const auto r = load_json(run_a / "reports" / "knn_reg.json");
                        const bool searched = r.contains("search");
                        const double r2 = r.at("test").at("r2").get<double>();
                        const std::string floor = r2 >= 0.90 ? "meets" : "below";
                        return Outcome{r2 >= 0.95 && searched, "test R2 " + num(r2) + " against 0.95 (" + floor +
                                                                   " the 0.90 floor)" +
                                                                   (searched ? "" : ", grid search missing")};
                      }});

  criteria.push_back({7, "MLP classifier test accuracy", [&] {
                        ensure_run_a();
                        const auto mlp = load_json(run_a / "reports" / "mlp_clf.json");
                        const auto knn = load_json(run_a / "reports" / "knn_clf.json");
                        const double acc = mlp.at("test").at("accuracy").get<double>();
                        const double knn_acc = knn.at("test").at("accuracy").get<double>();
                        info["mlp_clf"] = {{"accuracy_test", acc}};
                        info["knn_clf"] = {{"accuracy_test", knn_acc}};
                        bool files = true;
                        for (const char* kind : {"mlp_clf", "knn_clf"}) {
                          const auto csv = read_file(run_a / "reports" / (std::string(kind) + "_confusion.csv"));
                          files = files && csv.find("train,") != std::string::npos &&
                                  csv.find("test,") != std::string::npos &&
                                  fs::exists(run_a / "plots" / (std::string(kind) + "_confusion.svg"));
                        }
                        return Outcome{acc >= 0.95 && files, "MLP " + num(acc) + ", kNN " + num(knn_acc) +
                                                                 (files ? ", confusion files present"
                                                                        : ", confusion files missing")};
                      }});

  criteria.push_back({8, "metric examples", [] {
                        const std::vector<double> y{1, 2, 3};
                        const std::vector<double> off{1, 2, 4};
                        const std::vector<double> mean{2, 2, 2};
                        bool ok = ml::r2_score(y, y) == 1.0 && ml::r2_score(y, off) == 0.5 &&
                                  ml::r2_score(y, mean) == 0.0;
                        const auto m = ml::classification_metrics({3, 1, 1, 5});
                        ok = ok && m.precision == 0.75 && m.recall == 0.75 && m.f1 == 0.75 && m.accuracy == 0.8;
                        const auto perfect = ml::classification_metrics({4, 0, 0, 6});
                        ok = ok && perfect.precision == 1.0 && perfect.recall == 1.0 && perfect.f1 == 1.0 &&
                             perfect.accuracy == 1.0;
                        const auto none = ml::classification_metrics({0, 2, 3, 1});
                        ok = ok && none.precision == 0.0 && none.recall == 0.0 && none.f1 == 0.0;
                        bool threw = false;
                        try {
                          (void)ml::r2_score(mean, y);
                        } catch (const DataError&) {
                          threw = true;
                        }
                        return Outcome{ok && threw, ok && threw ? "all exact" : "mismatch"};
                      }});

  criteria.push_back({9, "byte-identical pipeline reruns", [&] {
                        ensure_run_a();
                        run_pipeline(run_b);
                        const auto a = artifacts(run_a);
                        const auto b = artifacts(run_b);
                        std::vector<std::string> diff;
                        for (const auto& [path, bytes] : a) {
                          const auto it = b.find(path);
                          if (it == b.end() || it->second != bytes) diff.push_back(path);
                        }
                        for (const auto& [path, bytes] : b) {
                          if (!a.count(path)) diff.push_back(path);
                        }
                        std::string detail = std::to_string(a.size()) + " files compared";
                        for (const auto& p : diff) detail += ", differs: " + p;
                        return Outcome{diff.empty() && !a.empty(), detail};
                      }});

  criteria.push_back({10, "property suites on the desk run", [&] {
                        ensure_run_a();
                        std::string detail;
                        bool ok = true;

                        const auto data = load_dataset(run_a / "dataset");
                        const auto split = load_split(run_a / "split.json");
                        std::map<ModeLabel, int> total;
                        std::map<ModeLabel, int> test;
                        for (const auto& c : labeled_cases(data.cases)) {
                          ++total[c.mode];
                          if (split.of(c.case_id) == Partition::Test) ++test[c.mode];
                        }
                        for (const auto& [mode, n] : total) {
                          const double frac = static_cast<double>(test[mode]) / n;
                          ok = ok && std::abs(frac - split.ratio) <= 1.0 / n;
                        }
                        const auto train_ids = split.ids(Partition::Train);
                        const auto test_ids = split.ids(Partition::Test);
                        std::set<std::string> seen(train_ids.begin(), train_ids.end());
                        bool disjoint = seen.size() == train_ids.size();
                        for (const auto& id : test_ids) disjoint = disjoint && seen.insert(id).second;
                        ok = ok && disjoint && seen.size() == split.assignment.size();
                        detail += std::string("stratification and disjointness ") + (ok ? "hold" : "violated");

                        double worst = std::numeric_limits<double>::infinity();
                        std::size_t samples = 0;
                        std::map<int, PostArray> arrays;
                        for (const auto& c : data.cases) {
                          auto it = arrays.find(c.period);
                          if (it == arrays.end()) {
                            it = arrays.emplace(c.period, build_post_array(DldDesign::standard(c.period))).first;
                          }
                          for (const auto& s : c.trajectory.samples) {
                            ++samples;
                            if (auto hit = it->second.nearest_post({s.x_um, s.y_um}, 0.5 * c.size_um + 5.0)) {
                              worst = std::min(worst, hit->distance_um - 0.5 * c.size_um);
                            }
                          }
                        }
                        const bool steric = worst >= -1e-6;
                        ok = ok && steric && samples > 0;
                        detail += "; min clearance " + format_double(worst) + " um over " + std::to_string(samples) +
                                  " samples";

                        bool monotone = true;
                        for (int n = 3; n < 48; ++n) {
                          monotone = monotone && critical_diameter_inglis(45.0, n + 1) < critical_diameter_inglis(45.0, n) &&
                                     critical_diameter_davis(45.0, 1.0 / (n + 1)) < critical_diameter_davis(45.0, 1.0 / n);
                        }
                        for (std::size_t k = 1; k < dc_rows.size(); ++k) {
                          monotone = monotone && dc_rows[k].midpoint() < dc_rows[k - 1].midpoint();
                        }
                        ok = ok && monotone;
                        detail += std::string("; D_c monotone in N ") + (monotone ? "yes" : "no") +
                                  (dc_rows.empty() ? " (closed forms only)" : " (closed forms and simulation)");
                        return Outcome{ok, detail};
                      }});

  nlohmann::json report = nlohmann::json::array();
  int failed = 0;
  int crashed = 0;
  for (const auto& c : criteria) {
    Outcome o;
    std::string status;
    try {
      o = c.run();
      status = o.pass ? "PASS" : "FAIL";
    } catch (const std::exception& e) {
      o = {false, std::string("could not run: ") + e.what()};
      status = "ERROR";
      ++crashed;
    }
    if (!o.pass) ++failed;
    std::cout << status << " criterion " << c.id << " (" << c.title << "): " << o.detail << std::endl;
    report.push_back({{"criterion", c.id}, {"title", c.title}, {"status", status}, {"detail", o.detail}});
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
  if (report_path) write_file(*report_path, nlohmann::json{{"criteria", report}, {"info", info}}.dump(2) + "\n");
  if (crashed > 0) return 1;
  return strict && failed > 0 ? 1 : 0;
}
