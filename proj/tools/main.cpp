#include <chrono>
#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "app/pipeline.hpp"
#include "dld/io.hpp"

namespace {

using namespace dld;
using namespace dld::app;

struct Globals {
  std::optional<std::string> config;
  std::optional<std::string> output;
  std::optional<std::int64_t> seed;
  std::optional<int> jobs;
  bool quiet = false;
};

/// Flags shared by the commands that build a design and solve a flow.
struct DesignFlags {
  std::optional<int> n;
  std::optional<double> g;
  std::optional<double> dp;
  std::optional<int> cells_per_gap;
  std::optional<double> reynolds;

  void add(CLI::App* cmd, bool with_n = true) {
    if (with_n) cmd->add_option("--n", n, "Period number N");
    cmd->add_option("--g", g, "Gap G (um)");
    cmd->add_option("--dp", dp, "Post diameter D_p (um)");
    cmd->add_option("--cells-per-gap", cells_per_gap, "Grid cells across one gap");
    cmd->add_option("--re", reynolds, "Reynolds number");
  }
  void apply(RunConfig& cfg) const {
    if (n) cfg.design.period = *n;
    if (g) cfg.design.gap_um = *g;
    if (dp) cfg.design.post_diameter_um = *dp;
    if (cells_per_gap) cfg.solver.cells_per_gap = *cells_per_gap;
    if (reynolds) cfg.solver.reynolds = *reynolds;
  }
};

class Timer {
 public:
  [[nodiscard]] double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string tag(int n) { return (n < 10 ? "0" : "") + std::to_string(n); }

RunConfig resolve(const Globals& g) {
  RunConfig cfg = g.config ? load_run_config(*g.config) : RunConfig{};
  if (g.seed) {
    if (*g.seed < 0) throw ConfigError("--seed must be >= 0");
    cfg.seed = static_cast<std::uint64_t>(*g.seed);
  }
  if (g.jobs) cfg.jobs = *g.jobs;
  return cfg;
}

std::vector<ml::ModelKind> kinds_from(const std::string& name, const RunConfig& cfg) {
  if (name.empty() || name == "all") return cfg.ml.models;
  return {ml::model_kind_from_string(name)};
}

int exit_code(const Error& e) {
  switch (e.category()) {
    case ErrorCategory::Config:
    case ErrorCategory::Domain: return 2;
    case ErrorCategory::Solver: return 3;
    case ErrorCategory::Data: return 4;
    case ErrorCategory::Model: return 5;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deterministic lateral displacement simulation and surrogate models"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "TOML run config")->check(CLI::ExistingFile);
  app.add_option("--output", g.output, "Output root (default: config output_dir, $DLD_OUTPUT_ROOT, ./dld_output)");
  app.add_option("--seed", g.seed, "Seed for splits and models");
  app.add_option("--jobs", g.jobs, "Worker threads (0 = one per core)");
  app.add_flag("-q,--quiet", g.quiet, "Only print results");

  std::function<void()> action;
  auto log = [&](const std::string& msg) {
    if (!g.quiet) std::cerr << msg << std::endl;
  };

  // dc
  auto* dc = app.add_subcommand("dc", "Critical diameter by formula or simulation");
  DesignFlags dc_design;
  dc_design.add(dc);
  std::string dc_method = "davis";
  double dc_resolution = 0.25;
  dc->add_option("--method", dc_method, "davis | inglis | simulate")
      ->check(CLI::IsMember({"davis", "inglis", "simulate"}));
  dc->add_option("--resolution", dc_resolution, "Size resolution for --method simulate (um)");
  dc->callback([&] {
    action = [&] {
      Timer t;
      RunConfig cfg = resolve(g);
      dc_design.apply(cfg);
      cfg.design.validate();
      const OutputLayout out{resolve_output_root(g.output, cfg)};
      const double g_um = cfg.design.gap_um;
      const int n = cfg.design.period;
      nlohmann::json res = {{"n", n}, {"g_um", g_um}, {"method", dc_method}};
      if (dc_method == "davis" || dc_method == "inglis") {
        const double d = dc_method == "davis" ? critical_diameter_davis(g_um, cfg.design.row_shift_fraction())
                                              : critical_diameter_inglis(g_um, n);
        res["dc_um"] = d;
        std::cout << fixed(d, 3) << " um" << std::endl;
      } else {
        if (!cfg.from_file("solver.cells_per_gap") && !dc_design.cells_per_gap) cfg.solver.cells_per_gap = 32;
        const auto rows = run_validate_davis(cfg, {n}, dc_resolution, cfg.jobs);
        const auto& r = rows.front();
        res.update({{"lower_um", r.lower_um},
                    {"upper_um", r.upper_um},
                    {"midpoint_um", r.midpoint()},
                    {"mixed_band", r.mixed_band},
                    {"traces", r.traces},
                    {"cells_per_gap", cfg.solver.cells_per_gap}});
        std::cout << fixed(r.lower_um, 2) << ' ' << fixed(r.upper_um, 2) << " midpoint " << fixed(r.midpoint(), 2)
                  << std::endl;
      }
      write_summary(out, "dc", t.seconds(), res);
    };
  });

  // flow
  auto* flow = app.add_subcommand("flow", "Solve the steady flow and render it");
  DesignFlags flow_design;
  flow_design.add(flow);
  flow->callback([&] {
    action = [&] {
      Timer t;
      RunConfig cfg = resolve(g);
      flow_design.apply(cfg);
      cfg.design.validate();
      const OutputLayout out{resolve_output_root(g.output, cfg)};
      log("solving N = " + std::to_string(cfg.design.period) + " at " + std::to_string(cfg.solver.cells_per_gap) +
          " cells per gap");
      const FlowField field = solve_steady_flow(build_post_array(cfg.design), cfg.fluid, cfg.solver);
      const std::string stem = "flow_n" + tag(cfg.design.period);
      std::ostringstream csv;
      std::ostringstream svg;
      write_field_csv(field, csv);
      write_field_svg(field, svg);
      write_file(out.root / "flow" / (stem + ".csv"), csv.str());
      write_file(out.plots() / (stem + ".svg"), svg.str());
      const nlohmann::json res = {{"design", cfg.design},
                                  {"solver", cfg.solver},
                                  {"nx", field.nx()},
                                  {"ny", field.ny()},
                                  {"h_um", field.h_um()},
                                  {"inlet_velocity_mps", field.inlet_velocity()},
                                  {"iterations", field.report.iterations},
                                  {"residual", field.report.residual},
                                  {"lateral_body_force", field.report.lateral_body_force},
                                  {"divergence_norm", field.divergence_norm()}};
      std::cout << "grid " << field.nx() << "x" << field.ny() << ", " << field.report.iterations
                << " iterations, divergence " << field.divergence_norm() << std::endl;
      write_summary(out, "flow", t.seconds(), res);
    };
  });

  // trace
  auto* tr = app.add_subcommand("trace", "Trace one particle through the array");
  DesignFlags tr_design;
  tr_design.add(tr);
  double tr_size = 0.0;
  std::optional<double> tr_release_y;
  tr->add_option("--size", tr_size, "Particle diameter (um)")->required();
  tr->add_option("--release-y", tr_release_y, "Release height (um)");
  tr->callback([&] {
    action = [&] {
      Timer t;
      RunConfig cfg = resolve(g);
      tr_design.apply(cfg);
      if (tr_release_y) cfg.tracer.release_y_um = *tr_release_y;
      cfg.design.validate();
      const OutputLayout out{resolve_output_root(g.output, cfg)};
      const FlowField field = solve_steady_flow(build_post_array(cfg.design), cfg.fluid, cfg.solver);
      const Trajectory traj = trace(cfg.design, field, tr_size, cfg.tracer);
      std::ostringstream csv;
      write_trajectory_csv_header(csv);
      write_trajectory_csv_rows(traj, csv);
      const std::string stem = "trace_" + traj.case_id;
      write_file(out.root / "trace" / (stem + ".csv"), csv.str());
      write_file(out.plots() / (stem + ".svg"),
                 trajectory_overlay_svg(cfg.design, {&traj}, "N = " + std::to_string(cfg.design.period) + ", d = " +
                                                                  fixed(tr_size, 2) + " um"));
      std::cout << to_string(traj.mode) << " (migration ratio " << fixed(traj.migration_ratio, 3) << ")"
                << std::endl;
      write_summary(out, "trace", t.seconds(),
                    {{"case_id", traj.case_id},
                     {"mode", to_string(traj.mode)},
                     {"migration_ratio", traj.migration_ratio},
                     {"complete", traj.complete},
                     {"samples", traj.samples.size()},
                     {"steps", traj.steps}});
    };
  });

  // sweep
  auto* sw = app.add_subcommand("sweep", "Generate the trajectory dataset");
  std::vector<int> sw_periods;
  std::vector<double> sw_sizes;
  std::optional<int> sw_cells;
  sw->add_option("--periods", sw_periods, "Period numbers, e.g. 6,12,24,48")->delimiter(',');
  sw->add_option("--sizes", sw_sizes, "Particle sizes (um), e.g. 1,2,3")->delimiter(',');
  sw->add_option("--cells-per-gap", sw_cells, "Grid cells across one gap");
  sw->callback([&] {
    action = [&] {
      Timer t;
      RunConfig cfg = resolve(g);
      if (!sw_periods.empty()) cfg.periods = sw_periods;
      if (!sw_sizes.empty()) cfg.sizes_um = sw_sizes;
      if (sw_cells) cfg.solver.cells_per_gap = *sw_cells;
      const OutputLayout out{resolve_output_root(g.output, cfg)};
      const std::size_t total = cfg.periods.size() * cfg.sizes_um.size();
      std::size_t done = 0;
      const SweepResult res = run_sweep(cfg, out, [&](const SweepCase& c) {
        log("[" + std::to_string(++done) + "/" + std::to_string(total) + "] " + c.case_id + " " +
            (c.labeled() ? to_string(c.trajectory.mode) : to_string(c.status)));
      });
      nlohmann::json counts = nlohmann::json::object();
      for (const auto& c : res.cases) {
        const std::string key = c.labeled() ? to_string(c.trajectory.mode) : to_string(c.status);
        counts[key] = counts.value(key, 0) + 1;
      }
      std::cout << res.cases.size() << " cases: " << counts.dump() << std::endl;
      write_summary(out, "sweep", t.seconds(), {{"cases", res.cases.size()}, {"counts", counts},
                                                {"dataset", out.dataset().string()}});
    };
  });

  // split
  auto* sp = app.add_subcommand("split", "Stratified case-level train/test split");
  std::optional<double> sp_ratio;
  sp->add_option("--ratio", sp_ratio, "Test fraction");
  sp->callback([&] {
    action = [&] {
      Timer t;
      RunConfig cfg = resolve(g);
      if (sp_ratio) cfg.ml.split_ratio = *sp_ratio;
      const OutputLayout out{resolve_output_root(g.output, cfg)};
      const SplitDataset split = run_split(out, cfg.ml.split_ratio, cfg.seed);
      const auto n_train = split.ids(Partition::Train).size();
      const auto n_test = split.ids(Partition::Test).size();
      std::cout << n_train << " train / " << n_test << " test cases" << std::endl;
      write_summary(out, "split", t.seconds(), {{"train", n_train}, {"test", n_test}, {"seed", cfg.seed}});
    };
  });

  // train
  auto* trn = app.add_subcommand("train", "Train models on the training partition");
  std::string trn_model;
  bool trn_no_search = false;
  std::optional<int> trn_folds;
  trn->add_option("--model", trn_model, "knn_reg | rf_reg | gb_reg | knn_clf | mlp_clf | all");
  trn->add_flag("--no-search", trn_no_search, "Skip the grid search and use the configured hyperparameters");
  trn->add_option("--folds", trn_folds, "Cross-validation folds");
  trn->callback([&] {
    action = [&] {
      Timer t;
      RunConfig cfg = resolve(g);
      if (trn_no_search) cfg.ml.search = false;
      if (trn_folds) cfg.ml.folds = *trn_folds;
      const OutputLayout out{resolve_output_root(g.output, cfg)};
      nlohmann::json res = nlohmann::json::object();
      for (auto kind : kinds_from(trn_model, cfg)) {
        Timer tk;
        log("training " + ml::to_string(kind));
        const auto o = run_train(kind, cfg, out);
        nlohmann::json r = {{"hyperparameters", ml::hyperparameters_to_json(kind, o.model->hyperparameters())},
                            {"converged", o.model->converged()},
                            {"seconds", tk.seconds()}};
        if (o.search) r["cv_mean"] = o.search->table[o.search->best].mean;
        if (!o.model->warning().empty()) log("warning: " + o.model->warning());
        std::cout << ml::to_string(kind) << ' ' << r["hyperparameters"].dump()
                  << (o.search ? " cv " + fixed(o.search->table[o.search->best].mean, 4) : "") << std::endl;
        res[ml::to_string(kind)] = r;
      }
      write_summary(out, "train", t.seconds(), res);
    };
  });

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Score trained models on the split");
  std::string ev_model;
  std::optional<std::string> ev_file;
  ev->add_option("--model", ev_model, "Model kind or all");
  ev->add_option("--model-file", ev_file, "Model JSON (default: <output>/models/<kind>.json)");
  ev->callback([&] {
    action = [&] {
      Timer t;
      RunConfig cfg = resolve(g);
      const OutputLayout out{resolve_output_root(g.output, cfg)};
      auto kinds = kinds_from(ev_model, cfg);
      if (ev_file && ev_model.empty()) kinds = {ml::load_model(*ev_file)->kind()};
      if (ev_file && kinds.size() != 1) throw ConfigError("--model-file needs a single --model");
      nlohmann::json res = nlohmann::json::object();
      for (auto kind : kinds) {
        const auto path = ev_file ? std::filesystem::path(*ev_file) : out.model(kind);
        if (!std::filesystem::exists(path)) throw ModelError("no trained model at " + path.string());
        const auto r = run_evaluate(kind, path, out);
        nlohmann::json j = ml::to_json(r);
        res[ml::to_string(kind)] = {{"train", j["train"]}, {"test", j["test"]}};
        if (ml::is_regressor(kind)) {
          std::cout << ml::to_string(kind) << " R2 train " << fixed(r.r2_train, 4) << " test " << fixed(r.r2_test, 4)
                    << std::endl;
        } else {
          std::cout << ml::to_string(kind) << " accuracy train " << fixed(r.metrics_train.accuracy, 4) << " test "
                    << fixed(r.metrics_test.accuracy, 4) << "  F1 test " << fixed(r.metrics_test.f1, 4) << std::endl;
        }
      }
      write_summary(out, "evaluate", t.seconds(), res);
    };
  });

  // predict
  auto* pr = app.add_subcommand("predict", "Predict a mode or a trajectory");
  std::string pr_model;
  std::optional<std::string> pr_file;
  double pr_size = 0.0;
  int pr_n = 0;
  std::vector<double> pr_x;
  pr->add_option("--model", pr_model, "Model kind")->required();
  pr->add_option("--model-file", pr_file, "Model JSON (default: <output>/models/<kind>.json)");
  pr->add_option("--size", pr_size, "Particle diameter (um)")->required();
  pr->add_option("--n", pr_n, "Period number N")->required();
  pr->add_option("--x", pr_x, "Axial positions (um) for regressors, e.g. 100,200")->delimiter(',');
  pr->callback([&] {
    action = [&] {
      Timer t;
      RunConfig cfg = resolve(g);
      const OutputLayout out{resolve_output_root(g.output, cfg)};
      const auto kind = ml::model_kind_from_string(pr_model);
      const auto path = pr_file ? std::filesystem::path(*pr_file) : out.model(kind);
      const auto model = ml::load_model(path);
      if (model->kind() != kind) throw ModelError(path.string() + " is not a " + pr_model + " model");
      nlohmann::json res = {{"model", pr_model}, {"size_um", pr_size}, {"n", pr_n}};
      if (ml::is_regressor(kind)) {
        if (pr_x.empty()) throw ConfigError("regressors need --x");
        std::vector<double> ys;
        for (double x : pr_x) {
          ys.push_back(ml::predict_y(*model, x, pr_size, pr_n));
          std::cout << format_double(x) << ' ' << format_double(ys.back()) << std::endl;
        }
        res["x_um"] = pr_x;
        res["y_um"] = ys;
      } else {
        const ModeLabel m = ml::predict_mode(*model, pr_size, pr_n);
        std::cout << to_string(m) << std::endl;
        res["mode"] = to_string(m);
      }
      write_summary(out, "predict", t.seconds(), res);
    };
  });

  // validate-davis
  auto* vd = app.add_subcommand("validate-davis", "Simulated critical diameters against the correlations");
  DesignFlags vd_design;
  vd_design.add(vd, false);
  std::vector<int> vd_n{10, 20, 40};
  double vd_resolution = 0.25;
  vd->add_option("--n", vd_n, "Period numbers, e.g. 10,20,40")->delimiter(',');
  vd->add_option("--resolution", vd_resolution, "Size resolution (um)");
  vd->callback([&] {
    action = [&] {
      Timer t;
      RunConfig cfg = resolve(g);
      vd_design.apply(cfg);
      if (!cfg.from_file("solver.cells_per_gap") && !vd_design.cells_per_gap) cfg.solver.cells_per_gap = 32;
      const OutputLayout out{resolve_output_root(g.output, cfg)};
      log("validating at " + std::to_string(cfg.solver.cells_per_gap) + " cells per gap");
      const auto rows = run_validate_davis(cfg, vd_n, vd_resolution, cfg.jobs);
      std::ostringstream csv;
      write_dc_table(rows, csv);
      write_file(out.reports() / "validate_davis.csv", csv.str());
      write_file(out.plots() / "dc_comparison.svg", dc_comparison_svg(rows, cfg.design.gap_um));
      std::cout << "   N   lower   upper  midpoint   davis  inglis  error%\n";
      nlohmann::json res = nlohmann::json::array();
      for (const auto& r : rows) {
        char line[128];
        std::snprintf(line, sizeof line, "%4d %7.2f %7.2f %9.2f %7.2f %7.2f %+7.1f%s\n", r.period, r.lower_um,
                      r.upper_um, r.midpoint(), r.davis_um, r.inglis_um, r.error_pct(), r.mixed_band ? " mixed" : "");
        std::cout << line;
        res.push_back({{"n", r.period},
                       {"lower_um", r.lower_um},
                       {"upper_um", r.upper_um},
                       {"davis_um", r.davis_um},
                       {"inglis_um", r.inglis_um},
                       {"error_pct", r.error_pct()}});
      }
      write_summary(out, "validate-davis", t.seconds(), {{"cells_per_gap", cfg.solver.cells_per_gap}, {"rows", res}});
    };
  });

  for (auto* sub : app.get_subcommands({})) {
    sub->footer("Global options (before or after the command): --config FILE, --output DIR, --seed N, --jobs N, "
                "-q/--quiet.\nExit codes: 2 config/usage, 3 solver, 4 data, 5 model.");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    action();
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}
