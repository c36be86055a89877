#include "pipeline.hpp"

#include <chrono>
#include <ctime>
#include <iomanip>
#include <map>
#include <sstream>

#include "dld/io.hpp"
#include "dld/parallel.hpp"

namespace dld::app {

namespace {

std::map<std::string, ModeLabel> modes_by_case(const std::vector<ClassificationRecord>& records) {
  std::map<std::string, ModeLabel> out;
  for (const auto& r : records) out[case_id(r.period, r.size_um)] = r.mode;
  return out;
}

std::string period_tag(int n) {
  std::string s = std::to_string(n);
  return std::string(s.size() < 2 ? 2 - s.size() : 0, '0') + s;
}

}  // namespace

SweepResult run_sweep(const RunConfig& cfg, const OutputLayout& out, const SweepProgress& progress) {
  const SweepConfig sweep = cfg.sweep();
  SweepResult result = generate_sweep(sweep, progress);
  save_dataset(result, sweep, out.dataset());
  for (int n : sweep.periods) {
    std::vector<const Trajectory*> trajs;
    for (const auto& c : result.cases) {
      if (c.period == n && !c.trajectory.samples.empty()) trajs.push_back(&c.trajectory);
    }
    write_file(out.plots() / ("trajectories_n" + period_tag(n) + ".svg"),
               trajectory_overlay_svg(sweep.design_for(n), trajs, "Trajectories, N = " + std::to_string(n)));
  }
  return result;
}

SplitDataset run_split(const OutputLayout& out, double ratio, std::uint64_t seed) {
  const auto records = load_classification(out.dataset());
  SplitDataset split = stratified_split(labeled_cases(records), ratio, seed);
  save_split(split, out.split());
  return split;
}

Partitioned partition(const ml::Table& x, const std::vector<double>& y, const std::vector<std::string>& ids,
                      const SplitDataset& split) {
  Partitioned p;
  p.x_train = ml::Table(x.cols());
  p.x_test = ml::Table(x.cols());
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> test_rows;
  for (std::size_t i = 0; i < y.size(); ++i) {
    (split.of(ids[i]) == Partition::Train ? train_rows : test_rows).push_back(i);
  }
  p.x_train = x.select(train_rows);
  p.x_test = x.select(test_rows);
  for (auto r : train_rows) {
    p.y_train.push_back(y[r]);
    p.ids_train.push_back(ids[r]);
  }
  for (auto r : test_rows) {
    p.y_test.push_back(y[r]);
    p.ids_test.push_back(ids[r]);
  }
  return p;
}

Partitioned load_partitioned(const OutputLayout& out, ml::ModelKind kind, const SplitDataset& split) {
  if (ml::is_regressor(kind)) {
    const auto d = ml::regression_data(load_regression(out.dataset()));
    return partition(d.x, d.y, d.case_ids, split);
  }
  const auto d = ml::classification_data(load_classification(out.dataset()));
  return partition(d.x, d.y, d.case_ids, split);
}

TrainOutcome run_train(ml::ModelKind kind, const RunConfig& cfg, const OutputLayout& out) {
  const SplitDataset split = load_split(out.split());
  const Partitioned p = load_partitioned(out, kind, split);
  if (p.y_train.empty()) throw DataError("training partition is empty");

  TrainOutcome res;
  ml::Hyperparameters params = cfg.ml.params_for(kind);
  if (cfg.ml.search) {
    const auto groups = ml::group_by_case(p.ids_train, modes_by_case(load_classification(out.dataset())));
    res.search = ml::grid_search(kind, ml::default_grid(kind), p.x_train, p.y_train, groups, cfg.ml.folds, cfg.seed,
                                 cfg.jobs);
    params = res.search->best_params();
  }
  res.model = ml::train(kind, params, p.x_train, p.y_train, cfg.seed);
  ml::save_model(*res.model, out.model(kind));
  if (res.search) {
    write_file(out.search(kind), ml::grid_search_to_json(*res.search).dump(2) + "\n");
  } else {
    std::filesystem::remove(out.search(kind));
  }
  return res;
}

nlohmann::json eval_report_json(const ml::EvalReport& report, const OutputLayout& out) {
  nlohmann::json j = ml::to_json(report);
  const auto search = out.search(report.kind);
  if (!j.contains("search") && std::filesystem::exists(search)) {
    j["search"] = nlohmann::json::parse(read_file(search));
  }
  return j;
}

ml::EvalReport run_evaluate(ml::ModelKind kind, const std::filesystem::path& model_path, const OutputLayout& out) {
  const auto model = ml::load_model(model_path);
  if (model->kind() != kind) {
    throw ModelError(model_path.string() + " holds a " + ml::to_string(model->kind()) + " model, not " +
                     ml::to_string(kind));
  }
  const SplitDataset split = load_split(out.split());
  const Partitioned p = load_partitioned(out, kind, split);
  const ml::EvalReport report = ml::evaluate(*model, p.x_train, p.y_train, p.x_test, p.y_test);
  const std::string name = ml::to_string(kind);
  write_file(out.reports() / (name + ".json"), eval_report_json(report, out).dump(2) + "\n");

  if (!ml::is_regressor(kind)) {
    std::ostringstream csv;
    ml::write_confusion_csv(report, csv);
    write_file(out.reports() / (name + "_confusion.csv"), csv.str());
    write_file(out.plots() / (name + "_confusion.svg"), confusion_svg(report));
    return report;
  }

  // Test trajectories against the model's predictions.
  const auto pred = model->predict(p.x_test);
  std::ostringstream csv;
  csv << "case_id,x_um,y_um,y_pred_um\n";
  std::vector<PredictedPath> paths;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (paths.empty() || paths.back().label != p.ids_test[i]) paths.push_back({p.ids_test[i], {}, {}});
    const double x = p.x_test(i, 0);
    paths.back().actual.push_back({x, p.y_test[i]});
    paths.back().predicted.push_back({x, pred[i]});
    csv << p.ids_test[i] << ',' << format_double(x) << ',' << format_double(p.y_test[i]) << ','
        << format_double(pred[i]) << '\n';
  }
  write_file(out.reports() / (name + "_test_predictions.csv"), csv.str());
  write_file(out.plots() / (name + "_test_trajectories.svg"),
             prediction_overlay_svg(paths, name + " on held-out cases"));
  return report;
}

std::vector<DcRow> run_validate_davis(const RunConfig& cfg, const std::vector<int>& periods, double resolution_um,
                                      int jobs) {
  std::vector<DcRow> rows(periods.size());
  parallel_for(periods.size(), jobs, [&](std::size_t i) {
    DldDesign design = cfg.design;
    design.period = periods[i];
    design.validate();
    const FlowField field = solve_steady_flow(build_post_array(design), cfg.fluid, cfg.solver);
    const DiameterInterval iv = estimate_critical_diameter(design, field, resolution_um, cfg.tracer);
    DcRow& r = rows[i];
    r.period = design.period;
    r.lower_um = iv.lower_um;
    r.upper_um = iv.upper_um;
    r.mixed_band = iv.mixed_band;
    r.traces = iv.traces;
    r.davis_um = critical_diameter_davis(design.gap_um, design.row_shift_fraction());
    r.inglis_um = critical_diameter_inglis(design.gap_um, design.period);
  });
  return rows;
}

void write_dc_table(const std::vector<DcRow>& rows, std::ostream& out) {
  out << "n,lower_um,upper_um,midpoint_um,davis_um,inglis_um,error_pct,mixed_band,traces\n";
  for (const auto& r : rows) {
    out << r.period << ',' << format_double(r.lower_um) << ',' << format_double(r.upper_um) << ','
        << format_double(r.midpoint()) << ',' << format_double(r.davis_um) << ',' << format_double(r.inglis_um)
        << ',' << format_double(r.error_pct()) << ',' << (r.mixed_band ? "true" : "false") << ',' << r.traces
        << '\n';
  }
}

void write_summary(const OutputLayout& out, const std::string& command, double wall_seconds,
                   const nlohmann::json& results) {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm utc{};
  gmtime_r(&now, &utc);
  std::ostringstream stamp;
  stamp << std::put_time(&utc, "%Y-%m-%dT%H:%M:%SZ");
  const nlohmann::json j = {{"command", command},
                            {"finished_at", stamp.str()},
                            {"wall_seconds", wall_seconds},
                            {"results", results}};
  write_file(out.summaries() / (command + ".json"), j.dump(2) + "\n");
}

}  // namespace dld::app
