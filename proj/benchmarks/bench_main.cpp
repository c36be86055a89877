#include <benchmark/benchmark.h>

#include "dld/flowfield.hpp"
#include "dld/geometry.hpp"
#include "dld/ml.hpp"
#include "dld/random.hpp"
#include "dld/tracer.hpp"

using namespace dld;

namespace {

const FlowField& device_flow(int n) {
  static const FlowField field = [n] {
    SolverConfig cfg;
    return solve_steady_flow(build_post_array(DldDesign::standard(n)), FluidProperties{}, cfg);
  }();
  return field;
}

ml::Table random_table(std::size_t rows, std::size_t cols, std::vector<double>& y, std::uint64_t seed) {
  Rng rng(seed);
  ml::Table x(cols);
  x.reserve(rows);
  std::vector<double> r(cols);
  y.clear();
  for (std::size_t i = 0; i < rows; ++i) {
    double s = 0.0;
    for (auto& v : r) {
      v = rng.uniform();
      s += v * v;
    }
    x.push_row(r);
    y.push_back(std::sin(3.0 * s));
  }
  return x;
}

void BM_FlowSolve(benchmark::State& state) {
  const auto array = build_post_array(DldDesign::standard(static_cast<int>(state.range(0))));
  SolverConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(solve_steady_flow(array, FluidProperties{}, cfg));
}
BENCHMARK(BM_FlowSolve)->Arg(6)->Arg(12)->Unit(benchmark::kMillisecond);

void BM_Trace(benchmark::State& state) {
  const DldDesign design = DldDesign::standard(6);
  const auto& field = device_flow(6);
  const double size = static_cast<double>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(trace(design, field, size, TracerConfig{}));
}
BENCHMARK(BM_Trace)->Arg(3)->Arg(24)->Unit(benchmark::kMillisecond);

void BM_KnnQuery(benchmark::State& state) {
  std::vector<double> y;
  const auto x = random_table(static_cast<std::size_t>(state.range(0)), 3, y, 1);
  ml::Hyperparameters h;
  const auto model = ml::train(ml::ModelKind::KnnReg, h, x, y, 7);
  std::vector<double> qy;
  const auto q = random_table(1000, 3, qy, 2);
  for (auto _ : state) benchmark::DoNotOptimize(model->predict(q));
  state.SetItemsProcessed(state.iterations() * 1000);
}
BENCHMARK(BM_KnnQuery)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);

void BM_TreeFit(benchmark::State& state) {
  std::vector<double> y;
  const auto x = random_table(static_cast<std::size_t>(state.range(0)), 3, y, 3);
  ml::Hyperparameters h;
  h.n_trees = 10;
  for (auto _ : state) benchmark::DoNotOptimize(ml::train(ml::ModelKind::RfReg, h, x, y, 11));
}
BENCHMARK(BM_TreeFit)->Arg(5000)->Arg(20000)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
