#include <benchmark/benchmark.h>

#include "arcfit/arc_model.hpp"
#include "arcfit/segmenter.hpp"
#include "synth.hpp"

namespace {

using namespace arcfit;

arcfit::testing::Instance long_series(std::size_t points) {
  const PriorSet p = testing::three_arc_priors();
  testing::ArcDrawer draw(p, 1);
  const Segmentation truth =
      testing::draw_chain_covering(draw, static_cast<double>(points - 1), 100.0);
  std::vector<double> grid(points);
  for (std::size_t i = 0; i < points; ++i) grid[i] = static_cast<double>(i);
  return {testing::observe(truth, grid, draw), truth};
}

void BM_FitArc(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto inst = long_series(n);
  const auto x = inst.series.positions();
  std::vector<double> y;
  for (const auto& o : inst.series.points) y.push_back(o.value);
  const PriorSet p = testing::three_arc_priors();
  const DataWindow w{x, y, y.front(), std::nullopt};
  for (auto _ : state) benchmark::DoNotOptimize(fit_arc(w, p));
}
BENCHMARK(BM_FitArc)->Arg(4)->Arg(16)->Arg(64);

// Whole-series fit; time should grow linearly in M for fixed K.
void BM_FitSeries(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto k = static_cast<std::size_t>(state.range(1));
  const auto inst = long_series(m);
  const PriorSet p = testing::three_arc_priors();
  for (auto _ : state) benchmark::DoNotOptimize(fit_series(inst.series, p, k));
  state.SetComplexityN(static_cast<benchmark::IterationCount>(m));
}
BENCHMARK(BM_FitSeries)
    ->ArgsProduct({{250, 500, 1000}, {16}})
    ->Complexity(benchmark::oN)
    ->Unit(benchmark::kMillisecond);
BENCHMARK(BM_FitSeries)->ArgsProduct({{250}, {4, 8, 16, 32}})->Unit(benchmark::kMillisecond);

void BM_Update(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  const auto inst = long_series(4096);
  const PriorSet p = testing::three_arc_priors();
  SegmenterState seg(p, k);
  std::size_t next = 0;
  for (auto _ : state) {
    if (next == inst.series.size()) {
      state.PauseTiming();
      seg = SegmenterState(p, k);
      next = 0;
      state.ResumeTiming();
    }
    seg.update(inst.series.points[next++]);
  }
}
BENCHMARK(BM_Update)->Arg(8)->Arg(16)->Arg(32);

void BM_Predict(benchmark::State& state) {
  const auto inst = long_series(200);
  SegmenterState seg(testing::three_arc_priors(), 16);
  for (const auto& o : inst.series.points) seg.update(o);
  const auto grid = seg.default_grid();
  for (auto _ : state) benchmark::DoNotOptimize(seg.predict(grid));
}
BENCHMARK(BM_Predict);

}  // namespace

BENCHMARK_MAIN();
