#include <benchmark/benchmark.h>

#include "mlci/lap.hpp"
#include "mlci/segmentation.hpp"
#include "mlci/synth.hpp"
#include "mlci/tracking.hpp"

namespace {

mlci::CostMatrix random_costs(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    mlci::Xoshiro256 rng(seed);
    mlci::CostMatrix m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) m(r, c) = 2.0 * rng.uniform();
    }
    return m;
}

void BM_LapSolve(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto costs = random_costs(n, n, 7);
    for (auto _ : state) benchmark::DoNotOptimize(mlci::lap_solve(costs, 1.0));
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_LapSolve)->RangeMultiplier(2)->Range(8, 256)->Complexity();

mlci::SimScenario colony(std::size_t frames) {
    mlci::SimScenario sc;
    sc.seed = 11;
    sc.n_initial_cells = 16;
    sc.strains = {{mlci::Quantity(0.6, mlci::unit::per_h), {}, 0.0}};
    sc.frame_interval = mlci::Quantity(5.0, mlci::unit::min);
    sc.n_frames = frames;
    sc.pixel_size = mlci::Quantity(0.2, mlci::unit::um);
    sc.cell_width = mlci::Quantity(0.8, mlci::unit::um);
    sc.height = 200;
    sc.width = 400;
    sc.a_div_noise = 0.1;
    return sc;
}

void BM_SegmentThreshold(benchmark::State& state) {
    const auto sim = mlci::simulate(colony(static_cast<std::size_t>(state.range(0))));
    for (auto _ : state) {
        benchmark::DoNotOptimize(mlci::segment_threshold(sim.stack, 0, 0.5, mlci::Polarity::bright));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(sim.stack.frames()));
}
BENCHMARK(BM_SegmentThreshold)->Arg(8)->Arg(32);

void BM_Track(benchmark::State& state) {
    const auto sim = mlci::simulate(colony(static_cast<std::size_t>(state.range(0))));
    const auto overlay = mlci::segment_threshold(sim.stack, 0, 0.5, mlci::Polarity::bright);
    const mlci::TrackParams params;
    for (auto _ : state) {
        const auto graph = mlci::track(overlay, sim.stack.metadata(), params);
        benchmark::DoNotOptimize(mlci::build_tracklets(graph, overlay));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(overlay.detection_count()));
}
BENCHMARK(BM_Track)->Arg(8)->Arg(32);

} // namespace
BENCHMARK_MAIN();
