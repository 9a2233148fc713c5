#include <memory>
#include <random>

#include <benchmark/benchmark.h>

#include "relmap/classifier.hpp"
#include "relmap/evaluation.hpp"
#include "relmap/phantom.hpp"
#include "relmap/relevance.hpp"
#include "relmap/superpixel.hpp"

using namespace relmap;

namespace {

EvalCase phantom(std::size_t edge) {
    PhantomParams p;
    p.dims = Dims{edge, edge, edge};
    const double scale = double(edge) / 64.0;
    p.radii = {12.0 * scale, 10.0 * scale, 10.0 * scale};
    return make_phantom(p, "bench");
}

SyntheticParams oracle_params(const EvalCase& c) {
    SyntheticParams p;
    p.target_region = c.ground_truth;
    return p;
}

void BM_Slic3d(benchmark::State& state) {
    const auto c = phantom(std::size_t(state.range(0)));
    SlicParams params;
    params.n_segments = std::size_t(state.range(1));
    const auto& seed = c.volume.get(SequenceKind::T2w);
    for (auto _ : state) benchmark::DoNotOptimize(slic3d(seed, params));
    state.SetItemsProcessed(std::int64_t(state.iterations()) * std::int64_t(seed.size()));
}
BENCHMARK(BM_Slic3d)->Args({32, 100})->Args({64, 100})->Args({64, 250})->Args({128, 250})->Unit(benchmark::kMillisecond);

void BM_Relevance(benchmark::State& state) {
    const auto c = phantom(64);
    const SyntheticOracle oracle(oracle_params(c));
    SlicParams params;
    params.n_segments = 100;
    auto labels = std::make_shared<const SuperpixelLabelMap>(slic3d(c.volume.get(SequenceKind::T2w), params));
    const auto family = static_cast<MethodFamily>(state.range(0));
    RelevanceOptions options;
    options.budget.coarse_grid_size = 3;
    options.budget.refinement_iterations = 2;
    for (auto _ : state) benchmark::DoNotOptimize(compute_relevance(c.volume, labels, oracle, family, options));
    state.SetLabel(std::string(to_string(family)));
}
BENCHMARK(BM_Relevance)
    ->Arg(int(MethodFamily::Blank))
    ->Arg(int(MethodFamily::Optimal))
    ->Unit(benchmark::kMillisecond);

void BM_Dice(benchmark::State& state) {
    const std::size_t edge = std::size_t(state.range(0));
    const Dims d{edge, edge, edge};
    std::mt19937_64 rng(1);
    BinaryMask a(d), b(d);
    for (std::size_t i = 0; i < d.voxels(); ++i) {
        a.set(i, (rng() & 3) == 0);
        b.set(i, (rng() & 3) == 0);
    }
    for (auto _ : state) benchmark::DoNotOptimize(dice(a, b));
    state.SetItemsProcessed(std::int64_t(state.iterations()) * std::int64_t(d.voxels()));
}
BENCHMARK(BM_Dice)->Arg(8)->Arg(64)->Arg(128);

void BM_OptimalThreshold(benchmark::State& state) {
    const auto c = phantom(64);
    const SyntheticOracle oracle(oracle_params(c));
    SlicParams params;
    auto labels = std::make_shared<const SuperpixelLabelMap>(slic3d(c.volume.get(SequenceKind::T2w), params));
    const auto relmap = compute_relevance(c.volume, labels, oracle, MethodFamily::Blank);
    for (auto _ : state) benchmark::DoNotOptimize(optimal_threshold_dsc(relmap, c.ground_truth));
}
BENCHMARK(BM_OptimalThreshold)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
