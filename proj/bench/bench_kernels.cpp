// Serial reference vs OpenMP kernels. Thread count follows OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include "bdf/data.hpp"
#include "bdf/gram.hpp"
#include "bdf/inference.hpp"
#include "bdf/kernel.hpp"

using namespace bdf;

namespace {

const std::array<AxisRange, 3> kCube{AxisRange{-1, 1}, AxisRange{-1, 1}, AxisRange{-1, 1}};

FeatureBasis basis() { return build_grid(kCube, Vec3::Constant(0.2), KernelSpec::isotropic(10)); }

void BM_featurize_reference(benchmark::State& state) {
  const auto b = basis();
  const Dataset d = generate_blobs(static_cast<std::size_t>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(reference::featurize(d.positions, b));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_featurize_parallel(benchmark::State& state) {
  const auto b = basis();
  const Dataset d = generate_blobs(static_cast<std::size_t>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(featurize(d.positions, b));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_gram_reference(benchmark::State& state) {
  const Dataset d = generate_blobs(static_cast<std::size_t>(state.range(0)), 2);
  const FeatureMatrix phi = featurize(d.positions, basis());
  for (auto _ : state) benchmark::DoNotOptimize(reference::accumulate_normal_stats(phi, d.velocities));
}

void BM_gram_dense(benchmark::State& state) {
  const Dataset d = generate_blobs(static_cast<std::size_t>(state.range(0)), 2);
  const FeatureMatrix phi = featurize(d.positions, basis());
  for (auto _ : state) benchmark::DoNotOptimize(accumulate_normal_stats(phi, d.velocities));
}

void BM_gram_sparse(benchmark::State& state) {
  const Dataset d = generate_blobs(static_cast<std::size_t>(state.range(0)), 2);
  const auto b = build_grid(kCube, Vec3::Constant(0.2), KernelSpec::isotropic(100));
  const FeatureMatrix phi = featurize(d.positions, b, FeaturizeOptions{1e-10});
  for (auto _ : state) benchmark::DoNotOptimize(accumulate_normal_stats(phi, d.velocities));
}

void BM_featurize_sparse(benchmark::State& state) {
  const auto b = build_grid(kCube, Vec3::Constant(0.2), KernelSpec::isotropic(100));
  const Dataset d = generate_blobs(static_cast<std::size_t>(state.range(0)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(featurize_sparse(d.positions, b, 1e-10));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_gram_sparse_direct(benchmark::State& state) {
  const Dataset d = generate_blobs(static_cast<std::size_t>(state.range(0)), 2);
  const auto b = build_grid(kCube, Vec3::Constant(0.2), KernelSpec::isotropic(100));
  const SparseFeatures phi = featurize_sparse(d.positions, b, 1e-10);
  for (auto _ : state) {
    NormalStatsAccumulator acc(b.size(), 3);
    acc.add(phi, d.velocities);
    benchmark::DoNotOptimize(acc.finish());
  }
}

void BM_predict(benchmark::State& state) {
  const auto b = basis();
  const Dataset d = generate_blobs(2000, 3);
  const FeatureMatrix phi = featurize(d.positions, b);
  const NormalStats stats = accumulate_normal_stats(phi, d.velocities);
  GaussianState s = make_prior(b.size(), 1e-2);
  s.add_evidence(stats.gram, stats.cross.col(0), 1e2);
  s.materialize();
  const FeatureMatrix q = featurize(generate_blobs(static_cast<std::size_t>(state.range(0)), 4).positions, b);
  for (auto _ : state) benchmark::DoNotOptimize(predict(s, q, 1e2));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_featurize_reference)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_featurize_parallel)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_gram_reference)->Arg(200)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_gram_dense)->Arg(200)->Arg(5000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_gram_sparse)->Arg(5000)->Arg(50000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_featurize_sparse)->Arg(50000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_gram_sparse_direct)->Arg(50000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_predict)->Arg(1000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
