#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "fedprint/aggregation.hpp"
#include "fedprint/fingerprint.hpp"
#include "fedprint/mlp.hpp"

using namespace fedprint;

namespace {

void BM_ExtractFeatures(benchmark::State& state) {
  const auto group = generate_timing_group(default_profiles()[0], 1, 7, std::size_t(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(extract_features(group));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ExtractFeatures)->Arg(100)->Arg(1000);

RowMatrix random_rows(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  RowMatrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(kFeatureCount));
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = u(rng);
  return x;
}

void BM_Forward(benchmark::State& state) {
  const auto w = init_weights(MlpArchitecture{}, 1);
  const RowMatrix x = random_rows(std::size_t(state.range(0)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(forward(w, x));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Forward)->Arg(128)->Arg(2048);

void BM_TrainEpoch(benchmark::State& state) {
  const MlpArchitecture arch;
  Dataset d;
  d.x = random_rows(std::size_t(state.range(0)), 3);
  for (Eigen::Index i = 0; i < d.x.rows(); ++i) d.y.push_back(int(i % 4));
  auto w = init_weights(arch, 1);
  auto adam = AdamState::fresh(arch);
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(train_epoch(w, adam, d, 128, ++seed));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TrainEpoch)->Arg(1600)->Unit(benchmark::kMillisecond);

std::vector<ClientUpdate> five_updates() {
  std::vector<ClientUpdate> u;
  for (int k = 0; k < 5; ++k) u.push_back({k, init_weights(MlpArchitecture{}, std::uint64_t(k)), 1000 + k});
  return u;
}

void BM_Aggregate(benchmark::State& state) {
  const auto kind = AggregatorKind(state.range(0));
  const auto updates = five_updates();
  Dataset val;
  val.x = random_rows(256, 4);
  for (Eigen::Index i = 0; i < val.x.rows(); ++i) val.y.push_back(int(i % 4));
  AggregatorSpec spec;
  spec.kind = kind;
  Aggregator agg(spec, val);
  const auto prev = init_weights(MlpArchitecture{}, 99);
  for (auto _ : state) benchmark::DoNotOptimize(agg.aggregate(updates, prev));
  state.SetLabel(std::string(to_string(kind)));
}
BENCHMARK(BM_Aggregate)->DenseRange(0, 3);

}  // namespace
BENCHMARK_MAIN();
