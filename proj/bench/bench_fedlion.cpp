// Parallel kernels and round engine against their serial reference paths.

#include <benchmark/benchmark.h>

#include "fedlion/federated.hpp"
#include "fedlion/reference.hpp"
#include "fedlion/rng.hpp"
#include "fedlion/tensor.hpp"

using namespace fedlion;

namespace {

ParamVector random_vector(std::size_t d, std::uint64_t seed) {
  auto rng = CounterRng::keyed(seed, StreamTag::data);
  ParamVector v(d);
  for (auto& x : v) x = rng.normal();
  return v;
}

template <bool Parallel>
void BM_LionStep(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  ParamVector x = random_vector(d, 1), m = random_vector(d, 2);
  const ParamVector g = random_vector(d, 3);
  std::vector<std::int32_t> delta(d, 0);
  for (auto _ : state) {
    if constexpr (Parallel) {
      lion_step(x.span(), m.span(), delta, g.span(), 1e-3, 0.9, 0.99);
    } else {
      reference::lion_step(x.span(), m.span(), delta, g.span(), 1e-3, 0.9, 0.99);
    }
    benchmark::DoNotOptimize(x.data());
  }
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * d * 36));
}
BENCHMARK(BM_LionStep<false>)->Name("lion_step/serial")->Range(1 << 12, 1 << 22);
BENCHMARK(BM_LionStep<true>)->Name("lion_step/parallel")->Range(1 << 12, 1 << 22);

template <bool Parallel>
void BM_MeanReduce(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  std::vector<ParamVector> vs;
  for (std::uint64_t k = 0; k < 10; ++k) vs.push_back(random_vector(d, k));
  for (auto _ : state) {
    auto r = Parallel ? mean_reduce(vs) : reference::mean_reduce(vs);
    benchmark::DoNotOptimize(r.data());
  }
}
BENCHMARK(BM_MeanReduce<false>)->Name("mean_reduce/serial")->Range(1 << 12, 1 << 20);
BENCHMARK(BM_MeanReduce<true>)->Name("mean_reduce/parallel")->Range(1 << 12, 1 << 20);

void BM_Rounds(benchmark::State& state) {
  ClassificationOptions o;
  const auto data = make_classification(o, 1);
  const auto labels = data.labels();
  Federation fed;
  fed.shards = make_shards(data, dirichlet_partition(labels, 20, 1.0, 1), 1);
  fed.objective = std::make_shared<ModelObjective>(ModelArch::mlp(o.feature_dim, 32, 10));
  FederatedConfig c;
  c.algorithm = static_cast<Algorithm>(state.range(1));
  c.rounds = 10;
  c.local_steps = 5;
  c.clients_per_round = 5;
  RunOptions ro;
  ro.policy = state.range(0) ? ExecutionPolicy::parallel : ExecutionPolicy::serial;
  for (auto _ : state) benchmark::DoNotOptimize(run_federation(fed, c, ro).records.size());
  state.SetLabel(std::string(state.range(0) ? "parallel " : "serial ") + to_string(c.algorithm));
}
BENCHMARK(BM_Rounds)
    ->ArgsProduct({{0, 1}, {0, 1, 2}})
    ->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
