#include <benchmark/benchmark.h>

#include <vector>

#include "gpz/dataset.hpp"
#include "gpz/entropy_bounds.hpp"
#include "gpz/micronet.hpp"
#include "gpz/repr_stats.hpp"
#include "gpz/rng.hpp"

namespace {

gpz::MlpModel standard_model() {
  const std::vector<std::size_t> widths{16, 32, 32, 16, 8};
  return gpz::init_model(widths, 4, 1);
}

void BM_Forward(benchmark::State& state) {
  const auto model = standard_model();
  const auto data = gpz::gaussian_mixture(4, 2, 16, 0.05, 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(gpz::forward(model, data.row(0)));
  }
}
BENCHMARK(BM_Forward);

void BM_TrainEpoch(benchmark::State& state) {
  const auto data = gpz::gaussian_mixture(4, static_cast<std::size_t>(state.range(0)), 16, 0.05, 3);
  gpz::TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch = 32;
  cfg.lr = 0.05;
  for (auto _ : state) {
    benchmark::DoNotOptimize(gpz::train(standard_model(), data, cfg));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(data.size()));
}
BENCHMARK(BM_TrainEpoch)->Arg(50)->Arg(200);

void BM_ClassStats(benchmark::State& state) {
  const auto data = gpz::gaussian_mixture(4, static_cast<std::size_t>(state.range(0)), 16, 0.05, 3);
  const std::vector<std::size_t> layers{0};
  const auto acts = gpz::extract(standard_model(), data, layers);
  for (auto _ : state) {
    benchmark::DoNotOptimize(gpz::class_stats(acts.layers.front()));
  }
}
BENCHMARK(BM_ClassStats)->Arg(200)->Arg(2000);

void BM_QuantizedEntropy(benchmark::State& state) {
  gpz::Rng rng(5);
  std::vector<double> samples(static_cast<std::size_t>(state.range(0)));
  for (auto& s : samples) s = rng.normal();
  for (auto _ : state) {
    benchmark::DoNotOptimize(gpz::quantized_entropy(samples, 1, 0.01));
  }
}
BENCHMARK(BM_QuantizedEntropy)->Arg(10000)->Arg(100000);

}  // namespace
BENCHMARK_MAIN();
