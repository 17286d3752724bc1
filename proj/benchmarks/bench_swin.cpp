#include <benchmark/benchmark.h>

#include "ttic/swin.hpp"

using namespace ttic;

namespace {

Tensor<float> random_map(int h, int w, int c, uint64_t seed) {
  Rng rng(seed);
  Tensor<float> t({h, w, c});
  for (int64_t i = 0; i < t.size(); ++i) t[i] = float(rng.uniform(-1, 1));
  return t;
}

}  // namespace

static void BM_WindowPartition(benchmark::State& state) {
  const int hw = int(state.range(0));
  auto x = make_var(random_map(hw, hw, 32, 1));
  for (auto _ : state) {
    auto w = window_partition(x, 8);
    benchmark::DoNotOptimize(w->value.data());
  }
  state.SetItemsProcessed(state.iterations() * hw * hw);
}
BENCHMARK(BM_WindowPartition)->Arg(64)->Arg(128)->Arg(256);

static void BM_SwinLayerForward(benchmark::State& state) {
  const int hw = int(state.range(0));
  ParamStore<float> ps;
  Rng rng(2);
  SwinLayer<float> layer(ps, "l", 32, 2, 8, false, rng);
  auto x = make_var(random_map(hw, hw, 32, 3));
  for (auto _ : state) {
    auto out = layer.forward(x, nullptr, nullptr, nullptr, false, false);
    benchmark::DoNotOptimize(out.features->value.data());
  }
  state.SetItemsProcessed(state.iterations() * hw * hw);
}
BENCHMARK(BM_SwinLayerForward)->Arg(32)->Arg(64);

static void BM_SwinLayerPrompted(benchmark::State& state) {
  const int hw = int(state.range(0));
  ParamStore<float> ps;
  Rng rng(4);
  SwinLayer<float> layer(ps, "l", 32, 2, 8, false, rng);
  auto x = make_var(random_map(hw, hw, 32, 5));
  auto field = make_var(random_map(hw / 2, hw / 2, 32, 6));
  for (auto _ : state) {
    auto out = layer.forward(x, field, nullptr, nullptr, false, false);
    benchmark::DoNotOptimize(out.features->value.data());
  }
  state.SetItemsProcessed(state.iterations() * hw * hw);
}
BENCHMARK(BM_SwinLayerPrompted)->Arg(32)->Arg(64);
