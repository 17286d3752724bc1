#include <benchmark/benchmark.h>

#include "ttic/codec.hpp"

using namespace ttic;

namespace {

CodecConfig bench_config() {
  CodecConfig cc;
  cc.depths = {1, 1, 2, 1};
  cc.widths = {8, 12, 16, 24};
  cc.window_size = 4;
  cc.head_dim = 8;
  cc.cz = 16;
  cc.hyper_width = 16;
  cc.hyper_depth = 1;
  return cc;
}

}  // namespace

static void BM_AnalysisForward(benchmark::State& state) {
  BaseCodec<float> codec(bench_config(), 1);
  Rng rng(2);
  Tensor<float> img({int(state.range(0)), int(state.range(0)), 3});
  for (int64_t i = 0; i < img.size(); ++i) img[i] = float(rng.uniform());
  auto x = make_var(img);
  for (auto _ : state) {
    auto y = codec.analysis(x);
    benchmark::DoNotOptimize(y->value.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0));
}
BENCHMARK(BM_AnalysisForward)->Arg(64)->Arg(128);

static void BM_RoundTripForward(benchmark::State& state) {
  BaseCodec<float> codec(bench_config(), 3);
  Rng rng(4);
  Tensor<float> img({64, 64, 3});
  for (int64_t i = 0; i < img.size(); ++i) img[i] = float(rng.uniform());
  auto x = make_var(img);
  for (auto _ : state) {
    auto y = codec.analysis(x);
    auto z = codec.hyper_analysis(y);
    auto gp = codec.hyper_synthesis(quantize(z, QuantMode::kRound));
    auto yq = quantize(y, QuantMode::kRound, gp.mu);
    auto xh = codec.synthesis(yq);
    benchmark::DoNotOptimize(xh->value.data());
  }
  state.SetItemsProcessed(state.iterations() * 64 * 64);
}
BENCHMARK(BM_RoundTripForward);

BENCHMARK_MAIN();
