#include <benchmark/benchmark.h>

#include <cmath>

#include "ttic/coder.hpp"
#include "ttic/rng.hpp"

using namespace ttic;

static void BM_RangeEncode(benchmark::State& state) {
  std::vector<double> pmf;
  for (int k = -12; k <= 12; ++k) pmf.push_back(std::exp(-0.5 * k * k / 9.0));
  auto table = CdfTable::from_pmf(pmf, 16);
  Rng rng(1);
  std::vector<int> symbols(65536);
  for (auto& s : symbols) s = int(rng.below(pmf.size()));
  for (auto _ : state) {
    RangeEncoder enc;
    for (int s : symbols) enc.encode(table, s);
    auto bytes = enc.finish();
    benchmark::DoNotOptimize(bytes.data());
  }
  state.SetItemsProcessed(state.iterations() * int64_t(symbols.size()));
}
BENCHMARK(BM_RangeEncode);

static void BM_RangeRoundTrip(benchmark::State& state) {
  std::vector<double> pmf;
  for (int k = -12; k <= 12; ++k) pmf.push_back(std::exp(-0.5 * k * k / 9.0));
  auto table = CdfTable::from_pmf(pmf, 16);
  Rng rng(2);
  std::vector<int> symbols(65536);
  for (auto& s : symbols) s = int(rng.below(pmf.size()));
  for (auto _ : state) {
    RangeEncoder enc;
    for (int s : symbols) enc.encode(table, s);
    auto bytes = enc.finish();
    RangeDecoder dec(bytes.data(), bytes.size());
    int acc = 0;
    for (size_t i = 0; i < symbols.size(); ++i) acc += dec.decode(table);
    benchmark::DoNotOptimize(acc);
  }
  state.SetItemsProcessed(state.iterations() * int64_t(symbols.size()));
}
BENCHMARK(BM_RangeRoundTrip);
