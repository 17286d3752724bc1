#include <doctest.h>

#include <cmath>

#include "ttic/coder.hpp"
#include "ttic/rng.hpp"

using namespace ttic;

TEST_CASE("cdf table basics") {
  SUBCASE("uniform over 4 symbols gives quarters of 65536") {
    auto t = CdfTable::from_pmf({0.25, 0.25, 0.25, 0.25}, 16);
    CHECK(t.total() == 65536);
    for (int s = 0; s < 4; ++s) CHECK(t.freq(s) == 16384);
  }
  SUBCASE("gaussian table puts the largest count on the mode") {
    std::vector<double> pmf;
    for (int k = -8; k <= 8; ++k) {
      pmf.push_back(std::exp(-0.5 * k * k));
    }
    auto t = CdfTable::from_pmf(pmf, 16);
    for (int s = 0; s < t.size(); ++s) {
      CHECK(t.freq(8) >= t.freq(s));
    }
  }
  SUBCASE("renormalized frequencies match the source within 2^-precision") {
    Rng rng(77);
    for (int trial = 0; trial < 20; ++trial) {
      const int n = 2 + int(rng.below(60));
      std::vector<double> pmf(static_cast<size_t>(n));
      double sum = 0;
      for (auto& p : pmf) {
        p = rng.uniform(0.001, 1.0);
        sum += p;
      }
      for (auto& p : pmf) p /= sum;
      auto t = CdfTable::from_pmf(pmf, 16);
      for (int s = 0; s < n; ++s) {
        CHECK(std::abs(t.probability(s) - pmf[size_t(s)]) <= 1.0 / 65536.0 + 1e-12);
      }
    }
  }
  SUBCASE("every symbol keeps a nonzero count") {
    auto t = CdfTable::from_pmf({1.0, 0.0, 0.0, 1e-300}, 16);
    for (int s = 0; s < 4; ++s) CHECK(t.freq(s) >= 1);
    CHECK(t.total() == 65536);
  }
  SUBCASE("alphabet too large for the precision is rejected") {
    std::vector<double> pmf(300, 1.0);
    CHECK_THROWS_AS(CdfTable::from_pmf(pmf, 8), CoderError);
  }
  SUBCASE("find is the inverse of cum") {
    auto t = CdfTable::from_pmf({0.7, 0.1, 0.15, 0.05}, 12);
    for (int s = 0; s < 4; ++s) {
      CHECK(t.find(t.cum(s)) == s);
      CHECK(t.find(t.cum(s) + t.freq(s) - 1) == s);
    }
  }
}

TEST_CASE("range coder round trips") {
  SUBCASE("empty sequence round-trips as a header-only stream") {
    RangeEncoder enc;
    auto bytes = enc.finish();
    CHECK(bytes.size() <= 5);
    RangeDecoder dec(bytes.data(), bytes.size());  // must construct fine
  }
  SUBCASE("known table, 1e5 symbols, exact identity and Shannon bound") {
    Rng rng(123);
    std::vector<double> pmf = {0.5, 0.2, 0.15, 0.1, 0.04, 0.01};
    auto t = CdfTable::from_pmf(pmf, 16);
    std::vector<int> symbols(100000);
    double shannon_bits = 0;
    RangeEncoder enc;
    for (auto& s : symbols) {
      const double u = rng.uniform();
      double acc = 0;
      s = 0;
      for (size_t i = 0; i < pmf.size(); ++i) {
        acc += pmf[i];
        if (u < acc) {
          s = int(i);
          break;
        }
      }
      enc.encode(t, s);
      shannon_bits -= std::log2(t.probability(s));
    }
    auto bytes = enc.finish();
    CHECK(double(bytes.size()) * 8 <= shannon_bits * 1.01 + 32 * 8);
    RangeDecoder dec(bytes.data(), bytes.size());
    for (int s : symbols) REQUIRE(dec.decode(t) == s);
  }
  SUBCASE("raw bits round trip") {
    RangeEncoder enc;
    Rng rng(5);
    std::vector<uint32_t> values(500);
    for (auto& v : values) v = uint32_t(rng.next_u64());
    for (auto v : values) enc.encode_raw(v, 32);
    auto bytes = enc.finish();
    RangeDecoder dec(bytes.data(), bytes.size());
    for (auto v : values) REQUIRE(dec.decode_raw(32) == v);
  }
  SUBCASE("interleaved tables and raw bits") {
    auto t1 = CdfTable::from_pmf({0.9, 0.1}, 14);
    auto t2 = CdfTable::from_pmf({0.2, 0.2, 0.6}, 16);
    RangeEncoder enc;
    enc.encode(t1, 0);
    enc.encode_raw(0xDEADBEEF, 32);
    enc.encode(t2, 2);
    enc.encode(t1, 1);
    enc.encode_raw(5, 3);
    auto bytes = enc.finish();
    RangeDecoder dec(bytes.data(), bytes.size());
    CHECK(dec.decode(t1) == 0);
    CHECK(dec.decode_raw(32) == 0xDEADBEEF);
    CHECK(dec.decode(t2) == 2);
    CHECK(dec.decode(t1) == 1);
    CHECK(dec.decode_raw(3) == 5);
  }
  SUBCASE("out-of-alphabet symbol is an encode error") {
    auto t = CdfTable::from_pmf({0.5, 0.5}, 8);
    RangeEncoder enc;
    CHECK_THROWS_AS(enc.encode(t, 7), CoderError);
  }
  SUBCASE("truncated stream is a decode error") {
    auto t = CdfTable::from_pmf({0.01, 0.99}, 16);
    RangeEncoder enc;
    Rng rng(9);
    for (int i = 0; i < 2000; ++i) enc.encode(t, int(rng.below(2)));
    auto bytes = enc.finish();
    bytes.resize(bytes.size() / 2);
    RangeDecoder dec(bytes.data(), bytes.size());
    bool threw = false;
    try {
      for (int i = 0; i < 2000; ++i) dec.decode(t);
    } catch (const CoderError&) {
      threw = true;
    }
    CHECK(threw);
  }
}

TEST_CASE("range coder fuzz over random tables") {
  Rng rng(2024);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 2 + int(rng.below(200));
    std::vector<double> pmf(static_cast<size_t>(n));
    double sum = 0;
    for (auto& p : pmf) {
      p = std::pow(rng.uniform(), 3.0) + 1e-6;
      sum += p;
    }
    for (auto& p : pmf) p /= sum;
    auto t = CdfTable::from_pmf(pmf, 16);
    const int count = 2000 + int(rng.below(3000));
    std::vector<int> symbols(static_cast<size_t>(count));
    RangeEncoder enc;
    double shannon = 0;
    for (auto& s : symbols) {
      s = int(rng.below(uint64_t(n)));
      enc.encode(t, s);
      shannon -= std::log2(t.probability(s));
    }
    auto bytes = enc.finish();
    REQUIRE(double(bytes.size()) * 8 <= shannon * 1.01 + 32 * 8);
    RangeDecoder dec(bytes.data(), bytes.size());
    for (int s : symbols) REQUIRE(dec.decode(t) == s);
  }
}

TEST_CASE("gaussian symbol coder with escapes") {
  GaussianSymbolCoder gc;
  SUBCASE("scale grid covers the configured range and rounds up") {
    CHECK(gc.grid_scale(0) == doctest::Approx(0.11));
    CHECK(gc.grid_scale(63) == doctest::Approx(256.0));
    const int idx = gc.scale_index(1.0);
    CHECK(gc.grid_scale(idx) >= 1.0);
    CHECK(gc.grid_scale(std::max(0, idx - 1)) <= 1.0);
    CHECK(gc.scale_index(1e9) == 63);
    CHECK(gc.scale_index(1e-9) == 0);
  }
  SUBCASE("values inside and outside the support round trip") {
    RangeEncoder enc;
    const int idx = gc.scale_index(2.0);
    std::vector<int> values = {0, 1, -1, 3, -7, 100000, -99999, 2, 0};
    for (int v : values) gc.encode(enc, v, idx);
    auto bytes = enc.finish();
    RangeDecoder dec(bytes.data(), bytes.size());
    for (int v : values) REQUIRE(gc.decode(dec, idx) == v);
  }
  SUBCASE("mixed scales round trip") {
    Rng rng(31);
    RangeEncoder enc;
    std::vector<std::pair<int, int>> data;
    for (int i = 0; i < 5000; ++i) {
      const int idx = int(rng.below(64));
      const double sigma = gc.grid_scale(idx);
      const int v = int(std::lround(rng.normal() * sigma));
      data.emplace_back(v, idx);
      gc.encode(enc, v, idx);
    }
    auto bytes = enc.finish();
    RangeDecoder dec(bytes.data(), bytes.size());
    for (auto [v, idx] : data) REQUIRE(gc.decode(dec, idx) == v);
  }
}

TEST_CASE("zigzag mapping is a bijection on test values") {
  for (int v : {0, 1, -1, 2, -2, 1000000, -1000000, INT32_MAX, INT32_MIN}) {
    CHECK(zigzag_decode(zigzag_encode(v)) == v);
  }
}
