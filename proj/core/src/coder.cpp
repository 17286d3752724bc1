// Copyright (c) the ttic project authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "ttic/coder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ttic {

int CdfTable::find(uint32_t f) const {
  // cum_ is strictly increasing; binary search for the containing interval.
  int lo = 0, hi = size() - 1;
  while (lo < hi) {
    const int mid = (lo + hi + 1) / 2;
    if (cum_[static_cast<size_t>(mid)] <= f) {
      lo = mid;
    } else {
      hi = mid - 1;
    }
  }
  return lo;
}

void RangeEncoder::shift_low() {
  if (static_cast<uint32_t>(low_) < 0xFF000000u || (low_ >> 32) != 0) {
    uint8_t temp = cache_;
    const uint8_t carry = static_cast<uint8_t>(low_ >> 32);
    do {
      out_.push_back(static_cast<uint8_t>(temp + carry));
      temp = 0xFF;
    } while (--cache_size_ != 0);
    cache_ = static_cast<uint8_t>(static_cast<uint32_t>(low_) >> 24);
  }
  ++cache_size_;
  low_ = static_cast<uint64_t>(static_cast<uint32_t>(low_)) << 8 & 0xFFFFFFFFull;
}

void RangeEncoder::encode(const CdfTable& table, int symbol) {
  if (symbol < 0 || symbol >= table.size()) {
    throw CoderError("range encoder: symbol " + std::to_string(symbol) +
                     " outside alphabet of size " + std::to_string(table.size()));
  }
  const uint32_t r = range_ / table.total();
  low_ += static_cast<uint64_t>(table.cum(symbol)) * r;
  range_ = r * table.freq(symbol);
  while (range_ < kTop) {
    shift_low();
    range_ <<= 8;
  }
}

void RangeEncoder::encode_raw(uint32_t value, int bits) {
  for (int b = bits - 1; b >= 0; --b) {
    range_ >>= 1;
    if ((value >> b) & 1u) low_ += range_;
    while (range_ < kTop) {
      shift_low();
      range_ <<= 8;
    }
  }
}

std::vector<uint8_t> RangeEncoder::finish() {
  for (int i = 0; i < 5; ++i) shift_low();
  return std::move(out_);
}

RangeDecoder::RangeDecoder(const uint8_t* data, size_t len) : data_(data), len_(len) {
  for (int i = 0; i < 5; ++i) code_ = (code_ << 8) | next_byte();
}

uint8_t RangeDecoder::next_byte() {
  if (pos_ >= len_) throw CoderError("range decoder: truncated stream");
  return data_[pos_++];
}

void RangeDecoder::normalize() {
  while (range_ < kTop) {
    code_ = (code_ << 8) | next_byte();
    range_ <<= 8;
  }
}

int RangeDecoder::decode(const CdfTable& table) {
  const uint32_t r = range_ / table.total();
  const uint32_t f = std::min(code_ / r, table.total() - 1);
  const int symbol = table.find(f);
  code_ -= table.cum(symbol) * r;
  range_ = r * table.freq(symbol);
  normalize();
  return symbol;
}

uint32_t RangeDecoder::decode_raw(int bits) {
  uint32_t v = 0;
  for (int b = 0; b < bits; ++b) {
    range_ >>= 1;
    const uint32_t bit = code_ >= range_ ? 1u : 0u;
    if (bit) code_ -= range_;
    v = (v << 1) | bit;
    normalize();
  }
  return v;
}

GaussianSymbolCoder::GaussianSymbolCoder(int precision) : precision_(precision) {
  scales_.resize(kScaleLevels);
  const double lmin = std::log(kScaleMin), lmax = std::log(kScaleMax);
  for (int i = 0; i < kScaleLevels; ++i) {
    scales_[static_cast<size_t>(i)] =
        std::exp(lmin + (lmax - lmin) * double(i) / double(kScaleLevels - 1));
  }
  tables_.resize(kScaleLevels);
  supports_.resize(kScaleLevels, -1);
}

int GaussianSymbolCoder::scale_index(double sigma) const {
  int lo = 0, hi = kScaleLevels - 1;
  while (lo < hi) {
    const int mid = (lo + hi) / 2;
    if (scales_[static_cast<size_t>(mid)] >= sigma) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  return lo;
}

namespace {

double gaussian_bin(double k, double sigma) {
  auto cdf = [](double x) { return 0.5 * std::erfc(-x * 0.70710678118654752440); };
  return cdf((k + 0.5) / sigma) - cdf((k - 0.5) / sigma);
}

}  // namespace

const CdfTable& GaussianSymbolCoder::table(int scale_idx) const {
  auto& t = tables_[static_cast<size_t>(scale_idx)];
  if (supports_[static_cast<size_t>(scale_idx)] < 0) {
    const double sigma = scales_[static_cast<size_t>(scale_idx)];
    // Keep only bins that earn a count on their own; the rest go to escape.
    const double threshold = 0.5 / double(1u << precision_);
    int support = 0;
    while (gaussian_bin(support + 1, sigma) >= threshold && 2 * (support + 1) + 2 < (1 << precision_)) {
      ++support;
    }
    std::vector<double> pmf(static_cast<size_t>(2 * support + 2), 0.0);
    double mass = 0.0;
    for (int k = -support; k <= support; ++k) {
      const double p = gaussian_bin(k, sigma);
      pmf[static_cast<size_t>(k + support)] = p;
      mass += p;
    }
    pmf.back() = std::max(1.0 - mass, 1e-9);  // escape
    t = CdfTable::from_pmf(pmf, precision_);
    supports_[static_cast<size_t>(scale_idx)] = support;
  }
  return t;
}

int GaussianSymbolCoder::support(int scale_idx) const {
  table(scale_idx);
  return supports_[static_cast<size_t>(scale_idx)];
}

void GaussianSymbolCoder::encode(RangeEncoder& enc, int value, int scale_idx) const {
  const CdfTable& t = table(scale_idx);
  const int sup = supports_[static_cast<size_t>(scale_idx)];
  if (value >= -sup && value <= sup) {
    enc.encode(t, value + sup);
  } else {
    enc.encode(t, 2 * sup + 1);  // escape
    enc.encode_raw(zigzag_encode(value), 32);
  }
}

int GaussianSymbolCoder::decode(RangeDecoder& dec, int scale_idx) const {
  const CdfTable& t = table(scale_idx);
  const int sup = supports_[static_cast<size_t>(scale_idx)];
  const int symbol = dec.decode(t);
  if (symbol == 2 * sup + 1) {
    return zigzag_decode(dec.decode_raw(32));
  }
  return symbol - sup;
}

void IntSymbolCoder::encode(RangeEncoder& enc, int value) const {
  const int n = table_.size() - 1;  // last symbol is escape
  const int idx = value - lo_;
  if (idx >= 0 && idx < n) {
    enc.encode(table_, idx);
  } else {
    enc.encode(table_, n);
    enc.encode_raw(zigzag_encode(value), 32);
  }
}

int IntSymbolCoder::decode(RangeDecoder& dec) const {
  const int n = table_.size() - 1;
  const int symbol = dec.decode(table_);
  if (symbol == n) return zigzag_decode(dec.decode_raw(32));
  return symbol + lo_;
}

}  // namespace ttic
