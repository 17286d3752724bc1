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

#ifndef TTIC_CODER_HPP_
#define TTIC_CODER_HPP_

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace ttic {

class CoderError : public std::runtime_error {
 public:
  explicit CoderError(const std::string& what) : std::runtime_error(what) {}
};

// Quantized cumulative-frequency table: counts sum to exactly 2^precision and
// every symbol keeps a nonzero count.
class CdfTable {
 public:
  static constexpr int kMaxPrecision = 16;

  CdfTable() = default;

  // pmf over a dense alphabet [0, pmf.size()). Throws CoderError if the
  // alphabet cannot fit the precision or the pmf is invalid.
  static CdfTable from_pmf(const std::vector<double>& pmf, int precision);

  int size() const { return static_cast<int>(cum_.size()) - 1; }
  int precision() const { return precision_; }
  uint32_t total() const { return cum_.back(); }
  uint32_t cum(int s) const { return cum_[static_cast<size_t>(s)]; }
  uint32_t freq(int s) const { return cum_[static_cast<size_t>(s) + 1] - cum_[s]; }
  double probability(int s) const { return double(freq(s)) / double(total()); }

  // Symbol whose [cum, cum+freq) interval contains f.
  int find(uint32_t f) const;

 private:
  std::vector<uint32_t> cum_;
  int precision_ = 0;
};

// Byte-oriented range coder (32-bit range, 64-bit low with carry cache).
class RangeEncoder {
 public:
  void encode(const CdfTable& table, int symbol);
  void encode_raw(uint32_t value, int bits);
  // Flushes and returns the stream. The encoder is spent afterwards.
  std::vector<uint8_t> finish();

 private:
  static constexpr uint32_t kTop = 1u << 24;
  void shift_low();

  uint64_t low_ = 0;
  uint32_t range_ = 0xFFFFFFFFu;
  uint8_t cache_ = 0;
  uint64_t cache_size_ = 1;
  std::vector<uint8_t> out_;
};

class RangeDecoder {
 public:
  RangeDecoder(const uint8_t* data, size_t len);
  int decode(const CdfTable& table);
  uint32_t decode_raw(int bits);

 private:
  static constexpr uint32_t kTop = 1u << 24;
  uint8_t next_byte();
  void normalize();

  const uint8_t* data_ = nullptr;
  size_t len_ = 0;
  size_t pos_ = 0;
  uint32_t code_ = 0;
  uint32_t range_ = 0xFFFFFFFFu;
};

// Zero-mean Gaussian integer-symbol tables over a 64-entry log-spaced scale
// grid, with an escape symbol backed by raw 32-bit coding for outliers.
class GaussianSymbolCoder {
 public:
  static constexpr int kScaleLevels = 64;
  static constexpr double kScaleMin = 0.11;
  static constexpr double kScaleMax = 256.0;

  explicit GaussianSymbolCoder(int precision = 16);

  // Smallest grid index whose scale is >= sigma (last index if beyond).
  int scale_index(double sigma) const;
  double grid_scale(int index) const { return scales_[static_cast<size_t>(index)]; }

  void encode(RangeEncoder& enc, int value, int scale_idx) const;
  int decode(RangeDecoder& dec, int scale_idx) const;

  const CdfTable& table(int scale_idx) const;
  int support(int scale_idx) const;  // symbols cover [-support, support]

 private:
  int precision_;
  std::vector<double> scales_;
  mutable std::vector<CdfTable> tables_;
  mutable std::vector<int> supports_;
};

// Table over a contiguous integer support [lo, hi] plus a trailing escape
// symbol; values outside the support are escape-coded with 32 raw bits
// (zigzag). Used for the factorized prior channels.
class IntSymbolCoder {
 public:
  IntSymbolCoder() = default;
  IntSymbolCoder(CdfTable table, int lo) : table_(std::move(table)), lo_(lo) {}

  void encode(RangeEncoder& enc, int value) const;
  int decode(RangeDecoder& dec) const;
  const CdfTable& table() const { return table_; }
  int lo() const { return lo_; }

 private:
  CdfTable table_;
  int lo_ = 0;
};

inline uint32_t zigzag_encode(int v) {
  return (static_cast<uint32_t>(v) << 1) ^ static_cast<uint32_t>(v >> 31);
}
inline int zigzag_decode(uint32_t u) {
  return static_cast<int>((u >> 1) ^ (~(u & 1) + 1));
}

}  // namespace ttic

#endif  // TTIC_CODER_HPP_
