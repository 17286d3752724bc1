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

#ifndef TTIC_BITSTREAM_HPP_
#define TTIC_BITSTREAM_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "ttic/coder.hpp"
#include "ttic/codec.hpp"
#include "ttic/image.hpp"
#include "ttic/prompt.hpp"

namespace ttic {

// Self-describing stream container. Layout (big-endian):
//   magic "TTIC" (4B), version u8, mode u8 (0 = human, >= 1 = task id),
//   lambda index u8, padded h/w u16 x2, original h/w u16 x2,
//   z length u32, z bytes, y length u32, y bytes.
struct BitstreamHeader {
  uint8_t version = 1;
  uint8_t mode = 0;
  uint8_t lambda_index = 0;
  uint16_t padded_h = 0, padded_w = 0;
  uint16_t orig_h = 0, orig_w = 0;
};

struct Bitstream {
  BitstreamHeader header;
  std::vector<uint8_t> z_bytes;
  std::vector<uint8_t> y_bytes;

  size_t total_bytes() const { return 15 + 8 + z_bytes.size() + y_bytes.size(); }
  double bpp() const {
    return double(total_bytes()) * 8.0 / (double(header.orig_h) * double(header.orig_w));
  }
};

std::vector<uint8_t> serialize_bitstream(const Bitstream& b);
Bitstream parse_bitstream(const std::vector<uint8_t>& bytes);
void write_bitstream_file(const std::string& path, const Bitstream& b);
Bitstream read_bitstream_file(const std::string& path);

// Binds a codec (and optionally a transfer bundle) for actual entropy coding.
// Encoders/decoders are stateful per stream; a CodecCoder itself only caches
// read-only tables.
class CodecCoder {
 public:
  explicit CodecCoder(const BaseCodec<float>& codec);

  // Estimated rates from the last compress() call, in bits.
  struct RateEstimate {
    double y_bits = 0;
    double z_bits = 0;
  };

  Bitstream compress(const ImageF& img, const TransferModel<float>* transfer = nullptr,
                     uint8_t mode = 0, uint8_t lambda_index = 0) const;
  ImageF decompress(const Bitstream& b, const TransferModel<float>* transfer = nullptr) const;

  RateEstimate last_estimate() const { return last_estimate_; }

 private:
  const IntSymbolCoder& z_coder(int channel) const;

  const BaseCodec<float>& codec_;
  GaussianSymbolCoder gauss_;
  mutable std::vector<IntSymbolCoder> z_coders_;
  mutable std::vector<bool> z_ready_;
  mutable RateEstimate last_estimate_;
};

// Per-pixel bit map: channel-summed -log2 p at each latent position, spread
// uniformly over the corresponding 16x16 pixel block so the map total equals
// the estimated y rate.
Tensor<double> bit_allocation_map(const Tensor<float>& y_hat, const Tensor<float>& mu,
                                  const Tensor<float>& sigma);

struct BitmapExport {
  double min_bits = 0;
  double max_bits = 0;
};
// 16-bit grayscale normalized to [min, max]; returns the range for the JSON
// sidecar.
BitmapExport export_bit_allocation_png(const std::string& path, const Tensor<double>& map);

}  // namespace ttic

#endif  // TTIC_BITSTREAM_HPP_
