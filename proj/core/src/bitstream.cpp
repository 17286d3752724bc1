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

#include "ttic/bitstream.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace ttic {

namespace {

void put_u16(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(uint8_t(v >> 8));
  out.push_back(uint8_t(v));
}
void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(uint8_t(v >> 24));
  out.push_back(uint8_t(v >> 16));
  out.push_back(uint8_t(v >> 8));
  out.push_back(uint8_t(v));
}

struct Reader {
  const std::vector<uint8_t>& buf;
  size_t pos = 0;
  uint8_t u8() {
    if (pos >= buf.size()) throw CoderError("bitstream: truncated header");
    return buf[pos++];
  }
  uint16_t u16() { return uint16_t(u8()) << 8 | u8(); }
  uint32_t u32() { return uint32_t(u16()) << 16 | u16(); }
  std::vector<uint8_t> bytes(size_t n) {
    if (pos + n > buf.size()) throw CoderError("bitstream: truncated payload");
    std::vector<uint8_t> out(buf.begin() + long(pos), buf.begin() + long(pos + n));
    pos += n;
    return out;
  }
};

}  // namespace

std::vector<uint8_t> serialize_bitstream(const Bitstream& b) {
  std::vector<uint8_t> out;
  out.reserve(b.total_bytes());
  out.push_back('T');
  out.push_back('T');
  out.push_back('I');
  out.push_back('C');
  out.push_back(b.header.version);
  out.push_back(b.header.mode);
  out.push_back(b.header.lambda_index);
  put_u16(out, b.header.padded_h);
  put_u16(out, b.header.padded_w);
  put_u16(out, b.header.orig_h);
  put_u16(out, b.header.orig_w);
  put_u32(out, uint32_t(b.z_bytes.size()));
  out.insert(out.end(), b.z_bytes.begin(), b.z_bytes.end());
  put_u32(out, uint32_t(b.y_bytes.size()));
  out.insert(out.end(), b.y_bytes.begin(), b.y_bytes.end());
  return out;
}

Bitstream parse_bitstream(const std::vector<uint8_t>& bytes) {
  Reader r{bytes};
  if (bytes.size() < 4 || bytes[0] != 'T' || bytes[1] != 'T' || bytes[2] != 'I' ||
      bytes[3] != 'C') {
    throw CoderError("bitstream: bad magic (expected TTIC)");
  }
  r.pos = 4;
  Bitstream b;
  b.header.version = r.u8();
  if (b.header.version != 1) {
    throw CoderError("bitstream: unsupported version " + std::to_string(b.header.version));
  }
  b.header.mode = r.u8();
  b.header.lambda_index = r.u8();
  b.header.padded_h = r.u16();
  b.header.padded_w = r.u16();
  b.header.orig_h = r.u16();
  b.header.orig_w = r.u16();
  const uint32_t zlen = r.u32();
  b.z_bytes = r.bytes(zlen);
  const uint32_t ylen = r.u32();
  b.y_bytes = r.bytes(ylen);
  return b;
}

void write_bitstream_file(const std::string& path, const Bitstream& b) {
  auto bytes = serialize_bitstream(b);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write bitstream: " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()), long(bytes.size()));
}

Bitstream read_bitstream_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read bitstream: " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                             std::istreambuf_iterator<char>());
  return parse_bitstream(bytes);
}

CodecCoder::CodecCoder(const BaseCodec<float>& codec) : codec_(codec) {
  z_coders_.resize(size_t(codec.config().cz));
  z_ready_.assign(size_t(codec.config().cz), false);
}

const IntSymbolCoder& CodecCoder::z_coder(int channel) const {
  if (!z_ready_[size_t(channel)]) {
    const auto& prior = codec_.z_prior();
    // Contiguous support covering every bin that earns its own count.
    const double threshold = 0.5 / 65536.0;
    int lo = 0, hi = 0;
    while (lo > -4096 && prior.bin_probability_value(channel, lo - 1) >= threshold) --lo;
    while (hi < 4096 && prior.bin_probability_value(channel, hi + 1) >= threshold) ++hi;
    std::vector<double> pmf;
    double mass = 0;
    for (int k = lo; k <= hi; ++k) {
      const double p = prior.bin_probability_value(channel, k);
      pmf.push_back(p);
      mass += p;
    }
    pmf.push_back(std::max(1.0 - mass, 1e-9));  // escape
    z_coders_[size_t(channel)] = IntSymbolCoder(CdfTable::from_pmf(pmf, 16), lo);
    z_ready_[size_t(channel)] = true;
  }
  return z_coders_[size_t(channel)];
}

Bitstream CodecCoder::compress(const ImageF& img, const TransferModel<float>* transfer,
                               uint8_t mode, uint8_t lambda_index) const {
  ImageF padded = pad_to_multiple(img, 64);
  const int ph = padded.pixels.dim(0), pw = padded.pixels.dim(1);
  auto x = constant(padded.pixels);

  StbPrompts<float> enc_prompts;
  if (transfer) enc_prompts = transfer->encoder_prompts(x);
  auto y = codec_.analysis(x, transfer ? &enc_prompts : nullptr);
  auto z = codec_.hyper_analysis(y);

  // z: plain rounding, factorized per-channel tables.
  const int zh = z->value.dim(0), zw = z->value.dim(1), zc = z->value.dim(2);
  Tensor<float> z_hat(z->value.shape());
  RangeEncoder zenc;
  double z_bits = 0;
  for (int i = 0; i < zh; ++i) {
    for (int j = 0; j < zw; ++j) {
      for (int c = 0; c < zc; ++c) {
        const int k = int(std::lround(double(z->value.at(i, j, c))));
        z_hat.at(i, j, c) = float(k);
        z_coder(c).encode(zenc, k);
        z_bits -= std::log2(codec_.z_prior().bin_probability_value(c, k));
      }
    }
  }

  auto gp = codec_.hyper_synthesis(constant(z_hat));
  const int yh = y->value.dim(0), yw = y->value.dim(1), yc = y->value.dim(2);
  RangeEncoder yenc;
  double y_bits = 0;
  for (int i = 0; i < yh; ++i) {
    for (int j = 0; j < yw; ++j) {
      for (int c = 0; c < yc; ++c) {
        const double mu = gp.mu->value.at(i, j, c);
        const double sg = gp.sigma->value.at(i, j, c);
        const int k = int(std::lround(double(y->value.at(i, j, c)) - mu));
        gauss_.encode(yenc, k, gauss_.scale_index(sg));
        const double p = std::max(normal_cdf((k + 0.5) / sg) - normal_cdf((k - 0.5) / sg),
                                  kProbFloor);
        y_bits -= std::log2(p);
      }
    }
  }

  last_estimate_ = {y_bits, z_bits};

  Bitstream b;
  b.header.mode = mode;
  b.header.lambda_index = lambda_index;
  b.header.padded_h = uint16_t(ph);
  b.header.padded_w = uint16_t(pw);
  b.header.orig_h = uint16_t(padded.orig_h);
  b.header.orig_w = uint16_t(padded.orig_w);
  b.z_bytes = zenc.finish();
  b.y_bytes = yenc.finish();
  return b;
}

ImageF CodecCoder::decompress(const Bitstream& b, const TransferModel<float>* transfer) const {
  if (b.header.mode != 0 && !transfer) {
    throw CoderError("bitstream: task mode " + std::to_string(b.header.mode) +
                     " requires the matching transfer bundle");
  }
  const int ph = b.header.padded_h, pw = b.header.padded_w;
  if (ph % 64 != 0 || pw % 64 != 0 || ph == 0 || pw == 0) {
    throw CoderError("bitstream: invalid padded dimensions");
  }
  const int zh = ph / 64, zw = pw / 64, zc = codec_.config().cz;
  Tensor<float> z_hat({zh, zw, zc});
  RangeDecoder zdec(b.z_bytes.data(), b.z_bytes.size());
  for (int i = 0; i < zh; ++i) {
    for (int j = 0; j < zw; ++j) {
      for (int c = 0; c < zc; ++c) {
        z_hat.at(i, j, c) = float(z_coder(c).decode(zdec));
      }
    }
  }

  auto gp = codec_.hyper_synthesis(constant(z_hat));
  const int yh = ph / 16, yw = pw / 16, yc = codec_.config().cy();
  Tensor<float> y_hat({yh, yw, yc});
  RangeDecoder ydec(b.y_bytes.data(), b.y_bytes.size());
  for (int i = 0; i < yh; ++i) {
    for (int j = 0; j < yw; ++j) {
      for (int c = 0; c < yc; ++c) {
        const double mu = gp.mu->value.at(i, j, c);
        const double sg = gp.sigma->value.at(i, j, c);
        const int k = gauss_.decode(ydec, gauss_.scale_index(sg));
        y_hat.at(i, j, c) = float(k + mu);
      }
    }
  }

  auto yv = constant(y_hat);
  StbPrompts<float> dec_prompts;
  if (transfer) dec_prompts = transfer->decoder_prompts(yv, ph, pw);
  auto x_hat = codec_.synthesis(yv, transfer ? &dec_prompts : nullptr);

  ImageF out;
  out.orig_h = b.header.orig_h;
  out.orig_w = b.header.orig_w;
  out.pixels = crop_to_original(x_hat->value, out.orig_h, out.orig_w);
  return out;
}

Tensor<double> bit_allocation_map(const Tensor<float>& y_hat, const Tensor<float>& mu,
                                  const Tensor<float>& sigma) {
  if (!y_hat.same_shape(mu) || !y_hat.same_shape(sigma)) {
    throw StructuralError("bit_allocation_map: shape mismatch");
  }
  const int yh = y_hat.dim(0), yw = y_hat.dim(1), yc = y_hat.dim(2);
  Tensor<double> latent({yh, yw});
  for (int i = 0; i < yh; ++i) {
    for (int j = 0; j < yw; ++j) {
      double bits = 0;
      for (int c = 0; c < yc; ++c) {
        const double s = sigma.at(i, j, c);
        const double d = double(y_hat.at(i, j, c)) - double(mu.at(i, j, c));
        const double p = std::max(normal_cdf((d + 0.5) / s) - normal_cdf((d - 0.5) / s),
                                  kProbFloor);
        bits -= std::log2(p);
      }
      latent.at(i, j) = bits;
    }
  }
  // Nearest-neighbour upsample by 16 with uniform spreading so the total is
  // conserved.
  Tensor<double> map({yh * 16, yw * 16});
  for (int i = 0; i < yh * 16; ++i) {
    for (int j = 0; j < yw * 16; ++j) {
      map.at(i, j) = latent.at(i / 16, j / 16) / 256.0;
    }
  }
  return map;
}

BitmapExport export_bit_allocation_png(const std::string& path, const Tensor<double>& map) {
  const int h = map.dim(0), w = map.dim(1);
  BitmapExport ex;
  ex.min_bits = map[0];
  ex.max_bits = map[0];
  for (int64_t i = 0; i < map.size(); ++i) {
    ex.min_bits = std::min(ex.min_bits, map[i]);
    ex.max_bits = std::max(ex.max_bits, map[i]);
  }
  const double span = ex.max_bits > ex.min_bits ? ex.max_bits - ex.min_bits : 1.0;
  std::vector<uint16_t> pix(static_cast<size_t>(map.size()));
  for (int64_t i = 0; i < map.size(); ++i) {
    pix[static_cast<size_t>(i)] =
        static_cast<uint16_t>(std::lround((map[i] - ex.min_bits) / span * 65535.0));
  }
  write_png_gray16(path, w, h, pix);
  return ex;
}

}  // namespace ttic
