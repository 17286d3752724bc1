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

#ifndef TTIC_CODEC_HPP_
#define TTIC_CODEC_HPP_

#include <map>
#include <string>
#include <vector>

#include "ttic/entropy.hpp"
#include "ttic/swin.hpp"

namespace ttic {

// Four conv+STB encoder stages (x16 downsampling), mirrored decoder, and a
// two-stage hyper pair (x4 more). Stage depths/widths are configurable; the
// defaults give the 192/128-channel latent pair.
struct CodecConfig {
  std::vector<int> depths{2, 2, 6, 2};
  std::vector<int> widths{64, 96, 128, 192};
  int window_size = 8;
  int head_dim = 32;
  int cz = 128;
  int hyper_width = 128;
  int hyper_depth = 2;
  double sigma_floor = 1e-6;

  int cy() const { return widths.back(); }
  int heads(int width) const { return std::max(1, width / head_dim); }

  void validate() const {
    if (depths.size() != 4 || widths.size() != 4) {
      throw StructuralError("codec config: exactly four encoder stages required");
    }
    if ((window_size & (window_size - 1)) != 0 || window_size < 1) {
      throw StructuralError("codec config: window size must be a power of two");
    }
    for (int w : widths) {
      if (w % heads(w) != 0) {
        throw StructuralError("codec config: width " + std::to_string(w) +
                              " not divisible across heads");
      }
    }
    if (hyper_width % heads(hyper_width) != 0 || cz % heads(cz) != 0) {
      throw StructuralError("codec config: hyper widths not divisible across heads");
    }
  }
};

enum class QuantMode { kNoise, kRound, kSte };

// Uniform quantization surrogates. noise mode needs a caller-supplied noise
// tensor (uniform in [-0.5, 0.5)); round/ste take an optional centering
// offset. round carries no gradient, ste has identity gradient.
template <typename T>
Var<T> quantize(const Var<T>& v, QuantMode mode, const Var<T>& offset = nullptr,
                const Tensor<T>* noise = nullptr) {
  switch (mode) {
    case QuantMode::kNoise: {
      if (!noise) throw PreconditionError("quantize: noise mode requires a noise tensor");
      return quant_noise(v, *noise);
    }
    case QuantMode::kRound: {
      Tensor<T> out = v->value;
      if (offset) {
        if (!offset->value.same_shape(v->value)) {
          throw StructuralError("quantize: offset shape mismatch");
        }
        for (int64_t i = 0; i < out.size(); ++i) {
          out[i] = T(std::nearbyint(double(out[i] - offset->value[i]))) + offset->value[i];
        }
      } else {
        for (int64_t i = 0; i < out.size(); ++i) out[i] = T(std::nearbyint(double(out[i])));
      }
      return constant(std::move(out));
    }
    case QuantMode::kSte:
      return quant_ste(v, offset);
  }
  throw std::invalid_argument("quantize: unknown mode");
}

template <typename T>
struct GaussianParams {
  Var<T> mu;
  Var<T> sigma;  // >= sigma_floor
};

// Per-STB prompts keyed by 1-based block index. Encoder blocks are numbered
// in forward order; decoder blocks are numbered from the image side (block 1
// is the STB closest to the decoded image).
template <typename T>
using StbPrompts = std::map<int, BlockPrompts<T>>;

template <typename T>
class BaseCodec {
 public:
  BaseCodec(CodecConfig cfg, uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(seed);
    const auto& w = cfg_.widths;
    const auto& d = cfg_.depths;
    int in_ch = 3;
    for (int s = 0; s < 4; ++s) {
      enc_conv_.emplace_back(store_, "ga.conv" + std::to_string(s + 1), in_ch, w[s], 3, 2, rng);
      enc_stb_.emplace_back(store_, "ga.stb" + std::to_string(s + 1), d[s], w[s],
                            cfg_.heads(w[s]), cfg_.window_size, rng);
      in_ch = w[s];
    }
    // decoder in forward order: stage s consumes width w[3-s]
    for (int s = 0; s < 4; ++s) {
      const int cw = w[3 - s];
      const int cout = s == 3 ? 3 : w[2 - s];
      dec_stb_.emplace_back(store_, "gs.stb" + std::to_string(4 - s), d[3 - s], cw,
                            cfg_.heads(cw), cfg_.window_size, rng);
      dec_tconv_.emplace_back(store_, "gs.tconv" + std::to_string(4 - s), cw, cout, rng);
    }
    ha_conv_.emplace_back(store_, "ha.conv1", cfg_.cy(), cfg_.hyper_width, 3, 2, rng);
    ha_stb_.emplace_back(store_, "ha.stb1", cfg_.hyper_depth, cfg_.hyper_width,
                         cfg_.heads(cfg_.hyper_width), cfg_.window_size, rng);
    ha_conv_.emplace_back(store_, "ha.conv2", cfg_.hyper_width, cfg_.cz, 3, 2, rng);
    ha_stb_.emplace_back(store_, "ha.stb2", cfg_.hyper_depth, cfg_.cz, cfg_.heads(cfg_.cz),
                         cfg_.window_size, rng);
    hs_stb_.emplace_back(store_, "hs.stb1", cfg_.hyper_depth, cfg_.cz, cfg_.heads(cfg_.cz),
                         cfg_.window_size, rng);
    hs_tconv_.emplace_back(store_, "hs.tconv1", cfg_.cz, cfg_.hyper_width, rng);
    hs_stb_.emplace_back(store_, "hs.stb2", cfg_.hyper_depth, cfg_.hyper_width,
                         cfg_.heads(cfg_.hyper_width), cfg_.window_size, rng);
    hs_tconv_.emplace_back(store_, "hs.tconv2", cfg_.hyper_width, 2 * cfg_.cy(), rng);
    prior_ = FactorizedPrior<T>(store_, "prior", cfg_.cz, rng);
  }

  const CodecConfig& config() const { return cfg_; }
  ParamStore<T>& params() { return store_; }
  const ParamStore<T>& params() const { return store_; }
  const FactorizedPrior<T>& prior() const { return prior_; }

  // g_a: (H, W, 3) -> (H/16, W/16, cy). H, W must be multiples of 64.
  Var<T> analysis(const Var<T>& x, const StbPrompts<T>* prompts = nullptr) const {
    const auto& s = x->value.shape();
    if (s.size() != 3 || s[2] != 3) throw StructuralError("analysis: expected (h, w, 3) input");
    if (s[0] % 64 != 0 || s[1] % 64 != 0) {
      throw PreconditionError("analysis: input dims must be multiples of 64, got " +
                              Tensor<T>::shape_str(s));
    }
    Var<T> f = x;
    for (int stage = 0; stage < 4; ++stage) {
      f = enc_conv_[stage].forward(f);
      f = enc_stb_[stage].forward(f, block_prompts(prompts, stage + 1));
    }
    return f;
  }

  // g_s: (H/16, W/16, cy) -> (H, W, 3), clamped to [0, 1].
  Var<T> synthesis(const Var<T>& y_hat, const StbPrompts<T>* prompts = nullptr) const {
    const auto& s = y_hat->value.shape();
    if (s.size() != 3 || s[2] != cfg_.cy()) {
      throw StructuralError("synthesis: expected (h, w, " + std::to_string(cfg_.cy()) +
                            ") latent, got " + Tensor<T>::shape_str(s));
    }
    Var<T> f = y_hat;
    for (int stage = 0; stage < 4; ++stage) {
      f = dec_stb_[stage].forward(f, block_prompts(prompts, 4 - stage));
      f = dec_tconv_[stage].forward(f);
    }
    return clamp(f, T(0), T(1));
  }

  // h_a: y -> z at 1/4 the latent resolution.
  Var<T> hyper_analysis(const Var<T>& y) const {
    const auto& s = y->value.shape();
    if (s.size() != 3 || s[2] != cfg_.cy()) {
      throw StructuralError("hyper_analysis: expected cy=" + std::to_string(cfg_.cy()) +
                            " channels, got " + Tensor<T>::shape_str(s));
    }
    Var<T> f = y;
    for (int stage = 0; stage < 2; ++stage) {
      f = ha_conv_[stage].forward(f);
      f = ha_stb_[stage].forward(f);
    }
    return f;
  }

  // h_s: z_hat -> (mu, sigma) shaped like y, sigma floored.
  GaussianParams<T> hyper_synthesis(const Var<T>& z_hat) const {
    const auto& s = z_hat->value.shape();
    if (s.size() != 3 || s[2] != cfg_.cz) {
      throw StructuralError("hyper_synthesis: expected cz=" + std::to_string(cfg_.cz) +
                            " channels, got " + Tensor<T>::shape_str(s));
    }
    Var<T> f = z_hat;
    for (int stage = 0; stage < 2; ++stage) {
      f = hs_stb_[stage].forward(f);
      f = hs_tconv_[stage].forward(f);
    }
    GaussianParams<T> out;
    out.mu = slice_channels(f, 0, cfg_.cy());
    out.sigma = add_scalar(softplus(slice_channels(f, cfg_.cy(), cfg_.cy())),
                           T(cfg_.sigma_floor));
    return out;
  }

  const FactorizedPrior<T>& z_prior() const { return prior_; }

  // Feature resolution entering encoder STB `i` (1-based) for input (h, w).
  static std::pair<int, int> encoder_stage_hw(int h, int w, int stb_index) {
    return {h >> stb_index, w >> stb_index};
  }
  // Feature resolution entering decoder STB `i` (paper numbering, 1-based,
  // counted from the image side) for padded input (h, w).
  static std::pair<int, int> decoder_stage_hw(int h, int w, int stb_index) {
    return {h >> stb_index, w >> stb_index};
  }

  int encoder_stage_width(int stb_index) const { return cfg_.widths[stb_index - 1]; }
  int decoder_stage_width(int stb_index) const { return cfg_.widths[stb_index - 1]; }
  int encoder_stage_depth(int stb_index) const { return cfg_.depths[stb_index - 1]; }
  int decoder_stage_depth(int stb_index) const { return cfg_.depths[stb_index - 1]; }

  const std::vector<SwinBlock<T>>& encoder_blocks() const { return enc_stb_; }
  const std::vector<SwinBlock<T>>& decoder_blocks() const { return dec_stb_; }
  const std::vector<Conv2dLayer<T>>& encoder_convs() const { return enc_conv_; }
  const std::vector<ConvT2dLayer<T>>& decoder_tconvs() const { return dec_tconv_; }
  const std::vector<Conv2dLayer<T>>& hyper_convs() const { return ha_conv_; }
  const std::vector<SwinBlock<T>>& hyper_enc_blocks() const { return ha_stb_; }
  const std::vector<SwinBlock<T>>& hyper_dec_blocks() const { return hs_stb_; }
  const std::vector<ConvT2dLayer<T>>& hyper_tconvs() const { return hs_tconv_; }

 private:
  static const BlockPrompts<T>* block_prompts(const StbPrompts<T>* prompts, int index) {
    if (!prompts) return nullptr;
    auto it = prompts->find(index);
    return it == prompts->end() ? nullptr : &it->second;
  }

  CodecConfig cfg_;
  ParamStore<T> store_;
  std::vector<Conv2dLayer<T>> enc_conv_;
  std::vector<SwinBlock<T>> enc_stb_;
  std::vector<SwinBlock<T>> dec_stb_;
  std::vector<ConvT2dLayer<T>> dec_tconv_;
  std::vector<Conv2dLayer<T>> ha_conv_;
  std::vector<SwinBlock<T>> ha_stb_;
  std::vector<SwinBlock<T>> hs_stb_;
  std::vector<ConvT2dLayer<T>> hs_tconv_;
  FactorizedPrior<T> prior_;
};

}  // namespace ttic

#endif  // TTIC_CODEC_HPP_
