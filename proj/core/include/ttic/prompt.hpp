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

#ifndef TTIC_PROMPT_HPP_
#define TTIC_PROMPT_HPP_

#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "ttic/codec.hpp"

namespace ttic {

enum class EncPromptStyle { kNone, kInstance, kTask, kInstanceShared };
enum class DecPromptStyle { kNone, kTask, kInstanceFromLatent };
enum class InjectionStyle { kDeep, kShallow };

// Which STBs receive prompts and how. Encoder targets use forward numbering,
// decoder targets count from the image side (1 = closest to x_hat).
struct PromptConfig {
  std::vector<int> encoder_targets{1, 2};
  std::vector<int> decoder_targets{1, 2, 3, 4};
  int prompts_per_window = 0;  // 0: window tokens / 4
  InjectionStyle injection = InjectionStyle::kDeep;
  EncPromptStyle encoder_style = EncPromptStyle::kInstance;
  DecPromptStyle decoder_style = DecPromptStyle::kTask;
  std::vector<int> gp_widths{32, 64, 128};

  int resolved_prompts(const CodecConfig& cc) const {
    const int n = cc.window_size * cc.window_size;
    return prompts_per_window > 0 ? prompts_per_window : n / 4;
  }
  // Prompt grid side: prompts are laid out as a square grid per window.
  int prompt_side(const CodecConfig& cc) const {
    const int p = resolved_prompts(cc);
    int s = 1;
    while (s * s < p) s *= 2;
    return s;
  }

  void validate(const CodecConfig& cc) const {
    const int p = resolved_prompts(cc);
    const int n = cc.window_size * cc.window_size;
    const int s = prompt_side(cc);
    if (s * s != p || cc.window_size % s != 0) {
      throw StructuralError("prompt config: prompts per window must be a power-of-four tile "
                            "count dividing the window, got " + std::to_string(p));
    }
    if (n % p != 0) {
      throw StructuralError("prompt config: prompt count must divide window token count");
    }
    for (int t : encoder_targets) {
      if (t < 1 || t > 4) throw StructuralError("prompt config: encoder target out of range");
    }
    for (int t : decoder_targets) {
      if (t < 1 || t > 4) throw StructuralError("prompt config: decoder target out of range");
    }
    if (gp_widths.size() != 3) {
      throw StructuralError("prompt config: extractor needs exactly three level widths");
    }
  }
};

// Spatially adaptive pooling of an instance prompt field to a fixed,
// image-size-invariant token count (side x side grid per layer).
template <typename T>
Var<T> pool_shared_prompts(const Var<T>& field, int side) {
  const int c = field->value.dim(2);
  auto pooled = adaptive_avg_pool2d(field, side, side);
  return reshape(pooled, {side * side, c});
}

// Learnable task prompts: one (p, c) matrix per targeted layer per task.
// Separate layers own separate tensors.
template <typename T>
class TaskPromptStore {
 public:
  TaskPromptStore() = default;

  // side: prompt grid side; the per-window count is side^2.
  void register_task(ParamStore<T>& ps, const std::string& scope, const std::string& task_id,
                     const CodecConfig& cc, const std::vector<int>& targets, int count,
                     bool decoder_numbering, Rng& rng) {
    if (tasks_.count(task_id)) throw StructuralError("task already registered: " + task_id);
    auto& slots = tasks_[task_id];
    for (int stb : targets) {
      const int width = cc.widths[stb - 1];
      const int depth = cc.depths[stb - 1];
      for (int layer = 0; layer < depth; ++layer) {
        const std::string name = scope + "." + task_id + ".stb" + std::to_string(stb) + ".l" +
                                 std::to_string(layer);
        slots[{stb, layer}] = ps.add(name, fan_in_init<T>({count, width}, width, rng));
      }
    }
    (void)decoder_numbering;
  }

  Var<T> lookup(const std::string& task_id, int stb, int layer) const {
    auto it = tasks_.find(task_id);
    if (it == tasks_.end()) throw std::out_of_range("unknown task id: " + task_id);
    auto jt = it->second.find({stb, layer});
    if (jt == it->second.end()) {
      throw std::out_of_range("task " + task_id + ": STB " + std::to_string(stb) + " layer " +
                              std::to_string(layer) + " is not prompt-targeted");
    }
    return jt->second;
  }

  bool has(const std::string& task_id, int stb, int layer) const {
    auto it = tasks_.find(task_id);
    if (it == tasks_.end()) return false;
    return it->second.count({stb, layer}) > 0;
  }

  bool has_task(const std::string& task_id) const { return tasks_.count(task_id) > 0; }

 private:
  std::map<std::string, std::map<std::pair<int, int>, Var<T>>> tasks_;
};

// U-Net-like extractor over the input image plus per-target-layer 1x1 heads
// emitting instance prompt fields at each target layer's prompt resolution.
template <typename T>
class PromptGenerator {
 public:
  PromptGenerator() = default;

  // targets: encoder STB indices; per-layer heads for deep injection, a
  // single layer-0 head under shallow.
  PromptGenerator(ParamStore<T>& ps, const std::string& scope, const CodecConfig& cc,
                  const PromptConfig& pc, Rng& rng)
      : side_(pc.prompt_side(cc)), window_(cc.window_size) {
    const auto& gw = pc.gp_widths;
    e0_ = Conv2dLayer<T>(ps, scope + ".e0", 3, gw[0], 3, 1, rng);
    e1_ = Conv2dLayer<T>(ps, scope + ".e1", gw[0], gw[1], 3, 2, rng);
    e2_ = Conv2dLayer<T>(ps, scope + ".e2", gw[1], gw[2], 3, 2, rng);
    d1_ = Conv2dLayer<T>(ps, scope + ".d1", gw[2] + gw[1], gw[1], 3, 1, rng);
    d0_ = Conv2dLayer<T>(ps, scope + ".d0", gw[1] + gw[0], gw[0], 3, 1, rng);
    const int layers_needed = pc.injection == InjectionStyle::kShallow ? 1 : -1;
    for (int stb : pc.encoder_targets) {
      const int depth = layers_needed > 0 ? layers_needed : cc.depths[stb - 1];
      for (int layer = 0; layer < depth; ++layer) {
        Head h;
        h.stb = stb;
        h.layer = layer;
        // Field resolution H / (2^stb * window/side); pyramid levels sit at
        // H, H/2, H/4. Use the deepest level that still covers the target.
        const int denom = (1 << stb) * (window_ / side_);
        h.level = denom >= 4 ? 2 : (denom == 2 ? 1 : 0);
        const int src_w = h.level == 0 ? gw[0] : (h.level == 1 ? gw[1] : gw[2]);
        h.conv = Conv2dLayer<T>(ps,
                                scope + ".head.stb" + std::to_string(stb) + ".l" +
                                    std::to_string(layer),
                                src_w, cc.widths[stb - 1], 1, 1, rng);
        heads_.push_back(std::move(h));
      }
    }
  }

  // Instance prompt fields keyed by (stb, layer), each (h_i*side/ws, w_i*side/ws, c_i).
  std::map<std::pair<int, int>, Var<T>> generate(const Var<T>& x) const {
    const int h = x->value.dim(0), w = x->value.dim(1);
    auto e0 = leaky_relu(e0_.forward(x));
    auto e1 = leaky_relu(e1_.forward(e0));
    auto e2 = leaky_relu(e2_.forward(e1));
    auto d1 = leaky_relu(d1_.forward(concat_channels(upsample_nearest2x(e2), e1)));
    auto d0 = leaky_relu(d0_.forward(concat_channels(upsample_nearest2x(d1), e0)));
    const Var<T> pyramid[3] = {d0, d1, e2};
    std::map<std::pair<int, int>, Var<T>> out;
    for (const auto& head : heads_) {
      const int fh = (h >> head.stb) * side_ / window_;
      const int fw = (w >> head.stb) * side_ / window_;
      if (fh < 1 || fw < 1) continue;
      auto src = pyramid[head.level];
      if (src->value.dim(0) != fh || src->value.dim(1) != fw) {
        src = adaptive_avg_pool2d(src, fh, fw);
      }
      out[{head.stb, head.layer}] = head.conv.forward(src);
    }
    return out;
  }

  int64_t macs(int h, int w) const {
    int64_t m = 0;
    m += e0_.macs(h, w);
    m += e1_.macs(h / 2, w / 2);
    m += e2_.macs(h / 4, w / 4);
    m += d1_.macs(h / 2, w / 2);
    m += d0_.macs(h, w);
    for (const auto& head : heads_) {
      const int fh = (h >> head.stb) * side_ / window_;
      const int fw = (w >> head.stb) * side_ / window_;
      m += head.conv.macs(std::max(fh, 1), std::max(fw, 1));
    }
    return m;
  }

 private:
  struct Head {
    int stb = 0, layer = 0, level = 2;
    Conv2dLayer<T> conv;
  };

  int side_ = 4;
  int window_ = 8;
  Conv2dLayer<T> e0_, e1_, e2_, d1_, d0_;
  std::vector<Head> heads_;
};

// Ablation: instance prompts for the decoder derived from the decoded latent
// (never from the source image).
template <typename T>
class LatentPromptGenerator {
 public:
  LatentPromptGenerator() = default;
  LatentPromptGenerator(ParamStore<T>& ps, const std::string& scope, const CodecConfig& cc,
                        const PromptConfig& pc, Rng& rng)
      : side_(pc.prompt_side(cc)), window_(cc.window_size) {
    const int g = pc.gp_widths[0];
    l0_ = Conv2dLayer<T>(ps, scope + ".l0", cc.cy(), g, 3, 1, rng);     // at H/16
    l1_ = Conv2dLayer<T>(ps, scope + ".l1", g, g, 3, 1, rng);           // at H/8
    l2_ = Conv2dLayer<T>(ps, scope + ".l2", g, g, 3, 1, rng);           // at H/4
    const int layers_needed = pc.injection == InjectionStyle::kShallow ? 1 : -1;
    for (int stb : pc.decoder_targets) {
      const int depth = layers_needed > 0 ? layers_needed : cc.depths[stb - 1];
      for (int layer = 0; layer < depth; ++layer) {
        Head h;
        h.stb = stb;
        h.layer = layer;
        h.conv = Conv2dLayer<T>(ps,
                                scope + ".head.stb" + std::to_string(stb) + ".l" +
                                    std::to_string(layer),
                                g, cc.widths[stb - 1], 1, 1, rng);
        heads_.push_back(std::move(h));
      }
    }
  }

  // y_hat: (H/16, W/16, cy); padded image size (h, w). Fields keyed by
  // decoder STB (image-side numbering) and layer.
  std::map<std::pair<int, int>, Var<T>> generate(const Var<T>& y_hat, int h, int w) const {
    auto l0 = leaky_relu(l0_.forward(y_hat));                      // H/16
    auto l1 = leaky_relu(l1_.forward(upsample_nearest2x(l0)));     // H/8
    auto l2 = leaky_relu(l2_.forward(upsample_nearest2x(l1)));     // H/4
    const Var<T> pyramid[3] = {l2, l1, l0};
    std::map<std::pair<int, int>, Var<T>> out;
    for (const auto& head : heads_) {
      const int fh = (h >> head.stb) * side_ / window_;
      const int fw = (w >> head.stb) * side_ / window_;
      if (fh < 1 || fw < 1) continue;
      // pyramid resolutions: l2 at H/4, l1 at H/8, l0 at H/16
      Var<T> src = pyramid[0];
      if (fh <= (h >> 4)) {
        src = pyramid[2];
      } else if (fh <= (h >> 3)) {
        src = pyramid[1];
      }
      if (src->value.dim(0) != fh || src->value.dim(1) != fw) {
        src = adaptive_avg_pool2d(src, fh, fw);
      }
      out[{head.stb, head.layer}] = head.conv.forward(src);
    }
    return out;
  }

 private:
  struct Head {
    int stb = 0, layer = 0;
    Conv2dLayer<T> conv;
  };
  int side_ = 4;
  int window_ = 8;
  Conv2dLayer<T> l0_, l1_, l2_;
  std::vector<Head> heads_;
};

// The trainable transfer bundle for one (task, lambda) pair: prompt generator
// plus task prompts, all registered in a store disjoint from the base codec.
template <typename T>
class TransferModel {
 public:
  TransferModel(const CodecConfig& cc, PromptConfig pc, std::string task_id, uint64_t seed)
      : cc_(cc), pc_(std::move(pc)), task_(std::move(task_id)) {
    pc_.validate(cc_);
    Rng rng(seed);
    const int count = pc_.resolved_prompts(cc_);
    if (pc_.encoder_style == EncPromptStyle::kInstance ||
        pc_.encoder_style == EncPromptStyle::kInstanceShared) {
      gp_ = PromptGenerator<T>(store_, "gp", cc_, pc_, rng);
    }
    if (pc_.encoder_style == EncPromptStyle::kTask) {
      enc_prompts_.register_task(store_, "enc_tp", task_, cc_, pc_.encoder_targets, count,
                                 false, rng);
    }
    if (pc_.decoder_style == DecPromptStyle::kTask) {
      dec_prompts_.register_task(store_, "dec_tp", task_, cc_, pc_.decoder_targets, count,
                                 true, rng);
    }
    if (pc_.decoder_style == DecPromptStyle::kInstanceFromLatent) {
      latent_gp_ = LatentPromptGenerator<T>(store_, "gq", cc_, pc_, rng);
    }
  }

  const PromptConfig& prompt_config() const { return pc_; }
  const std::string& task() const { return task_; }
  ParamStore<T>& params() { return store_; }
  const ParamStore<T>& params() const { return store_; }
  const PromptGenerator<T>& generator() const { return gp_; }
  const TaskPromptStore<T>& decoder_store() const { return dec_prompts_; }

  // Instance-specific (or encoder-task) prompts for the analysis transform.
  StbPrompts<T> encoder_prompts(const Var<T>& x) const {
    StbPrompts<T> out;
    if (pc_.encoder_style == EncPromptStyle::kNone) return out;
    const bool shallow = pc_.injection == InjectionStyle::kShallow;
    if (pc_.encoder_style == EncPromptStyle::kTask) {
      for (int stb : pc_.encoder_targets) {
        BlockPrompts<T> bp;
        bp.mode = PromptMode::kTask;
        bp.shallow = shallow;
        const int nlayers = shallow ? 1 : cc_.depths[stb - 1];
        for (int l = 0; l < nlayers; ++l) bp.per_layer.push_back(enc_prompts_.lookup(task_, stb, l));
        out[stb] = std::move(bp);
      }
      return out;
    }
    auto fields = gp_.generate(x);
    const bool pooled = pc_.encoder_style == EncPromptStyle::kInstanceShared;
    const int side = pc_.prompt_side(cc_);
    for (int stb : pc_.encoder_targets) {
      BlockPrompts<T> bp;
      bp.mode = pooled ? PromptMode::kInstanceShared : PromptMode::kInstance;
      bp.shallow = shallow;
      const int nlayers = shallow ? 1 : cc_.depths[stb - 1];
      for (int l = 0; l < nlayers; ++l) {
        auto it = fields.find({stb, l});
        if (it == fields.end()) continue;
        bp.per_layer.push_back(pooled ? pool_shared_prompts(it->second, side) : it->second);
      }
      if (!bp.per_layer.empty()) out[stb] = std::move(bp);
    }
    return out;
  }

  // Task-specific (or latent-derived) prompts for the synthesis transform.
  // h, w: padded image dims (needed to size latent-derived fields).
  StbPrompts<T> decoder_prompts(const Var<T>& y_hat, int h, int w) const {
    StbPrompts<T> out;
    const bool shallow = pc_.injection == InjectionStyle::kShallow;
    if (pc_.decoder_style == DecPromptStyle::kTask) {
      for (int stb : pc_.decoder_targets) {
        BlockPrompts<T> bp;
        bp.mode = PromptMode::kTask;
        bp.shallow = shallow;
        const int nlayers = shallow ? 1 : cc_.depths[stb - 1];
        for (int l = 0; l < nlayers; ++l) bp.per_layer.push_back(dec_prompts_.lookup(task_, stb, l));
        out[stb] = std::move(bp);
      }
    } else if (pc_.decoder_style == DecPromptStyle::kInstanceFromLatent) {
      auto fields = latent_gp_.generate(y_hat, h, w);
      for (int stb : pc_.decoder_targets) {
        BlockPrompts<T> bp;
        bp.mode = PromptMode::kInstance;
        bp.shallow = shallow;
        const int nlayers = shallow ? 1 : cc_.depths[stb - 1];
        for (int l = 0; l < nlayers; ++l) {
          auto it = fields.find({stb, l});
          if (it != fields.end()) bp.per_layer.push_back(it->second);
        }
        if (!bp.per_layer.empty()) out[stb] = std::move(bp);
      }
    }
    return out;
  }

 private:
  CodecConfig cc_;
  PromptConfig pc_;
  std::string task_;
  ParamStore<T> store_;
  PromptGenerator<T> gp_;
  LatentPromptGenerator<T> latent_gp_;
  TaskPromptStore<T> enc_prompts_;
  TaskPromptStore<T> dec_prompts_;
};

}  // namespace ttic

#endif  // TTIC_PROMPT_HPP_
