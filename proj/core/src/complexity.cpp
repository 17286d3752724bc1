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

#include <algorithm>

#include "ttic/eval.hpp"

namespace ttic {

int64_t ComplexityReport::encoder_macs() const {
  int64_t total = 0;
  for (const auto& e : encoder) total += e.macs;
  return total;
}
int64_t ComplexityReport::decoder_macs() const {
  int64_t total = 0;
  for (const auto& e : decoder) total += e.macs;
  return total;
}
double ComplexityReport::encoder_kmacs_per_pixel() const {
  return double(encoder_macs()) / double(pixels) / 1000.0;
}
double ComplexityReport::decoder_kmacs_per_pixel() const {
  return double(decoder_macs()) / double(pixels) / 1000.0;
}

ComplexityReport count_macs(const BaseCodec<float>& codec, const TransferModel<float>* transfer,
                            int h, int w) {
  if (h % 64 != 0 || w % 64 != 0) {
    throw PreconditionError("count_macs: input dims must be multiples of 64");
  }
  const auto& cc = codec.config();
  const PromptConfig* pc = transfer ? &transfer->prompt_config() : nullptr;
  const int prompt_count = pc ? pc->resolved_prompts(cc) : 0;
  const bool shallow = pc && pc->injection == InjectionStyle::kShallow;
  auto enc_targeted = [&](int stb) {
    return pc && pc->encoder_style != EncPromptStyle::kNone &&
           std::find(pc->encoder_targets.begin(), pc->encoder_targets.end(), stb) !=
               pc->encoder_targets.end();
  };
  auto dec_targeted = [&](int stb) {
    return pc && pc->decoder_style != DecPromptStyle::kNone &&
           std::find(pc->decoder_targets.begin(), pc->decoder_targets.end(), stb) !=
               pc->decoder_targets.end();
  };

  ComplexityReport rep;
  rep.pixels = int64_t(h) * w;

  // g_a: conv at output resolution, then STB at the same resolution.
  for (int stb = 1; stb <= 4; ++stb) {
    const int fh = h >> stb, fw = w >> stb;
    rep.encoder.push_back({"ga.conv" + std::to_string(stb),
                           codec.encoder_convs()[size_t(stb - 1)].macs(fh, fw)});
    const int p = enc_targeted(stb) ? prompt_count : 0;
    rep.encoder.push_back({"ga.stb" + std::to_string(stb),
                           codec.encoder_blocks()[size_t(stb - 1)].macs(fh, fw, p, shallow)});
  }
  // h_a
  {
    const int y_h = h >> 4, y_w = w >> 4;
    rep.encoder.push_back({"ha.conv1", codec.hyper_convs()[0].macs(y_h / 2, y_w / 2)});
    rep.encoder.push_back({"ha.stb1",
                           codec.hyper_enc_blocks()[0].macs(y_h / 2, y_w / 2, 0, false)});
    rep.encoder.push_back({"ha.conv2", codec.hyper_convs()[1].macs(y_h / 4, y_w / 4)});
    rep.encoder.push_back({"ha.stb2",
                           codec.hyper_enc_blocks()[1].macs(y_h / 4, y_w / 4, 0, false)});
  }
  if (transfer && (transfer->prompt_config().encoder_style == EncPromptStyle::kInstance ||
                   transfer->prompt_config().encoder_style == EncPromptStyle::kInstanceShared)) {
    rep.encoder.push_back({"gp", transfer->generator().macs(h, w)});
  }

  // h_s (decoder side)
  {
    const int z_h = h >> 6, z_w = w >> 6;
    rep.decoder.push_back({"hs.stb1", codec.hyper_dec_blocks()[0].macs(z_h, z_w, 0, false)});
    rep.decoder.push_back({"hs.tconv1", codec.hyper_tconvs()[0].macs(z_h, z_w)});
    rep.decoder.push_back({"hs.stb2",
                           codec.hyper_dec_blocks()[1].macs(z_h * 2, z_w * 2, 0, false)});
    rep.decoder.push_back({"hs.tconv2", codec.hyper_tconvs()[1].macs(z_h * 2, z_w * 2)});
  }
  // g_s in forward order: STB k runs at h >> k (image-side numbering).
  for (int fwd = 0; fwd < 4; ++fwd) {
    const int stb = 4 - fwd;
    const int fh = h >> stb, fw = w >> stb;
    const int p = dec_targeted(stb) ? prompt_count : 0;
    rep.decoder.push_back({"gs.stb" + std::to_string(stb),
                           codec.decoder_blocks()[size_t(fwd)].macs(fh, fw, p, shallow)});
    rep.decoder.push_back({"gs.tconv" + std::to_string(stb),
                           codec.decoder_tconvs()[size_t(fwd)].macs(fh, fw)});
  }
  return rep;
}

ParamReport count_params(const BaseCodec<float>& codec, const TransferModel<float>* transfer) {
  ParamReport rep;
  rep.base = codec.params().total_params();
  if (transfer) {
    rep.transfer_total = transfer->params().total_params();
    rep.generator = transfer->params().total_params("gp.") +
                    transfer->params().total_params("gq.");
    rep.task_prompts = transfer->params().total_params("dec_tp.") +
                       transfer->params().total_params("enc_tp.");
  }
  return rep;
}

}  // namespace ttic
