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

#include "ttic/train.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <fstream>

#include "ttic/checkpoint.hpp"
#include "ttic/config_io.hpp"

namespace ttic {

using nlohmann::json;

namespace {

Tensor<float> noise_tensor(const std::vector<int>& shape, uint64_t seed) {
  Rng rng(seed);
  Tensor<float> t(shape);
  for (int64_t i = 0; i < t.size(); ++i) t[i] = float(rng.uniform(-0.5, 0.5));
  return t;
}

struct StepStats {
  double bpp = 0;
  double distortion = 0;
  double total = 0;
};

// Builds the per-sample loss graph and backpropagates 1/batch of it.
// Returns the evaluated terms.
StepStats run_sample(const BaseCodec<float>& codec, const TransferModel<float>* transfer,
                     const ToyTaskNet* tasknet, const TrainSpec& spec, const Tensor<float>& crop,
                     int64_t step, int slot, float inv_batch) {
  auto x = constant(crop);
  const int npix = crop.dim(0) * crop.dim(1);

  StbPrompts<float> enc_prompts;
  if (transfer) enc_prompts = transfer->encoder_prompts(x);
  auto y = codec.analysis(x, transfer ? &enc_prompts : nullptr);
  auto z = codec.hyper_analysis(y);

  auto zn = noise_tensor(z->value.shape(), derive_seed(spec.seed, "znoise", uint64_t(step),
                                                       uint64_t(slot)));
  auto z_tilde = quantize(z, QuantMode::kNoise, Var<float>{}, &zn);
  auto gp = codec.hyper_synthesis(z_tilde);

  auto yn = noise_tensor(y->value.shape(), derive_seed(spec.seed, "ynoise", uint64_t(step),
                                                       uint64_t(slot)));
  auto y_tilde = quantize(y, QuantMode::kNoise, Var<float>{}, &yn);
  auto p_y = gaussian_bin_prob(y_tilde, gp.mu, gp.sigma);
  const int zc = z->value.dim(2);
  auto p_z = codec.z_prior().bin_probability(
      reshape(z_tilde, {int(z->value.size()) / zc, zc}));
  auto rate_bits = add(estimate_rate_bits(p_y), estimate_rate_bits(p_z));

  auto y_ste = quantize(y, QuantMode::kSte, gp.mu);
  StbPrompts<float> dec_prompts;
  if (transfer) {
    dec_prompts = transfer->decoder_prompts(y_ste, crop.dim(0), crop.dim(1));
  }
  auto x_hat = codec.synthesis(y_ste, transfer ? &dec_prompts : nullptr);

  Var<float> dist;
  double dscale;
  if (spec.stage == "base") {
    dist = mse_distortion(x, x_hat);
    dscale = spec.distortion_scale;
  } else {
    dist = perceptual_distortion(x, x_hat, *tasknet);
    dscale = spec.perceptual_scale;
  }
  auto bpp = scale(rate_bits, 1.0f / float(npix));
  auto total = add(bpp, scale(dist, float(spec.lambda * dscale)));
  backward(scale(total, inv_batch));

  StepStats st;
  st.bpp = bpp->value[0];
  st.distortion = dist->value[0];
  st.total = total->value[0];
  return st;
}

struct LogWriter {
  std::ofstream out;
  explicit LogWriter(const std::string& path) {
    if (!path.empty()) out.open(path, std::ios::app);
  }
  void write(const TrainLogEntry& e) {
    if (!out.is_open()) return;
    json j;
    j["step"] = e.step;
    j["bpp"] = e.bpp;
    j["distortion"] = e.distortion;
    j["total"] = e.total;
    j["wall_s"] = e.wall_s;
    out << j.dump() << "\n";
    out.flush();
  }
};

// Shared loop for all three stages.
TrainResult run_training(BaseCodec<float>& codec, TransferModel<float>* transfer,
                         const ToyTaskNet* tasknet, const TrainSpec& spec, const Dataset& data,
                         const std::string& out_path, const std::string& log_path,
                         ParamStore<float>& trainable_store, AdamOptimizer<float>& opt,
                         int64_t start_step, const json& meta_extra) {
  if (data.size() == 0) throw std::runtime_error("training: empty dataset");
  const bool freeze_base = spec.stage == "transfer";
  const std::string frozen_digest = params_digest(codec.params());

  TrainResult res;
  LogWriter log(log_path);
  const auto t0 = std::chrono::steady_clock::now();

  for (int64_t step = start_step; step < spec.steps; ++step) {
    codec.params().zero_grads();
    if (transfer) transfer->params().zero_grads();
    StepStats acc;
    for (int slot = 0; slot < spec.batch_size; ++slot) {
      const uint64_t pick = derive_seed(spec.seed, "sample", uint64_t(step), uint64_t(slot));
      const auto& sample = data.at(size_t(pick % data.size()));
      Rng crop_rng(derive_seed(spec.seed, "crop", uint64_t(step), uint64_t(slot)));
      auto crop = random_crop(sample.image, spec.crop, crop_rng);
      auto st = run_sample(codec, transfer, tasknet, spec, crop, step, slot,
                           1.0f / float(spec.batch_size));
      acc.bpp += st.bpp;
      acc.distortion += st.distortion;
      acc.total += st.total;
    }
    acc.bpp /= spec.batch_size;
    acc.distortion /= spec.batch_size;
    acc.total /= spec.batch_size;

    if (!std::isfinite(acc.total)) {
      const std::string diag = out_path + ".diag";
      json meta = meta_extra;
      meta["aborted_at_step"] = step;
      save_checkpoint(diag, {"diagnostic", meta.dump()}, trainable_store);
      throw std::runtime_error("training aborted: non-finite loss at step " +
                               std::to_string(step) + " (snapshot: " + diag + ")");
    }

    opt.step(step);

    if (spec.log_every > 0 && (step % spec.log_every == 0 || step + 1 == spec.steps)) {
      TrainLogEntry e;
      e.step = step;
      e.bpp = acc.bpp;
      e.distortion = acc.distortion;
      e.total = acc.total;
      e.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      res.log.push_back(e);
      log.write(e);
    }
    if (freeze_base && spec.digest_check_every > 0 && step % spec.digest_check_every == 0) {
      if (params_digest(codec.params()) != frozen_digest) {
        throw std::runtime_error("freeze violation: base parameters changed at step " +
                                 std::to_string(step));
      }
    }
  }

  // optimizer state for exact resume
  std::vector<std::pair<std::string, Tensor<float>>> extra;
  {
    Tensor<float> stept({1});
    stept[0] = float(spec.steps);
    extra.emplace_back("opt.step", std::move(stept));
    auto& m1 = opt.moments1();
    auto& m2 = opt.moments2();
    for (size_t i = 0; i < m1.size(); ++i) {
      extra.emplace_back("opt.m." + std::to_string(i), m1[i]);
      extra.emplace_back("opt.v." + std::to_string(i), m2[i]);
    }
  }
  json meta = meta_extra;
  meta["train"] = train_spec_to_json(spec);
  meta["base_digest"] = params_digest(codec.params());
  save_checkpoint(out_path, {spec.stage == "base" ? "base" : "transfer", meta.dump()},
                  trainable_store, extra);
  res.checkpoint_path = out_path;
  res.base_digest = params_digest(codec.params());
  if (freeze_base && res.base_digest != frozen_digest) {
    throw std::runtime_error("freeze violation detected after training run");
  }
  return res;
}

}  // namespace

TrainResult train_base(const CodecConfig& cc, const TrainSpec& spec, const Dataset& data,
                       const std::string& out_path, const std::string& log_path, bool resume) {
  if (spec.stage != "base") throw std::runtime_error("train_base: spec.stage must be 'base'");
  BaseCodec<float> codec(cc, derive_seed(spec.seed, "base-init"));
  AdamOptimizer<float>::Config ocfg;
  ocfg.lr = spec.lr;
  ocfg.clip_norm = spec.clip_norm;
  ocfg.total_steps = spec.lr_schedule_steps > 0 ? spec.lr_schedule_steps : spec.steps;
  AdamOptimizer<float> opt(ocfg);
  codec.params().set_all_trainable(true);
  opt.bind(codec.params().trainable());

  int64_t start_step = 0;
  if (resume) {
    auto ck = read_checkpoint(out_path);
    apply_checkpoint(ck, codec.params());
    auto& m1 = opt.moments1();
    auto& m2 = opt.moments2();
    for (const auto& [name, t] : ck.tensors) {
      if (name == "opt.step") start_step = int64_t(std::lround(double(t[0])));
      if (name.rfind("opt.m.", 0) == 0) m1[size_t(std::stoul(name.substr(6)))] = t;
      if (name.rfind("opt.v.", 0) == 0) m2[size_t(std::stoul(name.substr(6)))] = t;
    }
  }

  json meta;
  meta["codec"] = codec_config_to_json(cc);
  meta["lambda"] = spec.lambda;
  meta["lambda_index"] = spec.lambda_index;
  return run_training(codec, nullptr, nullptr, spec, data, out_path, log_path, codec.params(),
                      opt, start_step, meta);
}

TrainResult train_transfer(const std::string& base_ckpt_path, const PromptConfig& pc,
                           const TrainSpec& spec, const Dataset& data, const ToyTaskNet& tasknet,
                           const std::string& out_path, const std::string& log_path) {
  if (spec.stage != "transfer") {
    throw std::runtime_error("train_transfer: spec.stage must be 'transfer'");
  }
  auto base = load_base_bundle(base_ckpt_path);
  base.codec->params().set_all_trainable(false);

  TransferModel<float> transfer(base.config, pc, spec.task_id,
                                derive_seed(spec.seed, "transfer-init"));
  transfer.params().set_all_trainable(true);
  AdamOptimizer<float>::Config ocfg;
  ocfg.lr = spec.lr;
  ocfg.clip_norm = spec.clip_norm;
  ocfg.total_steps = spec.lr_schedule_steps > 0 ? spec.lr_schedule_steps : spec.steps;
  AdamOptimizer<float> opt(ocfg);
  opt.bind(transfer.params().trainable());

  json meta;
  meta["codec"] = codec_config_to_json(base.config);
  meta["prompts"] = prompt_config_to_json(pc);
  meta["task"] = spec.task_id;
  meta["lambda"] = spec.lambda;
  meta["lambda_index"] = spec.lambda_index;
  meta["bound_base_digest"] = base.digest;
  return run_training(*base.codec, &transfer, &tasknet, spec, data, out_path, log_path,
                      transfer.params(), opt, 0, meta);
}

TrainResult train_full_finetune(const std::string& base_ckpt_path, const TrainSpec& spec,
                                const Dataset& data, const ToyTaskNet& tasknet,
                                const std::string& out_path, const std::string& log_path) {
  if (spec.stage != "full_finetune") {
    throw std::runtime_error("train_full_finetune: spec.stage must be 'full_finetune'");
  }
  auto base = load_base_bundle(base_ckpt_path);
  base.codec->params().set_all_trainable(true);
  AdamOptimizer<float>::Config ocfg;
  ocfg.lr = spec.lr;
  ocfg.clip_norm = spec.clip_norm;
  ocfg.total_steps = spec.lr_schedule_steps > 0 ? spec.lr_schedule_steps : spec.steps;
  AdamOptimizer<float> opt(ocfg);
  opt.bind(base.codec->params().trainable());

  json meta;
  meta["codec"] = codec_config_to_json(base.config);
  meta["task"] = spec.task_id;
  meta["lambda"] = spec.lambda;
  meta["lambda_index"] = spec.lambda_index;
  return run_training(*base.codec, nullptr, &tasknet, spec, data, out_path, log_path,
                      base.codec->params(), opt, 0, meta);
}

BaseBundle load_base_bundle(const std::string& path) {
  auto ck = read_checkpoint(path);
  if (ck.meta.kind != "base") {
    throw std::runtime_error("not a base codec checkpoint: " + path);
  }
  const json meta = json::parse(ck.meta.json);
  BaseBundle out;
  out.config = codec_config_from_json(meta.at("codec"));
  out.codec = std::make_unique<BaseCodec<float>>(out.config, 0);
  apply_checkpoint(ck, out.codec->params());
  out.codec->params().set_all_trainable(false);
  out.digest = params_digest(out.codec->params());
  if (meta.contains("lambda")) out.lambda = meta.at("lambda").get<double>();
  if (meta.contains("lambda_index")) out.lambda_index = meta.at("lambda_index").get<int>();
  return out;
}

TransferBundle load_transfer_bundle(const std::string& path, const std::string& base_digest) {
  auto ck = read_checkpoint(path);
  if (ck.meta.kind != "transfer") {
    throw std::runtime_error("not a transfer checkpoint: " + path);
  }
  const json meta = json::parse(ck.meta.json);
  TransferBundle out;
  out.base_digest = meta.at("bound_base_digest").get<std::string>();
  if (out.base_digest != base_digest) {
    throw std::runtime_error("transfer checkpoint bound to base digest " + out.base_digest +
                             " but the loaded base codec has digest " + base_digest);
  }
  out.config = prompt_config_from_json(meta.at("prompts"));
  out.task_id = meta.at("task").get<std::string>();
  const CodecConfig cc = codec_config_from_json(meta.at("codec"));
  out.model = std::make_unique<TransferModel<float>>(cc, out.config, out.task_id, 0);
  apply_checkpoint(ck, out.model->params());
  out.model->params().set_all_trainable(false);
  if (meta.contains("lambda")) out.lambda = meta.at("lambda").get<double>();
  if (meta.contains("lambda_index")) out.lambda_index = meta.at("lambda_index").get<int>();
  return out;
}

}  // namespace ttic
