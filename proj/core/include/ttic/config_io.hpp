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

#ifndef TTIC_CONFIG_IO_HPP_
#define TTIC_CONFIG_IO_HPP_

#include <json.hpp>

#include <set>
#include <string>

#include "ttic/prompt.hpp"
#include "ttic/train.hpp"

namespace ttic {

// Key-checked JSON section parsing: unknown keys are errors so config typos
// fail loudly.
inline void check_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                       const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key())) {
      throw std::runtime_error("config: unknown key '" + it.key() + "' in section " + where);
    }
  }
}

inline nlohmann::json codec_config_to_json(const CodecConfig& c) {
  nlohmann::json j;
  j["depths"] = c.depths;
  j["widths"] = c.widths;
  j["window_size"] = c.window_size;
  j["head_dim"] = c.head_dim;
  j["cz"] = c.cz;
  j["hyper_width"] = c.hyper_width;
  j["hyper_depth"] = c.hyper_depth;
  j["sigma_floor"] = c.sigma_floor;
  return j;
}

inline CodecConfig codec_config_from_json(const nlohmann::json& j) {
  check_keys(j, {"depths", "widths", "window_size", "head_dim", "cz", "hyper_width",
                 "hyper_depth", "sigma_floor"},
             "codec");
  CodecConfig c;
  if (j.contains("depths")) c.depths = j.at("depths").get<std::vector<int>>();
  if (j.contains("widths")) c.widths = j.at("widths").get<std::vector<int>>();
  if (j.contains("window_size")) c.window_size = j.at("window_size").get<int>();
  if (j.contains("head_dim")) c.head_dim = j.at("head_dim").get<int>();
  if (j.contains("cz")) c.cz = j.at("cz").get<int>();
  if (j.contains("hyper_width")) c.hyper_width = j.at("hyper_width").get<int>();
  if (j.contains("hyper_depth")) c.hyper_depth = j.at("hyper_depth").get<int>();
  if (j.contains("sigma_floor")) c.sigma_floor = j.at("sigma_floor").get<double>();
  c.validate();
  return c;
}

inline std::string to_string(EncPromptStyle s) {
  switch (s) {
    case EncPromptStyle::kNone: return "none";
    case EncPromptStyle::kInstance: return "instance";
    case EncPromptStyle::kTask: return "task";
    case EncPromptStyle::kInstanceShared: return "instance_shared";
  }
  return "?";
}
inline std::string to_string(DecPromptStyle s) {
  switch (s) {
    case DecPromptStyle::kNone: return "none";
    case DecPromptStyle::kTask: return "task";
    case DecPromptStyle::kInstanceFromLatent: return "instance_from_latent";
  }
  return "?";
}

inline EncPromptStyle enc_style_from_string(const std::string& s) {
  if (s == "none") return EncPromptStyle::kNone;
  if (s == "instance") return EncPromptStyle::kInstance;
  if (s == "task") return EncPromptStyle::kTask;
  if (s == "instance_shared") return EncPromptStyle::kInstanceShared;
  throw std::runtime_error("config: unknown encoder prompt style '" + s + "'");
}
inline DecPromptStyle dec_style_from_string(const std::string& s) {
  if (s == "none") return DecPromptStyle::kNone;
  if (s == "task") return DecPromptStyle::kTask;
  if (s == "instance_from_latent") return DecPromptStyle::kInstanceFromLatent;
  throw std::runtime_error("config: unknown decoder prompt style '" + s + "'");
}

inline nlohmann::json prompt_config_to_json(const PromptConfig& p) {
  nlohmann::json j;
  j["encoder_targets"] = p.encoder_targets;
  j["decoder_targets"] = p.decoder_targets;
  j["prompts_per_window"] = p.prompts_per_window;
  j["injection"] = p.injection == InjectionStyle::kDeep ? "deep" : "shallow";
  j["encoder_style"] = to_string(p.encoder_style);
  j["decoder_style"] = to_string(p.decoder_style);
  j["gp_widths"] = p.gp_widths;
  return j;
}

inline PromptConfig prompt_config_from_json(const nlohmann::json& j) {
  check_keys(j, {"encoder_targets", "decoder_targets", "prompts_per_window", "injection",
                 "encoder_style", "decoder_style", "gp_widths"},
             "prompts");
  PromptConfig p;
  if (j.contains("encoder_targets")) p.encoder_targets = j.at("encoder_targets").get<std::vector<int>>();
  if (j.contains("decoder_targets")) p.decoder_targets = j.at("decoder_targets").get<std::vector<int>>();
  if (j.contains("prompts_per_window")) p.prompts_per_window = j.at("prompts_per_window").get<int>();
  if (j.contains("injection")) {
    const auto s = j.at("injection").get<std::string>();
    if (s == "deep") {
      p.injection = InjectionStyle::kDeep;
    } else if (s == "shallow") {
      p.injection = InjectionStyle::kShallow;
    } else {
      throw std::runtime_error("config: unknown injection style '" + s + "'");
    }
  }
  if (j.contains("encoder_style")) p.encoder_style = enc_style_from_string(j.at("encoder_style"));
  if (j.contains("decoder_style")) p.decoder_style = dec_style_from_string(j.at("decoder_style"));
  if (j.contains("gp_widths")) p.gp_widths = j.at("gp_widths").get<std::vector<int>>();
  return p;
}

inline nlohmann::json train_spec_to_json(const TrainSpec& t) {
  nlohmann::json j;
  j["stage"] = t.stage;
  j["lambda"] = t.lambda;
  j["lambda_index"] = t.lambda_index;
  j["lr"] = t.lr;
  j["clip_norm"] = t.clip_norm;
  j["steps"] = t.steps;
  j["lr_schedule_steps"] = t.lr_schedule_steps;
  j["batch_size"] = t.batch_size;
  j["crop"] = t.crop;
  j["seed"] = t.seed;
  j["dataset_root"] = t.dataset_root;
  j["dataset_split"] = t.dataset_split;
  j["task_id"] = t.task_id;
  j["distortion_scale"] = t.distortion_scale;
  j["perceptual_scale"] = t.perceptual_scale;
  j["log_every"] = t.log_every;
  j["digest_check_every"] = t.digest_check_every;
  return j;
}

inline TrainSpec train_spec_from_json(const nlohmann::json& j) {
  check_keys(j,
             {"stage", "lambda", "lambda_index", "lr", "clip_norm", "steps", "lr_schedule_steps", "batch_size", "crop",
              "seed", "dataset_root", "dataset_split", "task_id", "distortion_scale",
              "perceptual_scale", "log_every", "digest_check_every"},
             "train");
  TrainSpec t;
  if (j.contains("stage")) t.stage = j.at("stage").get<std::string>();
  if (j.contains("lambda")) t.lambda = j.at("lambda").get<double>();
  if (j.contains("lambda_index")) t.lambda_index = j.at("lambda_index").get<int>();
  if (j.contains("lr")) t.lr = j.at("lr").get<double>();
  if (j.contains("clip_norm")) t.clip_norm = j.at("clip_norm").get<double>();
  if (j.contains("steps")) t.steps = j.at("steps").get<int64_t>();
  if (j.contains("lr_schedule_steps")) t.lr_schedule_steps = j.at("lr_schedule_steps").get<int64_t>();
  if (j.contains("batch_size")) t.batch_size = j.at("batch_size").get<int>();
  if (j.contains("crop")) t.crop = j.at("crop").get<int>();
  if (j.contains("seed")) t.seed = j.at("seed").get<uint64_t>();
  if (j.contains("dataset_root")) t.dataset_root = j.at("dataset_root").get<std::string>();
  if (j.contains("dataset_split")) t.dataset_split = j.at("dataset_split").get<std::string>();
  if (j.contains("task_id")) t.task_id = j.at("task_id").get<std::string>();
  if (j.contains("distortion_scale")) t.distortion_scale = j.at("distortion_scale").get<double>();
  if (j.contains("perceptual_scale")) t.perceptual_scale = j.at("perceptual_scale").get<double>();
  if (j.contains("log_every")) t.log_every = j.at("log_every").get<int>();
  if (j.contains("digest_check_every")) t.digest_check_every = j.at("digest_check_every").get<int>();
  return t;
}

}  // namespace ttic

#endif  // TTIC_CONFIG_IO_HPP_
