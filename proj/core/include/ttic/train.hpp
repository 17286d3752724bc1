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

#ifndef TTIC_TRAIN_HPP_
#define TTIC_TRAIN_HPP_

#include <memory>
#include <string>
#include <vector>

#include "ttic/codec.hpp"
#include "ttic/data.hpp"
#include "ttic/prompt.hpp"
#include "ttic/tasknet.hpp"

namespace ttic {

// One training run. Stage "base" reconstructs with MSE; "transfer" trains
// prompts + generator against a frozen base with perceptual distortion;
// "full_finetune" unfreezes the base codec as the reference baseline.
struct TrainSpec {
  std::string stage = "base";
  double lambda = 0.0067;
  int lambda_index = 2;
  double lr = 1e-4;
  double clip_norm = 1.0;
  int64_t steps = 20000;
  // Cosine-decay horizon; 0 uses `steps`. Lets an interrupted run keep the
  // schedule of the full-length run it resumes into.
  int64_t lr_schedule_steps = 0;
  int batch_size = 16;
  int crop = 64;
  uint64_t seed = 0;
  std::string dataset_root;
  std::string dataset_split = "train";
  std::string task_id = "A";
  // Distortion multipliers: MSE is scaled into 8-bit pixel variance units so
  // the published lambda grid lands at sensible rates; the perceptual scale
  // plays the same role for feature-space MSE.
  double distortion_scale = 65025.0;
  double perceptual_scale = 2.0;
  int log_every = 100;
  int digest_check_every = 1000;
};

struct TrainLogEntry {
  int64_t step = 0;
  double bpp = 0;
  double distortion = 0;
  double total = 0;
  double wall_s = 0;
};

struct TrainResult {
  std::vector<TrainLogEntry> log;
  std::string checkpoint_path;
  std::string base_digest;  // digest of base params after the run
};

// Trains a fresh base codec (or resumes out_path if resume is set) and
// writes a self-validating checkpoint with optimizer state.
TrainResult train_base(const CodecConfig& cc, const TrainSpec& spec, const Dataset& data,
                       const std::string& out_path, const std::string& log_path = "",
                       bool resume = false);

// Loads a base checkpoint, freezes it, and trains the transfer bundle for
// spec.task_id. The transfer checkpoint binds to the base digest and refuses
// to load against anything else.
TrainResult train_transfer(const std::string& base_ckpt_path, const PromptConfig& pc,
                           const TrainSpec& spec, const Dataset& data, const ToyTaskNet& tasknet,
                           const std::string& out_path, const std::string& log_path = "");

// End-to-end fine-tuning baseline: all base parameters trainable, perceptual
// distortion, no prompts.
TrainResult train_full_finetune(const std::string& base_ckpt_path, const TrainSpec& spec,
                                const Dataset& data, const ToyTaskNet& tasknet,
                                const std::string& out_path, const std::string& log_path = "");

// Checkpoint loading helpers shared by evaluation and the CLI.
struct BaseBundle {
  CodecConfig config;
  std::unique_ptr<BaseCodec<float>> codec;
  std::string digest;
  double lambda = 0;
  int lambda_index = 0;
};
BaseBundle load_base_bundle(const std::string& path);

struct TransferBundle {
  PromptConfig config;
  std::unique_ptr<TransferModel<float>> model;
  std::string base_digest;
  std::string task_id;
  double lambda = 0;
  int lambda_index = 0;
};
// base_digest of the already-loaded base codec; mismatch is an error.
TransferBundle load_transfer_bundle(const std::string& path, const std::string& base_digest);

}  // namespace ttic

#endif  // TTIC_TRAIN_HPP_
