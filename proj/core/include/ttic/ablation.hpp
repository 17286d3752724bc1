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

#ifndef TTIC_ABLATION_HPP_
#define TTIC_ABLATION_HPP_

#include <string>
#include <vector>

#include "ttic/eval.hpp"

namespace ttic {

// Scripted sweeps over the prompting design axes. Every configuration is
// trained with the same budget and seed against the same frozen base
// checkpoints, then ranked by BD-quality against the unprompted base.
struct AblationSpec {
  std::string axis;  // variant_table | enc_depth | dec_depth | prompt_count |
                     // injection_style | enc_vs_dec
  std::vector<std::string> base_ckpts;  // one per lambda
  std::string tasknet_path;
  std::string dataset_root;
  std::string work_dir;
  PromptConfig default_prompts;
  TrainSpec budget;  // steps/batch/seed shared by every configuration
  int eval_max_images = 256;
  double budget_seconds = 0;  // wall-clock cap; 0 = unlimited
};

struct AblationEntry {
  std::string name;
  PromptConfig config;
  EvalReport eval;
  double bd_quality_vs_base = 0;
  bool completed = false;
};

struct AblationReport {
  int schema_version = 1;
  std::string axis;
  std::string base_digest;
  EvalReport base_eval;
  std::vector<AblationEntry> entries;  // ranked by bd_quality_vs_base, best first
  bool complete = true;                // false when the budget ran out
};

// Named configurations for an axis (exposed for tests).
std::vector<std::pair<std::string, PromptConfig>> ablation_configs(const std::string& axis,
                                                                   const PromptConfig& defaults,
                                                                   const CodecConfig& cc);

AblationReport run_ablation(const AblationSpec& spec);

std::string ablation_markdown(const AblationReport& rep);

}  // namespace ttic

#endif  // TTIC_ABLATION_HPP_
