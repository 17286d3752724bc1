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

#include "ttic/ablation.hpp"

#include <algorithm>
#include <chrono>
#include <limits>
#include <filesystem>
#include <sstream>

#include "ttic/checkpoint.hpp"

namespace ttic {

std::vector<std::pair<std::string, PromptConfig>> ablation_configs(const std::string& axis,
                                                                   const PromptConfig& defaults,
                                                                   const CodecConfig& cc) {
  std::vector<std::pair<std::string, PromptConfig>> out;
  auto with = [&](const std::string& name, auto mutate) {
    PromptConfig p = defaults;
    mutate(p);
    out.emplace_back(name, p);
  };
  if (axis == "variant_table") {
    with("A_instance_enc_task_dec", [](PromptConfig& p) {
      p.encoder_style = EncPromptStyle::kInstance;
      p.decoder_style = DecPromptStyle::kTask;
    });
    with("B_task_enc_task_dec", [](PromptConfig& p) {
      p.encoder_style = EncPromptStyle::kTask;
      p.decoder_style = DecPromptStyle::kTask;
    });
    with("C_instance_enc_no_dec", [](PromptConfig& p) {
      p.encoder_style = EncPromptStyle::kInstance;
      p.decoder_style = DecPromptStyle::kNone;
    });
    with("D_shared_instance_enc_task_dec", [](PromptConfig& p) {
      p.encoder_style = EncPromptStyle::kInstanceShared;
      p.decoder_style = DecPromptStyle::kTask;
    });
  } else if (axis == "enc_depth") {
    for (const auto& targets :
         std::vector<std::vector<int>>{{1}, {1, 2}, {3, 4}, {1, 2, 3, 4}}) {
      std::string name = "enc_stb";
      for (int t : targets) name += std::to_string(t);
      with(name, [&](PromptConfig& p) { p.encoder_targets = targets; });
    }
  } else if (axis == "dec_depth") {
    for (const auto& targets : std::vector<std::vector<int>>{{1, 2}, {3, 4}, {1, 2, 3, 4}}) {
      std::string name = "dec_stb";
      for (int t : targets) name += std::to_string(t);
      with(name, [&](PromptConfig& p) { p.decoder_targets = targets; });
    }
  } else if (axis == "prompt_count") {
    const int n = cc.window_size * cc.window_size;
    for (int count : {std::max(1, n / 16), n / 4, n}) {
      with("prompts_" + std::to_string(count),
           [&](PromptConfig& p) { p.prompts_per_window = count; });
    }
  } else if (axis == "injection_style") {
    with("deep", [](PromptConfig& p) { p.injection = InjectionStyle::kDeep; });
    with("shallow", [](PromptConfig& p) { p.injection = InjectionStyle::kShallow; });
  } else if (axis == "enc_vs_dec") {
    with("enc_only", [](PromptConfig& p) { p.decoder_style = DecPromptStyle::kNone; });
    with("dec_only", [](PromptConfig& p) { p.encoder_style = EncPromptStyle::kNone; });
    with("both", [](PromptConfig&) {});
  } else {
    throw std::runtime_error("unknown ablation axis: " + axis);
  }
  return out;
}

AblationReport run_ablation(const AblationSpec& spec) {
  namespace fs = std::filesystem;
  if (spec.base_ckpts.empty()) throw std::runtime_error("ablation: no base checkpoints");
  fs::create_directories(spec.work_dir);

  auto first_base = load_base_bundle(spec.base_ckpts.front());
  const CodecConfig cc = first_base.config;
  // Every lambda checkpoint must come from the same architecture family; the
  // per-lambda digests differ, the report records the first as the family id.
  AblationReport rep;
  rep.axis = spec.axis;
  rep.base_digest = first_base.digest;

  DatasetSpec train_ds;
  train_ds.root = spec.dataset_root;
  train_ds.split = "train";
  train_ds.seed = spec.budget.seed;
  auto train_data = Dataset::load(train_ds);
  DatasetSpec val_ds;
  val_ds.root = spec.dataset_root;
  val_ds.split = "val";
  val_ds.seed = spec.budget.seed;
  auto val_data = Dataset::load(val_ds);
  auto tasknet = load_tasknet(spec.tasknet_path);

  rep.base_eval = evaluate_rate_accuracy(spec.base_ckpts, {}, val_data, &tasknet,
                                         spec.eval_max_images);

  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&]() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  for (const auto& [name, pconfig] : ablation_configs(spec.axis, spec.default_prompts, cc)) {
    if (spec.budget_seconds > 0 && elapsed() > spec.budget_seconds) {
      rep.complete = false;
      break;
    }
    AblationEntry entry;
    entry.name = name;
    entry.config = pconfig;
    std::vector<std::string> transfer_ckpts;
    bool ok = true;
    for (size_t li = 0; li < spec.base_ckpts.size(); ++li) {
      if (spec.budget_seconds > 0 && elapsed() > spec.budget_seconds) {
        ok = false;
        rep.complete = false;
        break;
      }
      auto base = load_base_bundle(spec.base_ckpts[li]);
      TrainSpec ts = spec.budget;
      ts.stage = "transfer";
      ts.lambda = base.lambda;
      ts.lambda_index = base.lambda_index;
      const std::string out =
          (fs::path(spec.work_dir) / (name + "_l" + std::to_string(base.lambda_index) + ".ttck"))
              .string();
      if (!fs::exists(out)) {
        train_transfer(spec.base_ckpts[li], pconfig, ts, train_data, tasknet, out);
      }
      transfer_ckpts.push_back(out);
    }
    if (ok) {
      entry.eval = evaluate_rate_accuracy(spec.base_ckpts, transfer_ckpts, val_data, &tasknet,
                                          spec.eval_max_images);
      // Degenerate curves (tied rates at toy budgets) have no defined BD
      // delta; rank them last instead of failing the whole sweep.
      try {
        entry.bd_quality_vs_base = bd_quality(rep.base_eval.curve, entry.eval.curve);
      } catch (const std::invalid_argument&) {
        entry.bd_quality_vs_base = -std::numeric_limits<double>::infinity();
      }
      entry.completed = true;
    }
    rep.entries.push_back(std::move(entry));
  }

  std::sort(rep.entries.begin(), rep.entries.end(), [](const auto& a, const auto& b) {
    if (a.completed != b.completed) return a.completed;
    return a.bd_quality_vs_base > b.bd_quality_vs_base;
  });
  return rep;
}

std::string ablation_markdown(const AblationReport& rep) {
  std::ostringstream os;
  os << "# Ablation: " << rep.axis << "\n\n";
  os << "Base digest: `" << rep.base_digest << "`"
     << (rep.complete ? "" : " (INCOMPLETE: budget exceeded)") << "\n\n";
  os << "| rank | configuration | BD-quality vs base | mean bpp range | quality range |\n";
  os << "|-----:|---------------|-------------------:|----------------|---------------|\n";
  int rank = 1;
  for (const auto& e : rep.entries) {
    if (!e.completed) {
      os << "| - | " << e.name << " | (not run) | | |\n";
      continue;
    }
    double bpp_lo = 1e300, bpp_hi = 0, q_lo = 1e300, q_hi = -1e300;
    for (const auto& p : e.eval.curve.points) {
      bpp_lo = std::min(bpp_lo, p.bpp);
      bpp_hi = std::max(bpp_hi, p.bpp);
      q_lo = std::min(q_lo, p.quality);
      q_hi = std::max(q_hi, p.quality);
    }
    char buf[256];
    std::snprintf(buf, sizeof(buf), "| %d | %s | %+.3f | %.4f-%.4f | %.2f-%.2f |\n", rank++,
                  e.name.c_str(), e.bd_quality_vs_base, bpp_lo, bpp_hi, q_lo, q_hi);
    os << buf;
  }
  return os.str();
}

}  // namespace ttic
