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

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "plot.hpp"
#include "ttic/ablation.hpp"
#include "ttic/bitstream.hpp"
#include "ttic/checkpoint.hpp"
#include "ttic/config_io.hpp"
#include "ttic/eval.hpp"
#include "ttic/train.hpp"

using namespace ttic;
using nlohmann::json;

namespace {

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config: " + path);
  json j = json::parse(f);
  check_keys(j, {"codec", "prompts", "train", "eval"}, "top level");
  return j;
}

CodecConfig codec_from(const json& cfg) {
  return cfg.contains("codec") ? codec_config_from_json(cfg.at("codec")) : CodecConfig{};
}
PromptConfig prompts_from(const json& cfg) {
  return cfg.contains("prompts") ? prompt_config_from_json(cfg.at("prompts")) : PromptConfig{};
}
TrainSpec train_from(const json& cfg) {
  return cfg.contains("train") ? train_spec_from_json(cfg.at("train")) : TrainSpec{};
}

Dataset load_split(const std::string& root, const std::string& split, uint64_t seed) {
  DatasetSpec spec;
  spec.root = root;
  spec.split = split;
  spec.seed = seed;
  return Dataset::load(spec);
}

json eval_report_json(const EvalReport& rep) {
  json j;
  j["metric"] = rep.metric;
  j["points"] = json::array();
  for (size_t i = 0; i < rep.details.size(); ++i) {
    const auto& d = rep.details[i];
    json p;
    p["lambda"] = d.lambda;
    p["lambda_index"] = d.lambda_index;
    p["bpp"] = d.mean_bpp;
    p["bpp_estimate"] = d.mean_bpp_estimate;
    p["quality"] = d.quality;
    p["images"] = d.images;
    j["points"].push_back(p);
  }
  return j;
}

RDCurve curve_from_report(const json& j) {
  RDCurve c;
  for (const auto& p : j.at("points")) {
    c.points.push_back({p.at("bpp").get<double>(), p.at("quality").get<double>(), ""});
  }
  c.sort_by_bpp();
  return c;
}

int run_train_base(const std::string& config_path, double lambda, int lambda_index,
                   int64_t steps, uint64_t seed, const std::string& dataset,
                   const std::string& out, const std::string& log_path, bool resume) {
  auto cfg = load_config(config_path);
  auto cc = codec_from(cfg);
  auto spec = train_from(cfg);
  spec.stage = "base";
  if (lambda > 0) spec.lambda = lambda;
  if (lambda_index >= 0) spec.lambda_index = lambda_index;
  if (steps > 0) spec.steps = steps;
  if (seed != uint64_t(-1)) spec.seed = seed;
  if (!dataset.empty()) spec.dataset_root = dataset;
  auto data = load_split(spec.dataset_root, spec.dataset_split, spec.seed);
  auto res = train_base(cc, spec, data, out, log_path, resume);
  std::cout << "base checkpoint: " << res.checkpoint_path << "\n"
            << "digest: " << res.base_digest << "\n";
  if (!res.log.empty()) {
    std::cout << "final: bpp=" << res.log.back().bpp
              << " distortion=" << res.log.back().distortion
              << " total=" << res.log.back().total << "\n";
  }
  return 0;
}

int run_transfer(const std::string& config_path, const std::string& base,
                 const std::string& task, const std::string& tasknet_path, int64_t steps,
                 uint64_t seed, const std::string& dataset, const std::string& out,
                 const std::string& log_path) {
  auto cfg = load_config(config_path);
  auto pc = prompts_from(cfg);
  auto spec = train_from(cfg);
  spec.stage = "transfer";
  if (!task.empty()) spec.task_id = task;
  if (steps > 0) spec.steps = steps;
  if (seed != uint64_t(-1)) spec.seed = seed;
  if (!dataset.empty()) spec.dataset_root = dataset;
  auto base_bundle = load_base_bundle(base);
  spec.lambda = base_bundle.lambda;
  spec.lambda_index = base_bundle.lambda_index;
  auto data = load_split(spec.dataset_root, spec.dataset_split, spec.seed);
  auto net = load_tasknet(tasknet_path);
  if (ToyTaskNet::task_mode(spec.task_id) == 0) {
    throw std::runtime_error("unknown task id: " + spec.task_id);
  }
  auto res = train_transfer(base, pc, spec, data, net, out, log_path);
  std::cout << "transfer checkpoint: " << res.checkpoint_path << "\n"
            << "bound base digest: " << res.base_digest << "\n";
  return 0;
}

int run_full_finetune(const std::string& config_path, const std::string& base,
                      const std::string& task, const std::string& tasknet_path, int64_t steps,
                      uint64_t seed, const std::string& dataset, const std::string& out) {
  auto cfg = load_config(config_path);
  auto spec = train_from(cfg);
  spec.stage = "full_finetune";
  if (!task.empty()) spec.task_id = task;
  if (steps > 0) spec.steps = steps;
  if (seed != uint64_t(-1)) spec.seed = seed;
  if (!dataset.empty()) spec.dataset_root = dataset;
  auto base_bundle = load_base_bundle(base);
  spec.lambda = base_bundle.lambda;
  spec.lambda_index = base_bundle.lambda_index;
  auto data = load_split(spec.dataset_root, spec.dataset_split, spec.seed);
  auto net = load_tasknet(tasknet_path);
  auto res = train_full_finetune(base, spec, data, net, out);
  std::cout << "fine-tuned checkpoint: " << res.checkpoint_path << "\n";
  return 0;
}

int run_compress(const std::string& ckpt, const std::string& transfer_path,
                 const std::string& in, const std::string& out) {
  auto base = load_base_bundle(ckpt);
  std::unique_ptr<TransferBundle> transfer;
  if (!transfer_path.empty()) {
    transfer = std::make_unique<TransferBundle>(load_transfer_bundle(transfer_path, base.digest));
  }
  auto img = to_float_image(read_image(in));
  CodecCoder coder(*base.codec);
  const uint8_t mode = transfer ? ToyTaskNet::task_mode(transfer->task_id) : 0;
  auto stream = coder.compress(img, transfer ? transfer->model.get() : nullptr, mode,
                               uint8_t(base.lambda_index));
  write_bitstream_file(out, stream);
  const auto est = coder.last_estimate();
  std::cout << "wrote " << out << ": " << stream.total_bytes() << " bytes, bpp=" << stream.bpp()
            << " (estimate " << (est.y_bits + est.z_bits) / (double(img.orig_h) * img.orig_w)
            << ")\n";
  return 0;
}

int run_decompress(const std::string& ckpt, const std::string& transfer_path,
                   const std::string& in, const std::string& out) {
  auto base = load_base_bundle(ckpt);
  std::unique_ptr<TransferBundle> transfer;
  if (!transfer_path.empty()) {
    transfer = std::make_unique<TransferBundle>(load_transfer_bundle(transfer_path, base.digest));
  }
  auto stream = read_bitstream_file(in);
  CodecCoder coder(*base.codec);
  if (stream.header.mode != 0) {
    if (!transfer) {
      throw std::runtime_error("bitstream mode " + std::to_string(stream.header.mode) +
                               " requires --transfer");
    }
    if (ToyTaskNet::task_mode(transfer->task_id) != stream.header.mode) {
      throw std::runtime_error("bitstream mode does not match the transfer bundle task");
    }
  }
  auto img = coder.decompress(stream, transfer ? transfer->model.get() : nullptr);
  write_png_rgb8(out, to_u8_image(img.pixels));
  std::cout << "wrote " << out << " (" << img.pixels.dim(1) << "x" << img.pixels.dim(0) << ")\n";
  return 0;
}

int run_eval(const std::vector<std::string>& ckpts, const std::vector<std::string>& transfers,
             const std::string& dataset, const std::string& split,
             const std::string& tasknet_path, const std::string& task,
             const std::string& report_path, const std::string& plot_path,
             const std::string& csv_path, const std::string& anchor_path, int max_images,
             uint64_t seed) {
  auto data = load_split(dataset, split, seed);
  std::unique_ptr<ToyTaskNet> net;
  if (!tasknet_path.empty()) net = std::make_unique<ToyTaskNet>(load_tasknet(tasknet_path));
  auto rep = evaluate_rate_accuracy(ckpts, transfers, data, net.get(), max_images);
  if (!task.empty() && !transfers.empty()) {
    auto base = load_base_bundle(ckpts[0]);
    auto tb = load_transfer_bundle(transfers[0], base.digest);
    if (tb.task_id != task) {
      throw std::runtime_error("transfer bundle task " + tb.task_id + " != --task " + task);
    }
  }
  json j = eval_report_json(rep);
  {
    // complexity of the evaluated family at a reference input size
    auto base = load_base_bundle(ckpts[0]);
    std::unique_ptr<TransferBundle> tr;
    if (!transfers.empty()) {
      tr = std::make_unique<TransferBundle>(load_transfer_bundle(transfers[0], base.digest));
    }
    const TransferModel<float>* tm = tr ? tr->model.get() : nullptr;
    auto cx = count_macs(*base.codec, tm, 256, 256);
    auto params = count_params(*base.codec, tm);
    j["complexity"] = {{"input", {256, 256}},
                       {"encoder_kmacs_per_pixel", cx.encoder_kmacs_per_pixel()},
                       {"decoder_kmacs_per_pixel", cx.decoder_kmacs_per_pixel()},
                       {"base_params", params.base},
                       {"transfer_params", params.transfer_total}};
  }
  if (!anchor_path.empty()) {
    std::ifstream f(anchor_path);
    if (!f) throw std::runtime_error("cannot open anchor report: " + anchor_path);
    auto anchor = curve_from_report(json::parse(f));
    j["bd_vs_anchor"] = {{"bd_rate_percent", bd_rate_percent(anchor, rep.curve)},
                         {"bd_quality", bd_quality(anchor, rep.curve)}};
  }
  if (!report_path.empty()) {
    std::ofstream f(report_path);
    f << j.dump(2) << "\n";
    std::cout << "report: " << report_path << "\n";
  } else {
    std::cout << j.dump(2) << "\n";
  }
  if (!csv_path.empty()) {
    std::ofstream f(csv_path);
    f << "lambda,lambda_index,bpp,bpp_estimate,quality,images\n";
    for (const auto& d : rep.details) {
      f << d.lambda << "," << d.lambda_index << "," << d.mean_bpp << "," << d.mean_bpp_estimate
        << "," << d.quality << "," << d.images << "\n";
    }
    std::cout << "csv: " << csv_path << "\n";
  }
  if (!plot_path.empty()) {
    plot::save_rd_plot(plot_path, {rep.curve});
    std::cout << "plot: " << plot_path << "\n";
  }
  return 0;
}

int run_bd(const std::string& anchor_path, const std::string& test_path) {
  auto read = [](const std::string& p) {
    std::ifstream f(p);
    if (!f) throw std::runtime_error("cannot open report: " + p);
    return json::parse(f);
  };
  auto anchor = curve_from_report(read(anchor_path));
  auto test = curve_from_report(read(test_path));
  json out;
  out["bd_rate_percent"] = bd_rate_percent(anchor, test);
  out["bd_quality"] = bd_quality(anchor, test);
  std::cout << out.dump(2) << "\n";
  return 0;
}

int run_complexity(const std::string& ckpt, const std::string& transfer_path, int h, int w) {
  auto base = load_base_bundle(ckpt);
  std::unique_ptr<TransferBundle> transfer;
  if (!transfer_path.empty()) {
    transfer = std::make_unique<TransferBundle>(load_transfer_bundle(transfer_path, base.digest));
  }
  const TransferModel<float>* tm = transfer ? transfer->model.get() : nullptr;
  auto rep = count_macs(*base.codec, tm, h, w);
  auto params = count_params(*base.codec, tm);
  json j;
  j["input"] = {h, w};
  j["encoder_kmacs_per_pixel"] = rep.encoder_kmacs_per_pixel();
  j["decoder_kmacs_per_pixel"] = rep.decoder_kmacs_per_pixel();
  json enc = json::array(), dec = json::array();
  for (const auto& e : rep.encoder) enc.push_back({{"name", e.name}, {"macs", e.macs}});
  for (const auto& e : rep.decoder) dec.push_back({{"name", e.name}, {"macs", e.macs}});
  j["encoder_layers"] = enc;
  j["decoder_layers"] = dec;
  j["params"] = {{"base", params.base},
                 {"generator", params.generator},
                 {"task_prompts", params.task_prompts},
                 {"transfer_total", params.transfer_total}};
  std::cout << j.dump(2) << "\n";
  return 0;
}

int run_bitmap(const std::string& ckpt, const std::string& in, const std::string& out) {
  auto base = load_base_bundle(ckpt);
  auto img = pad_to_multiple(to_float_image(read_image(in)), 64);
  auto x = constant(img.pixels);
  auto y = base.codec->analysis(x);
  auto z = base.codec->hyper_analysis(y);
  auto z_hat = quantize(z, QuantMode::kRound);
  auto gp = base.codec->hyper_synthesis(z_hat);
  auto y_hat = quantize(y, QuantMode::kRound, gp.mu);
  auto map = bit_allocation_map(y_hat->value, gp.mu->value, gp.sigma->value);
  auto ex = export_bit_allocation_png(out, map);
  double total = 0;
  for (int64_t i = 0; i < map.size(); ++i) total += map[i];
  json sidecar;
  sidecar["min_bits"] = ex.min_bits;
  sidecar["max_bits"] = ex.max_bits;
  sidecar["total_bits"] = total;
  std::ofstream f(out + ".json");
  f << sidecar.dump(2) << "\n";
  std::cout << "wrote " << out << " and " << out << ".json (total " << total << " bits)\n";
  return 0;
}

int run_gen_data(const std::string& out, int per_class_train, int per_class_val, int size,
                 uint64_t seed) {
  generate_synthetic_corpus(out, per_class_train, per_class_val, size, seed);
  std::cout << "generated corpus at " << out << "\n";
  return 0;
}

int run_train_task(const std::string& dataset, const std::string& arch, const std::string& out,
                   double min_acc, int epochs, uint64_t seed) {
  auto train = load_split(dataset, "train", seed);
  auto val = load_split(dataset, "val", seed);
  ToyTaskNet net(arch, std::max(train.num_classes(), 2), seed);
  auto res = train_toy_tasknet(net, train, val, min_acc, epochs, seed);
  save_tasknet(out, net, res.val_accuracy);
  std::cout << "tasknet " << arch << ": train acc " << res.train_accuracy << ", val acc "
            << res.val_accuracy << " after " << res.epochs << " epochs -> " << out << "\n";
  return 0;
}

int run_ablate(const std::string& axis, const std::vector<std::string>& bases,
               const std::string& tasknet_path, const std::string& dataset,
               const std::string& work, const std::string& config_path, int64_t steps,
               uint64_t seed, int max_images, double budget_s, const std::string& report_path,
               const std::string& md_path) {
  auto cfg = load_config(config_path);
  AblationSpec spec;
  spec.axis = axis;
  spec.base_ckpts = bases;
  spec.tasknet_path = tasknet_path;
  spec.dataset_root = dataset;
  spec.work_dir = work;
  spec.default_prompts = prompts_from(cfg);
  spec.budget = train_from(cfg);
  spec.budget.stage = "transfer";
  if (steps > 0) spec.budget.steps = steps;
  if (seed != uint64_t(-1)) spec.budget.seed = seed;
  spec.eval_max_images = max_images;
  spec.budget_seconds = budget_s;
  auto rep = run_ablation(spec);
  json j;
  j["schema_version"] = rep.schema_version;
  j["axis"] = rep.axis;
  j["base_digest"] = rep.base_digest;
  j["complete"] = rep.complete;
  j["base"] = eval_report_json(rep.base_eval);
  j["entries"] = json::array();
  for (const auto& e : rep.entries) {
    json je;
    je["name"] = e.name;
    je["completed"] = e.completed;
    je["bd_quality_vs_base"] = e.bd_quality_vs_base;
    je["prompts"] = prompt_config_to_json(e.config);
    if (e.completed) je["eval"] = eval_report_json(e.eval);
    j["entries"].push_back(je);
  }
  if (!report_path.empty()) {
    std::ofstream f(report_path);
    f << j.dump(2) << "\n";
    std::cout << "report: " << report_path << "\n";
  } else {
    std::cout << j.dump(2) << "\n";
  }
  if (!md_path.empty()) {
    std::ofstream f(md_path);
    f << ablation_markdown(rep);
    std::cout << "summary: " << md_path << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ttic: transferable transformer image codec"};
  app.require_subcommand(1);

  // train-base
  std::string config, dataset, out, log_path, base, task = "", tasknet_path, transfer_path;
  std::string in_path;
  double lambda = 0;
  int lambda_index = -1;
  int64_t steps = 0;
  uint64_t seed = uint64_t(-1);
  bool resume = false;

  auto* tb = app.add_subcommand("train-base", "train a base codec for reconstruction");
  tb->add_option("--config", config, "JSON config");
  tb->add_option("--lambda", lambda, "rate-distortion tradeoff");
  tb->add_option("--lambda-index", lambda_index, "index into the lambda grid");
  tb->add_option("--steps", steps, "training steps");
  tb->add_option("--seed", seed, "seed");
  tb->add_option("--dataset", dataset, "dataset root");
  tb->add_option("--out", out, "output checkpoint")->required();
  tb->add_option("--log", log_path, "JSONL training log");
  tb->add_flag("--resume", resume, "resume from --out");

  auto* tr = app.add_subcommand("transfer", "train prompts against a frozen base codec");
  tr->add_option("--config", config, "JSON config");
  tr->add_option("--base", base, "base checkpoint")->required();
  tr->add_option("--task", task, "task id (A or B)");
  tr->add_option("--tasknet", tasknet_path, "frozen recognition checkpoint")->required();
  tr->add_option("--steps", steps, "training steps");
  tr->add_option("--seed", seed, "seed");
  tr->add_option("--dataset", dataset, "dataset root");
  tr->add_option("--out", out, "output transfer checkpoint")->required();
  tr->add_option("--log", log_path, "JSONL training log");

  auto* ft = app.add_subcommand("full-finetune", "fine-tune the whole codec (baseline)");
  ft->add_option("--config", config, "JSON config");
  ft->add_option("--base", base, "base checkpoint")->required();
  ft->add_option("--task", task, "task id");
  ft->add_option("--tasknet", tasknet_path, "frozen recognition checkpoint")->required();
  ft->add_option("--steps", steps, "training steps");
  ft->add_option("--seed", seed, "seed");
  ft->add_option("--dataset", dataset, "dataset root");
  ft->add_option("--out", out, "output checkpoint")->required();

  auto* cp = app.add_subcommand("compress", "encode an image to a .ttic stream");
  cp->add_option("--ckpt", base, "base checkpoint")->required();
  cp->add_option("--transfer", transfer_path, "transfer checkpoint");
  cp->add_option("--in", in_path, "input image")->required();
  cp->add_option("--out", out, "output stream")->required();

  auto* dc = app.add_subcommand("decompress", "decode a .ttic stream to an image");
  dc->add_option("--ckpt", base, "base checkpoint")->required();
  dc->add_option("--transfer", transfer_path, "transfer checkpoint");
  dc->add_option("--in", in_path, "input stream")->required();
  dc->add_option("--out", out, "output image")->required();

  std::vector<std::string> ckpts, transfers;
  std::string split = "val", report, plot_path, anchor_path, test_path;
  int max_images = 0;
  auto* ev = app.add_subcommand("eval", "rate-accuracy (or rate-PSNR) evaluation");
  ev->add_option("--ckpts", ckpts, "base checkpoints")->required()->delimiter(',');
  ev->add_option("--transfers", transfers, "matched transfer checkpoints")->delimiter(',');
  ev->add_option("--dataset", dataset, "dataset root")->required();
  ev->add_option("--split", split, "dataset split");
  ev->add_option("--tasknet", tasknet_path, "recognition checkpoint (omit for PSNR)");
  ev->add_option("--task", task, "expected task id of the transfer bundles");
  ev->add_option("--report", report, "output JSON report");
  ev->add_option("--plot", plot_path, "output PNG plot");
  std::string csv_path, anchor_path2;
  ev->add_option("--csv", csv_path, "output CSV of the curve");
  ev->add_option("--anchor", anchor_path2, "anchor report to embed a BD table against");
  ev->add_option("--max-images", max_images, "cap evaluated images");
  ev->add_option("--seed", seed, "dataset order seed");

  auto* bd = app.add_subcommand("bd", "Bjontegaard deltas between two eval reports");
  bd->add_option("--anchor", anchor_path, "anchor report JSON")->required();
  bd->add_option("--test", test_path, "test report JSON")->required();

  int ch = 256, cw = 256;
  auto* cx = app.add_subcommand("complexity", "kMACs/pixel and parameter counts");
  cx->add_option("--ckpt", base, "base checkpoint")->required();
  cx->add_option("--transfer", transfer_path, "transfer checkpoint");
  cx->add_option("--height", ch, "input height (multiple of 64)");
  cx->add_option("--width", cw, "input width (multiple of 64)");

  auto* bm = app.add_subcommand("bitmap", "bit-allocation map for an image");
  bm->add_option("--ckpt", base, "base checkpoint")->required();
  bm->add_option("--in", in_path, "input image")->required();
  bm->add_option("--out", out, "output 16-bit PNG")->required();

  int pct = 200, pcv = 40, img_size = 64;
  auto* gd = app.add_subcommand("gen-data", "generate the synthetic shape corpus");
  gd->add_option("--out", out, "corpus root")->required();
  gd->add_option("--per-class-train", pct, "train images per class");
  gd->add_option("--per-class-val", pcv, "val images per class");
  gd->add_option("--size", img_size, "image size");
  gd->add_option("--seed", seed, "seed");

  std::string arch = "A";
  double min_acc = 0.70;
  int epochs = 20;
  auto* tt = app.add_subcommand("train-task", "train a toy recognition network");
  tt->add_option("--dataset", dataset, "dataset root")->required();
  tt->add_option("--arch", arch, "architecture (A or B)");
  tt->add_option("--out", out, "output checkpoint")->required();
  tt->add_option("--min-acc", min_acc, "required held-out accuracy");
  tt->add_option("--epochs", epochs, "max epochs");
  tt->add_option("--seed", seed, "seed");

  std::string axis = "variant_table", work = "ablation_work", md_path;
  double budget_s = 0;
  auto* ab = app.add_subcommand("ablate", "run one ablation axis");
  ab->add_option("--axis", axis,
                 "variant_table|enc_depth|dec_depth|prompt_count|injection_style|enc_vs_dec");
  ab->add_option("--bases", ckpts, "base checkpoints (one per lambda)")->required()->delimiter(',');
  ab->add_option("--tasknet", tasknet_path, "recognition checkpoint")->required();
  ab->add_option("--dataset", dataset, "dataset root")->required();
  ab->add_option("--work", work, "working directory for transfer checkpoints");
  ab->add_option("--config", config, "JSON config (prompts + train budget)");
  ab->add_option("--steps", steps, "transfer steps per configuration");
  ab->add_option("--seed", seed, "seed");
  ab->add_option("--max-images", max_images, "eval image cap");
  ab->add_option("--budget-seconds", budget_s, "wall-clock budget (0 = unlimited)");
  ab->add_option("--report", report, "output JSON report");
  ab->add_option("--md", md_path, "output markdown summary");

  CLI11_PARSE(app, argc, argv);

  try {
    if (tb->parsed()) {
      return run_train_base(config, lambda, lambda_index, steps, seed, dataset, out, log_path,
                            resume);
    }
    if (tr->parsed()) {
      return run_transfer(config, base, task, tasknet_path, steps, seed, dataset, out, log_path);
    }
    if (ft->parsed()) {
      return run_full_finetune(config, base, task, tasknet_path, steps, seed, dataset, out);
    }
    if (cp->parsed()) return run_compress(base, transfer_path, in_path, out);
    if (dc->parsed()) return run_decompress(base, transfer_path, in_path, out);
    if (ev->parsed()) {
      return run_eval(ckpts, transfers, dataset, split, tasknet_path, task, report, plot_path,
                      csv_path, anchor_path2, max_images, seed == uint64_t(-1) ? 0 : seed);
    }
    if (bd->parsed()) return run_bd(anchor_path, test_path);
    if (cx->parsed()) return run_complexity(base, transfer_path, ch, cw);
    if (bm->parsed()) return run_bitmap(base, in_path, out);
    if (gd->parsed()) {
      return run_gen_data(out, pct, pcv, img_size, seed == uint64_t(-1) ? 0 : seed);
    }
    if (tt->parsed()) {
      return run_train_task(dataset, arch, out, min_acc, epochs, seed == uint64_t(-1) ? 0 : seed);
    }
    if (ab->parsed()) {
      return run_ablate(axis, ckpts, tasknet_path, dataset, work, config, steps, seed, max_images,
                        budget_s, report, md_path);
    }
  } catch (const std::exception& e) {
    json err;
    err["error"] = e.what();
    std::cerr << err.dump() << std::endl;
    return 1;
  }
  return 1;
}
