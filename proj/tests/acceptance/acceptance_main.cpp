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
//
// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Trained artifacts are cached in the work directory (first run
// does the full two-stage training; later runs reuse it).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "ttic/bitstream.hpp"
#include "ttic/checkpoint.hpp"
#include "ttic/eval.hpp"
#include "ttic/ablation.hpp"
#include "ttic/train.hpp"

using namespace ttic;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
  std::printf("[%s] criterion %2d: %s\n", pass ? "PASS" : "FAIL", criterion, detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

// ---------------------------------------------------------------------------
// Desk-scale recipe pinned for this box: a slim codec configuration (the
// architecture is configurable by design), 64x64 crops, batch 8, the
// published lambda grid, 20k base / 10k transfer steps.
// ---------------------------------------------------------------------------

CodecConfig accept_codec_config() {
  CodecConfig cc;
  cc.depths = {1, 1, 2, 1};
  cc.widths = {8, 12, 16, 24};
  cc.window_size = 4;
  cc.head_dim = 8;
  cc.cz = 16;
  cc.hyper_width = 16;
  cc.hyper_depth = 1;
  return cc;
}

PromptConfig accept_prompt_config() {
  PromptConfig pc;
  pc.gp_widths = {8, 16, 24};
  return pc;
}

constexpr int64_t kBaseSteps = 20000;
constexpr int64_t kTransferSteps = 10000;
constexpr int kBatch = 8;
constexpr int kCrop = 64;
constexpr double kLambdas[4] = {0.0018, 0.0035, 0.0067, 0.013};
constexpr double kPerceptualScale = 2.0;
constexpr uint64_t kSeed = 20240808;

struct Artifacts {
  std::string work;
  std::string corpus;
  std::string tasknet;
  std::vector<std::string> base_ckpts;
  std::vector<std::string> transfer_ckpts;
  Dataset train_data;
  Dataset val_data;
};

Artifacts prepare_artifacts(const std::string& work) {
  Artifacts a;
  a.work = work;
  a.corpus = work + "/corpus";
  fs::create_directories(work);
  if (!fs::exists(a.corpus + "/train")) {
    std::printf("... generating synthetic corpus\n");
    std::fflush(stdout);
    generate_synthetic_corpus(a.corpus, 200, 40, 64, kSeed);
  }
  DatasetSpec tds;
  tds.root = a.corpus;
  tds.split = "train";
  tds.seed = 1;
  a.train_data = Dataset::load(tds);
  DatasetSpec vds;
  vds.root = a.corpus;
  vds.split = "val";
  vds.seed = 1;
  a.val_data = Dataset::load(vds);

  a.tasknet = work + "/tasknet_A.ttck";
  if (!fs::exists(a.tasknet)) {
    std::printf("... training toy recognition network\n");
    std::fflush(stdout);
    ToyTaskNet net("A", 10, 11);
    auto res = train_toy_tasknet(net, a.train_data, a.val_data, 0.70, 30, 7, 0.88);
    std::printf("    tasknet val accuracy %.3f after %d epochs\n", res.val_accuracy, res.epochs);
    save_tasknet(a.tasknet, net, res.val_accuracy);
  }

  for (int li = 0; li < 4; ++li) {
    const std::string path = work + "/base_l" + std::to_string(li) + ".ttck";
    if (!fs::exists(path)) {
      std::printf("... training base codec at lambda=%g (%lld steps)\n", kLambdas[li],
                  static_cast<long long>(kBaseSteps));
      std::fflush(stdout);
      TrainSpec spec;
      spec.stage = "base";
      spec.lambda = kLambdas[li];
      spec.lambda_index = li;
      spec.steps = kBaseSteps;
      spec.batch_size = kBatch;
      spec.crop = kCrop;
      spec.seed = kSeed + uint64_t(li);
      spec.log_every = 1000;
      train_base(accept_codec_config(), spec, a.train_data, path,
                 work + "/base_l" + std::to_string(li) + ".log.jsonl");
    }
    a.base_ckpts.push_back(path);
  }

  auto net = load_tasknet(a.tasknet);
  for (int li = 0; li < 4; ++li) {
    const std::string path = work + "/transfer_l" + std::to_string(li) + ".ttck";
    if (!fs::exists(path)) {
      std::printf("... transfer training at lambda=%g (%lld steps)\n", kLambdas[li],
                  static_cast<long long>(kTransferSteps));
      std::fflush(stdout);
      TrainSpec spec;
      spec.stage = "transfer";
      spec.task_id = "A";
      spec.lambda = kLambdas[li];
      spec.lambda_index = li;
      spec.steps = kTransferSteps;
      spec.batch_size = kBatch;
      spec.crop = kCrop;
      spec.seed = kSeed + 100 + uint64_t(li);
      spec.perceptual_scale = kPerceptualScale;
      spec.log_every = 1000;
      train_transfer(a.base_ckpts[size_t(li)], accept_prompt_config(), spec, a.train_data, net,
                     path, work + "/transfer_l" + std::to_string(li) + ".log.jsonl");
    }
    a.transfer_ckpts.push_back(path);
  }
  return a;
}

// ---------------------------------------------------------------------------
// Criterion 1: range coder fuzz
// ---------------------------------------------------------------------------
void criterion_entropy_correctness() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(911);
  int64_t total_symbols = 0;
  int tables = 0;
  bool ok = true;
  std::string why;
  while (total_symbols < 1000000) {
    const int n = 2 + int(rng.below(500));
    std::vector<double> pmf(static_cast<size_t>(n));
    double sum = 0;
    for (auto& p : pmf) {
      p = std::pow(rng.uniform(), 2.5) + 1e-9;
      sum += p;
    }
    for (auto& p : pmf) p /= sum;
    auto table = CdfTable::from_pmf(pmf, 16);
    const int count = 10000 + int(rng.below(15000));
    std::vector<int> symbols(static_cast<size_t>(count));
    RangeEncoder enc;
    double shannon = 0;
    for (auto& s : symbols) {
      const double u = rng.uniform();
      double acc = 0;
      s = n - 1;
      for (int i = 0; i < n; ++i) {
        acc += pmf[static_cast<size_t>(i)];
        if (u < acc) {
          s = i;
          break;
        }
      }
      enc.encode(table, s);
      shannon -= std::log2(table.probability(s));
    }
    auto bytes = enc.finish();
    if (double(bytes.size()) * 8 > shannon * 1.01 + 32 * 8) {
      ok = false;
      why = "length bound violated";
      break;
    }
    RangeDecoder dec(bytes.data(), bytes.size());
    for (int s : symbols) {
      if (dec.decode(table) != s) {
        ok = false;
        why = "round-trip mismatch";
        break;
      }
    }
    if (!ok) break;
    total_symbols += count;
    ++tables;
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (ok && tables < 50) {
    ok = false;
    why = "fewer than 50 tables exercised";
  }
  if (ok && secs >= 60) {
    ok = false;
    why = "runtime above 1 minute";
  }
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "entropy round-trip identity on %lld symbols over %d tables, "
                "length within 1%%+32B of the Shannon sum (%.1fs)%s%s",
                static_cast<long long>(total_symbols), tables, secs, ok ? "" : " - ",
                ok ? "" : why.c_str());
  report(1, ok, buf);
}

// ---------------------------------------------------------------------------
// Criterion 2: estimate vs actual on the trained base codec
// ---------------------------------------------------------------------------
void criterion_estimate_vs_actual(const Artifacts& a) {
  const auto t0 = std::chrono::steady_clock::now();
  auto base = load_base_bundle(a.base_ckpts[2]);
  CodecCoder coder(*base.codec);
  Rng rng(912);
  bool ok = true;
  double worst = 0;
  for (int i = 0; i < 20; ++i) {
    ImageF img;
    img.pixels = Tensor<float>({64, 64, 3});
    for (int64_t j = 0; j < img.pixels.size(); ++j) img.pixels[j] = float(rng.uniform());
    img.orig_h = img.orig_w = 64;
    auto stream = coder.compress(img);
    const auto est = coder.last_estimate();
    const double est_bits = est.y_bits + est.z_bits;
    const double actual_bits = double(serialize_bitstream(stream).size()) * 8;
    const double slack = 0.02 * est_bits + 32 * 8;
    worst = std::max(worst, std::abs(actual_bits - est_bits) - slack);
    if (std::abs(actual_bits - est_bits) > slack) ok = false;
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (secs >= 300) ok = false;
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "actual .ttic size within 2%%+32B of the rate estimate on 20 images "
                "(worst margin %+.1f bits, %.1fs)",
                worst, secs);
  report(2, ok, buf);
}

// ---------------------------------------------------------------------------
// Criterion 3: attention fidelity
// ---------------------------------------------------------------------------
void criterion_attention_fidelity() {
  bool ok = true;
  std::string why;
  // prompted projections shapes, Eq. 2
  {
    Rng rng(913);
    const int n = 64, d = 32;
    Tensor<double> ft({n, d}), pt({n / 4, d}), wt({d, d});
    for (int64_t i = 0; i < ft.size(); ++i) ft[i] = rng.uniform(-1, 1);
    for (int64_t i = 0; i < pt.size(); ++i) pt[i] = rng.uniform(-1, 1);
    for (int64_t i = 0; i < wt.size(); ++i) wt[i] = rng.uniform(-1, 1);
    auto f = make_var(ft);
    auto p = make_var(pt);
    auto w = make_var(wt);
    auto triple = prompted_projections<double>(f, p, w, w, w);
    if (triple.q->value.shape() != std::vector<int>{64, 32} ||
        triple.k->value.shape() != std::vector<int>{80, 32} ||
        triple.v->value.shape() != std::vector<int>{80, 32}) {
      ok = false;
      why = "projection shapes differ from (N,d)/(N+N/4,d)";
    }
  }
  // masked-prompt equivalence through full layers, shifted and not
  for (int shifted = 0; shifted < 2 && ok; ++shifted) {
    ParamStore<float> ps;
    Rng rng(914 + uint64_t(shifted));
    SwinLayer<float> layer(ps, "l", 16, 2, 8, shifted == 1, rng);
    Tensor<float> xt({16, 16, 16}), pf({8, 8, 16});
    for (int64_t i = 0; i < xt.size(); ++i) xt[i] = float(rng.uniform(-1, 1));
    for (int64_t i = 0; i < pf.size(); ++i) pf[i] = float(rng.uniform(-1, 1));
    auto x = make_var(xt);
    auto field = make_var(pf);
    auto plain = layer.forward(x, nullptr, nullptr, nullptr, false, false);
    auto masked = layer.forward(x, field, nullptr, nullptr, false, true);
    double max_diff = 0;
    for (int64_t i = 0; i < plain.features->value.size(); ++i) {
      max_diff = std::max(max_diff, double(std::abs(plain.features->value[i] -
                                                    masked.features->value[i])));
    }
    if (max_diff > 1e-6) {
      ok = false;
      why = "masked-prompt output differs from unprompted (max " + std::to_string(max_diff) + ")";
    }
  }
  report(3, ok,
         ok ? "masked prompt logits reproduce the unprompted output; Q/K/V shapes are "
              "(N,d)/(N+N/4,d)"
            : why);
}

// ---------------------------------------------------------------------------
// Criterion 4: gradient checks on a 2-layer toy codec (double precision)
// ---------------------------------------------------------------------------
struct AcceptExtractor : FeatureExtractor<double> {
  Conv2dLayer<double> c1, c2;
  AcceptExtractor(ParamStore<double>& ps, Rng& rng)
      : c1(ps, "e.c1", 3, 4, 3, 2, rng), c2(ps, "e.c2", 4, 6, 3, 2, rng) {}
  std::vector<Var<double>> features(const Var<double>& x) const override {
    auto f1 = gelu(c1.forward(x));
    auto f2 = gelu(c2.forward(f1));
    return {f1, f2};
  }
};

double fd_check(const std::vector<Var<double>>& leaves,
                const std::function<Var<double>()>& build, int per_leaf) {
  for (auto& l : leaves) l->zero_grad();
  backward(build());
  double max_rel = 0;
  // step chosen so the objective's ~1e2 magnitude stays clear of central
  // difference cancellation noise (eps*|f|/h) at double precision
  const double h = 1e-4;
  for (auto& leaf : leaves) {
    const int64_t n = leaf->value.size();
    const int64_t stride = std::max<int64_t>(1, n / per_leaf);
    for (int64_t i = 0; i < n; i += stride) {
      const double orig = leaf->value[i];
      leaf->value[i] = orig + h;
      const double fp = build()->value[0];
      leaf->value[i] = orig - h;
      const double fm = build()->value[0];
      leaf->value[i] = orig;
      const double fd = (fp - fm) / (2 * h);
      const double an = leaf->grad.size() ? leaf->grad[i] : 0.0;
      max_rel = std::max(max_rel, std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6}));
    }
  }
  return max_rel;
}

void criterion_gradient_checks() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(915);
  ParamStore<double> ps;
  // two swin layers inside a conv codec, double precision
  Conv2dLayer<double> ga1(ps, "ga1", 3, 6, 3, 2, rng);
  SwinLayer<double> sl1(ps, "sl1", 6, 1, 4, false, rng);
  Conv2dLayer<double> ga2(ps, "ga2", 6, 8, 3, 2, rng);
  SwinLayer<double> sl2(ps, "sl2", 8, 1, 4, true, rng);
  Conv2dLayer<double> ha(ps, "ha", 8, 6, 3, 2, rng);
  ConvT2dLayer<double> hs(ps, "hs", 6, 16, rng);
  ConvT2dLayer<double> gs1(ps, "gs1", 8, 6, rng);
  ConvT2dLayer<double> gs2(ps, "gs2", 6, 3, rng);
  ParamStore<double> eps;
  AcceptExtractor ex(eps, rng);
  eps.set_all_trainable(false);

  Tensor<double> xt({16, 16, 3});
  for (int64_t i = 0; i < xt.size(); ++i) xt[i] = rng.uniform(0, 1);
  auto x = make_var(xt);
  Tensor<double> yn({4, 4, 8}), zn({2, 2, 6}), pfield({8, 8, 6});
  for (int64_t i = 0; i < yn.size(); ++i) yn[i] = rng.uniform(-0.5, 0.5);
  for (int64_t i = 0; i < zn.size(); ++i) zn[i] = rng.uniform(-0.5, 0.5);
  for (int64_t i = 0; i < pfield.size(); ++i) pfield[i] = rng.uniform(-0.5, 0.5);
  auto prompts = make_var(pfield, true);

  auto build_rd = [&]() {
    auto f = gelu(ga1.forward(x));
    f = sl1.forward(f, prompts, nullptr, nullptr, false, false).features;
    auto y = ga2.forward(f);
    auto yv = sl2.forward(y, nullptr, nullptr, nullptr, false, false).features;
    auto z = ha.forward(gelu(yv));
    auto z_tilde = quant_noise(z, zn);
    auto hp = hs.forward(z_tilde);
    auto mu = slice_channels(hp, 0, 8);
    auto sigma = add_scalar(softplus(slice_channels(hp, 8, 8)), 0.25);
    auto y_tilde = quant_noise(yv, yn);
    auto p_y = gaussian_bin_prob(y_tilde, mu, sigma);
    auto x_hat = gs2.forward(gelu(gs1.forward(y_tilde)));
    auto d = perceptual_distortion<double>(x, x_hat, ex);
    auto p_z = clamp_min(sigmoid(scale(z_tilde, 0.5)), 1e-6);
    auto cost = rd_loss(p_y, reshape(p_z, {int(p_z->value.size())}), d, 0.5);
    return cost.total;
  };
  std::vector<Var<double>> leaves = {prompts};
  for (const auto& [name, v] : ps.items()) leaves.push_back(v);
  const double rd_err = fd_check(leaves, build_rd, 12);

  Tensor<double> xh({16, 16, 3});
  for (int64_t i = 0; i < xh.size(); ++i) xh[i] = rng.uniform(0, 1);
  auto xhat_leaf = make_var(xh, true);
  auto build_perc = [&]() { return perceptual_distortion<double>(x, xhat_leaf, ex); };
  const double perc_err = fd_check({xhat_leaf}, build_perc, 64);

  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool ok = rd_err < 1e-3 && perc_err < 1e-3 && secs < 120;
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "rd_loss and perceptual gradients vs central differences: rel err %.2e / %.2e "
                "(tol 1e-3, %.1fs)",
                rd_err, perc_err, secs);
  report(4, ok, buf);
}

// ---------------------------------------------------------------------------
// Criterion 5: freeze contract (uses the criterion-7 training artifacts)
// ---------------------------------------------------------------------------
void criterion_freeze_contract(const Artifacts& a) {
  bool ok = true;
  std::string why;
  for (int li = 0; li < 4 && ok; ++li) {
    auto base = load_base_bundle(a.base_ckpts[size_t(li)]);
    LoadedCheckpoint tr = read_checkpoint(a.transfer_ckpts[size_t(li)]);
    // the transfer checkpoint is bound to the exact digest of its base
    auto bundle = load_transfer_bundle(a.transfer_ckpts[size_t(li)], base.digest);
    // the optimizer state covers exactly the transfer parameters
    size_t moment_tensors = 0, param_tensors = 0;
    for (const auto& [name, t] : tr.tensors) {
      if (name.rfind("opt.m.", 0) == 0) ++moment_tensors;
      if (name.rfind("opt.", 0) != 0) ++param_tensors;
    }
    if (param_tensors != bundle.model->params().items().size()) {
      ok = false;
      why = "transfer checkpoint carries unexpected parameters";
    }
    if (moment_tensors != param_tensors) {
      ok = false;
      why = "optimizer state does not match the transfer parameter set";
    }
    for (const auto& [name, t] : tr.tensors) {
      if (name.rfind("opt.", 0) == 0) continue;
      if (base.codec->params().find(name)) {
        ok = false;
        why = "optimizer touched base parameter " + name;
      }
    }
  }
  report(5, ok,
         ok ? "base digests unchanged by transfer runs; optimizer state covers only the "
              "prompt generator and task prompts"
            : why);
}

// ---------------------------------------------------------------------------
// Criterion 6: parameter accounting at the published default configuration
// ---------------------------------------------------------------------------
void criterion_parameter_accounting() {
  CodecConfig cc;  // defaults: depths 2/2/6/2, widths 64/96/128/192, window 8
  BaseCodec<float> codec(cc, 1);
  PromptConfig pc;  // defaults: generator 32/64/128, prompts at window/2 grid
  TransferModel<float> tm(cc, pc, "A", 2);
  auto params = count_params(codec, &tm);
  const int prompts_per_window = pc.resolved_prompts(cc);
  const bool ok = params.transfer_total < params.base / 2 && prompts_per_window == 16;
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "transfer params %lld < 0.5 x base %lld; %d prompts per window at window 8",
                static_cast<long long>(params.transfer_total),
                static_cast<long long>(params.base), prompts_per_window);
  report(6, ok, buf);
}

// ---------------------------------------------------------------------------
// Criterion 7: desk-scale transfer efficacy
// ---------------------------------------------------------------------------
void criterion_transfer_efficacy(const Artifacts& a) {
  auto net = load_tasknet(a.tasknet);
  auto base_eval = evaluate_rate_accuracy(a.base_ckpts, {}, a.val_data, &net, 400);
  auto tr_eval = evaluate_rate_accuracy(a.base_ckpts, a.transfer_ckpts, a.val_data, &net, 400);
  int wins = 0;
  std::string detail;
  for (int li = 0; li < 4; ++li) {
    // details are ordered by checkpoint; match on lambda_index
    const EvalPointDetail *bd = nullptr, *td = nullptr;
    for (const auto& d : base_eval.details) {
      if (d.lambda_index == li) bd = &d;
    }
    for (const auto& d : tr_eval.details) {
      if (d.lambda_index == li) td = &d;
    }
    const bool win = td && bd && td->quality >= bd->quality + 1.0 && td->mean_bpp <= bd->mean_bpp;
    if (win) ++wins;
    char buf[160];
    std::snprintf(buf, sizeof(buf), " [l%d base %.4fbpp/%.1f%% -> transfer %.4fbpp/%.1f%%%s]", li,
                  bd ? bd->mean_bpp : 0.0, bd ? bd->quality : 0.0, td ? td->mean_bpp : 0.0,
                  td ? td->quality : 0.0, win ? " +" : "");
    detail += buf;
  }
  const bool ok = wins >= 3;
  report(7, ok,
         "transfer wins (>= +1 accuracy point at <= bpp) at " + std::to_string(wins) +
             "/4 lambda points:" + detail);
}

// ---------------------------------------------------------------------------
// Criterion 8: BD metrics
// ---------------------------------------------------------------------------
void criterion_bd_metrics() {
  bool ok = true;
  std::string why;
  RDCurve anchor;
  anchor.points = {{0.1, 28.0, ""}, {0.2, 31.0, ""}, {0.4, 34.0, ""}, {0.8, 37.0, ""}};
  if (std::abs(bd_rate_percent(anchor, anchor)) > 1e-9 ||
      std::abs(bd_quality(anchor, anchor)) > 1e-9) {
    ok = false;
    why = "identical curves do not give zero";
  }
  RDCurve doubled;
  doubled.points = {{0.2, 28.0, ""}, {0.4, 31.0, ""}, {0.8, 34.0, ""}, {1.6, 37.0, ""}};
  const double dr = bd_rate_percent(anchor, doubled);
  if (std::abs(dr - 100.0) > 1e-6) {
    ok = false;
    why = "doubled-rate curve gives " + std::to_string(dr);
  }
  // quadrature oracle on a synthetic 4-point pair
  RDCurve test;
  test.points = {{0.12, 27.5, ""}, {0.26, 31.5, ""}, {0.5, 34.2, ""}, {0.9, 38.1, ""}};
  {
    std::vector<double> ra, qa, rt, qt;
    for (const auto& p : anchor.points) {
      ra.push_back(std::log2(p.bpp));
      qa.push_back(p.quality);
    }
    for (const auto& p : test.points) {
      rt.push_back(std::log2(p.bpp));
      qt.push_back(p.quality);
    }
    auto da = pchip_slopes(ra, qa);
    auto dt = pchip_slopes(rt, qt);
    auto hermite = [](const std::vector<double>& x, const std::vector<double>& y,
                      const std::vector<double>& d, double xx) {
      size_t i = 0;
      while (i + 2 < x.size() && xx > x[i + 1]) ++i;
      const double h = x[i + 1] - x[i];
      const double t = (xx - x[i]) / h;
      return (1 + 2 * t) * (1 - t) * (1 - t) * y[i] + t * (1 - t) * (1 - t) * h * d[i] +
             t * t * (3 - 2 * t) * y[i + 1] + t * t * (t - 1) * h * d[i + 1];
    };
    auto simpson = [&](const std::vector<double>& x, const std::vector<double>& y,
                       const std::vector<double>& d, double lo, double hi) {
      const int steps = 20000;
      const double h = (hi - lo) / steps;
      double acc = hermite(x, y, d, lo) + hermite(x, y, d, hi);
      for (int i = 1; i < steps; ++i) acc += hermite(x, y, d, lo + i * h) * (i % 2 ? 4.0 : 2.0);
      return acc * h / 3.0;
    };
    const double lo = std::max(ra.front(), rt.front());
    const double hi = std::min(ra.back(), rt.back());
    const double oracle =
        (simpson(rt, qt, dt, lo, hi) - simpson(ra, qa, da, lo, hi)) / (hi - lo);
    const double closed = bd_quality(anchor, test);
    if (std::abs(closed - oracle) > 0.001 * std::max(1.0, std::abs(oracle))) {
      ok = false;
      why = "quadrature oracle disagrees: " + std::to_string(closed) + " vs " +
            std::to_string(oracle);
    }
  }
  report(8, ok,
         ok ? "identity 0, doubled-rate +100% within 1e-6, quadrature agreement within 0.1%"
            : why);
}

// ---------------------------------------------------------------------------
// Criterion 9: bit-allocation conservation and spatial sensitivity
// ---------------------------------------------------------------------------
void criterion_bit_allocation(const Artifacts& a) {
  bool ok = true;
  std::string why;
  // conservation on random likelihood inputs
  {
    Rng rng(916);
    Tensor<float> y({4, 4, 16}), mu({4, 4, 16}), sigma({4, 4, 16});
    for (int64_t i = 0; i < y.size(); ++i) {
      y[i] = float(std::lround(rng.uniform(-4, 4)));
      mu[i] = float(rng.uniform(-1, 1));
      sigma[i] = float(rng.uniform(0.2, 3.0));
    }
    auto map = bit_allocation_map(y, mu, sigma);
    double total = 0;
    for (int64_t i = 0; i < map.size(); ++i) total += map[i];
    double est = 0;
    for (int64_t i = 0; i < y.size(); ++i) {
      const double p = std::max(normal_cdf((double(y[i]) - mu[i] + 0.5) / sigma[i]) -
                                    normal_cdf((double(y[i]) - mu[i] - 0.5) / sigma[i]),
                                kProbFloor);
      est -= std::log2(p);
    }
    if (std::abs(total - est) > 1e-6 * std::max(1.0, est)) {
      ok = false;
      why = "map total deviates from the rate estimate";
    }
  }
  // half-flat / half-noise image through the trained base codec
  if (ok) {
    auto base = load_base_bundle(a.base_ckpts[3]);
    Rng rng(917);
    ImageF img;
    img.pixels = Tensor<float>({64, 64, 3});
    for (int i = 0; i < 64; ++i) {
      for (int j = 0; j < 64; ++j) {
        for (int c = 0; c < 3; ++c) {
          img.pixels.at(i, j, c) = j < 32 ? 0.5f : float(rng.uniform());
        }
      }
    }
    img.orig_h = img.orig_w = 64;
    auto x = constant(img.pixels);
    auto y = base.codec->analysis(x);
    auto z = base.codec->hyper_analysis(y);
    auto gp = base.codec->hyper_synthesis(quantize(z, QuantMode::kRound));
    auto y_hat = quantize(y, QuantMode::kRound, gp.mu);
    auto map = bit_allocation_map(y_hat->value, gp.mu->value, gp.sigma->value);
    double flat = 0, noisy = 0;
    for (int i = 0; i < 64; ++i) {
      for (int j = 0; j < 64; ++j) {
        (j < 32 ? flat : noisy) += map.at(i, j);
      }
    }
    if (!(noisy > flat)) {
      ok = false;
      why = "noisy half does not receive more bits (" + std::to_string(noisy) + " vs " +
            std::to_string(flat) + ")";
    } else {
      why = "map total matches the estimate; noisy half " + std::to_string(noisy) +
            " bits > flat half " + std::to_string(flat) + " bits";
    }
  }
  report(9, ok, why.empty() ? "conservation and spatial sensitivity hold" : why);
}

// ---------------------------------------------------------------------------
// Criterion 10: window-op algebra over 200 randomized shapes
// ---------------------------------------------------------------------------
void criterion_window_algebra() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(918);
  bool ok = true;
  for (int trial = 0; trial < 200 && ok; ++trial) {
    const int ws = 1 << rng.below(4);
    const int h = ws * (1 + int(rng.below(6)));
    const int w = ws * (1 + int(rng.below(6)));
    const int c = 1 + int(rng.below(8));
    Tensor<float> t({h, w, c});
    for (int64_t i = 0; i < t.size(); ++i) t[i] = float(rng.uniform(-1, 1));
    auto f = make_var(t);
    auto back = window_reverse(window_partition(f, ws), h, w);
    for (int64_t i = 0; i < t.size(); ++i) {
      if (back->value[i] != t[i]) {
        ok = false;
        break;
      }
    }
    const int s = int(rng.below(uint64_t(std::max(ws, 2))));
    auto sh = cyclic_shift(cyclic_shift(f, s, s), -s, -s);
    for (int64_t i = 0; i < t.size(); ++i) {
      if (sh->value[i] != t[i]) {
        ok = false;
        break;
      }
    }
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "partition/reverse identity and cyclic-shift inverse over 200 random shapes "
                "(%.2fs)",
                secs);
  report(10, ok && secs < 60, buf);
}

// ---------------------------------------------------------------------------
// Ablation direction check (module-level empirical example, not one of the
// ten numbered criteria): every prompting variant A-D improves on the
// unprompted base by >= 1 accuracy point at matched bpp (<= +2%) at >= 2 of
// the 4 lambda points. Encoder-vs-decoder ordering is reported, not asserted.
// ---------------------------------------------------------------------------
int run_ablation_check(const std::string& work) {
  Artifacts a = prepare_artifacts(work);
  AblationSpec spec;
  spec.base_ckpts = a.base_ckpts;
  spec.tasknet_path = a.tasknet;
  spec.dataset_root = a.corpus;
  spec.work_dir = work + "/ablation";
  spec.default_prompts = accept_prompt_config();
  spec.budget.stage = "transfer";
  spec.budget.task_id = "A";
  spec.budget.steps = 2000;
  spec.budget.batch_size = kBatch;
  spec.budget.crop = kCrop;
  spec.budget.seed = kSeed + 500;
  spec.budget.perceptual_scale = kPerceptualScale;
  spec.budget.log_every = 1000;
  spec.eval_max_images = 400;

  int failures = 0;
  spec.axis = "variant_table";
  auto rep = run_ablation(spec);
  std::printf("%s\n", ablation_markdown(rep).c_str());
  for (const auto& entry : rep.entries) {
    int wins = 0;
    for (const auto& d : entry.eval.details) {
      const EvalPointDetail* bd = nullptr;
      for (const auto& b : rep.base_eval.details) {
        if (b.lambda_index == d.lambda_index) bd = &b;
      }
      if (bd && d.quality >= bd->quality + 1.0 && d.mean_bpp <= bd->mean_bpp * 1.02) ++wins;
    }
    const bool ok = entry.completed && wins >= 2;
    if (!ok) ++failures;
    std::printf("[%s] variant %s improves on the base at %d/4 lambda points\n",
                ok ? "PASS" : "FAIL", entry.name.c_str(), wins);
  }

  spec.axis = "enc_vs_dec";
  auto ed = run_ablation(spec);
  std::printf("%s\n", ablation_markdown(ed).c_str());
  double enc_bd = 0, dec_bd = 0;
  for (const auto& e : ed.entries) {
    if (e.name == "enc_only") enc_bd = e.bd_quality_vs_base;
    if (e.name == "dec_only") dec_bd = e.bd_quality_vs_base;
  }
  std::printf("[INFO] encoder-only BD-quality %+0.3f vs decoder-only %+0.3f (%s; soft "
              "expectation: encoder side ranks better)\n",
              enc_bd, dec_bd, enc_bd >= dec_bd ? "as expected" : "reversed at this toy scale");
  std::fflush(stdout);
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  std::string work = "acceptance_work";
  bool ablation_mode = false;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--ablation") {
      ablation_mode = true;
    } else {
      work = arg;
    }
  }
  if (const char* env = std::getenv("TTIC_ACCEPT_WORK")) work = env;
  if (ablation_mode) return run_ablation_check(work);

  std::printf("acceptance work directory: %s\n", work.c_str());
  criterion_entropy_correctness();
  criterion_attention_fidelity();
  criterion_gradient_checks();
  criterion_parameter_accounting();
  criterion_bd_metrics();
  criterion_window_algebra();

  Artifacts a = prepare_artifacts(work);
  criterion_estimate_vs_actual(a);
  criterion_freeze_contract(a);
  criterion_bit_allocation(a);
  criterion_transfer_efficacy(a);

  std::printf("%d criterion failure(s)\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
