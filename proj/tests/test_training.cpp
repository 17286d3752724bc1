#include <doctest.h>

#include <filesystem>

#include "testutil.hpp"
#include "ttic/checkpoint.hpp"
#include "ttic/config_io.hpp"
#include "ttic/train.hpp"

using namespace ttic;
namespace fs = std::filesystem;

namespace {

CodecConfig smoke_cc() {
  CodecConfig cc;
  cc.depths = {1, 1, 1, 1};
  cc.widths = {6, 8, 10, 12};
  cc.window_size = 4;
  cc.head_dim = 8;
  cc.cz = 8;
  cc.hyper_width = 8;
  cc.hyper_depth = 1;
  return cc;
}

PromptConfig smoke_pc() {
  PromptConfig pc;
  pc.gp_widths = {6, 8, 10};
  return pc;
}

Dataset smoke_dataset() {
  static bool generated = false;
  const char* root = "/tmp/ttic_train_corpus";
  if (!generated) {
    fs::remove_all(root);
    generate_synthetic_corpus(root, 6, 2, 64, 99);
    generated = true;
  }
  DatasetSpec spec;
  spec.root = root;
  spec.split = "train";
  spec.seed = 1;
  return Dataset::load(spec);
}

TrainSpec smoke_spec(int64_t steps) {
  TrainSpec s;
  s.stage = "base";
  s.lambda = 0.013;
  s.lambda_index = 3;
  s.lr = 1e-3;
  s.steps = steps;
  s.batch_size = 2;
  s.crop = 64;
  s.seed = 7;
  s.log_every = 1;
  return s;
}

}  // namespace

TEST_CASE("base training runs, logs, and improves") {
  auto data = smoke_dataset();
  auto spec = smoke_spec(120);
  const std::string out = "/tmp/ttic_smoke_base.ttck";
  auto res = train_base(smoke_cc(), spec, data, out, "/tmp/ttic_smoke_base.log.jsonl");
  REQUIRE(res.log.size() >= 100);
  for (const auto& e : res.log) {
    CHECK(std::isfinite(e.total));
    CHECK(e.bpp >= 0);
  }
  // smoothed early vs late objective
  double early = 0, late = 0;
  for (int i = 0; i < 10; ++i) {
    early += res.log[size_t(i)].total;
    late += res.log[res.log.size() - 1 - size_t(i)].total;
  }
  CHECK(late < early);
  CHECK(fs::exists(out));
  CHECK(fs::exists("/tmp/ttic_smoke_base.log.jsonl"));

  SUBCASE("checkpoint reloads into a working codec") {
    auto bundle = load_base_bundle(out);
    CHECK(bundle.lambda == doctest::Approx(0.013));
    CHECK(bundle.digest == res.base_digest);
  }
}

TEST_CASE("seeded determinism and resume") {
  auto data = smoke_dataset();
  SUBCASE("same spec and seed give identical loss traces") {
    auto r1 = train_base(smoke_cc(), smoke_spec(8), data, "/tmp/ttic_det1.ttck");
    auto r2 = train_base(smoke_cc(), smoke_spec(8), data, "/tmp/ttic_det2.ttck");
    REQUIRE(r1.log.size() == r2.log.size());
    for (size_t i = 0; i < r1.log.size(); ++i) {
      REQUIRE(r1.log[i].total == r2.log[i].total);
    }
    CHECK(r1.base_digest == r2.base_digest);
  }
  SUBCASE("resume reproduces the uninterrupted run") {
    auto full = train_base(smoke_cc(), smoke_spec(16), data, "/tmp/ttic_full.ttck");
    auto half_spec = smoke_spec(8);
    half_spec.lr_schedule_steps = 16;  // interrupted run keeps the 16-step schedule
    train_base(smoke_cc(), half_spec, data, "/tmp/ttic_half.ttck");
    auto resumed = train_base(smoke_cc(), smoke_spec(16), data, "/tmp/ttic_half.ttck", "", true);
    CHECK(resumed.base_digest == full.base_digest);
    CHECK(resumed.log.back().total == doctest::Approx(full.log.back().total).epsilon(1e-12));
  }
}

TEST_CASE("transfer training freezes the base and trains only prompts") {
  auto data = smoke_dataset();
  const std::string base_path = "/tmp/ttic_tr_base.ttck";
  train_base(smoke_cc(), smoke_spec(10), data, base_path);
  auto base_before = load_base_bundle(base_path);

  ToyTaskNet net("A", 10, 5);

  TrainSpec ts = smoke_spec(6);
  ts.stage = "transfer";
  ts.task_id = "A";
  ts.perceptual_scale = 100.0;
  const std::string tout = "/tmp/ttic_tr_transfer.ttck";
  auto res = train_transfer(base_path, smoke_pc(), ts, data, net, tout);

  SUBCASE("base digest unchanged after the full run") {
    auto base_after = load_base_bundle(base_path);
    CHECK(base_after.digest == base_before.digest);
    CHECK(res.base_digest == base_before.digest);
  }
  SUBCASE("transfer bundle loads against the right digest only") {
    auto bundle = load_transfer_bundle(tout, base_before.digest);
    CHECK(bundle.task_id == "A");
    CHECK_THROWS_WITH_AS(load_transfer_bundle(tout, "0000000000000000"),
                         doctest::Contains("digest"), std::runtime_error);
  }
  SUBCASE("transfer actually changed the prompt parameters") {
    TransferModel<float> fresh(base_before.config, smoke_pc(), "A",
                               derive_seed(ts.seed, "transfer-init"));
    auto bundle = load_transfer_bundle(tout, base_before.digest);
    CHECK(params_digest(fresh.params()) != params_digest(bundle.model->params()));
  }
}

TEST_CASE("full fine-tuning is the complement of the freeze contract") {
  auto data = smoke_dataset();
  const std::string base_path = "/tmp/ttic_ft_base.ttck";
  train_base(smoke_cc(), smoke_spec(6), data, base_path);
  auto before = load_base_bundle(base_path);
  ToyTaskNet net("A", 10, 6);

  TrainSpec ts = smoke_spec(3);
  ts.stage = "full_finetune";
  ts.perceptual_scale = 100.0;
  const std::string out = "/tmp/ttic_ft_out.ttck";
  auto res = train_full_finetune(base_path, ts, data, net, out);
  CHECK(res.base_digest != before.digest);

  // trainable set is strictly larger than the transfer stage's
  BaseCodec<float> codec(before.config, 1);
  codec.params().set_all_trainable(true);
  TransferModel<float> tm(before.config, smoke_pc(), "A", 2);
  tm.params().set_all_trainable(true);
  CHECK(codec.params().total_params() > tm.params().total_params());
}

TEST_CASE("non-finite loss aborts with a diagnostic snapshot") {
  auto data = smoke_dataset();
  auto spec = smoke_spec(5);
  spec.lambda = 1e308;  // distortion term overflows to inf on the first step
  const std::string out = "/tmp/ttic_nan_base.ttck";
  fs::remove(out + ".diag");
  CHECK_THROWS_WITH_AS(train_base(smoke_cc(), spec, data, out),
                       doctest::Contains("non-finite"), std::runtime_error);
  CHECK(fs::exists(out + ".diag"));
}

TEST_CASE("frozen base parameters receive no gradients during transfer") {
  auto data = smoke_dataset();
  const std::string base_path = "/tmp/ttic_fz_base.ttck";
  train_base(smoke_cc(), smoke_spec(4), data, base_path);
  auto base = load_base_bundle(base_path);
  ToyTaskNet net("A", 10, 9);
  TransferModel<float> tm(base.config, smoke_pc(), "A", 3);
  tm.params().set_all_trainable(true);
  // one hand-rolled training-style step
  auto x = constant(data.at(0).image);
  auto enc = tm.encoder_prompts(x);
  auto y = base.codec->analysis(x, &enc);
  auto dec = tm.decoder_prompts(y, 64, 64);
  auto x_hat = base.codec->synthesis(y, &dec);
  backward(scale(perceptual_distortion<float>(x, x_hat, net), 1.0f));
  bool transfer_has_grads = false;
  for (const auto& [name, v] : tm.params().items()) {
    if (v->grad.size() > 0) transfer_has_grads = true;
  }
  CHECK(transfer_has_grads);
  for (const auto& [name, v] : base.codec->params().items()) {
    // frozen params never even allocate grad storage
    CHECK(v->grad.size() == 0);
  }
}

TEST_CASE("config json round trips") {
  auto cc = smoke_cc();
  auto cc2 = codec_config_from_json(codec_config_to_json(cc));
  CHECK(cc2.widths == cc.widths);
  CHECK(cc2.window_size == cc.window_size);
  auto pc = smoke_pc();
  pc.encoder_style = EncPromptStyle::kInstanceShared;
  pc.injection = InjectionStyle::kShallow;
  auto pc2 = prompt_config_from_json(prompt_config_to_json(pc));
  CHECK(pc2.encoder_style == EncPromptStyle::kInstanceShared);
  CHECK(pc2.injection == InjectionStyle::kShallow);
  TrainSpec ts;
  ts.lambda = 0.0035;
  ts.steps = 12345;
  auto ts2 = train_spec_from_json(train_spec_to_json(ts));
  CHECK(ts2.lambda == 0.0035);
  CHECK(ts2.steps == 12345);
  nlohmann::json bad = {{"widths", {1, 2, 3, 4}}, {"bogus", 1}};
  CHECK_THROWS_WITH_AS(codec_config_from_json(bad), doctest::Contains("unknown key"),
                       std::runtime_error);
}
