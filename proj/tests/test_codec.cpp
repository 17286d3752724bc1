#include <doctest.h>

#include "testutil.hpp"
#include "ttic/checkpoint.hpp"
#include "ttic/codec.hpp"
#include "ttic/image.hpp"

using namespace ttic;

namespace {

CodecConfig tiny_config() {
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

}  // namespace

TEST_CASE("quantize modes") {
  auto v = make_var(Tensor<float>({3}, {2.4f, -1.6f, 0.5f}));
  SUBCASE("round") {
    auto q = quantize(v, QuantMode::kRound);
    CHECK(q->value[0] == 2.0f);
    CHECK(q->value[1] == -2.0f);
  }
  SUBCASE("round with offset recentres the grid") {
    auto off = make_var(Tensor<float>({3}, {0.3f, 0.0f, 0.0f}));
    auto q = quantize(v, QuantMode::kRound, off);
    CHECK(q->value[0] == doctest::Approx(2.3f));
  }
  SUBCASE("noise stays within half a bin") {
    Rng rng(3);
    Tensor<float> noise({3});
    for (int i = 0; i < 3; ++i) noise[i] = float(rng.uniform(-0.5, 0.5));
    auto q = quantize(v, QuantMode::kNoise, Var<float>{}, &noise);
    for (int i = 0; i < 3; ++i) CHECK(std::abs(q->value[i] - v->value[i]) < 0.5f);
  }
  SUBCASE("ste rounds forward with identity gradient") {
    auto vr = make_var(Tensor<double>({2}, {1.3, -0.4}), true);
    auto q = quantize(vr, QuantMode::kSte);
    CHECK(q->value[0] == 1.0);
    auto loss = sum_all(mul(q, q));
    backward(loss);
    CHECK(vr->grad[0] == doctest::Approx(2.0));  // d/dv (v^2) at rounded value 1
  }
  SUBCASE("noise mode without noise tensor is a precondition error") {
    CHECK_THROWS_AS(quantize(v, QuantMode::kNoise), PreconditionError);
  }
}

TEST_CASE("pad_to_multiple and crop") {
  ImageF img;
  img.pixels = Tensor<float>({65, 70, 3});
  Rng rng(5);
  for (int64_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = float(rng.uniform());
  img.orig_h = 65;
  img.orig_w = 70;
  SUBCASE("aligned input is unchanged") {
    ImageF a;
    a.pixels = Tensor<float>({64, 64, 3});
    a.orig_h = a.orig_w = 64;
    auto p = pad_to_multiple(a, 64);
    CHECK(p.pixels.dim(0) == 64);
    CHECK(p.pixels.dim(1) == 64);
  }
  SUBCASE("65x70 pads to 128x128") {
    auto p = pad_to_multiple(img, 64);
    CHECK(p.pixels.dim(0) == 128);
    CHECK(p.pixels.dim(1) == 128);
    CHECK(p.orig_h == 65);
    CHECK(p.orig_w == 70);
  }
  SUBCASE("crop(pad(x)) == x") {
    auto p = pad_to_multiple(img, 64);
    auto back = crop_to_original(p.pixels, 65, 70);
    for (int64_t i = 0; i < img.pixels.size(); ++i) REQUIRE(back[i] == img.pixels[i]);
  }
}

TEST_CASE("default architecture produces the published latent dimensions") {
  // Default config at full widths; single forwards only.
  CodecConfig cc;
  BaseCodec<float> codec(cc, 1);
  Rng rng(6);
  auto x = make_var(test::random_tensor<float>({64, 64, 3}, rng, 0, 1));
  auto y = codec.analysis(x);
  CHECK(y->value.shape() == std::vector<int>{4, 4, 192});
  auto z = codec.hyper_analysis(y);
  CHECK(z->value.shape() == std::vector<int>{1, 1, 128});
  auto gp = codec.hyper_synthesis(z);
  CHECK(gp.mu->value.shape() == y->value.shape());
  CHECK(gp.sigma->value.shape() == y->value.shape());
  auto x_hat = codec.synthesis(y);
  CHECK(x_hat->value.shape() == x->value.shape());
}

TEST_CASE("shape chain scales with input size") {
  auto cc = tiny_config();
  BaseCodec<float> codec(cc, 2);
  Rng rng(7);
  auto x = make_var(test::random_tensor<float>({128, 128, 3}, rng, 0, 1));
  auto y = codec.analysis(x);
  CHECK(y->value.shape() == std::vector<int>{8, 8, 24});
  auto z = codec.hyper_analysis(y);
  CHECK(z->value.shape() == std::vector<int>{2, 2, 16});
  auto gp = codec.hyper_synthesis(z);
  CHECK(gp.mu->value.shape() == y->value.shape());
  for (int64_t i = 0; i < gp.sigma->value.size(); ++i) {
    CHECK(gp.sigma->value[i] > 0.0f);
  }
  auto x_hat = codec.synthesis(y);
  CHECK(x_hat->value.shape() == x->value.shape());
  for (int64_t i = 0; i < x_hat->value.size(); ++i) {
    CHECK(x_hat->value[i] >= 0.0f);
    CHECK(x_hat->value[i] <= 1.0f);
  }
}

TEST_CASE("analysis rejects unpadded inputs and wrong channel counts") {
  auto cc = tiny_config();
  BaseCodec<float> codec(cc, 3);
  Rng rng(8);
  auto bad = make_var(test::random_tensor<float>({60, 64, 3}, rng));
  CHECK_THROWS_AS(codec.analysis(bad), PreconditionError);
  auto bad2 = make_var(test::random_tensor<float>({64, 64, 4}, rng));
  CHECK_THROWS_AS(codec.analysis(bad2), StructuralError);
  auto bady = make_var(test::random_tensor<float>({4, 4, 7}, rng));
  CHECK_THROWS_AS(codec.synthesis(bady), StructuralError);
  CHECK_THROWS_AS(codec.hyper_analysis(bady), StructuralError);
  CHECK_THROWS_AS(codec.hyper_synthesis(bady), StructuralError);
}

TEST_CASE("forward passes are deterministic") {
  auto cc = tiny_config();
  BaseCodec<float> codec(cc, 4);
  auto x = make_var(Tensor<float>::zeros({64, 64, 3}));
  auto y1 = codec.analysis(x);
  auto y2 = codec.analysis(x);
  for (int64_t i = 0; i < y1->value.size(); ++i) REQUIRE(y1->value[i] == y2->value[i]);
  auto z1 = codec.hyper_analysis(y1);
  auto g1 = codec.hyper_synthesis(z1);
  auto g2 = codec.hyper_synthesis(z1);
  for (int64_t i = 0; i < g1.mu->value.size(); ++i) {
    REQUIRE(g1.mu->value[i] == g2.mu->value[i]);
    REQUIRE(g1.sigma->value[i] == g2.sigma->value[i]);
  }
}

TEST_CASE("checkpoint round-trips parameters exactly") {
  auto cc = tiny_config();
  BaseCodec<float> codec(cc, 11);
  const std::string digest = params_digest(codec.params());
  const std::string path = "/tmp/ttic_test_ckpt.ttck";
  save_checkpoint(path, {"base", "{}"}, codec.params());
  BaseCodec<float> other(cc, 99);  // different init
  CHECK(params_digest(other.params()) != digest);
  auto ck = read_checkpoint(path);
  apply_checkpoint(ck, other.params());
  CHECK(params_digest(other.params()) == digest);
}

TEST_CASE("gradients reach analysis inputs") {
  auto cc = tiny_config();
  BaseCodec<float> codec(cc, 12);
  Rng rng(13);
  auto x = make_var(test::random_tensor<float>({64, 64, 3}, rng, 0, 1), true);
  auto y = codec.analysis(x);
  backward(mean_all(mul(y, y)));
  double gsum = 0;
  for (int64_t i = 0; i < x->grad.size(); ++i) gsum += std::abs(x->grad[i]);
  CHECK(gsum > 0.0);
}
