#include <doctest.h>

#include "testutil.hpp"
#include "ttic/codec.hpp"
#include "ttic/loss.hpp"

using namespace ttic;

namespace {

// Two-stage conv extractor used as the frozen recognition stand-in for the
// double-precision oracle checks.
struct ToyExtractor : FeatureExtractor<double> {
  Conv2dLayer<double> c1, c2;
  ToyExtractor(ParamStore<double>& ps, Rng& rng)
      : c1(ps, "e.c1", 3, 4, 3, 2, rng), c2(ps, "e.c2", 4, 6, 3, 2, rng) {}
  std::vector<Var<double>> features(const Var<double>& x) const override {
    // smooth activations keep the finite-difference oracle well-conditioned
    auto f1 = gelu(c1.forward(x));
    auto f2 = gelu(c2.forward(f1));
    return {f1, f2};
  }
};

}  // namespace

TEST_CASE("mse distortion") {
  Rng rng(1);
  auto a = make_var(test::random_tensor<double>({4, 4, 3}, rng));
  SUBCASE("identical inputs give zero") {
    CHECK(mse_distortion(a, a)->value[0] == 0.0);
  }
  SUBCASE("unit offset gives one") {
    auto zero = make_var(Tensor<double>::zeros({2, 2, 1}));
    auto one = make_var(Tensor<double>::full({2, 2, 1}, 1.0));
    CHECK(mse_distortion(zero, one)->value[0] == doctest::Approx(1.0));
  }
  SUBCASE("random pair matches the naive loop") {
    auto b = make_var(test::random_tensor<double>({4, 4, 3}, rng));
    double acc = 0;
    for (int64_t i = 0; i < a->value.size(); ++i) {
      const double d = a->value[i] - b->value[i];
      acc += d * d;
    }
    acc /= double(a->value.size());
    CHECK(mse_distortion(a, b)->value[0] == doctest::Approx(acc).epsilon(1e-12));
  }
  SUBCASE("shape mismatch is an error") {
    auto b = make_var(test::random_tensor<double>({4, 4, 1}, rng));
    CHECK_THROWS_AS(mse_distortion(a, b), StructuralError);
  }
}

TEST_CASE("perceptual distortion") {
  ParamStore<double> ps;
  Rng rng(2);
  ToyExtractor ex(ps, rng);
  auto x = make_var(test::random_tensor<double>({16, 16, 3}, rng, 0, 1));
  SUBCASE("identical images give exactly zero") {
    CHECK(perceptual_distortion<double>(x, x, ex)->value[0] == 0.0);
  }
  SUBCASE("matches the hand-computed average of the two feature MSEs") {
    auto y = make_var(test::random_tensor<double>({16, 16, 3}, rng, 0, 1));
    auto fx = ex.features(x);
    auto fy = ex.features(y);
    const double manual =
        0.5 * (mse_loss(fx[0], fy[0])->value[0] + mse_loss(fx[1], fy[1])->value[0]);
    CHECK(perceptual_distortion<double>(x, y, ex)->value[0] ==
          doctest::Approx(manual).epsilon(1e-12));
  }
  SUBCASE("single tapped layer reduces to feature-space MSE") {
    struct OneTap : FeatureExtractor<double> {
      const ToyExtractor& inner;
      explicit OneTap(const ToyExtractor& e) : inner(e) {}
      std::vector<Var<double>> features(const Var<double>& x) const override {
        return {inner.features(x)[0]};
      }
    } one(ex);
    auto y = make_var(test::random_tensor<double>({16, 16, 3}, rng, 0, 1));
    const double direct = mse_loss(ex.features(x)[0], ex.features(y)[0])->value[0];
    CHECK(perceptual_distortion<double>(x, y, one)->value[0] ==
          doctest::Approx(direct).epsilon(1e-12));
  }
  SUBCASE("gradients flow to the reconstruction, not the frozen extractor") {
    ps.set_all_trainable(false);
    auto y = make_var(test::random_tensor<double>({16, 16, 3}, rng, 0, 1), true);
    auto d = perceptual_distortion<double>(x, y, ex);
    backward(d);
    double gy = 0;
    for (int64_t i = 0; i < y->grad.size(); ++i) gy += std::abs(y->grad[i]);
    CHECK(gy > 0);
    for (const auto& [name, v] : ps.items()) CHECK(v->grad.size() == 0);
  }
}

TEST_CASE("rd_loss arithmetic") {
  SUBCASE("certain symbols, D=100, lambda=0.013 totals 1.3") {
    auto py = make_var(Tensor<double>::full({4}, 1.0));
    auto pz = make_var(Tensor<double>::full({2}, 1.0));
    auto d = make_var(Tensor<double>::scalar(100.0));
    auto cost = rd_loss(py, pz, d, 0.013);
    CHECK(cost.rate_bits == doctest::Approx(0.0));
    CHECK(cost.total_value == doctest::Approx(1.3).epsilon(1e-9));
  }
  SUBCASE("8 elements at p=0.5 report 8 bits") {
    auto py = make_var(Tensor<double>::full({8}, 0.5));
    auto pz = make_var(Tensor<double>::full({1}, 1.0));
    auto d = make_var(Tensor<double>::scalar(0.0));
    auto cost = rd_loss(py, pz, d, 0.01);
    CHECK(cost.rate_bits == doctest::Approx(8.0).epsilon(1e-9));
    CHECK(cost.total_value == doctest::Approx(8.0 * kLn2).epsilon(1e-9));
  }
  SUBCASE("combined case cross-checked against scalar arithmetic") {
    auto py = make_var(Tensor<double>({2}, {0.25, 0.5}));
    auto pz = make_var(Tensor<double>({1}, {0.125}));
    auto d = make_var(Tensor<double>::scalar(2.5));
    auto cost = rd_loss(py, pz, d, 0.4);
    const double rate_bits = 2 + 1 + 3;
    CHECK(cost.rate_bits == doctest::Approx(rate_bits).epsilon(1e-9));
    CHECK(cost.total_value == doctest::Approx(rate_bits * kLn2 + 0.4 * 2.5).epsilon(1e-9));
  }
  SUBCASE("invalid probabilities are rejected") {
    auto bad = make_var(Tensor<double>({1}, {1.5}));
    auto ok = make_var(Tensor<double>({1}, {0.5}));
    auto d = make_var(Tensor<double>::scalar(0.0));
    CHECK_THROWS_AS(rd_loss(bad, ok, d, 0.1), std::domain_error);
    CHECK_THROWS_AS(rd_loss(ok, bad, d, 0.1), std::domain_error);
    CHECK_THROWS_AS(rd_loss(ok, ok, d, -1.0), std::domain_error);
  }
}

TEST_CASE("rd_loss monotonicity and lambda scaling") {
  SUBCASE("total strictly increases as any probability decreases") {
    auto d = make_var(Tensor<double>::scalar(1.0));
    auto pz = make_var(Tensor<double>::full({1}, 0.5));
    double prev = -1e300;
    for (double p : {0.9, 0.7, 0.5, 0.3, 0.1}) {
      auto py = make_var(Tensor<double>({2}, {p, 0.6}));
      auto cost = rd_loss(py, pz, d, 0.5);
      CHECK(cost.total_value > prev);
      prev = cost.total_value;
    }
  }
  SUBCASE("rd_loss(2a) - rd_loss(a) == a*D exactly") {
    auto py = make_var(Tensor<double>({3}, {0.5, 0.25, 0.7}));
    auto pz = make_var(Tensor<double>({1}, {0.5}));
    auto d = make_var(Tensor<double>::scalar(3.25));
    const double a = 0.375;
    auto c1 = rd_loss(py, pz, d, a);
    auto c2 = rd_loss(py, pz, d, 2 * a);
    CHECK(c2.total_value - c1.total_value == doctest::Approx(a * 3.25).epsilon(1e-12));
  }
}

TEST_CASE("rd_loss gradient vs central differences on a two-layer toy codec") {
  // Tiny analysis/synthesis pair in double precision: conv -> swin-free conv
  // stack with a one-conv hyper path, noise-mode quantization throughout.
  ParamStore<double> ps;
  Rng rng(33);
  Conv2dLayer<double> ga1(ps, "ga1", 3, 4, 3, 2, rng);
  Conv2dLayer<double> ga2(ps, "ga2", 4, 6, 3, 2, rng);
  Conv2dLayer<double> ha(ps, "ha", 6, 4, 3, 2, rng);
  ConvT2dLayer<double> hs(ps, "hs", 4, 12, rng);
  ConvT2dLayer<double> gs1(ps, "gs1", 6, 4, rng);
  ConvT2dLayer<double> gs2(ps, "gs2", 4, 3, rng);
  ParamStore<double> eps;
  ToyExtractor ex(eps, rng);
  eps.set_all_trainable(false);

  auto x = make_var(test::random_tensor<double>({16, 16, 3}, rng, 0, 1));
  Tensor<double> ynoise = test::random_tensor<double>({4, 4, 6}, rng, -0.5, 0.5);
  Tensor<double> znoise = test::random_tensor<double>({2, 2, 4}, rng, -0.5, 0.5);

  auto build = [&]() {
    auto y = ga2.forward(gelu(ga1.forward(x)));
    auto z = ha.forward(gelu(y));
    auto z_tilde = quant_noise(z, znoise);
    auto params = hs.forward(z_tilde);
    auto mu = slice_channels(params, 0, 6);
    // keep sigma away from the probability floor so the oracle stays in the
    // smooth region
    auto sigma = add_scalar(softplus(slice_channels(params, 6, 6)), 0.3);
    auto y_tilde = quant_noise(y, ynoise);
    auto p_y = gaussian_bin_prob(y_tilde, mu, sigma);
    auto x_hat = gs2.forward(gelu(gs1.forward(y_tilde)));
    auto d = perceptual_distortion<double>(x, x_hat, ex);
    auto pz_flat = clamp_min(
        sigmoid(scale(z_tilde, 0.7)), 1e-6);  // stand-in z likelihood, differentiable
    // lambda large enough that the synthesis path carries measurable weight
    auto cost = rd_loss(p_y, reshape(pz_flat, {int(pz_flat->value.size())}), d, 0.5);
    return cost.total;
  };

  std::vector<Var<double>> leaves;
  for (const auto& [name, v] : ps.items()) leaves.push_back(v);
  auto res = test::grad_check(leaves, build, 1e-5, 24);
  CHECK(res.max_rel_err < 1e-3);
}

TEST_CASE("perceptual gradient vs central differences") {
  ParamStore<double> ps;
  Rng rng(34);
  ToyExtractor ex(ps, rng);
  ps.set_all_trainable(false);
  auto x = make_var(test::random_tensor<double>({12, 12, 3}, rng, 0, 1));
  auto xh = make_var(test::random_tensor<double>({12, 12, 3}, rng, 0, 1), true);
  auto build = [&]() { return perceptual_distortion<double>(x, xh, ex); };
  auto res = test::grad_check({xh}, build, 1e-6, 64);
  CHECK(res.max_rel_err < 1e-3);
}
