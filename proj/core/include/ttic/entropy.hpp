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

#ifndef TTIC_ENTROPY_HPP_
#define TTIC_ENTROPY_HPP_

#include <cmath>
#include <string>
#include <vector>

#include "ttic/autograd.hpp"
#include "ttic/nn.hpp"

namespace ttic {

inline constexpr double kProbFloor = 5.9604644775390625e-8;  // 2^-24

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x * 0.70710678118654752440); }
inline double normal_pdf(double x) {
  return 0.39894228040143267794 * std::exp(-0.5 * x * x);
}

// Probability of the unit-width quantization bin around y under N(mu, sigma),
// floored at 2^-24. Differentiable in all three arguments (zero gradient on
// floored elements).
template <typename T>
Var<T> gaussian_bin_prob(const Var<T>& y, const Var<T>& mu, const Var<T>& sigma) {
  if (!y->value.same_shape(mu->value) || !y->value.same_shape(sigma->value)) {
    throw StructuralError("gaussian_bin_prob: shape mismatch");
  }
  for (int64_t i = 0; i < sigma->value.size(); ++i) {
    if (!(sigma->value[i] > T(0))) throw std::domain_error("gaussian_bin_prob: sigma <= 0");
  }
  const int64_t nelem = y->value.size();
  Tensor<T> out(y->value.shape());
  for (int64_t i = 0; i < nelem; ++i) {
    const double s = sigma->value[i];
    const double d = double(y->value[i]) - double(mu->value[i]);
    const double p = normal_cdf((d + 0.5) / s) - normal_cdf((d - 0.5) / s);
    out[i] = T(std::max(p, kProbFloor));
  }
  auto n = detail::make_op<T>(std::move(out), {y, mu, sigma});
  Node<T>*np = n.get(), *yp = y.get(), *mp = mu.get(), *sp = sigma.get();
  n->backward = [np, yp, mp, sp, nelem]() {
    for (int64_t i = 0; i < nelem; ++i) {
      if (np->value[i] <= T(kProbFloor)) continue;
      const double s = sp->value[i];
      const double d = double(yp->value[i]) - double(mp->value[i]);
      const double a = (d + 0.5) / s, b = (d - 0.5) / s;
      const double pa = normal_pdf(a), pb = normal_pdf(b);
      const double g = np->grad[i];
      const double dd = (pa - pb) / s;
      if (yp->requires_grad) yp->ensure_grad()[i] += T(g * dd);
      if (mp->requires_grad) mp->ensure_grad()[i] -= T(g * dd);
      if (sp->requires_grad) sp->ensure_grad()[i] -= T(g * (pa * a - pb * b) / s);
    }
  };
  return n;
}

// Total information content in bits: sum(-log2 p). Domain error on p <= 0.
template <typename T>
Var<T> estimate_rate_bits(const Var<T>& probs) {
  for (int64_t i = 0; i < probs->value.size(); ++i) {
    if (!(probs->value[i] > T(0))) {
      throw std::domain_error("estimate_rate: probability must be positive");
    }
  }
  constexpr double kInvLn2 = 1.4426950408889634074;
  return scale(sum_all(log_op(probs)), T(-kInvLn2));
}

// ---------------------------------------------------------------------------
// Factorized prior: per-channel monotone CDF as a depth-4 stack of
// softplus-weighted univariate maps with tanh gating.
// ---------------------------------------------------------------------------

// out[p,c,j] = sum_i softplus(h[c,j,i]) * u[p,c,i] + b[c,j]
template <typename T>
Var<T> channel_linear(const Var<T>& u, const Var<T>& h, const Var<T>& b) {
  const auto& us = u->value.shape();
  const auto& hs = h->value.shape();
  if (us.size() != 3 || hs.size() != 3 || us[1] != hs[0] || us[2] != hs[2]) {
    throw StructuralError("channel_linear: incompatible shapes");
  }
  const int n = us[0], C = us[1], din = us[2], dout = hs[1];
  if (b->value.rank() != 2 || b->value.dim(0) != C || b->value.dim(1) != dout) {
    throw StructuralError("channel_linear: bias shape mismatch");
  }
  auto sp = [](T x) -> T {
    if (x > T(30)) return x;
    return T(std::log1p(std::exp(static_cast<double>(x))));
  };
  Tensor<T> out({n, C, dout});
  for (int p = 0; p < n; ++p) {
    for (int c = 0; c < C; ++c) {
      for (int j = 0; j < dout; ++j) {
        T acc = b->value.at(c, j);
        for (int i = 0; i < din; ++i) acc += sp(h->value.at(c, j, i)) * u->value.at(p, c, i);
        out.at(p, c, j) = acc;
      }
    }
  }
  auto node = detail::make_op<T>(std::move(out), {u, h, b});
  Node<T>*np = node.get(), *up = u.get(), *hp = h.get(), *bp = b.get();
  node->backward = [np, up, hp, bp, n, C, din, dout, sp]() {
    for (int p = 0; p < n; ++p) {
      for (int c = 0; c < C; ++c) {
        for (int j = 0; j < dout; ++j) {
          const T g = np->grad.at(p, c, j);
          if (g == T(0)) continue;
          if (bp->requires_grad) bp->ensure_grad().at(c, j) += g;
          for (int i = 0; i < din; ++i) {
            const T hv = hp->value.at(c, j, i);
            if (up->requires_grad) up->ensure_grad().at(p, c, i) += g * sp(hv);
            if (hp->requires_grad) {
              const T sig = T(1) / (T(1) + T(std::exp(-static_cast<double>(hv))));
              hp->ensure_grad().at(c, j, i) += g * sig * up->value.at(p, c, i);
            }
          }
        }
      }
    }
  };
  return node;
}

// out = u + tanh(a) * tanh(u), elementwise with per-channel gate a (C, d).
template <typename T>
Var<T> tanh_gate(const Var<T>& u, const Var<T>& a) {
  const auto& us = u->value.shape();
  if (us.size() != 3 || a->value.rank() != 2 || a->value.dim(0) != us[1] ||
      a->value.dim(1) != us[2]) {
    throw StructuralError("tanh_gate: incompatible shapes");
  }
  const int n = us[0], C = us[1], d = us[2];
  Tensor<T> out({n, C, d});
  for (int p = 0; p < n; ++p) {
    for (int c = 0; c < C; ++c) {
      for (int j = 0; j < d; ++j) {
        const T tu = T(std::tanh(static_cast<double>(u->value.at(p, c, j))));
        const T ta = T(std::tanh(static_cast<double>(a->value.at(c, j))));
        out.at(p, c, j) = u->value.at(p, c, j) + ta * tu;
      }
    }
  }
  auto node = detail::make_op<T>(std::move(out), {u, a});
  Node<T>*np = node.get(), *up = u.get(), *ap = a.get();
  node->backward = [np, up, ap, n, C, d]() {
    for (int p = 0; p < n; ++p) {
      for (int c = 0; c < C; ++c) {
        for (int j = 0; j < d; ++j) {
          const T g = np->grad.at(p, c, j);
          if (g == T(0)) continue;
          const T tu = T(std::tanh(static_cast<double>(up->value.at(p, c, j))));
          const T ta = T(std::tanh(static_cast<double>(ap->value.at(c, j))));
          if (up->requires_grad) {
            up->ensure_grad().at(p, c, j) += g * (T(1) + ta * (T(1) - tu * tu));
          }
          if (ap->requires_grad) {
            ap->ensure_grad().at(c, j) += g * tu * (T(1) - ta * ta);
          }
        }
      }
    }
  };
  return node;
}

template <typename T>
class FactorizedPrior {
 public:
  static constexpr int kFilters = 3;  // hidden width per stage
  static constexpr int kDepth = 4;    // number of linear stages

  FactorizedPrior() = default;
  FactorizedPrior(ParamStore<T>& ps, const std::string& name, int channels, Rng& rng)
      : channels_(channels) {
    const int dims[kDepth + 1] = {1, kFilters, kFilters, kFilters, 1};
    const double scale = std::pow(10.0, 1.0 / kDepth);
    for (int k = 0; k < kDepth; ++k) {
      const int din = dims[k], dout = dims[k + 1];
      const double init = std::log(std::expm1(1.0 / (scale * dout)));
      h_.push_back(ps.add(name + ".h" + std::to_string(k),
                          Tensor<T>::full({channels, dout, din}, T(init))));
      Tensor<T> bias({channels, dout});
      for (int64_t i = 0; i < bias.size(); ++i) bias[i] = T(rng.uniform(-0.5, 0.5));
      b_.push_back(ps.add(name + ".b" + std::to_string(k), std::move(bias)));
      if (k + 1 < kDepth) {
        a_.push_back(ps.add(name + ".a" + std::to_string(k), Tensor<T>::zeros({channels, dout})));
      }
    }
  }

  int channels() const { return channels_; }

  // x: (n, C) values -> (n, C) CDF logits.
  Var<T> cdf_logits(const Var<T>& x) const {
    const int n = x->value.dim(0);
    auto u = reshape(x, {n, channels_, 1});
    for (int k = 0; k < kDepth; ++k) {
      u = channel_linear(u, h_[k], b_[k]);
      if (k + 1 < kDepth) u = tanh_gate(u, a_[k]);
    }
    return reshape(u, {n, channels_});
  }

  // Bin probability CDF(z+0.5) - CDF(z-0.5), floored at 2^-24.
  Var<T> bin_probability(const Var<T>& z) const {
    auto hi = sigmoid(cdf_logits(add_scalar(z, T(0.5))));
    auto lo = sigmoid(cdf_logits(add_scalar(z, T(-0.5))));
    return clamp_min(sub(hi, lo), T(kProbFloor));
  }

  // Scalar CDF for table building (no graph).
  double cdf_value(int channel, double x) const {
    auto sp = [](double v) { return v > 30 ? v : std::log1p(std::exp(v)); };
    const int dims[kDepth + 1] = {1, kFilters, kFilters, kFilters, 1};
    double u[kFilters] = {x, 0, 0};
    int cur = 1;
    for (int k = 0; k < kDepth; ++k) {
      const int din = dims[k], dout = dims[k + 1];
      double next[kFilters] = {0, 0, 0};
      for (int j = 0; j < dout; ++j) {
        double acc = b_[k]->value.at(channel, j);
        for (int i = 0; i < din; ++i) acc += sp(h_[k]->value.at(channel, j, i)) * u[i];
        if (k + 1 < kDepth) {
          acc += std::tanh(a_[k]->value.at(channel, j)) * std::tanh(acc);
        }
        next[j] = acc;
      }
      std::copy(next, next + kFilters, u);
      cur = dout;
    }
    (void)cur;
    return 1.0 / (1.0 + std::exp(-u[0]));
  }

  double bin_probability_value(int channel, double z) const {
    return std::max(cdf_value(channel, z + 0.5) - cdf_value(channel, z - 0.5), kProbFloor);
  }

  int64_t param_count() const {
    int64_t n = 0;
    for (const auto& v : h_) n += v->value.size();
    for (const auto& v : b_) n += v->value.size();
    for (const auto& v : a_) n += v->value.size();
    return n;
  }

 private:
  int channels_ = 0;
  std::vector<Var<T>> h_, b_, a_;
};

}  // namespace ttic

#endif  // TTIC_ENTROPY_HPP_
