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

#ifndef TTIC_NN_HPP_
#define TTIC_NN_HPP_

#include <cmath>
#include <string>
#include <vector>

#include "ttic/autograd.hpp"
#include "ttic/rng.hpp"
#include "ttic/tensor.hpp"

namespace ttic {

template <typename T>
Tensor<T> uniform_init(std::vector<int> shape, double bound, Rng& rng) {
  Tensor<T> t(std::move(shape));
  for (int64_t i = 0; i < t.size(); ++i) t[i] = T(rng.uniform(-bound, bound));
  return t;
}

// Kaiming-style fan-in uniform.
template <typename T>
Tensor<T> fan_in_init(std::vector<int> shape, int fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max(fan_in, 1)));
  return uniform_init<T>(std::move(shape), bound, rng);
}

template <typename T>
struct LinearLayer {
  Var<T> w, b;
  int din = 0, dout = 0;

  LinearLayer() = default;
  LinearLayer(ParamStore<T>& ps, const std::string& name, int din_, int dout_, Rng& rng)
      : din(din_), dout(dout_) {
    w = ps.add(name + ".w", fan_in_init<T>({din_, dout_}, din_, rng));
    b = ps.add(name + ".b", fan_in_init<T>({dout_}, din_, rng));
  }

  Var<T> forward(const Var<T>& x) const { return linear(x, w, b); }

  int64_t macs(int64_t tokens) const { return tokens * din * dout; }
};

template <typename T>
struct Conv2dLayer {
  Var<T> w, b;
  int k = 0, cin = 0, cout = 0, stride = 1, pad = 0;

  Conv2dLayer() = default;
  Conv2dLayer(ParamStore<T>& ps, const std::string& name, int cin_, int cout_, int k_, int stride_,
              Rng& rng)
      : k(k_), cin(cin_), cout(cout_), stride(stride_), pad(k_ / 2) {
    w = ps.add(name + ".w", fan_in_init<T>({k_, k_, cin_, cout_}, k_ * k_ * cin_, rng));
    b = ps.add(name + ".b", fan_in_init<T>({cout_}, k_ * k_ * cin_, rng));
  }

  Var<T> forward(const Var<T>& x) const { return conv2d(x, w, b, stride, pad); }

  int64_t macs(int out_h, int out_w) const {
    return int64_t(k) * k * cin * cout * out_h * out_w;
  }
};

// Stride-2 transposed conv with exact x2 upsampling (k=3, pad=1, out_pad=1).
template <typename T>
struct ConvT2dLayer {
  Var<T> w, b;
  int k = 0, cin = 0, cout = 0, stride = 2, pad = 1, out_pad = 1;

  ConvT2dLayer() = default;
  ConvT2dLayer(ParamStore<T>& ps, const std::string& name, int cin_, int cout_, Rng& rng)
      : k(3), cin(cin_), cout(cout_) {
    w = ps.add(name + ".w", fan_in_init<T>({3, 3, cout_, cin_}, 9 * cin_, rng));
    b = ps.add(name + ".b", fan_in_init<T>({cout_}, 9 * cin_, rng));
  }

  Var<T> forward(const Var<T>& x) const { return conv2d_transpose(x, w, b, stride, pad, out_pad); }

  int64_t macs(int in_h, int in_w) const {
    // Every input position contributes a full k*k*cout*cin patch.
    return int64_t(k) * k * cin * cout * in_h * in_w;
  }
};

template <typename T>
struct LayerNormLayer {
  Var<T> gamma, beta;
  int c = 0;

  LayerNormLayer() = default;
  LayerNormLayer(ParamStore<T>& ps, const std::string& name, int c_) : c(c_) {
    gamma = ps.add(name + ".g", Tensor<T>::full({c_}, T(1)));
    beta = ps.add(name + ".b", Tensor<T>::zeros({c_}));
  }

  Var<T> forward(const Var<T>& x) const { return layer_norm(x, gamma, beta); }
};

// Two-layer MLP with GELU, expansion factor fixed by caller.
template <typename T>
struct MlpLayer {
  LinearLayer<T> fc1, fc2;

  MlpLayer() = default;
  MlpLayer(ParamStore<T>& ps, const std::string& name, int c, int hidden, Rng& rng)
      : fc1(ps, name + ".fc1", c, hidden, rng), fc2(ps, name + ".fc2", hidden, c, rng) {}

  Var<T> forward(const Var<T>& x) const { return fc2.forward(gelu(fc1.forward(x))); }

  int64_t macs(int64_t tokens) const { return fc1.macs(tokens) + fc2.macs(tokens); }
};

// Adam with global-norm clipping and cosine decay, matching the training
// recipe: moments keyed by parameter identity, created lazily so the same
// optimizer instance can serve a changing trainable subset only if that
// subset is fixed up front (which the trainer guarantees).
template <typename T>
class AdamOptimizer {
 public:
  struct Config {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double clip_norm = 1.0;
    int64_t total_steps = 0;  // 0 disables cosine decay
  };

  explicit AdamOptimizer(Config cfg) : cfg_(cfg) {}

  // Registers the exact set of parameters this optimizer may touch.
  void bind(std::vector<std::pair<std::string, Var<T>>> params) {
    params_ = std::move(params);
    m_.clear();
    v_.clear();
    for (auto& [name, p] : params_) {
      m_.push_back(Tensor<T>::zeros(p->value.shape()));
      v_.push_back(Tensor<T>::zeros(p->value.shape()));
    }
  }

  const std::vector<std::pair<std::string, Var<T>>>& params() const { return params_; }

  double lr_at(int64_t step) const {
    if (cfg_.total_steps <= 0) return cfg_.lr;
    const double t = std::min<double>(1.0, double(step) / double(cfg_.total_steps));
    return cfg_.lr * 0.5 * (1.0 + std::cos(3.14159265358979323846 * t));
  }

  // Single update from accumulated grads. step counts from 0.
  void step(int64_t step_idx) {
    double sq = 0.0;
    for (size_t i = 0; i < params_.size(); ++i) {
      const auto& p = params_[i].second;
      if (p->grad.size() != p->value.size()) continue;
      for (int64_t j = 0; j < p->grad.size(); ++j) {
        sq += double(p->grad[j]) * double(p->grad[j]);
      }
    }
    const double norm = std::sqrt(sq);
    const double scale_g =
        (cfg_.clip_norm > 0 && norm > cfg_.clip_norm) ? cfg_.clip_norm / norm : 1.0;
    const double lr = lr_at(step_idx);
    const double t = double(step_idx + 1);
    const double bc1 = 1.0 - std::pow(cfg_.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg_.beta2, t);
    for (size_t i = 0; i < params_.size(); ++i) {
      auto& p = params_[i].second;
      if (p->grad.size() != p->value.size()) continue;
      auto& m = m_[i];
      auto& v = v_[i];
      for (int64_t j = 0; j < p->value.size(); ++j) {
        const double g = double(p->grad[j]) * scale_g;
        m[j] = T(cfg_.beta1 * double(m[j]) + (1.0 - cfg_.beta1) * g);
        v[j] = T(cfg_.beta2 * double(v[j]) + (1.0 - cfg_.beta2) * g * g);
        const double mh = double(m[j]) / bc1;
        const double vh = double(v[j]) / bc2;
        p->value[j] -= T(lr * mh / (std::sqrt(vh) + cfg_.eps));
      }
    }
  }

  void zero_grads() {
    for (auto& [name, p] : params_) p->zero_grad();
  }

  // Moment state for checkpoint/resume.
  std::vector<Tensor<T>>& moments1() { return m_; }
  std::vector<Tensor<T>>& moments2() { return v_; }
  const Config& config() const { return cfg_; }

 private:
  Config cfg_;
  std::vector<std::pair<std::string, Var<T>>> params_;
  std::vector<Tensor<T>> m_;
  std::vector<Tensor<T>> v_;
};

}  // namespace ttic

#endif  // TTIC_NN_HPP_
