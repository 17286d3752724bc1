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

#ifndef TTIC_AUTOGRAD_HPP_
#define TTIC_AUTOGRAD_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "ttic/blas.hpp"
#include "ttic/tensor.hpp"

namespace ttic {

// Reverse-mode tape node. Graphs are built per forward pass; parameters are
// long-lived leaf nodes whose grads accumulate until zeroed.
template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node<T>>> inputs;
  std::function<void()> backward;

  Tensor<T>& ensure_grad() {
    if (grad.size() != value.size()) grad = Tensor<T>::zeros(value.shape());
    return grad;
  }
  void zero_grad() {
    if (grad.size() > 0) std::fill(grad.vec().begin(), grad.vec().end(), T(0));
  }
};

template <typename T>
using Var = std::shared_ptr<Node<T>>;

template <typename T>
Var<T> make_var(Tensor<T> value, bool requires_grad = false) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  return n;
}

template <typename T>
Var<T> constant(Tensor<T> value) {
  return make_var(std::move(value), false);
}

namespace detail {

template <typename T>
Var<T> make_op(Tensor<T> value, std::vector<Var<T>> inputs) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  n->inputs = std::move(inputs);
  for (const auto& in : n->inputs) {
    if (in->requires_grad) {
      n->requires_grad = true;
      break;
    }
  }
  return n;
}

template <typename T>
void topo_order(Node<T>* root, std::vector<Node<T>*>& order) {
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<Node<T>*, size_t>> stack;
  stack.push_back({root, 0});
  seen.insert(root);
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->inputs.size()) {
      Node<T>* child = node->inputs[idx].get();
      ++idx;
      if (child->requires_grad && !seen.count(child)) {
        seen.insert(child);
        stack.push_back({child, 0});
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
}

}  // namespace detail

// Backpropagate from a scalar root.
template <typename T>
void backward(const Var<T>& root) {
  if (root->value.size() != 1) {
    throw StructuralError("backward: root must be scalar, got " +
                          Tensor<T>::shape_str(root->value.shape()));
  }
  std::vector<Node<T>*> order;
  detail::topo_order(root.get(), order);
  root->ensure_grad()[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (n->backward && n->requires_grad) n->backward();
  }
}

// ---------------------------------------------------------------------------
// Elementwise ops
// ---------------------------------------------------------------------------

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  if (!a->value.same_shape(b->value)) {
    throw StructuralError("add: shape mismatch " + Tensor<T>::shape_str(a->value.shape()) +
                          " vs " + Tensor<T>::shape_str(b->value.shape()));
  }
  Tensor<T> out = a->value;
  for (int64_t i = 0; i < out.size(); ++i) out[i] += b->value[i];
  auto n = detail::make_op<T>(std::move(out), {a, b});
  Node<T>*np = n.get(), *ap = a.get(), *bp = b.get();
  n->backward = [np, ap, bp]() {
    if (ap->requires_grad) {
      auto& g = ap->ensure_grad();
      for (int64_t i = 0; i < g.size(); ++i) g[i] += np->grad[i];
    }
    if (bp->requires_grad) {
      auto& g = bp->ensure_grad();
      for (int64_t i = 0; i < g.size(); ++i) g[i] += np->grad[i];
    }
  };
  return n;
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  if (!a->value.same_shape(b->value)) {
    throw StructuralError("sub: shape mismatch");
  }
  Tensor<T> out = a->value;
  for (int64_t i = 0; i < out.size(); ++i) out[i] -= b->value[i];
  auto n = detail::make_op<T>(std::move(out), {a, b});
  Node<T>*np = n.get(), *ap = a.get(), *bp = b.get();
  n->backward = [np, ap, bp]() {
    if (ap->requires_grad) {
      auto& g = ap->ensure_grad();
      for (int64_t i = 0; i < g.size(); ++i) g[i] += np->grad[i];
    }
    if (bp->requires_grad) {
      auto& g = bp->ensure_grad();
      for (int64_t i = 0; i < g.size(); ++i) g[i] -= np->grad[i];
    }
  };
  return n;
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  if (!a->value.same_shape(b->value)) {
    throw StructuralError("mul: shape mismatch");
  }
  Tensor<T> out = a->value;
  for (int64_t i = 0; i < out.size(); ++i) out[i] *= b->value[i];
  auto n = detail::make_op<T>(std::move(out), {a, b});
  Node<T>*np = n.get(), *ap = a.get(), *bp = b.get();
  n->backward = [np, ap, bp]() {
    if (ap->requires_grad) {
      auto& g = ap->ensure_grad();
      for (int64_t i = 0; i < g.size(); ++i) g[i] += np->grad[i] * bp->value[i];
    }
    if (bp->requires_grad) {
      auto& g = bp->ensure_grad();
      for (int64_t i = 0; i < g.size(); ++i) g[i] += np->grad[i] * ap->value[i];
    }
  };
  return n;
}

template <typename T>
Var<T> scale(const Var<T>& a, T s) {
  Tensor<T> out = a->value;
  for (int64_t i = 0; i < out.size(); ++i) out[i] *= s;
  auto n = detail::make_op<T>(std::move(out), {a});
  Node<T>*np = n.get(), *ap = a.get();
  n->backward = [np, ap, s]() {
    auto& g = ap->ensure_grad();
    for (int64_t i = 0; i < g.size(); ++i) g[i] += s * np->grad[i];
  };
  return n;
}

template <typename T>
Var<T> add_scalar(const Var<T>& a, T s) {
  Tensor<T> out = a->value;
  for (int64_t i = 0; i < out.size(); ++i) out[i] += s;
  auto n = detail::make_op<T>(std::move(out), {a});
  Node<T>*np = n.get(), *ap = a.get();
  n->backward = [np, ap]() {
    auto& g = ap->ensure_grad();
    for (int64_t i = 0; i < g.size(); ++i) g[i] += np->grad[i];
  };
  return n;
}

template <typename T, typename FwdFn, typename DerivFn>
Var<T> elementwise(const Var<T>& a, FwdFn f, DerivFn df) {
  Tensor<T> out(a->value.shape());
  for (int64_t i = 0; i < out.size(); ++i) out[i] = f(a->value[i]);
  auto n = detail::make_op<T>(std::move(out), {a});
  Node<T>*np = n.get(), *ap = a.get();
  n->backward = [np, ap, df]() {
    auto& g = ap->ensure_grad();
    for (int64_t i = 0; i < g.size(); ++i) g[i] += np->grad[i] * df(ap->value[i], np->value[i]);
  };
  return n;
}

template <typename T>
Var<T> relu(const Var<T>& a) {
  return elementwise(
      a, [](T x) { return x > T(0) ? x : T(0); },
      [](T x, T) { return x > T(0) ? T(1) : T(0); });
}

template <typename T>
Var<T> leaky_relu(const Var<T>& a, T slope = T(0.01)) {
  return elementwise(
      a, [slope](T x) { return x > T(0) ? x : slope * x; },
      [slope](T x, T) { return x > T(0) ? T(1) : slope; });
}

template <typename T>
Var<T> gelu(const Var<T>& a) {
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  constexpr double kInvSqrt2Pi = 0.39894228040143267794;
  return elementwise(
      a,
      [](T x) {
        return T(0.5) * x * (T(1) + T(std::erf(static_cast<double>(x) * kInvSqrt2)));
      },
      [](T x, T) {
        double xd = static_cast<double>(x);
        double cdf = 0.5 * (1.0 + std::erf(xd * kInvSqrt2));
        double pdf = kInvSqrt2Pi * std::exp(-0.5 * xd * xd);
        return T(cdf + xd * pdf);
      });
}

template <typename T>
Var<T> softplus(const Var<T>& a) {
  return elementwise(
      a,
      [](T x) {
        // log(1 + e^x), stable both ways.
        if (x > T(30)) return x;
        if (x < T(-30)) return T(std::exp(static_cast<double>(x)));
        return T(std::log1p(std::exp(static_cast<double>(x))));
      },
      [](T x, T) { return T(1) / (T(1) + T(std::exp(-static_cast<double>(x)))); });
}

template <typename T>
Var<T> sigmoid(const Var<T>& a) {
  return elementwise(
      a, [](T x) { return T(1) / (T(1) + T(std::exp(-static_cast<double>(x)))); },
      [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Var<T> tanh_op(const Var<T>& a) {
  return elementwise(
      a, [](T x) { return T(std::tanh(static_cast<double>(x))); },
      [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Var<T> log_op(const Var<T>& a) {
  for (int64_t i = 0; i < a->value.size(); ++i) {
    if (a->value[i] <= T(0)) throw std::domain_error("log: non-positive input");
  }
  return elementwise(
      a, [](T x) { return T(std::log(static_cast<double>(x))); },
      [](T x, T) { return T(1) / x; });
}

template <typename T>
Var<T> clamp(const Var<T>& a, T lo, T hi) {
  return elementwise(
      a, [lo, hi](T x) { return std::min(std::max(x, lo), hi); },
      [lo, hi](T x, T) { return (x >= lo && x <= hi) ? T(1) : T(0); });
}

template <typename T>
Var<T> clamp_min(const Var<T>& a, T lo) {
  return elementwise(
      a, [lo](T x) { return std::max(x, lo); },
      [lo](T x, T) { return x >= lo ? T(1) : T(0); });
}

// ---------------------------------------------------------------------------
// Quantization surrogates
// ---------------------------------------------------------------------------

// v + fixed noise, gradient passes to v only.
template <typename T>
Var<T> quant_noise(const Var<T>& a, const Tensor<T>& noise) {
  if (!a->value.same_shape(noise)) throw StructuralError("quant_noise: noise shape mismatch");
  Tensor<T> out = a->value;
  for (int64_t i = 0; i < out.size(); ++i) out[i] += noise[i];
  auto n = detail::make_op<T>(std::move(out), {a});
  Node<T>*np = n.get(), *ap = a.get();
  n->backward = [np, ap]() {
    auto& g = ap->ensure_grad();
    for (int64_t i = 0; i < g.size(); ++i) g[i] += np->grad[i];
  };
  return n;
}

// Straight-through round: forward round(v - offset) + offset, identity
// gradient to v, no gradient to offset.
template <typename T>
Var<T> quant_ste(const Var<T>& a, const Var<T>& offset = nullptr) {
  Tensor<T> out = a->value;
  if (offset) {
    if (!a->value.same_shape(offset->value)) throw StructuralError("quant_ste: offset shape mismatch");
    for (int64_t i = 0; i < out.size(); ++i) {
      out[i] = T(std::nearbyint(static_cast<double>(out[i] - offset->value[i]))) + offset->value[i];
    }
  } else {
    for (int64_t i = 0; i < out.size(); ++i) {
      out[i] = T(std::nearbyint(static_cast<double>(out[i])));
    }
  }
  auto n = detail::make_op<T>(std::move(out), {a});
  Node<T>*np = n.get(), *ap = a.get();
  n->backward = [np, ap]() {
    auto& g = ap->ensure_grad();
    for (int64_t i = 0; i < g.size(); ++i) g[i] += np->grad[i];
  };
  return n;
}

// Stop-gradient copy.
template <typename T>
Var<T> detach(const Var<T>& a) {
  return constant(a->value);
}

// ---------------------------------------------------------------------------
// Matrix ops
// ---------------------------------------------------------------------------

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  if (a->value.rank() != 2 || b->value.rank() != 2 || a->value.dim(1) != b->value.dim(0)) {
    throw StructuralError("matmul: incompatible shapes " +
                          Tensor<T>::shape_str(a->value.shape()) + " x " +
                          Tensor<T>::shape_str(b->value.shape()));
  }
  const int m = a->value.dim(0), k = a->value.dim(1), nn = b->value.dim(1);
  Tensor<T> out({m, nn});
  detail::gemm(false, false, m, nn, k, T(1), a->value.data(), b->value.data(), T(0), out.data());
  auto n = detail::make_op<T>(std::move(out), {a, b});
  Node<T>*np = n.get(), *ap = a.get(), *bp = b.get();
  n->backward = [np, ap, bp, m, k, nn]() {
    if (ap->requires_grad) {
      detail::gemm(false, true, m, k, nn, T(1), np->grad.data(), bp->value.data(), T(1),
                   ap->ensure_grad().data());
    }
    if (bp->requires_grad) {
      detail::gemm(true, false, k, nn, m, T(1), ap->value.data(), np->grad.data(), T(1),
                   bp->ensure_grad().data());
    }
  };
  return n;
}

// x: (n, din); w: (din, dout); b: (dout) or null.
template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b = nullptr) {
  auto y = matmul(x, w);
  if (!b) return y;
  if (b->value.rank() != 1 || b->value.dim(0) != y->value.dim(1)) {
    throw StructuralError("linear: bias shape mismatch");
  }
  const int rows = y->value.dim(0), cols = y->value.dim(1);
  Tensor<T> out = y->value;
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) out.at(i, j) += b->value[j];
  }
  auto n = detail::make_op<T>(std::move(out), {y, b});
  Node<T>*np = n.get(), *yp = y.get(), *bp = b.get();
  n->backward = [np, yp, bp, rows, cols]() {
    if (yp->requires_grad) {
      auto& g = yp->ensure_grad();
      for (int64_t i = 0; i < g.size(); ++i) g[i] += np->grad[i];
    }
    if (bp->requires_grad) {
      auto& g = bp->ensure_grad();
      for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) g[j] += np->grad.at(i, j);
      }
    }
  };
  return n;
}

namespace detail {
template <typename T>
inline int batch_count(const Tensor<T>& t) {
  int b = 1;
  for (int i = 0; i + 2 < t.rank(); ++i) b *= t.dim(i);
  return b;
}
}  // namespace detail

// Batched matmul over matching leading dims: (B.., m, k) x (B.., k, n).
// If trans_b, the second factor is (B.., n, k) and multiplied transposed.
template <typename T>
Var<T> bmm(const Var<T>& a, const Var<T>& b, bool trans_b = false) {
  const auto& as = a->value.shape();
  const auto& bs = b->value.shape();
  if (a->value.rank() < 2 || a->value.rank() != b->value.rank()) {
    throw StructuralError("bmm: rank mismatch");
  }
  const int batch = detail::batch_count(a->value);
  if (batch != detail::batch_count(b->value)) throw StructuralError("bmm: batch mismatch");
  const int m = as[as.size() - 2], k = as[as.size() - 1];
  const int bk = trans_b ? bs[bs.size() - 1] : bs[bs.size() - 2];
  const int nn = trans_b ? bs[bs.size() - 2] : bs[bs.size() - 1];
  if (bk != k) {
    throw StructuralError("bmm: inner dimension mismatch (" + std::to_string(k) + " vs " +
                          std::to_string(bk) + ")");
  }
  std::vector<int> oshape(as.begin(), as.end() - 2);
  oshape.push_back(m);
  oshape.push_back(nn);
  Tensor<T> out(oshape);
  const int64_t sa = int64_t(m) * k, so = int64_t(m) * nn;
  const int64_t sbv = int64_t(k) * nn;
  // Sequential accumulation over k (not a blocked GEMM): attention results
  // must be invariant to appending zero-weight columns.
  for (int i = 0; i < batch; ++i) {
    const T* A = a->value.data() + i * sa;
    const T* B = b->value.data() + i * sbv;
    T* C = out.data() + i * so;
    if (!trans_b) {
      for (int r = 0; r < m; ++r) {
        T* crow = C + int64_t(r) * nn;
        std::fill_n(crow, nn, T(0));
        const T* arow = A + int64_t(r) * k;
        for (int kk = 0; kk < k; ++kk) {
          const T av = arow[kk];
          const T* brow = B + int64_t(kk) * nn;
          for (int cc = 0; cc < nn; ++cc) crow[cc] += av * brow[cc];
        }
      }
    } else {
      for (int r = 0; r < m; ++r) {
        const T* arow = A + int64_t(r) * k;
        T* crow = C + int64_t(r) * nn;
        for (int cc = 0; cc < nn; ++cc) {
          const T* brow = B + int64_t(cc) * k;
          T acc = T(0);
          for (int kk = 0; kk < k; ++kk) acc += arow[kk] * brow[kk];
          crow[cc] = acc;
        }
      }
    }
  }
  auto n = detail::make_op<T>(std::move(out), {a, b});
  Node<T>*np = n.get(), *ap = a.get(), *bp = b.get();
  n->backward = [np, ap, bp, batch, m, k, nn, sa, sbv, so, trans_b]() {
    for (int i = 0; i < batch; ++i) {
      const T* g = np->grad.data() + i * so;
      if (ap->requires_grad) {
        // dA = G * op(B)^T
        detail::gemm(false, !trans_b, m, k, nn, T(1), g, bp->value.data() + i * sbv, T(1),
                     ap->ensure_grad().data() + i * sa);
      }
      if (bp->requires_grad) {
        if (!trans_b) {
          detail::gemm(true, false, k, nn, m, T(1), ap->value.data() + i * sa, g, T(1),
                       bp->ensure_grad().data() + i * sbv);
        } else {
          // B is (n, k); dB = G^T * A
          detail::gemm(true, false, nn, k, m, T(1), g, ap->value.data() + i * sa, T(1),
                       bp->ensure_grad().data() + i * sbv);
        }
      }
    }
  };
  return n;
}

// ---------------------------------------------------------------------------
// Softmax / normalization
// ---------------------------------------------------------------------------

template <typename T>
Var<T> softmax_last(const Var<T>& a) {
  const int cols = a->value.dim(a->value.rank() - 1);
  const int64_t rows = a->value.size() / cols;
  Tensor<T> out(a->value.shape());
  for (int64_t r = 0; r < rows; ++r) {
    const T* x = a->value.data() + r * cols;
    T* y = out.data() + r * cols;
    T mx = x[0];
    for (int j = 1; j < cols; ++j) mx = std::max(mx, x[j]);
    T sum = T(0);
    for (int j = 0; j < cols; ++j) {
      y[j] = T(std::exp(static_cast<double>(x[j] - mx)));
      sum += y[j];
    }
    for (int j = 0; j < cols; ++j) y[j] /= sum;
  }
  auto n = detail::make_op<T>(std::move(out), {a});
  Node<T>*np = n.get(), *ap = a.get();
  n->backward = [np, ap, rows, cols]() {
    auto& g = ap->ensure_grad();
    for (int64_t r = 0; r < rows; ++r) {
      const T* y = np->value.data() + r * cols;
      const T* gy = np->grad.data() + r * cols;
      T dot = T(0);
      for (int j = 0; j < cols; ++j) dot += gy[j] * y[j];
      T* gx = g.data() + r * cols;
      for (int j = 0; j < cols; ++j) gx[j] += y[j] * (gy[j] - dot);
    }
  };
  return n;
}

// LayerNorm over the last dimension with affine params gamma, beta of size c.
template <typename T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta,
                  T eps = T(1e-5)) {
  const int c = x->value.dim(x->value.rank() - 1);
  if (gamma->value.size() != c || beta->value.size() != c) {
    throw StructuralError("layer_norm: affine params must have size " + std::to_string(c));
  }
  const int64_t rows = x->value.size() / c;
  Tensor<T> out(x->value.shape());
  Tensor<T> mean({static_cast<int>(rows)});
  Tensor<T> inv_std({static_cast<int>(rows)});
  for (int64_t r = 0; r < rows; ++r) {
    const T* xr = x->value.data() + r * c;
    T mu = T(0);
    for (int j = 0; j < c; ++j) mu += xr[j];
    mu /= T(c);
    T var = T(0);
    for (int j = 0; j < c; ++j) var += (xr[j] - mu) * (xr[j] - mu);
    var /= T(c);
    T is = T(1) / T(std::sqrt(static_cast<double>(var + eps)));
    mean[r] = mu;
    inv_std[r] = is;
    T* yr = out.data() + r * c;
    for (int j = 0; j < c; ++j) yr[j] = (xr[j] - mu) * is * gamma->value[j] + beta->value[j];
  }
  auto n = detail::make_op<T>(std::move(out), {x, gamma, beta});
  Node<T>*np = n.get(), *xp = x.get(), *gp = gamma.get(), *bp = beta.get();
  n->backward = [np, xp, gp, bp, rows, c, mean, inv_std]() {
    for (int64_t r = 0; r < rows; ++r) {
      const T* xr = xp->value.data() + r * c;
      const T* gy = np->grad.data() + r * c;
      const T mu = mean[r], is = inv_std[r];
      if (gp->requires_grad || bp->requires_grad) {
        auto& gg = gp->ensure_grad();
        auto& gb = bp->ensure_grad();
        for (int j = 0; j < c; ++j) {
          gg[j] += gy[j] * (xr[j] - mu) * is;
          gb[j] += gy[j];
        }
      }
      if (xp->requires_grad) {
        auto& gx = xp->ensure_grad();
        T sum_g = T(0), sum_gx = T(0);
        for (int j = 0; j < c; ++j) {
          T gh = gy[j] * gp->value[j];
          sum_g += gh;
          sum_gx += gh * (xr[j] - mu);
        }
        T* gxr = gx.data() + r * c;
        for (int j = 0; j < c; ++j) {
          T gh = gy[j] * gp->value[j];
          gxr[j] += is * (gh - sum_g / T(c) - (xr[j] - mu) * is * is * sum_gx / T(c));
        }
      }
    }
  };
  return n;
}

// ---------------------------------------------------------------------------
// Shape ops
// ---------------------------------------------------------------------------

template <typename T>
Var<T> reshape(const Var<T>& a, std::vector<int> shape) {
  Tensor<T> out = a->value.reshaped(std::move(shape));
  auto n = detail::make_op<T>(std::move(out), {a});
  Node<T>*np = n.get(), *ap = a.get();
  n->backward = [np, ap]() {
    auto& g = ap->ensure_grad();
    for (int64_t i = 0; i < g.size(); ++i) g[i] += np->grad[i];
  };
  return n;
}

// Concatenate along dim 1 of (B, n, d) blocks.
template <typename T>
Var<T> concat_tokens(const Var<T>& a, const Var<T>& b) {
  const auto& as = a->value.shape();
  const auto& bs = b->value.shape();
  if (as.size() != 3 || bs.size() != 3 || as[0] != bs[0] || as[2] != bs[2]) {
    throw StructuralError("concat_tokens: incompatible shapes");
  }
  const int B = as[0], n1 = as[1], n2 = bs[1], d = as[2];
  Tensor<T> out({B, n1 + n2, d});
  for (int i = 0; i < B; ++i) {
    std::copy_n(a->value.data() + int64_t(i) * n1 * d, int64_t(n1) * d,
                out.data() + int64_t(i) * (n1 + n2) * d);
    std::copy_n(b->value.data() + int64_t(i) * n2 * d, int64_t(n2) * d,
                out.data() + int64_t(i) * (n1 + n2) * d + int64_t(n1) * d);
  }
  auto n = detail::make_op<T>(std::move(out), {a, b});
  Node<T>*np = n.get(), *ap = a.get(), *bp = b.get();
  n->backward = [np, ap, bp, B, n1, n2, d]() {
    for (int i = 0; i < B; ++i) {
      const T* g = np->grad.data() + int64_t(i) * (n1 + n2) * d;
      if (ap->requires_grad) {
        T* ga = ap->ensure_grad().data() + int64_t(i) * n1 * d;
        for (int64_t j = 0; j < int64_t(n1) * d; ++j) ga[j] += g[j];
      }
      if (bp->requires_grad) {
        T* gb = bp->ensure_grad().data() + int64_t(i) * n2 * d;
        for (int64_t j = 0; j < int64_t(n2) * d; ++j) gb[j] += g[int64_t(n1) * d + j];
      }
    }
  };
  return n;
}

// Concatenate a shared (p, d) block onto every batch entry of (B, n, d).
template <typename T>
Var<T> concat_tokens_shared(const Var<T>& a, const Var<T>& p) {
  const auto& as = a->value.shape();
  const auto& ps = p->value.shape();
  if (as.size() != 3 || ps.size() != 2 || as[2] != ps[1]) {
    throw StructuralError("concat_tokens_shared: incompatible shapes");
  }
  const int B = as[0], n1 = as[1], n2 = ps[0], d = as[2];
  Tensor<T> out({B, n1 + n2, d});
  for (int i = 0; i < B; ++i) {
    std::copy_n(a->value.data() + int64_t(i) * n1 * d, int64_t(n1) * d,
                out.data() + int64_t(i) * (n1 + n2) * d);
    std::copy_n(p->value.data(), int64_t(n2) * d,
                out.data() + int64_t(i) * (n1 + n2) * d + int64_t(n1) * d);
  }
  auto n = detail::make_op<T>(std::move(out), {a, p});
  Node<T>*np = n.get(), *ap = a.get(), *pp = p.get();
  n->backward = [np, ap, pp, B, n1, n2, d]() {
    for (int i = 0; i < B; ++i) {
      const T* g = np->grad.data() + int64_t(i) * (n1 + n2) * d;
      if (ap->requires_grad) {
        T* ga = ap->ensure_grad().data() + int64_t(i) * n1 * d;
        for (int64_t j = 0; j < int64_t(n1) * d; ++j) ga[j] += g[j];
      }
      if (pp->requires_grad) {
        T* gp = pp->ensure_grad().data();
        for (int64_t j = 0; j < int64_t(n2) * d; ++j) gp[j] += g[int64_t(n1) * d + j];
      }
    }
  };
  return n;
}

// Rows [start, start+len) along dim 1 of (B, n, d).
template <typename T>
Var<T> slice_tokens(const Var<T>& a, int start, int len) {
  const auto& as = a->value.shape();
  if (as.size() != 3 || start < 0 || start + len > as[1]) {
    throw StructuralError("slice_tokens: out of range");
  }
  const int B = as[0], nn = as[1], d = as[2];
  Tensor<T> out({B, len, d});
  for (int i = 0; i < B; ++i) {
    std::copy_n(a->value.data() + (int64_t(i) * nn + start) * d, int64_t(len) * d,
                out.data() + int64_t(i) * len * d);
  }
  auto n = detail::make_op<T>(std::move(out), {a});
  Node<T>*np = n.get(), *ap = a.get();
  n->backward = [np, ap, B, nn, d, start, len]() {
    auto& g = ap->ensure_grad();
    for (int i = 0; i < B; ++i) {
      const T* gs = np->grad.data() + int64_t(i) * len * d;
      T* gd = g.data() + (int64_t(i) * nn + start) * d;
      for (int64_t j = 0; j < int64_t(len) * d; ++j) gd[j] += gs[j];
    }
  };
  return n;
}

// Channel slice of (h, w, c) maps.
template <typename T>
Var<T> slice_channels(const Var<T>& a, int start, int len) {
  const auto& s = a->value.shape();
  if (s.size() != 3 || start < 0 || start + len > s[2]) {
    throw StructuralError("slice_channels: out of range");
  }
  const int h = s[0], w = s[1], c = s[2];
  Tensor<T> out({h, w, len});
  for (int64_t p = 0; p < int64_t(h) * w; ++p) {
    std::copy_n(a->value.data() + p * c + start, len, out.data() + p * len);
  }
  auto n = detail::make_op<T>(std::move(out), {a});
  Node<T>*np = n.get(), *ap = a.get();
  n->backward = [np, ap, h, w, c, start, len]() {
    auto& g = ap->ensure_grad();
    for (int64_t p = 0; p < int64_t(h) * w; ++p) {
      const T* gs = np->grad.data() + p * len;
      T* gd = g.data() + p * c + start;
      for (int j = 0; j < len; ++j) gd[j] += gs[j];
    }
  };
  return n;
}

template <typename T>
Var<T> concat_channels(const Var<T>& a, const Var<T>& b) {
  const auto& as = a->value.shape();
  const auto& bs = b->value.shape();
  if (as.size() != 3 || bs.size() != 3 || as[0] != bs[0] || as[1] != bs[1]) {
    throw StructuralError("concat_channels: spatial dims differ");
  }
  const int h = as[0], w = as[1], c1 = as[2], c2 = bs[2];
  Tensor<T> out({h, w, c1 + c2});
  for (int64_t p = 0; p < int64_t(h) * w; ++p) {
    std::copy_n(a->value.data() + p * c1, c1, out.data() + p * (c1 + c2));
    std::copy_n(b->value.data() + p * c2, c2, out.data() + p * (c1 + c2) + c1);
  }
  auto n = detail::make_op<T>(std::move(out), {a, b});
  Node<T>*np = n.get(), *ap = a.get(), *bp = b.get();
  n->backward = [np, ap, bp, h, w, c1, c2]() {
    for (int64_t p = 0; p < int64_t(h) * w; ++p) {
      const T* g = np->grad.data() + p * (c1 + c2);
      if (ap->requires_grad) {
        T* ga = ap->ensure_grad().data() + p * c1;
        for (int j = 0; j < c1; ++j) ga[j] += g[j];
      }
      if (bp->requires_grad) {
        T* gb = bp->ensure_grad().data() + p * c2;
        for (int j = 0; j < c2; ++j) gb[j] += g[c1 + j];
      }
    }
  };
  return n;
}

// (B, n, c) -> (B*heads, n, c/heads)
template <typename T>
Var<T> split_heads(const Var<T>& a, int heads) {
  const auto& s = a->value.shape();
  if (s.size() != 3 || s[2] % heads != 0) {
    throw StructuralError("split_heads: channel dim not divisible by heads");
  }
  const int B = s[0], nn = s[1], c = s[2], dh = c / heads;
  Tensor<T> out({B * heads, nn, dh});
  for (int b = 0; b < B; ++b) {
    for (int hh = 0; hh < heads; ++hh) {
      for (int t = 0; t < nn; ++t) {
        std::copy_n(a->value.data() + (int64_t(b) * nn + t) * c + hh * dh, dh,
                    out.data() + ((int64_t(b) * heads + hh) * nn + t) * dh);
      }
    }
  }
  auto n = detail::make_op<T>(std::move(out), {a});
  Node<T>*np = n.get(), *ap = a.get();
  n->backward = [np, ap, B, nn, c, dh, heads]() {
    auto& g = ap->ensure_grad();
    for (int b = 0; b < B; ++b) {
      for (int hh = 0; hh < heads; ++hh) {
        for (int t = 0; t < nn; ++t) {
          const T* gs = np->grad.data() + ((int64_t(b) * heads + hh) * nn + t) * dh;
          T* gd = g.data() + (int64_t(b) * nn + t) * c + hh * dh;
          for (int j = 0; j < dh; ++j) gd[j] += gs[j];
        }
      }
    }
  };
  return n;
}

// (B*heads, n, dh) -> (B, n, heads*dh)
template <typename T>
Var<T> merge_heads(const Var<T>& a, int heads) {
  const auto& s = a->value.shape();
  if (s.size() != 3 || s[0] % heads != 0) {
    throw StructuralError("merge_heads: batch dim not divisible by heads");
  }
  const int B = s[0] / heads, nn = s[1], dh = s[2], c = heads * dh;
  Tensor<T> out({B, nn, c});
  for (int b = 0; b < B; ++b) {
    for (int hh = 0; hh < heads; ++hh) {
      for (int t = 0; t < nn; ++t) {
        std::copy_n(a->value.data() + ((int64_t(b) * heads + hh) * nn + t) * dh, dh,
                    out.data() + (int64_t(b) * nn + t) * c + hh * dh);
      }
    }
  }
  auto n = detail::make_op<T>(std::move(out), {a});
  Node<T>*np = n.get(), *ap = a.get();
  n->backward = [np, ap, B, nn, c, dh, heads]() {
    auto& g = ap->ensure_grad();
    for (int b = 0; b < B; ++b) {
      for (int hh = 0; hh < heads; ++hh) {
        for (int t = 0; t < nn; ++t) {
          const T* gs = np->grad.data() + (int64_t(b) * nn + t) * c + hh * dh;
          T* gd = g.data() + ((int64_t(b) * heads + hh) * nn + t) * dh;
          for (int j = 0; j < dh; ++j) gd[j] += gs[j];
        }
      }
    }
  };
  return n;
}

// Broadcast-add y (g0, m, n) onto x (B, g0, m, n) over dim 0.
template <typename T>
Var<T> add_bcast_outer(const Var<T>& x, const Var<T>& y) {
  const auto& xs = x->value.shape();
  if (xs.size() != 4 || y->value.rank() != 3 || xs[1] != y->value.dim(0) ||
      xs[2] != y->value.dim(1) || xs[3] != y->value.dim(2)) {
    throw StructuralError("add_bcast_outer: incompatible shapes");
  }
  const int B = xs[0];
  const int64_t inner = y->value.size();
  Tensor<T> out = x->value;
  for (int b = 0; b < B; ++b) {
    T* o = out.data() + b * inner;
    for (int64_t j = 0; j < inner; ++j) o[j] += y->value[j];
  }
  auto n = detail::make_op<T>(std::move(out), {x, y});
  Node<T>*np = n.get(), *xp = x.get(), *yp = y.get();
  n->backward = [np, xp, yp, B, inner]() {
    if (xp->requires_grad) {
      auto& g = xp->ensure_grad();
      for (int64_t i = 0; i < g.size(); ++i) g[i] += np->grad[i];
    }
    if (yp->requires_grad) {
      auto& g = yp->ensure_grad();
      for (int b = 0; b < B; ++b) {
        const T* gs = np->grad.data() + b * inner;
        for (int64_t j = 0; j < inner; ++j) g[j] += gs[j];
      }
    }
  };
  return n;
}

// Broadcast-add y (B, m, n) onto x (B, g1, m, n) over dim 1.
template <typename T>
Var<T> add_bcast_inner(const Var<T>& x, const Var<T>& y) {
  const auto& xs = x->value.shape();
  if (xs.size() != 4 || y->value.rank() != 3 || xs[0] != y->value.dim(0) ||
      xs[2] != y->value.dim(1) || xs[3] != y->value.dim(2)) {
    throw StructuralError("add_bcast_inner: incompatible shapes");
  }
  const int B = xs[0], G = xs[1];
  const int64_t mn = int64_t(xs[2]) * xs[3];
  Tensor<T> out = x->value;
  for (int b = 0; b < B; ++b) {
    const T* yb = y->value.data() + b * mn;
    for (int g1 = 0; g1 < G; ++g1) {
      T* o = out.data() + (int64_t(b) * G + g1) * mn;
      for (int64_t j = 0; j < mn; ++j) o[j] += yb[j];
    }
  }
  auto n = detail::make_op<T>(std::move(out), {x, y});
  Node<T>*np = n.get(), *xp = x.get(), *yp = y.get();
  n->backward = [np, xp, yp, B, G, mn]() {
    if (xp->requires_grad) {
      auto& g = xp->ensure_grad();
      for (int64_t i = 0; i < g.size(); ++i) g[i] += np->grad[i];
    }
    if (yp->requires_grad) {
      auto& g = yp->ensure_grad();
      for (int b = 0; b < B; ++b) {
        T* gy = g.data() + b * mn;
        for (int g1 = 0; g1 < G; ++g1) {
          const T* gs = np->grad.data() + (int64_t(b) * G + g1) * mn;
          for (int64_t j = 0; j < mn; ++j) gy[j] += gs[j];
        }
      }
    }
  };
  return n;
}

// ---------------------------------------------------------------------------
// Spatial ops on (h, w, c) maps
// ---------------------------------------------------------------------------

template <typename T>
Var<T> window_partition(const Var<T>& x, int ws) {
  const auto& s = x->value.shape();
  if (s.size() != 3) throw StructuralError("window_partition: expected (h, w, c)");
  const int h = s[0], w = s[1], c = s[2];
  if (ws <= 0) throw PreconditionError("window_partition: window size must be positive");
  if (h % ws != 0) {
    throw PreconditionError("window_partition: height " + std::to_string(h) +
                            " not divisible by window size " + std::to_string(ws));
  }
  if (w % ws != 0) {
    throw PreconditionError("window_partition: width " + std::to_string(w) +
                            " not divisible by window size " + std::to_string(ws));
  }
  const int gh = h / ws, gw = w / ws, nw = gh * gw, N = ws * ws;
  Tensor<T> out({nw, N, c});
  for (int wy = 0; wy < gh; ++wy) {
    for (int wx = 0; wx < gw; ++wx) {
      const int widx = wy * gw + wx;
      for (int iy = 0; iy < ws; ++iy) {
        const T* src = x->value.data() + ((int64_t(wy) * ws + iy) * w + int64_t(wx) * ws) * c;
        T* dst = out.data() + (int64_t(widx) * N + int64_t(iy) * ws) * c;
        std::copy_n(src, int64_t(ws) * c, dst);
      }
    }
  }
  auto n = detail::make_op<T>(std::move(out), {x});
  Node<T>*np = n.get(), *xp = x.get();
  n->backward = [np, xp, gh, gw, ws, w, c, N]() {
    auto& g = xp->ensure_grad();
    for (int wy = 0; wy < gh; ++wy) {
      for (int wx = 0; wx < gw; ++wx) {
        const int widx = wy * gw + wx;
        for (int iy = 0; iy < ws; ++iy) {
          const T* gs = np->grad.data() + (int64_t(widx) * N + int64_t(iy) * ws) * c;
          T* gd = g.data() + ((int64_t(wy) * ws + iy) * w + int64_t(wx) * ws) * c;
          for (int64_t j = 0; j < int64_t(ws) * c; ++j) gd[j] += gs[j];
        }
      }
    }
  };
  return n;
}

template <typename T>
Var<T> window_reverse(const Var<T>& win, int h, int w) {
  const auto& s = win->value.shape();
  if (s.size() != 3) throw StructuralError("window_reverse: expected (nw, N, c)");
  const int nw = s[0], N = s[1], c = s[2];
  const int ws = static_cast<int>(std::lround(std::sqrt(static_cast<double>(N))));
  if (ws * ws != N) throw StructuralError("window_reverse: N is not a square");
  if (h % ws != 0 || w % ws != 0 || (h / ws) * (w / ws) != nw) {
    throw StructuralError("window_reverse: window count " + std::to_string(nw) +
                          " inconsistent with target " + std::to_string(h) + "x" +
                          std::to_string(w) + " at window size " + std::to_string(ws));
  }
  const int gh = h / ws, gw = w / ws;
  Tensor<T> out({h, w, c});
  for (int wy = 0; wy < gh; ++wy) {
    for (int wx = 0; wx < gw; ++wx) {
      const int widx = wy * gw + wx;
      for (int iy = 0; iy < ws; ++iy) {
        const T* src = win->value.data() + (int64_t(widx) * N + int64_t(iy) * ws) * c;
        T* dst = out.data() + ((int64_t(wy) * ws + iy) * w + int64_t(wx) * ws) * c;
        std::copy_n(src, int64_t(ws) * c, dst);
      }
    }
  }
  auto n = detail::make_op<T>(std::move(out), {win});
  Node<T>*np = n.get(), *wp = win.get();
  n->backward = [np, wp, gh, gw, ws, w, c, N]() {
    auto& g = wp->ensure_grad();
    for (int wy = 0; wy < gh; ++wy) {
      for (int wx = 0; wx < gw; ++wx) {
        const int widx = wy * gw + wx;
        for (int iy = 0; iy < ws; ++iy) {
          const T* gs = np->grad.data() + ((int64_t(wy) * ws + iy) * w + int64_t(wx) * ws) * c;
          T* gd = g.data() + (int64_t(widx) * N + int64_t(iy) * ws) * c;
          for (int64_t j = 0; j < int64_t(ws) * c; ++j) gd[j] += gs[j];
        }
      }
    }
  };
  return n;
}

// Torus roll of the spatial axes: element (i, j) moves to ((i+dy) mod h, (j+dx) mod w).
template <typename T>
Var<T> cyclic_shift(const Var<T>& x, int dy, int dx) {
  const auto& s = x->value.shape();
  if (s.size() != 3) throw StructuralError("cyclic_shift: expected (h, w, c)");
  const int h = s[0], w = s[1], c = s[2];
  const int sy = ((dy % h) + h) % h;
  const int sx = ((dx % w) + w) % w;
  Tensor<T> out({h, w, c});
  for (int i = 0; i < h; ++i) {
    const int oi = (i + sy) % h;
    for (int j = 0; j < w; ++j) {
      const int oj = (j + sx) % w;
      std::copy_n(x->value.data() + (int64_t(i) * w + j) * c, c,
                  out.data() + (int64_t(oi) * w + oj) * c);
    }
  }
  auto n = detail::make_op<T>(std::move(out), {x});
  Node<T>*np = n.get(), *xp = x.get();
  n->backward = [np, xp, h, w, c, sy, sx]() {
    auto& g = xp->ensure_grad();
    for (int i = 0; i < h; ++i) {
      const int oi = (i + sy) % h;
      for (int j = 0; j < w; ++j) {
        const int oj = (j + sx) % w;
        const T* gs = np->grad.data() + (int64_t(oi) * w + oj) * c;
        T* gd = g.data() + (int64_t(i) * w + j) * c;
        for (int k = 0; k < c; ++k) gd[k] += gs[k];
      }
    }
  };
  return n;
}

// Replicate-pad bottom/right edges of (h, w, c).
template <typename T>
Var<T> pad_replicate(const Var<T>& x, int bottom, int right) {
  const auto& s = x->value.shape();
  if (s.size() != 3) throw StructuralError("pad_replicate: expected (h, w, c)");
  const int h = s[0], w = s[1], c = s[2];
  const int oh = h + bottom, ow = w + right;
  Tensor<T> out({oh, ow, c});
  for (int i = 0; i < oh; ++i) {
    const int si = std::min(i, h - 1);
    for (int j = 0; j < ow; ++j) {
      const int sj = std::min(j, w - 1);
      std::copy_n(x->value.data() + (int64_t(si) * w + sj) * c, c,
                  out.data() + (int64_t(i) * ow + j) * c);
    }
  }
  auto n = detail::make_op<T>(std::move(out), {x});
  Node<T>*np = n.get(), *xp = x.get();
  n->backward = [np, xp, h, w, c, oh, ow]() {
    auto& g = xp->ensure_grad();
    for (int i = 0; i < oh; ++i) {
      const int si = std::min(i, h - 1);
      for (int j = 0; j < ow; ++j) {
        const int sj = std::min(j, w - 1);
        const T* gs = np->grad.data() + (int64_t(i) * ow + j) * c;
        T* gd = g.data() + (int64_t(si) * w + sj) * c;
        for (int k = 0; k < c; ++k) gd[k] += gs[k];
      }
    }
  };
  return n;
}

// Top-left crop to (h0, w0).
template <typename T>
Var<T> crop2d(const Var<T>& x, int h0, int w0) {
  const auto& s = x->value.shape();
  if (s.size() != 3 || h0 > s[0] || w0 > s[1]) throw StructuralError("crop2d: out of range");
  const int w = s[1], c = s[2];
  Tensor<T> out({h0, w0, c});
  for (int i = 0; i < h0; ++i) {
    std::copy_n(x->value.data() + int64_t(i) * w * c, int64_t(w0) * c,
                out.data() + int64_t(i) * w0 * c);
  }
  auto n = detail::make_op<T>(std::move(out), {x});
  Node<T>*np = n.get(), *xp = x.get();
  n->backward = [np, xp, h0, w0, w, c]() {
    auto& g = xp->ensure_grad();
    for (int i = 0; i < h0; ++i) {
      const T* gs = np->grad.data() + int64_t(i) * w0 * c;
      T* gd = g.data() + int64_t(i) * w * c;
      for (int64_t j = 0; j < int64_t(w0) * c; ++j) gd[j] += gs[j];
    }
  };
  return n;
}

// Adaptive average pooling with PyTorch bin boundaries.
template <typename T>
Var<T> adaptive_avg_pool2d(const Var<T>& x, int oh, int ow) {
  const auto& s = x->value.shape();
  if (s.size() != 3 || oh <= 0 || ow <= 0) throw StructuralError("adaptive_avg_pool2d: bad args");
  const int h = s[0], w = s[1], c = s[2];
  Tensor<T> out({oh, ow, c});
  auto bin = [](int i, int in, int on) {
    return std::pair<int, int>{(i * in) / on, ((i + 1) * in + on - 1) / on};
  };
  for (int i = 0; i < oh; ++i) {
    auto [y0, y1] = bin(i, h, oh);
    for (int j = 0; j < ow; ++j) {
      auto [x0, x1] = bin(j, w, ow);
      const T inv = T(1) / T((y1 - y0) * (x1 - x0));
      for (int k = 0; k < c; ++k) {
        T acc = T(0);
        for (int yy = y0; yy < y1; ++yy) {
          for (int xx = x0; xx < x1; ++xx) acc += x->value.at(yy, xx, k);
        }
        out.at(i, j, k) = acc * inv;
      }
    }
  }
  auto n = detail::make_op<T>(std::move(out), {x});
  Node<T>*np = n.get(), *xp = x.get();
  n->backward = [np, xp, h, w, c, oh, ow]() {
    auto& g = xp->ensure_grad();
    auto bin = [](int i, int in, int on) {
      return std::pair<int, int>{(i * in) / on, ((i + 1) * in + on - 1) / on};
    };
    for (int i = 0; i < oh; ++i) {
      auto [y0, y1] = bin(i, h, oh);
      for (int j = 0; j < ow; ++j) {
        auto [x0, x1] = bin(j, w, ow);
        const T inv = T(1) / T((y1 - y0) * (x1 - x0));
        for (int k = 0; k < c; ++k) {
          const T gv = np->grad.at(i, j, k) * inv;
          for (int yy = y0; yy < y1; ++yy) {
            for (int xx = x0; xx < x1; ++xx) g.at(yy, xx, k) += gv;
          }
        }
      }
    }
  };
  return n;
}

template <typename T>
Var<T> upsample_nearest2x(const Var<T>& x) {
  const auto& s = x->value.shape();
  if (s.size() != 3) throw StructuralError("upsample_nearest2x: expected (h, w, c)");
  const int h = s[0], w = s[1], c = s[2];
  Tensor<T> out({2 * h, 2 * w, c});
  for (int i = 0; i < 2 * h; ++i) {
    for (int j = 0; j < 2 * w; ++j) {
      std::copy_n(x->value.data() + (int64_t(i / 2) * w + j / 2) * c, c,
                  out.data() + (int64_t(i) * 2 * w + j) * c);
    }
  }
  auto n = detail::make_op<T>(std::move(out), {x});
  Node<T>*np = n.get(), *xp = x.get();
  n->backward = [np, xp, h, w, c]() {
    auto& g = xp->ensure_grad();
    for (int i = 0; i < 2 * h; ++i) {
      for (int j = 0; j < 2 * w; ++j) {
        const T* gs = np->grad.data() + (int64_t(i) * 2 * w + j) * c;
        T* gd = g.data() + (int64_t(i / 2) * w + j / 2) * c;
        for (int k = 0; k < c; ++k) gd[k] += gs[k];
      }
    }
  };
  return n;
}

// ---------------------------------------------------------------------------
// Convolutions (zero padding, arbitrary stride)
// ---------------------------------------------------------------------------

// x: (h, w, cin); weight: (kh, kw, cin, cout); bias: (cout) or null.
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, int stride, int pad) {
  const auto& xs = x->value.shape();
  const auto& ws = weight->value.shape();
  if (xs.size() != 3 || ws.size() != 4 || xs[2] != ws[2]) {
    throw StructuralError("conv2d: incompatible shapes " + Tensor<T>::shape_str(xs) + " / " +
                          Tensor<T>::shape_str(ws));
  }
  const int h = xs[0], w = xs[1], cin = xs[2];
  const int kh = ws[0], kw = ws[1], cout = ws[3];
  const int oh = (h + 2 * pad - kh) / stride + 1;
  const int ow = (w + 2 * pad - kw) / stride + 1;
  if (oh <= 0 || ow <= 0) throw StructuralError("conv2d: empty output");
  const int patch = kh * kw * cin;
  Tensor<T> cols({oh * ow, patch});
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      T* dst = cols.data() + (int64_t(oy) * ow + ox) * patch;
      for (int ky = 0; ky < kh; ++ky) {
        const int iy = oy * stride + ky - pad;
        for (int kx = 0; kx < kw; ++kx) {
          const int ix = ox * stride + kx - pad;
          T* d = dst + (int64_t(ky) * kw + kx) * cin;
          if (iy >= 0 && iy < h && ix >= 0 && ix < w) {
            std::copy_n(x->value.data() + (int64_t(iy) * w + ix) * cin, cin, d);
          } else {
            std::fill_n(d, cin, T(0));
          }
        }
      }
    }
  }
  Tensor<T> out({oh, ow, cout});
  detail::gemm(false, false, oh * ow, cout, patch, T(1), cols.data(), weight->value.data(), T(0),
               out.data());
  if (bias) {
    for (int64_t p = 0; p < int64_t(oh) * ow; ++p) {
      T* o = out.data() + p * cout;
      for (int j = 0; j < cout; ++j) o[j] += bias->value[j];
    }
  }
  std::vector<Var<T>> ins = {x, weight};
  if (bias) ins.push_back(bias);
  auto n = detail::make_op<T>(std::move(out), std::move(ins));
  Node<T>*np = n.get(), *xp = x.get(), *wp = weight.get();
  Node<T>* bp = bias ? bias.get() : nullptr;
  n->backward = [np, xp, wp, bp, cols = std::move(cols), h, w, cin, kh, kw, cout, oh, ow, stride,
                 pad, patch]() {
    const int64_t rows = int64_t(oh) * ow;
    if (bp && bp->requires_grad) {
      auto& gb = bp->ensure_grad();
      for (int64_t p = 0; p < rows; ++p) {
        const T* gs = np->grad.data() + p * cout;
        for (int j = 0; j < cout; ++j) gb[j] += gs[j];
      }
    }
    if (wp->requires_grad) {
      detail::gemm(true, false, patch, cout, static_cast<int>(rows), T(1), cols.data(),
                   np->grad.data(), T(1), wp->ensure_grad().data());
    }
    if (xp->requires_grad) {
      Tensor<T> gcols({static_cast<int>(rows), patch});
      detail::gemm(false, true, static_cast<int>(rows), patch, cout, T(1), np->grad.data(),
                   wp->value.data(), T(0), gcols.data());
      auto& gx = xp->ensure_grad();
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          const T* src = gcols.data() + (int64_t(oy) * ow + ox) * patch;
          for (int ky = 0; ky < kh; ++ky) {
            const int iy = oy * stride + ky - pad;
            if (iy < 0 || iy >= h) continue;
            for (int kx = 0; kx < kw; ++kx) {
              const int ix = ox * stride + kx - pad;
              if (ix < 0 || ix >= w) continue;
              const T* s = src + (int64_t(ky) * kw + kx) * cin;
              T* d = gx.data() + (int64_t(iy) * w + ix) * cin;
              for (int k = 0; k < cin; ++k) d[k] += s[k];
            }
          }
        }
      }
    }
  };
  return n;
}

// Transposed convolution. x: (h, w, cin); weight: (kh, kw, cout, cin);
// output ((h-1)*stride - 2*pad + kh + out_pad, ...).
template <typename T>
Var<T> conv2d_transpose(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, int stride,
                        int pad, int out_pad) {
  const auto& xs = x->value.shape();
  const auto& ws = weight->value.shape();
  if (xs.size() != 3 || ws.size() != 4 || xs[2] != ws[3]) {
    throw StructuralError("conv2d_transpose: incompatible shapes " + Tensor<T>::shape_str(xs) +
                          " / " + Tensor<T>::shape_str(ws));
  }
  const int h = xs[0], w = xs[1], cin = xs[2];
  const int kh = ws[0], kw = ws[1], cout = ws[2];
  const int oh = (h - 1) * stride - 2 * pad + kh + out_pad;
  const int ow = (w - 1) * stride - 2 * pad + kw + out_pad;
  if (oh <= 0 || ow <= 0) throw StructuralError("conv2d_transpose: empty output");
  const int patch = kh * kw * cout;
  // cols (h*w, kh*kw*cout) = x (h*w, cin) * W^T with W viewed (patch, cin)
  Tensor<T> cols({h * w, patch});
  detail::gemm(false, true, h * w, patch, cin, T(1), x->value.data(), weight->value.data(), T(0),
               cols.data());
  Tensor<T> out({oh, ow, cout});
  if (bias) {
    for (int64_t p = 0; p < int64_t(oh) * ow; ++p) {
      T* o = out.data() + p * cout;
      for (int j = 0; j < cout; ++j) o[j] = bias->value[j];
    }
  }
  for (int iy = 0; iy < h; ++iy) {
    for (int ix = 0; ix < w; ++ix) {
      const T* src = cols.data() + (int64_t(iy) * w + ix) * patch;
      for (int ky = 0; ky < kh; ++ky) {
        const int oy = iy * stride + ky - pad;
        if (oy < 0 || oy >= oh) continue;
        for (int kx = 0; kx < kw; ++kx) {
          const int ox = ix * stride + kx - pad;
          if (ox < 0 || ox >= ow) continue;
          const T* s = src + (int64_t(ky) * kw + kx) * cout;
          T* d = out.data() + (int64_t(oy) * ow + ox) * cout;
          for (int k = 0; k < cout; ++k) d[k] += s[k];
        }
      }
    }
  }
  std::vector<Var<T>> ins = {x, weight};
  if (bias) ins.push_back(bias);
  auto n = detail::make_op<T>(std::move(out), std::move(ins));
  Node<T>*np = n.get(), *xp = x.get(), *wp = weight.get();
  Node<T>* bp = bias ? bias.get() : nullptr;
  n->backward = [np, xp, wp, bp, h, w, cin, kh, kw, cout, oh, ow, stride, pad, patch]() {
    if (bp && bp->requires_grad) {
      auto& gb = bp->ensure_grad();
      for (int64_t p = 0; p < int64_t(oh) * ow; ++p) {
        const T* gs = np->grad.data() + p * cout;
        for (int j = 0; j < cout; ++j) gb[j] += gs[j];
      }
    }
    // gcols gathered from output grad, mirrors the forward scatter.
    Tensor<T> gcols({h * w, patch});
    for (int iy = 0; iy < h; ++iy) {
      for (int ix = 0; ix < w; ++ix) {
        T* dst = gcols.data() + (int64_t(iy) * w + ix) * patch;
        for (int ky = 0; ky < kh; ++ky) {
          const int oy = iy * stride + ky - pad;
          for (int kx = 0; kx < kw; ++kx) {
            const int ox = ix * stride + kx - pad;
            T* d = dst + (int64_t(ky) * kw + kx) * cout;
            if (oy >= 0 && oy < oh && ox >= 0 && ox < ow) {
              std::copy_n(np->grad.data() + (int64_t(oy) * ow + ox) * cout, cout, d);
            } else {
              std::fill_n(d, cout, T(0));
            }
          }
        }
      }
    }
    if (xp->requires_grad) {
      detail::gemm(false, false, h * w, cin, patch, T(1), gcols.data(), wp->value.data(), T(1),
                   xp->ensure_grad().data());
    }
    if (wp->requires_grad) {
      detail::gemm(true, false, patch, cin, h * w, T(1), gcols.data(), xp->value.data(), T(1),
                   wp->ensure_grad().data());
    }
  };
  return n;
}

// ---------------------------------------------------------------------------
// Reductions and losses
// ---------------------------------------------------------------------------

template <typename T>
Var<T> sum_all(const Var<T>& a) {
  T acc = T(0);
  for (int64_t i = 0; i < a->value.size(); ++i) acc += a->value[i];
  auto n = detail::make_op<T>(Tensor<T>::scalar(acc), {a});
  Node<T>*np = n.get(), *ap = a.get();
  n->backward = [np, ap]() {
    auto& g = ap->ensure_grad();
    const T gs = np->grad[0];
    for (int64_t i = 0; i < g.size(); ++i) g[i] += gs;
  };
  return n;
}

template <typename T>
Var<T> mean_all(const Var<T>& a) {
  return scale(sum_all(a), T(1) / T(a->value.size()));
}

template <typename T>
Var<T> mse_loss(const Var<T>& a, const Var<T>& b) {
  if (!a->value.same_shape(b->value)) {
    throw StructuralError("mse_loss: shape mismatch " + Tensor<T>::shape_str(a->value.shape()) +
                          " vs " + Tensor<T>::shape_str(b->value.shape()));
  }
  const int64_t nelem = a->value.size();
  T acc = T(0);
  for (int64_t i = 0; i < nelem; ++i) {
    const T d = a->value[i] - b->value[i];
    acc += d * d;
  }
  acc /= T(nelem);
  auto n = detail::make_op<T>(Tensor<T>::scalar(acc), {a, b});
  Node<T>*np = n.get(), *ap = a.get(), *bp = b.get();
  n->backward = [np, ap, bp, nelem]() {
    const T gs = np->grad[0] * T(2) / T(nelem);
    if (ap->requires_grad) {
      auto& g = ap->ensure_grad();
      for (int64_t i = 0; i < nelem; ++i) g[i] += gs * (ap->value[i] - bp->value[i]);
    }
    if (bp->requires_grad) {
      auto& g = bp->ensure_grad();
      for (int64_t i = 0; i < nelem; ++i) g[i] -= gs * (ap->value[i] - bp->value[i]);
    }
  };
  return n;
}

// ---------------------------------------------------------------------------
// Parameter registry
// ---------------------------------------------------------------------------

template <typename T>
class ParamStore {
 public:
  Var<T> add(const std::string& name, Tensor<T> init) {
    if (index_.count(name)) throw StructuralError("duplicate parameter name: " + name);
    auto v = make_var(std::move(init), true);
    index_[name] = items_.size();
    items_.push_back({name, v});
    return v;
  }

  const std::vector<std::pair<std::string, Var<T>>>& items() const { return items_; }

  Var<T> find(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) return nullptr;
    return items_[it->second].second;
  }

  int64_t total_params() const {
    int64_t n = 0;
    for (const auto& [name, v] : items_) n += v->value.size();
    return n;
  }

  int64_t total_params(const std::string& prefix) const {
    int64_t n = 0;
    for (const auto& [name, v] : items_) {
      if (name.rfind(prefix, 0) == 0) n += v->value.size();
    }
    return n;
  }

  void zero_grads() {
    for (auto& [name, v] : items_) v->zero_grad();
  }

  void set_trainable(const std::string& prefix, bool trainable) {
    for (auto& [name, v] : items_) {
      if (name.rfind(prefix, 0) == 0) v->requires_grad = trainable;
    }
  }

  void set_all_trainable(bool trainable) {
    for (auto& [name, v] : items_) v->requires_grad = trainable;
  }

  std::vector<std::pair<std::string, Var<T>>> trainable() const {
    std::vector<std::pair<std::string, Var<T>>> out;
    for (const auto& it : items_) {
      if (it.second->requires_grad) out.push_back(it);
    }
    return out;
  }

 private:
  std::vector<std::pair<std::string, Var<T>>> items_;
  std::unordered_map<std::string, size_t> index_;
};

}  // namespace ttic

#endif  // TTIC_AUTOGRAD_HPP_
