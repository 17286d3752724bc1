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

#ifndef TTIC_SWIN_HPP_
#define TTIC_SWIN_HPP_

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "ttic/autograd.hpp"
#include "ttic/nn.hpp"

namespace ttic {

// Largest power-of-two window <= cfg that divides both spatial dims.
inline int effective_window(int cfg_ws, int h, int w) {
  int ws = cfg_ws;
  while (ws > 1 && (h % ws != 0 || w % ws != 0)) ws /= 2;
  return ws;
}

// Scaled-dot-product attention for one window and one head:
// Softmax(Q K^T / sqrt(d) + B [+ mask]) V.
template <typename T>
Var<T> attend(const Var<T>& q, const Var<T>& k, const Var<T>& v, const Var<T>& bias,
              const Var<T>& mask = nullptr) {
  if (q->value.rank() != 2 || k->value.rank() != 2 || v->value.rank() != 2) {
    throw StructuralError("attend: expected 2-d token matrices");
  }
  const int nq = q->value.dim(0), d = q->value.dim(1);
  const int nk = k->value.dim(0);
  if (k->value.dim(1) != d) {
    throw StructuralError("attend: query dim " + std::to_string(d) + " != key dim " +
                          std::to_string(k->value.dim(1)));
  }
  if (v->value.dim(0) != nk) throw StructuralError("attend: key/value count mismatch");
  auto q3 = reshape(q, {1, nq, d});
  auto k3 = reshape(k, {1, nk, d});
  auto v3 = reshape(v, {1, nk, v->value.dim(1)});
  auto scores = scale(bmm(q3, k3, /*trans_b=*/true), T(1) / T(std::sqrt(double(d))));
  if (bias) {
    if (bias->value.size() != int64_t(nq) * nk) {
      throw StructuralError("attend: bias not broadcastable to scores");
    }
    scores = add(scores, reshape(bias, {1, nq, nk}));
  }
  if (mask) scores = add(scores, reshape(mask, {1, nq, nk}));
  auto w = softmax_last(scores);
  auto out = bmm(w, v3);
  return reshape(out, {nq, v->value.dim(1)});
}

// Prompt-augmented projections: Q = F Wq, K = [F;P] Wk, V = [F;P] Wv.
// Image tokens precede prompts. P may be empty (0 rows).
template <typename T>
struct ProjectionTriple {
  Var<T> q, k, v;
};

template <typename T>
ProjectionTriple<T> prompted_projections(const Var<T>& f, const Var<T>& p, const Var<T>& wq,
                                         const Var<T>& wk, const Var<T>& wv) {
  const int nn = f->value.dim(0), d = f->value.dim(1);
  Var<T> fp = f;
  if (p && p->value.dim(0) > 0) {
    if (p->value.dim(1) != d) throw StructuralError("prompted_projections: prompt dim mismatch");
    if (p->value.dim(0) * 4 != nn) {
      throw StructuralError("prompted_projections: prompt count " +
                            std::to_string(p->value.dim(0)) + " != N/4 = " +
                            std::to_string(nn / 4));
    }
    auto f3 = reshape(f, {1, nn, d});
    auto p3 = reshape(p, {1, p->value.dim(0), d});
    fp = reshape(concat_tokens(f3, p3), {nn + p->value.dim(0), d});
  }
  ProjectionTriple<T> out;
  out.q = matmul(f, wq);
  out.k = matmul(fp, wk);
  out.v = matmul(fp, wv);
  return out;
}

// Relative-position bias gathered per head with zero columns appended for
// prompt keys (prompts carry no spatial position).
template <typename T>
Var<T> window_bias(const Var<T>& table, const std::vector<int>& idx, int n, int heads,
                   int prompt_cols) {
  if (table->value.rank() != 2 || table->value.dim(1) != heads) {
    throw StructuralError("window_bias: table must be (L, heads)");
  }
  if (static_cast<int>(idx.size()) != n * n) throw StructuralError("window_bias: bad index size");
  const int nk = n + prompt_cols;
  Tensor<T> out({heads, n, nk});
  for (int h = 0; h < heads; ++h) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        out.at(h, i, j) = table->value.at(idx[i * n + j], h);
      }
      for (int j = n; j < nk; ++j) out.at(h, i, j) = T(0);
    }
  }
  auto node = detail::make_op<T>(std::move(out), {table});
  Node<T>*np = node.get(), *tp = table.get();
  node->backward = [np, tp, idx, n, heads, nk]() {
    auto& g = tp->ensure_grad();
    for (int h = 0; h < heads; ++h) {
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          g.at(idx[i * n + j], h) += np->grad.at(h, i, j);
        }
      }
    }
  };
  return node;
}

// Replicate a shared (p, c) token matrix across nw windows.
template <typename T>
Var<T> tile_tokens(const Var<T>& p, int nw) {
  if (p->value.rank() != 2) throw StructuralError("tile_tokens: expected (p, c)");
  const int rows = p->value.dim(0), c = p->value.dim(1);
  Tensor<T> out({nw, rows, c});
  for (int i = 0; i < nw; ++i) {
    std::copy_n(p->value.data(), int64_t(rows) * c, out.data() + int64_t(i) * rows * c);
  }
  auto n = detail::make_op<T>(std::move(out), {p});
  Node<T>*np = n.get(), *pp = p.get();
  n->backward = [np, pp, nw, rows, c]() {
    auto& g = pp->ensure_grad();
    for (int i = 0; i < nw; ++i) {
      const T* gs = np->grad.data() + int64_t(i) * rows * c;
      for (int64_t j = 0; j < int64_t(rows) * c; ++j) g[j] += gs[j];
    }
  };
  return n;
}

enum class PromptMode { kNone, kInstance, kTask, kInstanceShared };

// Prompts handed to one Swin block forward. For deep injection per_layer has
// one entry per layer; for shallow only the first is consumed and the
// attention-updated prompts flow to subsequent layers.
template <typename T>
struct BlockPrompts {
  PromptMode mode = PromptMode::kNone;
  bool shallow = false;
  // kInstance: (h/2, w/2, c) fields. kTask / kInstanceShared: (p, c) matrices.
  std::vector<Var<T>> per_layer;
  // Diagnostic: adds -inf to all prompt key logits, which must reproduce the
  // unprompted output exactly.
  bool mask_prompt_logits = false;

  bool active() const { return mode != PromptMode::kNone && !per_layer.empty(); }
};

namespace detail {

// Standard shifted-window attention mask over region ids, with prompt key
// columns (and prompt query rows, if any) left attendable.
template <typename T>
Tensor<T> shift_mask(int h, int w, int ws, int shift, int prompt_cols, int prompt_rows) {
  const int gh = h / ws, gw = w / ws, nw = gh * gw, n = ws * ws;
  std::vector<int> region(static_cast<size_t>(h) * w);
  int cnt = 0;
  const int hb[4] = {0, h - ws, h - shift, h};
  const int wb[4] = {0, w - ws, w - shift, w};
  for (int hs = 0; hs < 3; ++hs) {
    for (int wsec = 0; wsec < 3; ++wsec) {
      for (int i = hb[hs]; i < hb[hs + 1]; ++i) {
        for (int j = wb[wsec]; j < wb[wsec + 1]; ++j) region[static_cast<size_t>(i) * w + j] = cnt;
      }
      ++cnt;
    }
  }
  const int nq = n + prompt_rows, nk = n + prompt_cols;
  Tensor<T> mask({nw, nq, nk});
  std::vector<int> win(n);
  for (int wy = 0; wy < gh; ++wy) {
    for (int wx = 0; wx < gw; ++wx) {
      const int widx = wy * gw + wx;
      for (int iy = 0; iy < ws; ++iy) {
        for (int ix = 0; ix < ws; ++ix) {
          win[iy * ws + ix] = region[static_cast<size_t>(wy * ws + iy) * w + wx * ws + ix];
        }
      }
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          mask.at(widx, i, j) = (win[i] == win[j]) ? T(0) : T(-100);
        }
      }
    }
  }
  return mask;
}

}  // namespace detail

// Pre-norm Swin layer: W-MSA or SW-MSA, then MLP, both with residuals.
// Prompt tokens contribute keys/values only and never reach the output
// feature map; under shallow injection they are carried through the residual
// stream and returned to the caller.
template <typename T>
struct SwinLayer {
  LayerNormLayer<T> ln1, ln2;
  Var<T> wq, bq, wk, bk, wv, bv;
  LinearLayer<T> proj;
  MlpLayer<T> mlp;
  Var<T> bias_table;  // ((2*ws-1)^2, heads)
  int dim = 0, heads = 1, window = 8;
  bool shifted = false;

  SwinLayer() = default;
  SwinLayer(ParamStore<T>& ps, const std::string& name, int dim_, int heads_, int window_,
            bool shifted_, Rng& rng)
      : ln1(ps, name + ".ln1", dim_),
        ln2(ps, name + ".ln2", dim_),
        proj(ps, name + ".proj", dim_, dim_, rng),
        mlp(ps, name + ".mlp", dim_, 4 * dim_, rng),
        dim(dim_),
        heads(heads_),
        window(window_),
        shifted(shifted_) {
    wq = ps.add(name + ".wq", fan_in_init<T>({dim_, dim_}, dim_, rng));
    bq = ps.add(name + ".bq", Tensor<T>::zeros({dim_}));
    wk = ps.add(name + ".wk", fan_in_init<T>({dim_, dim_}, dim_, rng));
    bk = ps.add(name + ".bk", Tensor<T>::zeros({dim_}));
    wv = ps.add(name + ".wv", fan_in_init<T>({dim_, dim_}, dim_, rng));
    bv = ps.add(name + ".bv", Tensor<T>::zeros({dim_}));
    const int l = (2 * window_ - 1) * (2 * window_ - 1);
    bias_table = ps.add(name + ".rpb", uniform_init<T>({l, heads_}, 0.02, rng));
  }

  std::vector<int> bias_index(int ws) const {
    std::vector<int> idx(static_cast<size_t>(ws) * ws * ws * ws);
    const int span = 2 * window - 1;
    for (int qy = 0; qy < ws; ++qy) {
      for (int qx = 0; qx < ws; ++qx) {
        for (int ky = 0; ky < ws; ++ky) {
          for (int kx = 0; kx < ws; ++kx) {
            const int q = qy * ws + qx, k = ky * ws + kx;
            idx[static_cast<size_t>(q) * ws * ws + k] =
                (ky - qy + window - 1) * span + (kx - qx + window - 1);
          }
        }
      }
    }
    return idx;
  }

  struct Result {
    Var<T> features;
    Var<T> carried;  // shallow-updated prompt state (nw, p, c) or null
  };

  // prompt_field: (h/2, w/2, c) instance field, prompt_tokens: shared (p, c),
  // carried: per-window state from a previous shallow layer. At most one of
  // the three is set.
  Result forward(const Var<T>& x, const Var<T>& prompt_field, const Var<T>& prompt_tokens,
                 const Var<T>& carried, bool update_prompts, bool mask_prompt_logits) const {
    const int h = x->value.dim(0), w = x->value.dim(1), c = x->value.dim(2);
    if (c != dim) throw StructuralError("swin layer: channel width mismatch");
    const int ws = effective_window(window, h, w);
    const int shift = shifted && ws > 1 ? ws / 2 : 0;
    const int n = ws * ws;
    const int gh = h / ws, gw = w / ws, nw = gh * gw;

    auto t = layer_norm(reshape(x, {h * w, c}), ln1.gamma, ln1.beta);
    auto xs = reshape(t, {h, w, c});
    if (shift > 0) xs = cyclic_shift(xs, -shift, -shift);
    auto win = window_partition(xs, ws);  // (nw, n, c)

    // Resolve prompt tokens for this layer: (nw, p, c) or shared (p, c).
    Var<T> pwin;        // per-window prompts
    Var<T> pshared;     // shared prompts
    int p = 0;
    if (carried) {
      auto pln = layer_norm(reshape(carried, {nw * carried->value.dim(1), c}), ln1.gamma,
                            ln1.beta);
      pwin = reshape(pln, carried->value.shape());
      p = carried->value.dim(1);
    } else if (prompt_field) {
      auto pf = prompt_field;
      const int ph = pf->value.dim(0), pw = pf->value.dim(1);
      if (ph <= 0 || pw <= 0 || h % ph != 0 || w % pw != 0 || h / ph != w / pw) {
        throw StructuralError("swin layer: prompt field " +
                              Tensor<T>::shape_str(pf->value.shape()) +
                              " is not an integer subsampling of " + std::to_string(h) + "x" +
                              std::to_string(w));
      }
      const int ratio = h / ph;  // 2 for the quarter-area default
      if (ws % ratio == 0 && ws / ratio >= 1) {
        const int pws = ws / ratio;
        auto pln = reshape(layer_norm(reshape(pf, {ph * pw, c}), ln1.gamma, ln1.beta),
                           {ph, pw, c});
        if (shift > 0) pln = cyclic_shift(pln, -(shift / ratio), -(shift / ratio));
        pwin = window_partition(pln, pws);  // (nw, pws*pws, c)
        p = pws * pws;
      }
    } else if (prompt_tokens) {
      // Stored counts correspond to the configured window; scale down when a
      // smaller effective window is in use.
      const int avail = prompt_tokens->value.dim(0);
      const int want = ws == window ? avail : (avail * n) / (window * window);
      if (want > 0) {
        auto pt = prompt_tokens;
        if (want < avail) {
          pt = reshape(slice_tokens(reshape(pt, {1, avail, c}), 0, want), {want, c});
        }
        pshared = reshape(layer_norm(pt, ln1.gamma, ln1.beta), {want, c});
        p = want;
      }
    }

    const int ntok = n + p;
    const bool prompts_as_queries = update_prompts && p > 0;
    const int nq = prompts_as_queries ? ntok : n;

    // Image tokens and prompts are projected in separate GEMMs so the image
    // path is bitwise independent of prompt presence; results are then
    // concatenated (image tokens first).
    auto iflat = reshape(win, {nw * n, c});
    auto q = reshape(linear(iflat, wq, bq), {nw, n, c});
    auto k = reshape(linear(iflat, wk, bk), {nw, n, c});
    auto v = reshape(linear(iflat, wv, bv), {nw, n, c});
    if (p > 0) {
      Var<T> pk, pv, pq;
      if (pwin) {
        auto pflat = reshape(pwin, {nw * p, c});
        pk = reshape(linear(pflat, wk, bk), {nw, p, c});
        pv = reshape(linear(pflat, wv, bv), {nw, p, c});
        if (prompts_as_queries) pq = reshape(linear(pflat, wq, bq), {nw, p, c});
        k = concat_tokens(k, pk);
        v = concat_tokens(v, pv);
        if (prompts_as_queries) q = concat_tokens(q, pq);
      } else {
        pk = reshape(linear(pshared, wk, bk), {p, c});
        pv = reshape(linear(pshared, wv, bv), {p, c});
        k = concat_tokens_shared(k, pk);
        v = concat_tokens_shared(v, pv);
        if (prompts_as_queries) {
          pq = reshape(linear(pshared, wq, bq), {p, c});
          q = concat_tokens_shared(q, pq);
        }
      }
    }
    const int dh = c / heads;
    auto qh = split_heads(q, heads);
    auto kh = split_heads(k, heads);
    auto vh = split_heads(v, heads);
    auto scores = scale(bmm(qh, kh, /*trans_b=*/true), T(1) / T(std::sqrt(double(dh))));
    auto s4 = reshape(scores, {nw, heads, nq, ntok});

    // Relative-position bias over image pairs; zero for prompt keys, and zero
    // rows for prompt queries under shallow injection.
    auto bimg = window_bias(bias_table, bias_index(ws), n, heads, p);  // (heads, n, n+p)
    Var<T> bfull = bimg;
    if (prompts_as_queries) {
      Tensor<T> padded({heads, nq, ntok});
      auto bn = detail::make_op<T>(std::move(padded), {bimg});
      for (int hh = 0; hh < heads; ++hh) {
        for (int i = 0; i < n; ++i) {
          for (int j = 0; j < ntok; ++j) bn->value.at(hh, i, j) = bimg->value.at(hh, i, j);
        }
      }
      Node<T>*np = bn.get(), *ip = bimg.get();
      bn->backward = [np, ip, n2 = n, ntok, heads2 = heads]() {
        auto& g = ip->ensure_grad();
        for (int hh = 0; hh < heads2; ++hh) {
          for (int i = 0; i < n2; ++i) {
            for (int j = 0; j < ntok; ++j) g.at(hh, i, j) += np->grad.at(hh, i, j);
          }
        }
      };
      bfull = bn;
    }
    s4 = add_bcast_outer(s4, bfull);

    if (shift > 0) {
      auto mask = constant(detail::shift_mask<T>(h, w, ws, shift, p, prompts_as_queries ? p : 0));
      s4 = add_bcast_inner(s4, mask);
    }
    if (mask_prompt_logits && p > 0) {
      Tensor<T> pm({nw, nq, ntok});
      const T ninf = -std::numeric_limits<T>::infinity();
      for (int b = 0; b < nw; ++b) {
        for (int i = 0; i < nq; ++i) {
          for (int j = n; j < ntok; ++j) pm.at(b, i, j) = ninf;
        }
      }
      s4 = add_bcast_inner(reshape(s4, {nw, heads, nq, ntok}), constant(std::move(pm)));
    }

    auto attn = softmax_last(s4);
    auto ctx = bmm(reshape(attn, {nw * heads, nq, ntok}), vh);
    auto merged = merge_heads(reshape(ctx, {nw * heads, nq, dh}), heads);  // (nw, nq, c)
    auto projected = reshape(proj.forward(reshape(merged, {nw * nq, c})), {nw, nq, c});

    auto img = prompts_as_queries ? slice_tokens(projected, 0, n) : projected;
    auto imap = window_reverse(img, h, w);
    if (shift > 0) imap = cyclic_shift(imap, shift, shift);
    auto x1 = add(x, imap);
    auto m = mlp.forward(layer_norm(reshape(x1, {h * w, c}), ln2.gamma, ln2.beta));
    Result res;
    res.features = add(x1, reshape(m, {h, w, c}));

    if (prompts_as_queries) {
      auto pout = slice_tokens(projected, n, p);  // (nw, p, c)
      Var<T> pres = carried;
      if (!pres) {
        // First shallow layer: residual base is the raw prompt input.
        if (pwin && prompt_field) {
          auto pf = prompt_field;
          const int ratio = h / pf->value.dim(0);
          const int pws = ws / ratio;
          auto pfs = shift > 0 ? cyclic_shift(pf, -(shift / ratio), -(shift / ratio)) : pf;
          pres = window_partition(pfs, pws);
        } else if (pshared && prompt_tokens) {
          auto pt = prompt_tokens;
          if (p < pt->value.dim(0)) {
            pt = reshape(slice_tokens(reshape(pt, {1, pt->value.dim(0), c}), 0, p), {p, c});
          }
          pres = tile_tokens(pt, nw);
        }
      }
      auto p1 = add(pres, pout);
      auto pm = mlp.forward(layer_norm(reshape(p1, {nw * p, c}), ln2.gamma, ln2.beta));
      res.carried = add(p1, reshape(pm, {nw, p, c}));
    }
    return res;
  }

  // MACs for one forward at the given resolution (image tokens + p prompts
  // per window on the key/value path).
  int64_t macs(int h, int w, int prompts_per_window, bool prompt_queries) const {
    const int ws = effective_window(window, h, w);
    const int n = ws * ws, nw = (h / ws) * (w / ws);
    const int p = std::min(prompts_per_window, n / 4);
    const int ntok = n + p;
    const int nq = prompt_queries && p > 0 ? ntok : n;
    const int64_t tokens = int64_t(h) * w;
    int64_t m = 0;
    m += int64_t(nw) * nq * dim * dim;          // Q proj
    m += 2 * int64_t(nw) * ntok * dim * dim;    // K, V proj
    m += int64_t(heads) * nw * nq * ntok * (dim / heads) * 2;  // scores + values
    m += int64_t(nw) * nq * dim * dim;          // output proj
    m += mlp.macs(tokens + (prompt_queries ? int64_t(nw) * p : 0));
    return m;
  }
};

// Swin block (STB): M layers alternating W-MSA / SW-MSA.
template <typename T>
struct SwinBlock {
  std::vector<SwinLayer<T>> layers;
  int dim = 0, window = 8;

  SwinBlock() = default;
  SwinBlock(ParamStore<T>& ps, const std::string& name, int depth, int dim_, int heads, int window_,
            Rng& rng)
      : dim(dim_), window(window_) {
    for (int i = 0; i < depth; ++i) {
      layers.emplace_back(ps, name + ".l" + std::to_string(i), dim_, heads, window_,
                          /*shifted=*/i % 2 == 1, rng);
    }
  }

  int depth() const { return static_cast<int>(layers.size()); }

  Var<T> forward(const Var<T>& x, const BlockPrompts<T>* prompts = nullptr) const {
    Var<T> f = x;
    Var<T> carried;
    const bool active = prompts && prompts->active();
    for (size_t i = 0; i < layers.size(); ++i) {
      Var<T> field, tokens;
      bool update = false;
      if (active) {
        const bool shallow = prompts->shallow;
        if (shallow) {
          update = true;
          if (i == 0) {
            if (prompts->mode == PromptMode::kInstance) {
              field = prompts->per_layer[0];
            } else {
              tokens = prompts->per_layer[0];
            }
          }
        } else if (i < prompts->per_layer.size()) {
          if (prompts->mode == PromptMode::kInstance) {
            field = prompts->per_layer[i];
          } else {
            tokens = prompts->per_layer[i];
          }
        }
      }
      auto res = layers[i].forward(f, field, tokens, carried, update,
                                   active && prompts->mask_prompt_logits);
      f = res.features;
      carried = res.carried;
    }
    return f;
  }

  int64_t macs(int h, int w, int prompts_per_window, bool shallow) const {
    int64_t total = 0;
    for (const auto& l : layers) {
      total += l.macs(h, w, prompts_per_window, shallow && prompts_per_window > 0);
    }
    return total;
  }
};

}  // namespace ttic

#endif  // TTIC_SWIN_HPP_
