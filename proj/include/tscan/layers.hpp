/*
 * Copyright 2026 The TSCAN Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Transformer building blocks: sinusoidal positional encoding, multi-head
// self- and cross-attention, the position-wise feed-forward network and the
// MLP that produces cross-attention values from concatenated queries/keys.
//
// Every layer accepts either a single sequence [L, d_model] or a stack of
// sequences [B, L, d_model] and treats rows independently.

#pragma once

#include <cmath>
#include <cstddef>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "tscan/autodiff.hpp"
#include "tscan/param_store.hpp"
#include "tscan/tensor.hpp"

namespace tscan {

struct LayerConfig {
  std::size_t d_model = 64;
  std::size_t n_heads = 4;
  std::size_t d_ff = 128;
  double dropout_rate = 0.1;

  std::size_t head_dim() const { return d_model / n_heads; }

  void validate() const {
    if (d_model == 0 || n_heads == 0 || d_ff == 0) {
      throw std::invalid_argument("layer widths and head count must be positive");
    }
    if (d_model % n_heads != 0) {
      throw std::invalid_argument("d_model " + std::to_string(d_model) +
                                  " is not divisible by n_heads " + std::to_string(n_heads));
    }
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
      throw std::invalid_argument("dropout_rate must lie in [0, 1)");
    }
  }
};

// Per-head attention probabilities: [n_heads, L_q, L_k], or
// [B, n_heads, L_q, L_k] for stacked input.
struct AttentionWeights {
  Tensor probs;

  std::size_t heads() const { return probs.dim(-3); }
  std::size_t queries() const { return probs.dim(-2); }
  std::size_t keys() const { return probs.dim(-1); }
};

// Everything a layer needs besides its inputs.
struct ForwardContext {
  Tape& tape;
  const ParamStore& params;
  bool train = false;
  std::mt19937_64* rng = nullptr;

  Var param(const std::string& name) const { return tape.param(params, name); }

  Var dropout(Var x, double rate) const {
    if (!train || rate <= 0.0) return x;
    if (rng == nullptr) throw std::logic_error("training-mode forward requires a dropout stream");
    return ad::dropout(x, rate, *rng);
  }
};

inline Tensor positional_encoding(std::size_t length, std::size_t d_model) {
  if (length < 1) throw std::invalid_argument("positional encoding length must be >= 1");
  if (d_model < 2 || d_model % 2 != 0) {
    throw std::invalid_argument("positional encoding width must be even and >= 2, got " +
                                std::to_string(d_model));
  }
  Tensor pe({length, d_model});
  for (std::size_t p = 0; p < length; ++p) {
    for (std::size_t i = 0; i < d_model / 2; ++i) {
      const double angle = static_cast<double>(p) /
                           std::pow(10000.0, static_cast<double>(2 * i) / static_cast<double>(d_model));
      pe.at(p, 2 * i) = std::sin(angle);
      pe.at(p, 2 * i + 1) = std::cos(angle);
    }
  }
  return pe;
}

namespace layers {

inline void require_width(Var x, std::size_t width, const char* layer) {
  if (x.value().rank() < 2 || x.value().rank() > 3 || x.dim(-1) != width) {
    throw ShapeError(std::string(layer) + ": expected [L, " + std::to_string(width) +
                     "] or [B, L, " + std::to_string(width) + "], got " + shape_str(x.shape()));
  }
}

// x W (+ b) applied to the last axis of a rank-2 or rank-3 input.
inline Var linear(Var x, Var w, const Var* b = nullptr) {
  Var y;
  if (x.value().rank() == 3) {
    const Shape s = x.shape();
    y = ad::matmul(ad::reshape(x, {s[0] * s[1], s[2]}), w);
    y = ad::reshape(y, {s[0], s[1], w.dim(-1)});
  } else {
    y = ad::matmul(x, w);
  }
  return b ? ad::add_row(y, *b) : y;
}

inline Var linear(const ForwardContext& ctx, Var x, const std::string& prefix) {
  Var b = ctx.param(prefix + ".b");
  return linear(x, ctx.param(prefix + ".w"), &b);
}

inline Var norm(const ForwardContext& ctx, Var x, const std::string& prefix) {
  return ad::add_row(ad::mul_row(ad::layer_norm(x), ctx.param(prefix + ".gamma")),
                     ctx.param(prefix + ".beta"));
}

inline void init_linear(ParamStore& store, const std::string& prefix, std::size_t in,
                        std::size_t out, std::mt19937_64& rng) {
  store.add(prefix + ".w", glorot(in, out, rng));
  store.add(prefix + ".b", Tensor({out}, 0.0));
}

inline void init_norm(ParamStore& store, const std::string& prefix, std::size_t width) {
  store.add(prefix + ".gamma", Tensor({width}, 1.0));
  store.add(prefix + ".beta", Tensor({width}, 0.0));
}

// Parameters: wq, wk, wv, wo (d_model x d_model) and ln.{gamma,beta}.
inline void init_attention(ParamStore& store, const std::string& prefix, const LayerConfig& cfg,
                           std::mt19937_64& rng) {
  for (const char* m : {".wq", ".wk", ".wv", ".wo"})
    store.add(prefix + m, glorot(cfg.d_model, cfg.d_model, rng));
  init_norm(store, prefix + ".ln", cfg.d_model);
}

// Parameters: w1, b1 (d_model -> d_ff), w2, b2 (d_ff -> d_model), ln.{gamma,beta}.
inline void init_ffn(ParamStore& store, const std::string& prefix, const LayerConfig& cfg,
                     std::mt19937_64& rng) {
  store.add(prefix + ".w1", glorot(cfg.d_model, cfg.d_ff, rng));
  store.add(prefix + ".b1", Tensor({cfg.d_ff}, 0.0));
  store.add(prefix + ".w2", glorot(cfg.d_ff, cfg.d_model, rng));
  store.add(prefix + ".b2", Tensor({cfg.d_model}, 0.0));
  init_norm(store, prefix + ".ln", cfg.d_model);
}

// Parameters: w1, b1 (2 d_model -> d_ff), w2, b2 (d_ff -> d_model).
inline void init_v_mlp(ParamStore& store, const std::string& prefix, const LayerConfig& cfg,
                       std::mt19937_64& rng) {
  store.add(prefix + ".w1", glorot(2 * cfg.d_model, cfg.d_ff, rng));
  store.add(prefix + ".b1", Tensor({cfg.d_ff}, 0.0));
  store.add(prefix + ".w2", glorot(cfg.d_ff, cfg.d_model, rng));
  store.add(prefix + ".b2", Tensor({cfg.d_model}, 0.0));
}

struct AttentionOutput {
  Var out;             // concat_h(A_h V_h) W_o, before residual and norm
  AttentionWeights weights;
  Var key_projection;  // k W_k, kept for graph inspection
};

// Scaled dot-product attention with learned projections, no residual.
inline AttentionOutput attention_core(const ForwardContext& ctx, Var q, Var k, Var v,
                                      const std::string& prefix, const LayerConfig& cfg) {
  require_width(q, cfg.d_model, "attention query");
  require_width(k, cfg.d_model, "attention key");
  require_width(v, cfg.d_model, "attention value");
  if (k.dim(-2) != v.dim(-2)) {
    throw ShapeError("attention: key length " + std::to_string(k.dim(-2)) +
                     " differs from value length " + std::to_string(v.dim(-2)));
  }
  if (q.value().rank() != k.value().rank() || k.value().rank() != v.value().rank() ||
      (q.value().rank() == 3 && (q.dim(0) != k.dim(0) || k.dim(0) != v.dim(0)))) {
    throw ShapeError("attention: batch layout mismatch " + shape_str(q.shape()) + ", " +
                     shape_str(k.shape()) + ", " + shape_str(v.shape()));
  }
  const Var qp = linear(q, ctx.param(prefix + ".wq"));
  const Var kp = linear(k, ctx.param(prefix + ".wk"));
  const Var vp = linear(v, ctx.param(prefix + ".wv"));
  const std::size_t dk = cfg.head_dim();
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dk));

  std::vector<Var> heads;
  std::vector<Tensor> probs;
  for (std::size_t h = 0; h < cfg.n_heads; ++h) {
    const Var qh = ad::slice(qp, -1, h * dk, (h + 1) * dk);
    const Var kh = ad::slice(kp, -1, h * dk, (h + 1) * dk);
    const Var vh = ad::slice(vp, -1, h * dk, (h + 1) * dk);
    const Var scores = ad::scale(ad::matmul(qh, ad::transpose(kh)), inv_sqrt);
    const Var a = ad::softmax(scores, -1);
    probs.push_back(a.value());
    heads.push_back(ad::matmul(a, vh));
  }
  const Var merged = heads.size() == 1 ? heads[0] : ad::concat(std::span<const Var>(heads), -1);
  const Var out = linear(merged, ctx.param(prefix + ".wo"));

  // Stack per-head probabilities on a new head axis.
  const Tensor& p0 = probs.front();
  const std::size_t lq = p0.dim(-2), lk = p0.dim(-1);
  const std::size_t batch = p0.size() / (lq * lk);
  Shape ws = p0.rank() == 3 ? Shape{batch, cfg.n_heads, lq, lk} : Shape{cfg.n_heads, lq, lk};
  Tensor stacked(ws);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t h = 0; h < cfg.n_heads; ++h)
      std::copy_n(probs[h].data().begin() + static_cast<std::ptrdiff_t>(b * lq * lk), lq * lk,
                  stacked.data().begin() + static_cast<std::ptrdiff_t>((b * cfg.n_heads + h) * lq * lk));
  return {out, AttentionWeights{std::move(stacked)}, kp};
}

struct AttentionResult {
  Var out;
  AttentionWeights weights;
  Var key_projection;
};

// Multi-head self-attention: norm(x + dropout(attn(x, x, x))).
inline AttentionResult msa(const ForwardContext& ctx, Var x, const std::string& prefix,
                           const LayerConfig& cfg) {
  require_width(x, cfg.d_model, "msa");
  AttentionOutput a = attention_core(ctx, x, x, x, prefix, cfg);
  Var y = norm(ctx, ad::add(x, ctx.dropout(a.out, cfg.dropout_rate)), prefix + ".ln");
  return {y, std::move(a.weights), a.key_projection};
}

// Multi-head cross-attention: norm(q + dropout(attn(q, k, v))).
inline AttentionResult mca(const ForwardContext& ctx, Var q, Var k, Var v,
                           const std::string& prefix, const LayerConfig& cfg) {
  if (q.value().rank() != k.value().rank()) {
    throw ShapeError("mca: query " + shape_str(q.shape()) + " and key " + shape_str(k.shape()) +
                     " have different layouts");
  }
  AttentionOutput a = attention_core(ctx, q, k, v, prefix, cfg);
  Var y = norm(ctx, ad::add(q, ctx.dropout(a.out, cfg.dropout_rate)), prefix + ".ln");
  return {y, std::move(a.weights), a.key_projection};
}

// Position-wise feed-forward: norm(x + dropout(relu(x W1 + b1) W2 + b2)).
inline Var ffn(const ForwardContext& ctx, Var x, const std::string& prefix, const LayerConfig& cfg) {
  require_width(x, cfg.d_model, "ffn");
  const Var b1 = ctx.param(prefix + ".b1");
  const Var b2 = ctx.param(prefix + ".b2");
  Var h = ad::relu(linear(x, ctx.param(prefix + ".w1"), &b1));
  Var y = linear(h, ctx.param(prefix + ".w2"), &b2);
  return norm(ctx, ad::add(x, ctx.dropout(y, cfg.dropout_rate)), prefix + ".ln");
}

// Value producer for cross-attention: MLP over the feature-axis concat of q and k.
inline Var v_mlp(const ForwardContext& ctx, Var q, Var k, const std::string& prefix,
                 const LayerConfig& cfg) {
  if (q.shape() != k.shape()) {
    throw ShapeError("v_mlp: query " + shape_str(q.shape()) + " and key " + shape_str(k.shape()) +
                     " must share a shape");
  }
  require_width(q, cfg.d_model, "v_mlp");
  const Var b1 = ctx.param(prefix + ".b1");
  const Var b2 = ctx.param(prefix + ".b2");
  Var h = ad::relu(linear(ad::concat({q, k}, -1), ctx.param(prefix + ".w1"), &b1));
  return linear(h, ctx.param(prefix + ".w2"), &b2);
}

}  // namespace layers
}  // namespace tscan
