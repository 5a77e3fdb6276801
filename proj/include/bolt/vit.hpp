// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "bolt/core/error.hpp"
#include "bolt/core/matrix.hpp"
#include "bolt/core/rng.hpp"
#include "bolt/nn.hpp"

namespace bolt {

struct ViTConfig {
  int depth = 2;
  int heads = 4;
  int dim = 64;
  double mlp_ratio = 4.0;
  int tokens = 16;  // patch tokens, excluding the class token

  void validate() const {
    if (depth < 1) throw ConfigError("depth must be >= 1");
    if (heads < 1 || dim % heads != 0)
      throw ConfigError("heads must divide dim");
    if (!(mlp_ratio > 0.0)) throw ConfigError("mlp_ratio must be > 0");
    if (tokens < 1) throw ConfigError("token count must be >= 1");
  }

  int head_dim() const { return dim / heads; }
  int mlp_hidden() const {
    return static_cast<int>(std::lround(mlp_ratio * dim));
  }
};

/// One pre-norm transformer block: x + MHSA(LN(x)), then x + MLP(LN(x)).
template <class T>
struct ViTBlock {
  nn::LayerNorm<T> ln1, ln2;
  nn::Linear<T> wq, wk, wv, wo;
  nn::Linear<T> mlp_in, mlp_out;
};

template <class T>
struct ViTParams {
  ViTConfig cfg;
  std::vector<ViTBlock<T>> blocks;
  nn::LayerNorm<T> ln_final;
};

template <class T>
ViTParams<T> init_vit(const ViTConfig& cfg, Rng& rng) {
  cfg.validate();
  ViTParams<T> p;
  p.cfg = cfg;
  p.blocks.resize(cfg.depth);
  for (auto& b : p.blocks) {
    b.ln1.init(cfg.dim);
    b.ln2.init(cfg.dim);
    b.wq.init(cfg.dim, cfg.dim, rng);
    b.wk.init(cfg.dim, cfg.dim, rng);
    b.wv.init(cfg.dim, cfg.dim, rng);
    b.wo.init(cfg.dim, cfg.dim, rng);
    b.mlp_in.init(cfg.dim, cfg.mlp_hidden(), rng);
    b.mlp_out.init(cfg.mlp_hidden(), cfg.dim, rng);
  }
  p.ln_final.init(cfg.dim);
  return p;
}

template <class T>
ViTParams<T> init_vit(const ViTConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  return init_vit<T>(cfg, rng);
}

template <class T>
struct ViTBlockCache {
  Mat<T> x_in, h1, q, k, v, ctx, x_mid, h2, m_pre, m_act;
  typename nn::LayerNorm<T>::Cache ln1, ln2;
  std::vector<Mat<T>> attn_probs;  // one (n x n) matrix per head
};

template <class T>
struct ViTCache {
  std::vector<ViTBlockCache<T>> blocks;
  Mat<T> final_in;
  typename nn::LayerNorm<T>::Cache ln_final;
  Mat<T> seq_out;  // final-LN output, row 0 is the representation
};

namespace detail {

template <class T>
Mat<T> vit_block_forward(const ViTBlock<T>& b, const ViTConfig& cfg,
                         const Mat<T>& x, ViTBlockCache<T>& cache) {
  const int dh = cfg.head_dim();
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  cache.x_in = x;
  cache.h1 = b.ln1.forward(x, cache.ln1);
  cache.q = b.wq.forward(cache.h1);
  cache.k = b.wk.forward(cache.h1);
  cache.v = b.wv.forward(cache.h1);
  cache.ctx.resize(x.rows(), cfg.dim);
  cache.attn_probs.assign(cfg.heads, Mat<T>());
  for (int h = 0; h < cfg.heads; ++h) {
    const auto qh = cache.q.middleCols(h * dh, dh);
    const auto kh = cache.k.middleCols(h * dh, dh);
    const auto vh = cache.v.middleCols(h * dh, dh);
    Mat<T> scores = qh * kh.transpose() * scale;
    cache.attn_probs[h] = nn::softmax_rows(scores);
    cache.ctx.middleCols(h * dh, dh) = cache.attn_probs[h] * vh;
  }
  Mat<T> attn_out = b.wo.forward(cache.ctx);
  cache.x_mid = x + attn_out;
  cache.h2 = b.ln2.forward(cache.x_mid, cache.ln2);
  cache.m_pre = b.mlp_in.forward(cache.h2);
  cache.m_act = nn::gelu(cache.m_pre);
  return cache.x_mid + b.mlp_out.forward(cache.m_act);
}

/// Mirrors vit_block_forward; grads accumulate into the congruent block g.
template <class T>
Mat<T> vit_block_backward(const ViTBlock<T>& b, ViTBlock<T>& g,
                          const ViTConfig& cfg, const ViTBlockCache<T>& cache,
                          const Mat<T>& grad_out) {
  const int dh = cfg.head_dim();
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));

  Mat<T> grad_x_mid = grad_out;
  Mat<T> grad_m_act = b.mlp_out.backward(cache.m_act, grad_out,
                                         g.mlp_out.weight, g.mlp_out.bias);
  Mat<T> grad_m_pre = nn::gelu_backward(cache.m_pre, grad_m_act);
  Mat<T> grad_h2 = b.mlp_in.backward(cache.h2, grad_m_pre, g.mlp_in.weight,
                                     g.mlp_in.bias);
  grad_x_mid += b.ln2.backward(grad_h2, cache.ln2, g.ln2.gain, g.ln2.bias);

  Mat<T> grad_x = grad_x_mid;  // residual into the block input
  Mat<T> grad_ctx =
      b.wo.backward(cache.ctx, grad_x_mid, g.wo.weight, g.wo.bias);

  Mat<T> grad_q = Mat<T>::Zero(cache.q.rows(), cache.q.cols());
  Mat<T> grad_k = Mat<T>::Zero(cache.k.rows(), cache.k.cols());
  Mat<T> grad_v = Mat<T>::Zero(cache.v.rows(), cache.v.cols());
  for (int h = 0; h < cfg.heads; ++h) {
    const auto probs = cache.attn_probs[h];
    const auto vh = cache.v.middleCols(h * dh, dh);
    const auto qh = cache.q.middleCols(h * dh, dh);
    const auto kh = cache.k.middleCols(h * dh, dh);
    const Mat<T> grad_ctx_h = grad_ctx.middleCols(h * dh, dh);
    Mat<T> grad_probs = grad_ctx_h * vh.transpose();
    grad_v.middleCols(h * dh, dh) = probs.transpose() * grad_ctx_h;
    Mat<T> grad_scores = nn::softmax_rows_backward(probs, grad_probs);
    grad_q.middleCols(h * dh, dh) = grad_scores * kh * scale;
    grad_k.middleCols(h * dh, dh) = grad_scores.transpose() * qh * scale;
  }
  Mat<T> grad_h1 = b.wq.backward(cache.h1, grad_q, g.wq.weight, g.wq.bias);
  grad_h1 += b.wk.backward(cache.h1, grad_k, g.wk.weight, g.wk.bias);
  grad_h1 += b.wv.backward(cache.h1, grad_v, g.wv.weight, g.wv.bias);
  grad_x += b.ln1.backward(grad_h1, cache.ln1, g.ln1.gain, g.ln1.bias);
  return grad_x;
}

}  // namespace detail

/// Runs the encoder on an (N+1) x D sequence; the representation is the
/// class-token row of the final layer norm output.
template <class T>
Mat<T> vit_forward(const Mat<T>& seq, const ViTParams<T>& params,
                   ViTCache<T>& cache) {
  if (seq.cols() != params.cfg.dim)
    throw ShapeError("vit: sequence width does not match model dim");
  cache.blocks.resize(params.blocks.size());
  Mat<T> x = seq;
  for (std::size_t i = 0; i < params.blocks.size(); ++i)
    x = detail::vit_block_forward(params.blocks[i], params.cfg, x,
                                  cache.blocks[i]);
  cache.final_in = std::move(x);
  cache.seq_out =
      params.ln_final.forward(cache.final_in, cache.ln_final);
  return cache.seq_out.row(0);
}

/// Backward from a gradient on the representation row; returns the gradient
/// wrt the input sequence. `grads` must be structurally congruent to params
/// (zero-initialized clone); accumulation is in-place.
template <class T>
Mat<T> vit_backward(const Mat<T>& grad_rep, const ViTParams<T>& params,
                    const ViTCache<T>& cache, ViTParams<T>& grads) {
  Mat<T> grad_final =
      Mat<T>::Zero(cache.seq_out.rows(), cache.seq_out.cols());
  grad_final.row(0) = grad_rep.row(0);
  Mat<T> grad = params.ln_final.backward(
      grad_final, cache.ln_final, grads.ln_final.gain, grads.ln_final.bias);
  for (std::size_t i = params.blocks.size(); i-- > 0;)
    grad = detail::vit_block_backward(params.blocks[i], grads.blocks[i],
                                      params.cfg, cache.blocks[i], grad);
  return grad;
}

/// Closed-form parameter count; kept next to init so the two stay in sync.
inline std::int64_t vit_param_count(const ViTConfig& cfg) {
  const std::int64_t d = cfg.dim;
  const std::int64_t dh = cfg.mlp_hidden();
  const std::int64_t per_block = 4 * (d * d + d)      // q, k, v, o
                                 + 4 * d              // two layer norms
                                 + d * dh + dh        // mlp in
                                 + dh * d + d;        // mlp out
  return cfg.depth * per_block + 2 * d;               // final layer norm
}

}  // namespace bolt
