// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "bolt/core/error.hpp"
#include "bolt/core/matrix.hpp"
#include "bolt/core/rng.hpp"

namespace bolt {

/// Bijection on token slots, stored as an index array:
/// permuted row i holds original row map[i].
struct Permutation {
  std::vector<int> map;

  int size() const { return static_cast<int>(map.size()); }

  bool is_identity() const {
    for (int i = 0; i < size(); ++i)
      if (map[i] != i) return false;
    return true;
  }

  void validate() const {
    std::vector<int> sorted = map;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < size(); ++i)
      if (sorted[i] != i) throw ConfigError("permutation is not a bijection");
  }

  static Permutation identity(int n) {
    Permutation p;
    p.map.resize(n);
    std::iota(p.map.begin(), p.map.end(), 0);
    return p;
  }
};

inline Permutation sample_permutation(int n, Rng& rng) {
  if (n < 1) throw ConfigError("permutation length must be >= 1");
  Permutation p = Permutation::identity(n);
  rng.shuffle(p.map);
  return p;
}

/// Window geometry of the perturbation module: windows of window_len (M)
/// tokens at stride (S), giving num_windows (K) = N / S long tokens.
struct PerturbConfig {
  int window_len = 1;   // M: tokens concatenated per window
  int stride = 1;       // S: window stride (= W/P for image inputs)
  int num_windows = 1;  // K = N / S

  int tokens() const { return num_windows * stride; }

  static PerturbConfig make(int n, int window_len, int stride) {
    if (stride < 1 || window_len < 1)
      throw ConfigError("perturb window/stride must be >= 1");
    if (n % stride != 0)
      throw ConfigError("stride must divide token count (" +
                        std::to_string(stride) + " vs " + std::to_string(n) +
                        ")");
    return PerturbConfig{window_len, stride, n / stride};
  }
};

/// Trainable fusion projection E_fuse of shape (M*D) x (S*D).
template <class T>
struct FuseParams {
  Mat<T> weight;

  static FuseParams identity(const PerturbConfig& cfg, int dim) {
    // Requires M == S; fuse(window) == window, so the module degenerates to
    // a pure permutation.
    if (cfg.window_len != cfg.stride)
      throw ConfigError("identity fuse weights need window_len == stride");
    FuseParams p;
    p.weight = Mat<T>::Identity(cfg.window_len * dim, cfg.stride * dim);
    return p;
  }
};

/// Default init: block-diagonal identity (output slot s copies window slot s)
/// plus truncated-normal noise, so freshly initialised views keep most token
/// content while already mixing window mates.
template <class T>
FuseParams<T> init_fuse(const PerturbConfig& cfg, int dim, Rng& rng) {
  FuseParams<T> p;
  p.weight.resize(cfg.window_len * dim, cfg.stride * dim);
  for (Index i = 0; i < p.weight.rows(); ++i)
    for (Index j = 0; j < p.weight.cols(); ++j)
      p.weight(i, j) = static_cast<T>(rng.trunc_normal(0.02));
  for (int s = 0; s < std::min(cfg.window_len, cfg.stride); ++s)
    for (int d = 0; d < dim; ++d) p.weight(s * dim + d, s * dim + d) += T(1);
  return p;
}

/// output row i = input row perm[i]
template <class T>
Mat<T> permute(const Mat<T>& tokens, const Permutation& perm) {
  if (perm.size() != tokens.rows())
    throw ShapeError("permutation length does not match token count");
  Mat<T> out(tokens.rows(), tokens.cols());
  for (int i = 0; i < perm.size(); ++i) out.row(i) = tokens.row(perm.map[i]);
  return out;
}

/// Window k concatenates rows kS, kS+1, ..., kS+M-1 (mod N).
/// Windows wrap circularly when M > S so every token is used equally often.
template <class T>
Mat<T> window_concat(const Mat<T>& tokens, const PerturbConfig& cfg) {
  const int n = static_cast<int>(tokens.rows());
  if (cfg.tokens() != n)
    throw ShapeError("perturb config does not match token count");
  const int d = static_cast<int>(tokens.cols());
  Mat<T> out(cfg.num_windows, cfg.window_len * d);
  for (int k = 0; k < cfg.num_windows; ++k)
    for (int m = 0; m < cfg.window_len; ++m)
      out.block(k, m * d, 1, d) = tokens.row((k * cfg.stride + m) % n);
  return out;
}

/// Long-token fusion: windows * E_fuse.
template <class T>
Mat<T> fuse(const Mat<T>& windows, const FuseParams<T>& params) {
  if (windows.cols() != params.weight.rows())
    throw ShapeError("fuse: window width " + std::to_string(windows.cols()) +
                     " does not match weight rows " +
                     std::to_string(params.weight.rows()));
  return windows * params.weight;
}

/// Slices each long token into S contiguous D-length tokens; long token k
/// yields output rows kS .. kS+S-1.
template <class T>
Mat<T> split(const Mat<T>& long_tokens, const PerturbConfig& cfg, int dim) {
  if (long_tokens.cols() != cfg.stride * dim)
    throw ShapeError("split: column count not divisible into D-length tokens");
  Mat<T> out(cfg.num_windows * cfg.stride, dim);
  for (int k = 0; k < cfg.num_windows; ++k)
    for (int s = 0; s < cfg.stride; ++s)
      out.row(k * cfg.stride + s) = long_tokens.block(k, s * dim, 1, dim);
  return out;
}

/// Perturbed tokens plus the permutation record needed for inverse
/// permutation and difficulty scoring.
template <class T>
struct PerturbedView {
  Mat<T> tokens;
  Permutation perm;
  T difficulty_score = T(0);  // MSE vs originals after inverse permutation
};

/// Mean squared error over all entries.
template <class T>
T mse(const Mat<T>& a, const Mat<T>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError("mse: shape mismatch");
  return (a - b).squaredNorm() / static_cast<T>(a.size());
}

/// Rearranges perturbed tokens back to the original order. Split-token slot i
/// inherits the identity of permuted slot i, so output row perm[i] is view
/// row i even after fusion has mixed content.
template <class T>
Mat<T> inverse_permute(const PerturbedView<T>& view) {
  Mat<T> out(view.tokens.rows(), view.tokens.cols());
  for (int i = 0; i < view.perm.size(); ++i)
    out.row(view.perm.map[i]) = view.tokens.row(i);
  return out;
}

/// Intermediate activations kept for the backward pass.
template <class T>
struct PerturbCache {
  Mat<T> windows;  // K x (M*D)
};

template <class T>
Mat<T> perturb_forward(const Mat<T>& tokens, const Permutation& perm,
                       const PerturbConfig& cfg, const FuseParams<T>& params,
                       PerturbCache<T>* cache = nullptr) {
  const int dim = static_cast<int>(tokens.cols());
  Mat<T> windows = window_concat(permute(tokens, perm), cfg);
  Mat<T> out = split(fuse(windows, params), cfg, dim);
  if (cache) cache->windows = std::move(windows);
  return out;
}

/// Backward of perturb_forward: accumulates into grad_tokens / grad_fuse.
template <class T>
void perturb_backward(const Mat<T>& grad_view, const Permutation& perm,
                      const PerturbConfig& cfg, const FuseParams<T>& params,
                      const PerturbCache<T>& cache, Mat<T>& grad_tokens,
                      Mat<T>& grad_fuse) {
  const int n = static_cast<int>(grad_view.rows());
  const int dim = static_cast<int>(grad_view.cols());
  // split backward: reshape N x D -> K x (S*D)
  Mat<T> grad_long(cfg.num_windows, cfg.stride * dim);
  for (int k = 0; k < cfg.num_windows; ++k)
    for (int s = 0; s < cfg.stride; ++s)
      grad_long.block(k, s * dim, 1, dim) = grad_view.row(k * cfg.stride + s);
  // fuse backward
  grad_fuse.noalias() += cache.windows.transpose() * grad_long;
  Mat<T> grad_windows = grad_long * params.weight.transpose();
  // window_concat backward (scatter with wrap)
  Mat<T> grad_permuted = Mat<T>::Zero(n, dim);
  for (int k = 0; k < cfg.num_windows; ++k)
    for (int m = 0; m < cfg.window_len; ++m)
      grad_permuted.row((k * cfg.stride + m) % n) +=
          grad_windows.block(k, m * dim, 1, dim);
  // permute backward (scatter)
  for (int i = 0; i < n; ++i)
    grad_tokens.row(perm.map[i]) += grad_permuted.row(i);
}

/// Full module: permutation -> windowed fusion -> split, plus the cached
/// difficulty score mse(inverse_permute(view), originals).
template <class T>
PerturbedView<T> perturb_view(const Mat<T>& tokens, const PerturbConfig& cfg,
                              const FuseParams<T>& params, Rng& rng,
                              PerturbCache<T>* cache = nullptr) {
  PerturbedView<T> view;
  view.perm = sample_permutation(static_cast<int>(tokens.rows()), rng);
  view.tokens = perturb_forward(tokens, view.perm, cfg, params, cache);
  view.difficulty_score = mse(inverse_permute(view), tokens);
  return view;
}

/// Difficulty self-supervision: 0 when the online view is closer to the
/// originals (less perturbed), 1 otherwise; ties map to 1.
template <class T>
int difficulty_label(const PerturbedView<T>& online_view,
                     const PerturbedView<T>& target_view) {
  return online_view.difficulty_score < target_view.difficulty_score ? 0 : 1;
}

}  // namespace bolt
