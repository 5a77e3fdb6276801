// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "bolt/core/matrix.hpp"
#include "bolt/core/rng.hpp"
#include "bolt/nn.hpp"

namespace bolt {

/// Two-layer MLP used for both the projector (D -> hidden -> projDim) and
/// the predictor (projDim -> hidden -> projDim):
/// linear -> layer norm -> GELU -> linear.
template <class T>
struct MlpHead {
  nn::Linear<T> in_layer;
  nn::LayerNorm<T> norm;
  nn::Linear<T> out_layer;

  void init(int in, int hidden, int out, Rng& rng) {
    in_layer.init(in, hidden, rng);
    norm.init(hidden);
    out_layer.init(hidden, out, rng);
  }

  struct Cache {
    Mat<T> x, pre, normed, act;
    typename nn::LayerNorm<T>::Cache ln;
  };

  Mat<T> forward(const Mat<T>& x, Cache& cache) const {
    cache.x = x;
    cache.pre = in_layer.forward(x);
    cache.normed = norm.forward(cache.pre, cache.ln);
    cache.act = nn::gelu(cache.normed);
    return out_layer.forward(cache.act);
  }

  Mat<T> forward(const Mat<T>& x) const {
    Cache scratch;
    return forward(x, scratch);
  }

  Mat<T> backward(const Mat<T>& grad_y, const Cache& cache,
                  MlpHead<T>& grads) const {
    Mat<T> grad_act = out_layer.backward(cache.act, grad_y,
                                         grads.out_layer.weight,
                                         grads.out_layer.bias);
    Mat<T> grad_normed = nn::gelu_backward(cache.normed, grad_act);
    Mat<T> grad_pre = norm.backward(grad_normed, cache.ln, grads.norm.gain,
                                    grads.norm.bias);
    return in_layer.backward(cache.x, grad_pre, grads.in_layer.weight,
                             grads.in_layer.bias);
  }
};

/// Difficulty head: one fully-connected layer on cat(y_online, y_target)
/// followed by a sigmoid; p is the probability that the online branch got
/// the harder (more perturbed) view.
template <class T>
struct DifficultyHead {
  nn::Linear<T> fc;  // 2D x 1

  void init(int rep_dim, Rng& rng) { fc.init(2 * rep_dim, 1, rng); }

  /// Returns (logit, p).
  std::pair<T, T> forward(const Mat<T>& concat_reps) const {
    const Mat<T> s = fc.forward(concat_reps);
    return {s(0, 0), nn::sigmoid(s(0, 0))};
  }

  /// grad_logit is d(loss)/d(logit). Returns the gradient wrt the online
  /// representation only; the target half is stop-gradient by contract and
  /// its gradient is exactly zero.
  Mat<T> backward(const Mat<T>& concat_reps, T grad_logit,
                  DifficultyHead<T>& grads) const {
    Mat<T> grad_s(1, 1);
    grad_s(0, 0) = grad_logit;
    Mat<T> grad_concat =
        fc.backward(concat_reps, grad_s, grads.fc.weight, grads.fc.bias);
    const Index d = concat_reps.cols() / 2;
    return grad_concat.leftCols(d);
  }
};

}  // namespace bolt
