// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <numbers>

#include "bolt/core/error.hpp"
#include "bolt/core/matrix.hpp"
#include "bolt/core/rng.hpp"

namespace bolt::nn {

inline constexpr double kLayerNormEps = 1e-6;

template <class T>
struct Linear {
  Mat<T> weight;  // in x out
  Mat<T> bias;    // 1 x out

  void init(int in, int out, Rng& rng) {
    weight.resize(in, out);
    for (Index i = 0; i < weight.rows(); ++i)
      for (Index j = 0; j < weight.cols(); ++j)
        weight(i, j) = static_cast<T>(rng.trunc_normal(0.02));
    bias = Mat<T>::Zero(1, out);
  }

  Mat<T> forward(const Mat<T>& x) const {
    if (x.cols() != weight.rows())
      throw ShapeError("linear: input width does not match weight rows");
    Mat<T> y = x * weight;
    y.rowwise() += bias.row(0);
    return y;
  }

  /// Accumulates parameter grads, returns grad wrt input.
  Mat<T> backward(const Mat<T>& x, const Mat<T>& grad_y, Mat<T>& grad_weight,
                  Mat<T>& grad_bias) const {
    grad_weight.noalias() += x.transpose() * grad_y;
    grad_bias.row(0) += grad_y.colwise().sum();
    return grad_y * weight.transpose();
  }
};

template <class T>
struct LayerNorm {
  Mat<T> gain;  // 1 x D
  Mat<T> bias;  // 1 x D

  void init(int dim) {
    gain = Mat<T>::Ones(1, dim);
    bias = Mat<T>::Zero(1, dim);
  }

  struct Cache {
    Mat<T> normalized;   // x-hat, rows mean 0 / var 1
    Mat<T> inv_std;      // per-row 1/sqrt(var + eps), column vector as n x 1
  };

  Mat<T> forward(const Mat<T>& x, Cache& cache) const {
    const Index n = x.rows(), d = x.cols();
    cache.normalized.resize(n, d);
    cache.inv_std.resize(n, 1);
    Mat<T> y(n, d);
    for (Index r = 0; r < n; ++r) {
      const T mean = x.row(r).mean();
      const T var = (x.row(r).array() - mean).square().sum() / static_cast<T>(d);
      const T inv = T(1) / std::sqrt(var + static_cast<T>(kLayerNormEps));
      cache.inv_std(r, 0) = inv;
      cache.normalized.row(r) = (x.row(r).array() - mean) * inv;
      y.row(r) = cache.normalized.row(r).cwiseProduct(gain.row(0)) + bias.row(0);
    }
    return y;
  }

  Mat<T> backward(const Mat<T>& grad_y, const Cache& cache, Mat<T>& grad_gain,
                  Mat<T>& grad_bias) const {
    const Index n = grad_y.rows(), d = grad_y.cols();
    Mat<T> grad_x(n, d);
    for (Index r = 0; r < n; ++r) {
      grad_gain.row(0) += grad_y.row(r).cwiseProduct(cache.normalized.row(r));
      grad_bias.row(0) += grad_y.row(r);
      const Mat<T> gh = grad_y.row(r).cwiseProduct(gain.row(0));
      const T mean_gh = gh.mean();
      const T mean_gh_xhat = gh.cwiseProduct(cache.normalized.row(r)).mean();
      grad_x.row(r) = ((gh.array() - mean_gh -
                        cache.normalized.row(r).array() * mean_gh_xhat) *
                       cache.inv_std(r, 0))
                          .matrix();
    }
    return grad_x;
  }
};

/// Exact (erf-based) GELU.
template <class T>
T gelu(T x) {
  return T(0.5) * x * (T(1) + std::erf(x / std::sqrt(T(2))));
}

template <class T>
T gelu_grad(T x) {
  const T cdf = T(0.5) * (T(1) + std::erf(x / std::sqrt(T(2))));
  const T pdf = std::exp(-x * x / T(2)) /
                std::sqrt(T(2) * static_cast<T>(std::numbers::pi));
  return cdf + x * pdf;
}

template <class T>
Mat<T> gelu(const Mat<T>& x) {
  return x.unaryExpr([](T v) { return gelu(v); });
}

template <class T>
Mat<T> gelu_backward(const Mat<T>& x, const Mat<T>& grad_y) {
  return grad_y.cwiseProduct(x.unaryExpr([](T v) { return gelu_grad(v); }));
}

/// Row-wise softmax with max subtraction.
template <class T>
Mat<T> softmax_rows(const Mat<T>& x) {
  Mat<T> y(x.rows(), x.cols());
  for (Index r = 0; r < x.rows(); ++r) {
    const T m = x.row(r).maxCoeff();
    y.row(r) = (x.row(r).array() - m).exp();
    y.row(r) /= y.row(r).sum();
  }
  return y;
}

/// Given probs = softmax_rows(x) and grad wrt probs, returns grad wrt x.
template <class T>
Mat<T> softmax_rows_backward(const Mat<T>& probs, const Mat<T>& grad_probs) {
  Mat<T> grad_x(probs.rows(), probs.cols());
  for (Index r = 0; r < probs.rows(); ++r) {
    const T dot = probs.row(r).cwiseProduct(grad_probs.row(r)).sum();
    grad_x.row(r) =
        (probs.row(r).array() * (grad_probs.row(r).array() - dot)).matrix();
  }
  return grad_x;
}

template <class T>
T sigmoid(T x) {
  return x >= T(0) ? T(1) / (T(1) + std::exp(-x))
                   : std::exp(x) / (T(1) + std::exp(x));
}

}  // namespace bolt::nn
