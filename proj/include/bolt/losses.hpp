// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>

#include "bolt/core/error.hpp"
#include "bolt/core/matrix.hpp"

namespace bolt {

/// Regression loss between the online prediction and the (detached) target
/// projection. In the normalized form both vectors are scaled to unit length
/// first, so the value is 2 - 2 cos(q, t) and lies in [0, 4]. The
/// unnormalized form is the plain squared distance.
template <class T>
T similarity_loss(const Mat<T>& prediction, const Mat<T>& target_detached,
                  bool normalize = true) {
  if (prediction.size() != target_detached.size())
    throw ShapeError("similarity_loss: length mismatch");
  if (!normalize)
    return (prediction - target_detached).squaredNorm();
  const T qn = prediction.norm();
  const T tn = target_detached.norm();
  if (qn == T(0) || tn == T(0))
    throw NumericError("similarity_loss: zero-norm input");
  const T cos = (prediction.cwiseProduct(target_detached)).sum() / (qn * tn);
  return T(2) - T(2) * cos;
}

/// Gradient of similarity_loss wrt the prediction (target is stop-gradient).
template <class T>
Mat<T> similarity_loss_grad(const Mat<T>& prediction,
                            const Mat<T>& target_detached,
                            bool normalize = true) {
  if (!normalize) return T(2) * (prediction - target_detached);
  const T qn = prediction.norm();
  const T tn = target_detached.norm();
  if (qn == T(0) || tn == T(0))
    throw NumericError("similarity_loss: zero-norm input");
  const Mat<T> u = prediction / qn;
  const Mat<T> v = target_detached / tn;
  const T uv = (u.cwiseProduct(v)).sum();
  return (T(-2) / qn) * (v - uv * u);
}

/// Binary cross-entropy on a probability; p is clamped to [eps, 1-eps] so
/// saturated heads cannot produce log(0).
template <class T>
T binary_cross_entropy(T p, int label) {
  constexpr T eps = T(1e-7);
  const T pc = std::clamp(p, eps, T(1) - eps);
  return label == 1 ? -std::log(pc) : -std::log(T(1) - pc);
}

/// Overall objective: similarity loss plus alpha-weighted difficulty loss.
/// alpha = 0 is the no-difficulty ablation path.
template <class T>
T total_loss(T loss_bolt, T loss_diff, T alpha) {
  return loss_bolt + alpha * loss_diff;
}

}  // namespace bolt
