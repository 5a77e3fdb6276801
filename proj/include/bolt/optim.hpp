// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "bolt/core/error.hpp"
#include "bolt/core/matrix.hpp"
#include "bolt/model.hpp"

namespace bolt {

/// Adam with decoupled weight decay.
template <class T>
struct AdamW {
  T lr = T(1e-3);
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T eps = T(1e-8);
  T weight_decay = T(1e-4);

  std::int64_t t = 0;
  std::vector<Mat<T>> m, v;  // aligned with the tensor registry order

  void ensure_state(const std::vector<NamedTensor<T>>& params) {
    if (!m.empty()) return;
    for (const auto& p : params) {
      m.push_back(zeros_like(*p.mat));
      v.push_back(zeros_like(*p.mat));
    }
  }

  void step(const std::vector<NamedTensor<T>>& params,
            const std::vector<NamedTensor<T>>& grads) {
    if (params.size() != grads.size())
      throw ShapeError("adamw: parameter/gradient count mismatch");
    ensure_state(params);
    ++t;
    const T bc1 = T(1) - std::pow(beta1, static_cast<T>(t));
    const T bc2 = T(1) - std::pow(beta2, static_cast<T>(t));
    for (std::size_t i = 0; i < params.size(); ++i) {
      Mat<T>& w = *params[i].mat;
      const Mat<T>& g = *grads[i].mat;
      m[i] = beta1 * m[i] + (T(1) - beta1) * g;
      v[i] = beta2 * v[i] + (T(1) - beta2) * g.cwiseProduct(g);
      const Mat<T> m_hat = m[i] / bc1;
      const Mat<T> v_hat = v[i] / bc2;
      w.array() -= lr * (m_hat.array() / (v_hat.array().sqrt() + eps) +
                         weight_decay * w.array());
    }
  }
};

}  // namespace bolt
