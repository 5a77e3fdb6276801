// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <numbers>
#include <string>

#include "bolt/core/error.hpp"
#include "bolt/model.hpp"

namespace bolt {

enum class TauSchedule { Constant, CosineToOne };

struct EmaConfig {
  double tau_base = 0.996;
  TauSchedule schedule = TauSchedule::CosineToOne;
  std::int64_t total_steps = 1;

  /// Decay rate at a given step. The cosine schedule anneals tau from
  /// tau_base to 1 over total_steps.
  double tau_at(std::int64_t step) const {
    if (tau_base < 0.0 || tau_base > 1.0)
      throw ConfigError("tau must lie in [0, 1]");
    if (schedule == TauSchedule::Constant) return tau_base;
    const double progress =
        std::min(1.0, static_cast<double>(step) /
                          static_cast<double>(std::max<std::int64_t>(
                              1, total_steps)));
    return 1.0 - (1.0 - tau_base) *
                     (std::cos(std::numbers::pi * progress) + 1.0) / 2.0;
  }
};

/// target <- tau * target + (1 - tau) * online, over the shared subset
/// (embed, fuse, encoder, projector). Online tensors are untouched.
template <class T>
void ema_update(OnlineBranch<T>& online, TargetBranch<T>& target, T tau) {
  if (tau < T(0) || tau > T(1)) throw ConfigError("tau must lie in [0, 1]");
  auto target_tensors = named_tensors(target);
  auto online_tensors = named_tensors(online);
  if (online_tensors.size() < target_tensors.size())
    throw ShapeError("ema: online branch is missing shared tensors");
  for (std::size_t i = 0; i < target_tensors.size(); ++i) {
    // Shared tensors lead both registries in the same structural order.
    if (target_tensors[i].name != online_tensors[i].name)
      throw ShapeError("ema: tensor order mismatch at " +
                       target_tensors[i].name);
    Mat<T>& t = *target_tensors[i].mat;
    const Mat<T>& o = *online_tensors[i].mat;
    if (t.rows() != o.rows() || t.cols() != o.cols())
      throw ShapeError("ema: shape mismatch for tensor " +
                       target_tensors[i].name);
    t = tau * t + (T(1) - tau) * o;
  }
}

}  // namespace bolt
