// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <json.hpp>

#include "bolt/perturb.hpp"

namespace bolt {

/// Serializable perturbation record: permutation index array plus the
/// window geometry, as consumed by the inspect-perturb command.
template <class T>
nlohmann::json perturb_record_json(const PerturbedView<T>& view,
                                   const PerturbConfig& cfg) {
  return nlohmann::json{
      {"permutation", view.perm.map},
      {"difficulty_score", static_cast<double>(view.difficulty_score)},
      {"window_len", cfg.window_len},
      {"stride", cfg.stride},
      {"num_windows", cfg.num_windows},
      {"tokens", cfg.tokens()},
  };
}

}  // namespace bolt
