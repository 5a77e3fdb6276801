// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bolt/core/error.hpp"
#include "bolt/core/matrix.hpp"

namespace bolt::eval {

/// Classification metrics in percent, plus the raw confusion matrix
/// (rows = true class, cols = predicted class).
struct EvalResult {
  double acc = 0.0;
  double f1_macro = 0.0;
  std::vector<double> per_class_f1;
  Mat<std::int64_t> confusion;
};

/// Pure function of (predictions, labels). Macro-F1 is the unweighted mean
/// of per-class F1, with F1 = 0 when precision + recall is 0.
inline EvalResult evaluate_predictions(const std::vector<int>& predictions,
                                       const std::vector<int>& labels,
                                       int num_classes) {
  if (predictions.size() != labels.size())
    throw ShapeError("evaluate: prediction/label count mismatch");
  if (predictions.empty()) throw ConfigError("evaluate: empty test set");
  EvalResult r;
  r.confusion = Mat<std::int64_t>::Zero(num_classes, num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes ||
        predictions[i] < 0 || predictions[i] >= num_classes)
      throw ConfigError("evaluate: class index out of range");
    r.confusion(labels[i], predictions[i]) += 1;
  }
  std::int64_t correct = 0;
  for (int c = 0; c < num_classes; ++c) correct += r.confusion(c, c);
  r.acc = 100.0 * static_cast<double>(correct) /
          static_cast<double>(labels.size());

  r.per_class_f1.resize(num_classes, 0.0);
  double f1_sum = 0.0;
  for (int c = 0; c < num_classes; ++c) {
    const double tp = static_cast<double>(r.confusion(c, c));
    const double fn = static_cast<double>(r.confusion.row(c).sum()) - tp;
    const double fp = static_cast<double>(r.confusion.col(c).sum()) - tp;
    const double denom = 2.0 * tp + fp + fn;
    const double f1 = denom > 0.0 ? 100.0 * 2.0 * tp / denom : 0.0;
    r.per_class_f1[c] = f1;
    f1_sum += f1;
  }
  r.f1_macro = f1_sum / static_cast<double>(num_classes);
  return r;
}

inline double median(std::vector<double> values) {
  if (values.empty()) throw ConfigError("median of empty list");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2]
                    : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace bolt::eval
