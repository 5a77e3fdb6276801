// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "bolt/core/error.hpp"
#include "bolt/data/dataset.hpp"
#include "bolt/eval/classifier.hpp"
#include "bolt/eval/metrics.hpp"

namespace bolt::eval {

struct ProbeConfig {
  int epochs = 200;   // full-batch gradient descent budget
  double lr = 0.5;
};

namespace detail {

/// Multinomial logistic regression on fixed features via full-batch GD.
/// Weights start at zero, so the fit is convex and fully deterministic.
template <class T>
struct LinearFit {
  Mat<T> weight;  // D x C
  Mat<T> bias;    // 1 x C
  Mat<T> mean, inv_std;  // feature standardization, 1 x D each
};

template <class T>
LinearFit<T> fit_linear_head(const Mat<T>& features,
                             const std::vector<int>& labels, int num_classes,
                             const ProbeConfig& cfg) {
  const Index n = features.rows(), d = features.cols();
  LinearFit<T> fit;
  fit.mean = features.colwise().mean();
  Mat<T> centered = features.rowwise() - fit.mean.row(0);
  fit.inv_std.resize(1, d);
  for (Index j = 0; j < d; ++j) {
    const T sd = std::sqrt(centered.col(j).squaredNorm() /
                           static_cast<T>(n));
    fit.inv_std(0, j) = T(1) / std::max(sd, T(1e-6));
  }
  Mat<T> x = centered.array().rowwise() * fit.inv_std.row(0).array();

  fit.weight = Mat<T>::Zero(d, num_classes);
  fit.bias = Mat<T>::Zero(1, num_classes);
  const T inv_n = T(1) / static_cast<T>(n);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Mat<T> logits = x * fit.weight;
    logits.rowwise() += fit.bias.row(0);
    Mat<T> probs = nn::softmax_rows(logits);
    for (Index i = 0; i < n; ++i) probs(i, labels[i]) -= T(1);
    probs *= inv_n;
    fit.weight -= static_cast<T>(cfg.lr) * (x.transpose() * probs);
    fit.bias -= static_cast<T>(cfg.lr) * probs.colwise().sum();
  }
  return fit;
}

template <class T>
std::vector<int> predict_linear(const LinearFit<T>& fit,
                                const Mat<T>& features) {
  Mat<T> x = (features.rowwise() - fit.mean.row(0)).array().rowwise() *
             fit.inv_std.row(0).array();
  Mat<T> logits = x * fit.weight;
  logits.rowwise() += fit.bias.row(0);
  std::vector<int> pred(static_cast<std::size_t>(logits.rows()));
  for (Index i = 0; i < logits.rows(); ++i) {
    Index best = 0;
    logits.row(i).maxCoeff(&best);
    pred[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return pred;
}

}  // namespace detail

/// Trains a linear classifier on frozen class-token representations and
/// evaluates it. No gradient ever reaches the encoder.
template <class T>
EvalResult linear_probe(const ClassifierModel<T>& model,
                        const data::LabeledDataset& train,
                        const data::LabeledDataset& test,
                        std::uint64_t /*seed*/,
                        const ProbeConfig& cfg = {}) {
  const auto train_labels = detail::dataset_labels(train);
  std::vector<int> seen(train.num_classes, 0);
  for (const int l : train_labels) {
    if (l < 0 || l >= train.num_classes)
      throw ConfigError("probe: unlabeled sample in train set");
    seen[l] = 1;
  }
  for (int c = 0; c < train.num_classes; ++c)
    if (!seen[c])
      throw ConfigError("probe: class " + std::to_string(c) +
                        " absent from train set");

  const Mat<T> train_features = representations(model, train);
  const Mat<T> test_features = representations(model, test);
  const auto fit = detail::fit_linear_head(train_features, train_labels,
                                           train.num_classes, cfg);
  const auto predictions = detail::predict_linear(fit, test_features);
  return evaluate_predictions(predictions, detail::dataset_labels(test),
                              test.num_classes);
}

}  // namespace bolt::eval
