// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <numeric>
#include <vector>

#include "bolt/core/error.hpp"
#include "bolt/data/dataset.hpp"
#include "bolt/eval/classifier.hpp"
#include "bolt/eval/metrics.hpp"
#include "bolt/optim.hpp"

namespace bolt::eval {

struct FinetuneConfig {
  int epochs = 30;
  int batch = 16;
  double lr = 1e-3;
  double weight_decay = 1e-4;
  std::uint64_t order_seed = 17;
};

template <class T>
std::vector<int> predict(const ClassifierModel<T>& model,
                         const data::LabeledDataset& ds) {
  std::vector<int> out;
  out.reserve(ds.size());
  for (const auto& s : ds.samples) {
    const Mat<T> rep = representation(model, s);
    const Mat<T> logits = model.head.forward(rep);
    Index best = 0;
    logits.row(0).maxCoeff(&best);
    out.push_back(static_cast<int>(best));
  }
  return out;
}

template <class T>
EvalResult evaluate(const ClassifierModel<T>& model,
                    const data::LabeledDataset& test) {
  return evaluate_predictions(predict(model, test),
                              detail::dataset_labels(test), test.num_classes);
}

namespace detail {

/// One supervised minibatch: softmax cross-entropy through the full model.
template <class T>
double supervised_batch(ClassifierModel<T>& model, AdamW<T>& opt,
                        const std::vector<Mat<T>>& patches,
                        const std::vector<int>& labels,
                        const std::vector<std::size_t>& batch) {
  ClassifierModel<T> grads = model;
  for (auto& t : named_tensors(grads)) t.mat->setZero();

  const T weight = T(1) / static_cast<T>(batch.size());
  double loss = 0.0;
  for (const std::size_t idx : batch) {
    BackboneCache<T> cache;
    const Mat<T> rep = backbone_rep(patches[idx], model, cache);
    Mat<T> logits = model.head.forward(rep);
    Mat<T> probs = nn::softmax_rows(logits);
    loss += -std::log(std::max(
        static_cast<double>(probs(0, labels[idx])), 1e-12));
    Mat<T> grad_logits = probs;
    grad_logits(0, labels[idx]) -= T(1);
    grad_logits *= weight;
    Mat<T> grad_rep = model.head.backward(rep, grad_logits,
                                          grads.head.weight, grads.head.bias);
    Mat<T> grad_seq =
        vit_backward(grad_rep, model.encoder, cache.vit, grads.encoder);
    Mat<T> grad_tokens;
    attach_backward(grad_seq, grad_tokens, grads.embed.pos,
                    grads.embed.class_tok);
    embed_backward(cache.patches, grad_tokens, grads.embed.proj);
  }
  auto params = named_tensors(model);
  auto grad_tensors = named_tensors(grads);
  opt.step(params, grad_tensors);
  return loss / static_cast<double>(batch.size());
}

}  // namespace detail

struct FinetuneTrace {
  double best_val_acc = 0.0;
  double final_val_acc = 0.0;
};

/// Trains all parameters (encoder + embeddings + head) with AdamW and
/// returns the epoch snapshot with the best validation accuracy.
template <class T>
ClassifierModel<T> finetune(ClassifierModel<T> model,
                            const data::LabeledDataset& train,
                            const data::LabeledDataset& val,
                            const FinetuneConfig& cfg = {},
                            FinetuneTrace* trace = nullptr) {
  if (train.size() == 0 || val.size() == 0)
    throw ConfigError("finetune: empty split");

  std::vector<Mat<T>> patches;
  patches.reserve(train.size());
  for (const auto& s : train.samples)
    patches.push_back(patchify<T>(s, model.cfg.patch));
  const auto labels = detail::dataset_labels(train);

  AdamW<T> opt;
  opt.lr = static_cast<T>(cfg.lr);
  opt.weight_decay = static_cast<T>(cfg.weight_decay);

  ClassifierModel<T> best = model;
  double best_val_acc = cfg.epochs > 0 ? evaluate(model, val).acc : 0.0;

  Rng order_rng(cfg.order_seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  double final_val_acc = best_val_acc;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    order_rng.shuffle(order);
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch)) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(cfg.batch));
      const std::vector<std::size_t> batch(order.begin() + start,
                                           order.begin() + end);
      detail::supervised_batch(model, opt, patches, labels, batch);
    }
    final_val_acc = evaluate(model, val).acc;
    if (final_val_acc > best_val_acc) {
      best_val_acc = final_val_acc;
      best = model;
    }
  }
  if (trace) *trace = FinetuneTrace{best_val_acc, final_val_acc};
  return best;
}

}  // namespace bolt::eval
