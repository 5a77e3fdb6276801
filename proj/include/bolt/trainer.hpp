// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "bolt/core/error.hpp"
#include "bolt/core/matrix.hpp"
#include "bolt/core/rng.hpp"
#include "bolt/data/dataset.hpp"
#include "bolt/ema.hpp"
#include "bolt/losses.hpp"
#include "bolt/model.hpp"
#include "bolt/optim.hpp"

namespace bolt {

/// Plain (unperturbed) backbone forward: patches -> tokens -> sequence ->
/// representation. Used by the evaluation paths and the target branch.
template <class T>
struct BackboneCache {
  Mat<T> patches, tokens;
  ViTCache<T> vit;
};

template <class T, class Branch>
Mat<T> backbone_rep(const Mat<T>& patches, const Branch& branch,
                    BackboneCache<T>& cache) {
  cache.patches = patches;
  cache.tokens = embed(patches, branch.embed.proj);
  const Mat<T> seq = attach_position_and_class(cache.tokens, branch.embed);
  return vit_forward(seq, branch.encoder, cache.vit);
}

/// Per-image training context: the two sampled permutations plus everything
/// taken from the target side, which is stop-gradient by contract. Online
/// losses are a function of (online params, patches, this context); that is
/// what both the optimizer step and the finite-difference audits evaluate.
template <class T>
struct PairContext {
  Permutation perm_a, perm_b;
  Mat<T> target_proj_of_b, target_proj_of_a;  // projections z for each pass
  Mat<T> target_rep_of_b, target_rep_of_a;    // representations y for Diff
  int label_pass1 = 1;  // view A -> online, view B -> target
  int label_pass2 = 1;  // mirrored assignment
  T score_a = T(0), score_b = T(0);
};

namespace detail {

template <class T>
Mat<T> target_proj_of_view(const TargetBranch<T>& target, const Mat<T>& view,
                           Mat<T>& rep_out) {
  ViTCache<T> vit_cache;
  const Mat<T> seq = attach_position_and_class(view, target.embed);
  rep_out = vit_forward(seq, target.encoder, vit_cache);
  return target.projector.forward(rep_out);
}

}  // namespace detail

/// Builds the stop-gradient context for one image. The two views are
/// produced once from the online embed/fuse parameters and shared by both
/// branches; the target branch consumes them with its own EMA weights.
template <class T>
PairContext<T> make_pair_context(const Mat<T>& patches,
                                 const OnlineBranch<T>& online,
                                 const TargetBranch<T>& target,
                                 const Permutation& perm_a,
                                 const Permutation& perm_b) {
  const PerturbConfig pcfg = online.cfg.perturb();
  const Mat<T> tokens = embed(patches, online.embed.proj);

  PairContext<T> ctx;
  ctx.perm_a = perm_a;
  ctx.perm_b = perm_b;
  PerturbedView<T> view_a, view_b;
  view_a.perm = perm_a;
  view_a.tokens = perturb_forward(tokens, perm_a, pcfg, online.fuse);
  view_a.difficulty_score = mse(inverse_permute(view_a), tokens);
  view_b.perm = perm_b;
  view_b.tokens = perturb_forward(tokens, perm_b, pcfg, online.fuse);
  view_b.difficulty_score = mse(inverse_permute(view_b), tokens);
  ctx.score_a = view_a.difficulty_score;
  ctx.score_b = view_b.difficulty_score;
  ctx.label_pass1 = difficulty_label(view_a, view_b);
  ctx.label_pass2 = difficulty_label(view_b, view_a);

  ctx.target_proj_of_b =
      detail::target_proj_of_view(target, view_b.tokens, ctx.target_rep_of_b);
  ctx.target_proj_of_a =
      detail::target_proj_of_view(target, view_a.tokens, ctx.target_rep_of_a);
  return ctx;
}

template <class T>
struct ImageStats {
  T loss_bolt = T(0);
  T loss_diff = T(0);
  int diff_correct = 0;  // out of 2 passes
  Mat<T> proj_pass1, proj_pass2;
};

namespace detail {

template <class T>
struct OnlinePassCache {
  Permutation perm;
  Mat<T> view_tokens;
  PerturbCache<T> perturb;
  ViTCache<T> vit;
  typename MlpHead<T>::Cache proj, pred;
  Mat<T> rep, proj_out, pred_out, diff_in;
  T p = T(0), logit = T(0);
};

template <class T>
T online_pass_forward(const OnlineBranch<T>& online, const Mat<T>& tokens,
                      const Permutation& perm, const Mat<T>& target_proj,
                      const Mat<T>& target_rep, int label, bool normalize,
                      OnlinePassCache<T>& c, T& bce_out, int& correct_out) {
  const PerturbConfig pcfg = online.cfg.perturb();
  c.perm = perm;
  c.view_tokens = perturb_forward(tokens, perm, pcfg, online.fuse, &c.perturb);
  const Mat<T> seq = attach_position_and_class(c.view_tokens, online.embed);
  c.rep = vit_forward(seq, online.encoder, c.vit);
  c.proj_out = online.projector.forward(c.rep, c.proj);
  c.pred_out = online.predictor.forward(c.proj_out, c.pred);
  const T sim = similarity_loss(c.pred_out, target_proj, normalize);

  c.diff_in.resize(1, 2 * c.rep.cols());
  c.diff_in.leftCols(c.rep.cols()) = c.rep;
  c.diff_in.rightCols(c.rep.cols()) = target_rep;
  std::tie(c.logit, c.p) = online.diff_head.forward(c.diff_in);
  bce_out = binary_cross_entropy(c.p, label);
  correct_out = ((c.p >= T(0.5) ? 1 : 0) == label) ? 1 : 0;
  return sim;
}

template <class T>
void online_pass_backward(const OnlineBranch<T>& online,
                          const OnlinePassCache<T>& c,
                          const Mat<T>& target_proj, int label, bool normalize,
                          T sim_weight, T bce_weight, OnlineBranch<T>& grads,
                          Mat<T>& grad_tokens) {
  // similarity branch
  Mat<T> grad_pred =
      sim_weight * similarity_loss_grad(c.pred_out, target_proj, normalize);
  Mat<T> grad_proj = online.predictor.backward(grad_pred, c.pred,
                                               grads.predictor);
  Mat<T> grad_rep = online.projector.backward(grad_proj, c.proj,
                                              grads.projector);
  // difficulty branch; clamped BCE has zero slope in the saturated region
  constexpr T eps = T(1e-7);
  T grad_logit = T(0);
  if (c.p > eps && c.p < T(1) - eps)
    grad_logit = bce_weight * (c.p - static_cast<T>(label));
  grad_rep += online.diff_head.backward(c.diff_in, grad_logit,
                                        grads.diff_head);

  Mat<T> grad_seq = vit_backward(grad_rep, online.encoder, c.vit,
                                 grads.encoder);
  Mat<T> grad_view;
  attach_backward(grad_seq, grad_view, grads.embed.pos,
                  grads.embed.class_tok);
  perturb_backward(grad_view, c.perm, online.cfg.perturb(), online.fuse,
                   c.perturb, grad_tokens, grads.fuse.weight);
}

}  // namespace detail

/// Loss of one image as a function of the online parameters with the target
/// side pinned; used by the finite-difference gradient audits.
template <class T>
T bolt_image_loss(const Mat<T>& patches, const OnlineBranch<T>& online,
                  const PairContext<T>& ctx, T alpha, bool normalize) {
  const Mat<T> tokens = embed(patches, online.embed.proj);
  detail::OnlinePassCache<T> c1, c2;
  T bce1 = T(0), bce2 = T(0);
  int correct = 0;
  const T sim1 = detail::online_pass_forward(
      online, tokens, ctx.perm_a, ctx.target_proj_of_b, ctx.target_rep_of_b,
      ctx.label_pass1, normalize, c1, bce1, correct);
  const T sim2 = detail::online_pass_forward(
      online, tokens, ctx.perm_b, ctx.target_proj_of_a, ctx.target_rep_of_a,
      ctx.label_pass2, normalize, c2, bce2, correct);
  return total_loss(sim1 + sim2, (bce1 + bce2) / T(2), alpha);
}

/// Forward + backward for one image. Gradients accumulate into `grads`
/// scaled by `weight` (1/batch in training). Only online parameters receive
/// gradients; everything target-side enters through the pinned context.
template <class T>
ImageStats<T> bolt_image_backprop(const Mat<T>& patches,
                                  const OnlineBranch<T>& online,
                                  const PairContext<T>& ctx, T alpha,
                                  bool normalize, T weight,
                                  OnlineBranch<T>& grads) {
  const Mat<T> tokens = embed(patches, online.embed.proj);
  detail::OnlinePassCache<T> c1, c2;
  ImageStats<T> stats;
  T bce1 = T(0), bce2 = T(0);
  int correct1 = 0, correct2 = 0;
  const T sim1 = detail::online_pass_forward(
      online, tokens, ctx.perm_a, ctx.target_proj_of_b, ctx.target_rep_of_b,
      ctx.label_pass1, normalize, c1, bce1, correct1);
  const T sim2 = detail::online_pass_forward(
      online, tokens, ctx.perm_b, ctx.target_proj_of_a, ctx.target_rep_of_a,
      ctx.label_pass2, normalize, c2, bce2, correct2);
  stats.loss_bolt = sim1 + sim2;
  stats.loss_diff = (bce1 + bce2) / T(2);
  stats.diff_correct = correct1 + correct2;
  stats.proj_pass1 = c1.proj_out;
  stats.proj_pass2 = c2.proj_out;

  Mat<T> grad_tokens = zeros_like(tokens);
  const T bce_w = weight * alpha / T(2);
  detail::online_pass_backward(online, c1, ctx.target_proj_of_b,
                               ctx.label_pass1, normalize, weight, bce_w,
                               grads, grad_tokens);
  detail::online_pass_backward(online, c2, ctx.target_proj_of_a,
                               ctx.label_pass2, normalize, weight, bce_w,
                               grads, grad_tokens);
  embed_backward(patches, grad_tokens, grads.embed.proj);
  return stats;
}

struct TrainReport {
  std::int64_t step = 0;
  double loss_bolt = 0, loss_diff = 0, loss_total = 0;
  double diff_acc = 0;   // fraction of head predictions matching labels
  double repr_std = 0;   // collapse diagnostic: mean per-dim std of z
};

template <class T>
struct TrainConfig {
  std::int64_t steps = 1000;
  int batch = 8;
  T lr = T(1e-3);
  T weight_decay = T(1e-4);
  T alpha = T(0.1);
  EmaConfig ema;
  bool normalize_similarity = true;
  std::uint64_t perturb_seed = 3;
  std::uint64_t order_seed = 5;
};

/// Owns both branches and the optimizer; one logical thread drives step().
template <class T>
class Trainer {
 public:
  Trainer(OnlineBranch<T> online, const TrainConfig<T>& cfg,
          const data::LabeledDataset& ds)
      : online_(std::move(online)),
        target_(make_target(online_)),
        cfg_(cfg),
        perturb_rng_(cfg.perturb_seed),
        order_rng_(cfg.order_seed) {
    if (ds.size() == 0) throw ConfigError("training dataset is empty");
    opt_.lr = cfg.lr;
    opt_.weight_decay = cfg.weight_decay;
    patches_.reserve(ds.size());
    for (const auto& s : ds.samples)
      patches_.push_back(patchify<T>(s, online_.cfg.patch));
  }

  TrainReport step() {
    std::vector<std::size_t> batch(static_cast<std::size_t>(cfg_.batch));
    for (auto& b : batch) b = next_index();
    return step_on(batch);
  }

  TrainReport step_on(const std::vector<std::size_t>& batch) {
    const int n_tokens = online_.cfg.patch.tokens();
    OnlineBranch<T> grads = clone_zeroed<T>(online_);
    const T weight = T(1) / static_cast<T>(batch.size());

    double loss_bolt = 0, loss_diff = 0;
    int correct = 0;
    std::vector<Mat<T>> projections;
    projections.reserve(batch.size() * 2);
    for (const std::size_t idx : batch) {
      const Permutation pa = sample_permutation(n_tokens, perturb_rng_);
      const Permutation pb = sample_permutation(n_tokens, perturb_rng_);
      const PairContext<T> ctx =
          make_pair_context(patches_[idx], online_, target_, pa, pb);
      const ImageStats<T> s = bolt_image_backprop(
          patches_[idx], online_, ctx, cfg_.alpha, cfg_.normalize_similarity,
          weight, grads);
      loss_bolt += static_cast<double>(s.loss_bolt);
      loss_diff += static_cast<double>(s.loss_diff);
      correct += s.diff_correct;
      projections.push_back(s.proj_pass1);
      projections.push_back(s.proj_pass2);
    }
    loss_bolt /= static_cast<double>(batch.size());
    loss_diff /= static_cast<double>(batch.size());

    TrainReport report;
    report.step = step_ + 1;
    report.loss_bolt = loss_bolt;
    report.loss_diff = loss_diff;
    report.loss_total = total_loss(loss_bolt, loss_diff,
                                   static_cast<double>(cfg_.alpha));
    report.diff_acc = static_cast<double>(correct) /
                      static_cast<double>(2 * batch.size());
    report.repr_std = mean_per_dim_std(projections);
    if (!std::isfinite(report.loss_total))
      throw NumericError("non-finite loss at step " +
                         std::to_string(report.step) +
                         " (bolt=" + std::to_string(report.loss_bolt) +
                         ", diff=" + std::to_string(report.loss_diff) + ")");

    auto params = named_tensors(online_);
    auto grad_tensors = named_tensors(grads);
    opt_.step(params, grad_tensors);
    ++step_;
    ema_update(online_, target_,
               static_cast<T>(cfg_.ema.tau_at(step_)));
    return report;
  }

  std::vector<TrainReport> run(std::int64_t steps) {
    std::vector<TrainReport> reports;
    reports.reserve(static_cast<std::size_t>(steps));
    for (std::int64_t i = 0; i < steps; ++i) reports.push_back(step());
    return reports;
  }

  OnlineBranch<T>& online() { return online_; }
  const OnlineBranch<T>& online() const { return online_; }
  TargetBranch<T>& target() { return target_; }
  const TargetBranch<T>& target() const { return target_; }
  AdamW<T>& optimizer() { return opt_; }
  std::int64_t current_step() const { return step_; }

 private:
  std::size_t next_index() {
    if (cursor_ >= order_.size()) {
      order_.resize(patches_.size());
      std::iota(order_.begin(), order_.end(), std::size_t{0});
      order_rng_.shuffle(order_);
      cursor_ = 0;
    }
    return order_[cursor_++];
  }

  static double mean_per_dim_std(const std::vector<Mat<T>>& projections) {
    if (projections.empty()) return 0.0;
    const Index d = projections.front().cols();
    const double n = static_cast<double>(projections.size());
    double acc = 0.0;
    for (Index j = 0; j < d; ++j) {
      double mean = 0.0;
      for (const auto& p : projections) mean += static_cast<double>(p(0, j));
      mean /= n;
      double var = 0.0;
      for (const auto& p : projections) {
        const double dv = static_cast<double>(p(0, j)) - mean;
        var += dv * dv;
      }
      acc += std::sqrt(var / n);
    }
    return acc / static_cast<double>(d);
  }

  OnlineBranch<T> online_;
  TargetBranch<T> target_;
  TrainConfig<T> cfg_;
  AdamW<T> opt_;
  Rng perturb_rng_;
  Rng order_rng_;
  std::vector<Mat<T>> patches_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  std::int64_t step_ = 0;
};

/// Append-only metrics stream:
/// step,loss_total,loss_bolt,loss_diff,diff_acc,repr_std
class MetricsWriter {
 public:
  explicit MetricsWriter(const std::string& path) : out_(path) {
    if (!out_) throw IoError("cannot open metrics file " + path);
    out_ << "step,loss_total,loss_bolt,loss_diff,diff_acc,repr_std\n";
  }

  void append(const TrainReport& r) {
    char buf[192];
    std::snprintf(buf, sizeof(buf), "%lld,%.9g,%.9g,%.9g,%.9g,%.9g\n",
                  static_cast<long long>(r.step), r.loss_total, r.loss_bolt,
                  r.loss_diff, r.diff_acc, r.repr_std);
    out_ << buf;
  }

 private:
  std::ofstream out_;
};

}  // namespace bolt
