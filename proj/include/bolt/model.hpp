// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bolt/core/error.hpp"
#include "bolt/core/matrix.hpp"
#include "bolt/core/rng.hpp"
#include "bolt/heads.hpp"
#include "bolt/patch_embed.hpp"
#include "bolt/perturb.hpp"
#include "bolt/vit.hpp"

namespace bolt {

/// Everything needed to build congruent online/target branches.
struct ModelConfig {
  PatchEmbedConfig patch;
  int depth = 2;
  int heads = 4;
  double mlp_ratio = 4.0;
  int proj_hidden = 256;
  int proj_dim = 64;
  int window_len = 4;          // M
  bool identity_perturb = false;

  void validate() const {
    patch.validate();
    vit().validate();
    perturb();  // throws when the stride cannot tile the token count
    if (proj_hidden < 1 || proj_dim < 1)
      throw ConfigError("projector dims must be positive");
    if (window_len < 1) throw ConfigError("window_len must be >= 1");
  }

  ViTConfig vit() const {
    return ViTConfig{depth, heads, patch.dim, mlp_ratio, patch.tokens()};
  }

  PerturbConfig perturb() const {
    const int m = identity_perturb ? patch.stride() : window_len;
    return PerturbConfig::make(patch.tokens(), m, patch.stride());
  }
};

/// Gradient-trained branch: encoder, projector, predictor, difficulty head,
/// plus the patch/fusion projections that produce the perturbed views.
template <class T>
struct OnlineBranch {
  ModelConfig cfg;
  EmbedParams<T> embed;
  FuseParams<T> fuse;
  ViTParams<T> encoder;
  MlpHead<T> projector;
  MlpHead<T> predictor;
  DifficultyHead<T> diff_head;
};

/// EMA-tracked branch: same architecture minus predictor and difficulty head.
template <class T>
struct TargetBranch {
  ModelConfig cfg;
  EmbedParams<T> embed;
  FuseParams<T> fuse;
  ViTParams<T> encoder;
  MlpHead<T> projector;
};

template <class T>
OnlineBranch<T> init_online(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  OnlineBranch<T> b;
  b.cfg = cfg;
  b.embed = init_embed<T>(cfg.patch, rng);
  b.fuse = cfg.identity_perturb
               ? FuseParams<T>::identity(cfg.perturb(), cfg.patch.dim)
               : init_fuse<T>(cfg.perturb(), cfg.patch.dim, rng);
  b.encoder = init_vit<T>(cfg.vit(), rng);
  b.projector.init(cfg.patch.dim, cfg.proj_hidden, cfg.proj_dim, rng);
  b.predictor.init(cfg.proj_dim, cfg.proj_hidden, cfg.proj_dim, rng);
  b.diff_head.init(cfg.patch.dim, rng);
  return b;
}

/// Target starts as an exact copy of the online branch's shared subset.
template <class T>
TargetBranch<T> make_target(const OnlineBranch<T>& online) {
  TargetBranch<T> t;
  t.cfg = online.cfg;
  t.embed = online.embed;
  t.fuse = online.fuse;
  t.encoder = online.encoder;
  t.projector = online.projector;
  return t;
}

template <class T>
struct NamedTensor {
  std::string name;
  Mat<T>* mat;
};

namespace detail {

template <class T>
void collect(std::vector<NamedTensor<T>>& out, const std::string& prefix,
             EmbedParams<T>& e) {
  out.push_back({prefix + "embed.proj", &e.proj});
  out.push_back({prefix + "embed.pos", &e.pos});
  out.push_back({prefix + "embed.cls", &e.class_tok});
}

template <class T>
void collect(std::vector<NamedTensor<T>>& out, const std::string& prefix,
             FuseParams<T>& f) {
  out.push_back({prefix + "fuse.weight", &f.weight});
}

template <class T>
void collect(std::vector<NamedTensor<T>>& out, const std::string& prefix,
             nn::Linear<T>& l) {
  out.push_back({prefix + ".w", &l.weight});
  out.push_back({prefix + ".b", &l.bias});
}

template <class T>
void collect(std::vector<NamedTensor<T>>& out, const std::string& prefix,
             nn::LayerNorm<T>& l) {
  out.push_back({prefix + ".g", &l.gain});
  out.push_back({prefix + ".o", &l.bias});
}

template <class T>
void collect(std::vector<NamedTensor<T>>& out, const std::string& prefix,
             ViTParams<T>& v) {
  for (std::size_t i = 0; i < v.blocks.size(); ++i) {
    const std::string bp = prefix + "enc.b" + std::to_string(i) + ".";
    collect(out, bp + "ln1", v.blocks[i].ln1);
    collect(out, bp + "wq", v.blocks[i].wq);
    collect(out, bp + "wk", v.blocks[i].wk);
    collect(out, bp + "wv", v.blocks[i].wv);
    collect(out, bp + "wo", v.blocks[i].wo);
    collect(out, bp + "ln2", v.blocks[i].ln2);
    collect(out, bp + "mlp_in", v.blocks[i].mlp_in);
    collect(out, bp + "mlp_out", v.blocks[i].mlp_out);
  }
  collect(out, prefix + "enc.ln_f", v.ln_final);
}

template <class T>
void collect(std::vector<NamedTensor<T>>& out, const std::string& prefix,
             MlpHead<T>& h) {
  collect(out, prefix + ".in", h.in_layer);
  collect(out, prefix + ".norm", h.norm);
  collect(out, prefix + ".out", h.out_layer);
}

}  // namespace detail

/// Tensor registry in a fixed structural order; the shared subset (embed,
/// fuse, encoder, projector) comes first and uses identical names in both
/// branches, which the EMA update and the checkpoint format rely on.
template <class T>
std::vector<NamedTensor<T>> named_tensors(OnlineBranch<T>& b) {
  std::vector<NamedTensor<T>> out;
  detail::collect(out, "", b.embed);
  detail::collect(out, "", b.fuse);
  detail::collect(out, "", b.encoder);
  detail::collect(out, "proj", b.projector);
  detail::collect(out, "pred", b.predictor);
  detail::collect(out, "diff.fc", b.diff_head.fc);
  return out;
}

template <class T>
std::vector<NamedTensor<T>> named_tensors(TargetBranch<T>& b) {
  std::vector<NamedTensor<T>> out;
  detail::collect(out, "", b.embed);
  detail::collect(out, "", b.fuse);
  detail::collect(out, "", b.encoder);
  detail::collect(out, "proj", b.projector);
  return out;
}

/// Deep copy with every tensor zeroed; the gradient buffer for a branch.
template <class T, class Branch>
Branch clone_zeroed(const Branch& src) {
  Branch out = src;
  for (auto& t : named_tensors(out)) t.mat->setZero();
  return out;
}

template <class T>
OnlineBranch<T> zero_grads(const OnlineBranch<T>& src) {
  return clone_zeroed<T, OnlineBranch<T>>(src);
}

}  // namespace bolt
