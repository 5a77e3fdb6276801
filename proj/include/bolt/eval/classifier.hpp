// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bolt/core/matrix.hpp"
#include "bolt/core/rng.hpp"
#include "bolt/data/dataset.hpp"
#include "bolt/model.hpp"
#include "bolt/trainer.hpp"

namespace bolt::eval {

/// Supervised model: backbone (patch embedding + encoder) with a linear
/// classification head on the class-token representation.
template <class T>
struct ClassifierModel {
  ModelConfig cfg;
  EmbedParams<T> embed;
  ViTParams<T> encoder;
  nn::Linear<T> head;

  static ClassifierModel from_backbone(const ModelConfig& cfg,
                                       const EmbedParams<T>& embed,
                                       const ViTParams<T>& encoder,
                                       int num_classes, Rng& head_rng) {
    ClassifierModel m;
    m.cfg = cfg;
    m.embed = embed;
    m.encoder = encoder;
    m.head.init(cfg.patch.dim, num_classes, head_rng);
    return m;
  }

  static ClassifierModel scratch(const ModelConfig& cfg, int num_classes,
                                 std::uint64_t seed) {
    Rng rng(seed);
    ClassifierModel m;
    m.cfg = cfg;
    m.embed = init_embed<T>(cfg.patch, rng);
    m.encoder = init_vit<T>(cfg.vit(), rng);
    m.head.init(cfg.patch.dim, num_classes, rng);
    return m;
  }
};

template <class T>
std::vector<NamedTensor<T>> named_tensors(ClassifierModel<T>& m) {
  std::vector<NamedTensor<T>> out;
  bolt::detail::collect(out, "", m.embed);
  bolt::detail::collect(out, "", m.encoder);
  bolt::detail::collect(out, "cls_head", m.head);
  return out;
}

/// Frozen-backbone representation of one image.
template <class T>
Mat<T> representation(const ClassifierModel<T>& m,
                      const data::ImageSample& sample) {
  BackboneCache<T> cache;
  return backbone_rep(patchify<T>(sample, m.cfg.patch), m, cache);
}

namespace detail {

inline std::vector<int> dataset_labels(const data::LabeledDataset& ds) {
  std::vector<int> labels;
  labels.reserve(ds.size());
  for (const auto& s : ds.samples) labels.push_back(s.label);
  return labels;
}

}  // namespace detail

/// Class-token representations for a whole dataset, one row per sample.
template <class T>
Mat<T> representations(const ClassifierModel<T>& m,
                       const data::LabeledDataset& ds) {
  Mat<T> out(static_cast<Index>(ds.size()), m.cfg.patch.dim);
  for (std::size_t i = 0; i < ds.size(); ++i)
    out.row(static_cast<Index>(i)) = representation(m, ds.samples[i]).row(0);
  return out;
}

}  // namespace bolt::eval
