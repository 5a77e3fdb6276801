// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "bolt/core/error.hpp"
#include "bolt/core/rng.hpp"

namespace bolt::data {

struct ImageSample {
  std::vector<float> pixels;  // H*W*C, row-major (y, x, c), values in [0,1]
  int label = -1;             // -1 when unlabeled
  std::string id;
};

struct LabeledDataset {
  std::vector<ImageSample> samples;
  int height = 0;
  int width = 0;
  int channels = 0;
  int num_classes = 0;
  std::string provenance;

  std::size_t size() const { return samples.size(); }

  std::vector<std::vector<std::size_t>> indices_by_class() const {
    std::vector<std::vector<std::size_t>> by_class(num_classes);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const int label = samples[i].label;
      if (label < 0 || label >= num_classes)
        throw ConfigError("sample " + samples[i].id +
                          " has no valid label for a stratified operation");
      by_class[label].push_back(i);
    }
    return by_class;
  }

  LabeledDataset subset(std::vector<std::size_t> indices,
                        std::string new_provenance) const {
    std::sort(indices.begin(), indices.end());
    LabeledDataset out;
    out.height = height;
    out.width = width;
    out.channels = channels;
    out.num_classes = num_classes;
    out.provenance = std::move(new_provenance);
    out.samples.reserve(indices.size());
    for (const std::size_t i : indices) out.samples.push_back(samples[i]);
    return out;
  }
};

enum class PatternKind { Blob, Stripe, Checker, Mixed };

inline PatternKind pattern_kind_from_string(const std::string& s) {
  if (s == "blob") return PatternKind::Blob;
  if (s == "stripe") return PatternKind::Stripe;
  if (s == "checker") return PatternKind::Checker;
  if (s == "auto" || s == "mixed") return PatternKind::Mixed;
  throw ConfigError("unknown pattern kind '" + s + "'");
}

struct SyntheticSpec {
  int num_classes = 2;
  int per_class = 100;
  int height = 32;
  int width = 32;
  int channels = 3;
  PatternKind pattern = PatternKind::Mixed;
  double noise_std = 0.0;
  std::uint64_t seed = 0;
};

namespace detail {

// One spatial template per (kind, class). Every sample draws nuisance
// parameters (position / phase / offset) so classes have genuine
// within-class variation; class identity is carried by structure, not by
// global intensity statistics (all templates are zero-mean around 0.5).
inline void render_pattern(PatternKind kind, int class_index, int h, int w,
                           int c, Rng& rng, std::vector<float>& out) {
  const double pi = std::numbers::pi;
  const auto at = [&](int y, int x) -> std::size_t {
    return (static_cast<std::size_t>(y) * w + x) * c;
  };
  if (kind == PatternKind::Blob) {
    const double sigma = 0.18 * std::min(h, w);
    // Class anchor on a coarse grid, jittered per sample.
    const double ax = (0.3 + 0.4 * ((class_index * 2654435761u) % 3) / 2.0);
    const double ay = (0.3 + 0.4 * ((class_index * 40503u) % 3) / 2.0);
    const double cx = ax * w + rng.uniform(-0.18, 0.18) * w;
    const double cy = ay * h + rng.uniform(-0.18, 0.18) * h;
    // Subtract the bump's image mean so that blob images keep the same
    // global mean as the grating classes.
    double mass = 0.0;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        mass += std::exp(-((x - cx) * (x - cx) + (y - cy) * (y - cy)) /
                         (2.0 * sigma * sigma));
    const double mean = mass / (static_cast<double>(h) * w);
    const double amp = 0.7;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double g =
            std::exp(-((x - cx) * (x - cx) + (y - cy) * (y - cy)) /
                     (2.0 * sigma * sigma));
        const float v = static_cast<float>(0.5 + amp * (g - mean));
        for (int k = 0; k < c; ++k) out[at(y, x) + k] = v;
      }
  } else if (kind == PatternKind::Stripe) {
    // Grating with class-dependent orientation, random phase per sample.
    const double theta = pi * (0.25 + 0.5 * (class_index % 4)) / 2.0;
    const double freq = 3.0 + (class_index / 4) * 2.0;
    const double phase = rng.uniform(0.0, 2.0 * pi);
    const double kx = std::cos(theta) * 2.0 * pi * freq / w;
    const double ky = std::sin(theta) * 2.0 * pi * freq / h;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const float v =
            static_cast<float>(0.5 + 0.25 * std::sin(kx * x + ky * y + phase));
        for (int k = 0; k < c; ++k) out[at(y, x) + k] = v;
      }
  } else {
    // Checker texture: product grating, random offsets per sample.
    const double freq = 2.0 + (class_index % 3);
    const double px = rng.uniform(0.0, 2.0 * pi);
    const double py = rng.uniform(0.0, 2.0 * pi);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double sx = std::sin(2.0 * pi * freq * x / w + px);
        const double sy = std::sin(2.0 * pi * freq * y / h + py);
        const float v = static_cast<float>(0.5 + 0.35 * sx * sy);
        for (int k = 0; k < c; ++k) out[at(y, x) + k] = v;
      }
  }
}

inline PatternKind class_kind(PatternKind spec_kind, int class_index) {
  if (spec_kind != PatternKind::Mixed) return spec_kind;
  constexpr PatternKind cycle[3] = {PatternKind::Blob, PatternKind::Stripe,
                                    PatternKind::Checker};
  return cycle[class_index % 3];
}

}  // namespace detail

inline LabeledDataset generate_synthetic(const SyntheticSpec& spec) {
  if (spec.num_classes < 2) throw ConfigError("need at least 2 classes");
  if (spec.per_class < 1) throw ConfigError("per_class must be >= 1");
  if (spec.height < 1 || spec.width < 1 || spec.channels < 1)
    throw ConfigError("invalid synthetic image shape");
  if (spec.noise_std < 0.0) throw ConfigError("noise_std must be >= 0");

  LabeledDataset ds;
  ds.height = spec.height;
  ds.width = spec.width;
  ds.channels = spec.channels;
  ds.num_classes = spec.num_classes;
  ds.provenance = "synthetic(seed=" + std::to_string(spec.seed) + ")";

  const std::size_t pixel_count = static_cast<std::size_t>(spec.height) *
                                  spec.width * spec.channels;
  for (int cls = 0; cls < spec.num_classes; ++cls) {
    const PatternKind kind = detail::class_kind(spec.pattern, cls);
    for (int i = 0; i < spec.per_class; ++i) {
      // Per-sample RNG derived from (seed, class, index): the dataset is
      // bitwise-reproducible and independent of generation order.
      Rng rng(seed_mix(spec.seed, static_cast<std::uint64_t>(cls) * 1000003u +
                                      static_cast<std::uint64_t>(i)));
      ImageSample s;
      s.label = cls;
      s.id = "syn_" + std::to_string(cls) + "_" + std::to_string(i);
      s.pixels.resize(pixel_count);
      detail::render_pattern(kind, cls, spec.height, spec.width, spec.channels,
                             rng, s.pixels);
      if (spec.noise_std > 0.0) {
        for (float& v : s.pixels)
          v = static_cast<float>(v + rng.normal(0.0, spec.noise_std));
      }
      for (float& v : s.pixels) v = std::clamp(v, 0.0f, 1.0f);
      ds.samples.push_back(std::move(s));
    }
  }
  return ds;
}

struct SplitRatios {
  double train = 0.7;
  double val = 0.1;
  double test = 0.2;
};

struct DatasetSplits {
  LabeledDataset train;
  LabeledDataset val;
  LabeledDataset test;
};

/// Stratified split. Rounding: floor for val/test, remainder to train.
inline DatasetSplits split_dataset(const LabeledDataset& ds,
                                   const SplitRatios& ratios,
                                   std::uint64_t seed) {
  if (ratios.train <= 0.0 || ratios.val <= 0.0 || ratios.test <= 0.0)
    throw ConfigError("split ratios must be positive");
  if (std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9)
    throw ConfigError("ratios must sum to 1");

  std::vector<std::size_t> train_idx, val_idx, test_idx;
  const auto by_class = ds.indices_by_class();
  for (int cls = 0; cls < ds.num_classes; ++cls) {
    auto indices = by_class[cls];
    if (indices.size() < 3)
      throw ConfigError("class " + std::to_string(cls) +
                        " has fewer samples than partitions");
    Rng rng(seed_mix(seed, static_cast<std::uint64_t>(cls)));
    rng.shuffle(indices);
    const std::size_t n = indices.size();
    const std::size_t n_val =
        static_cast<std::size_t>(std::floor(ratios.val * n));
    const std::size_t n_test =
        static_cast<std::size_t>(std::floor(ratios.test * n));
    for (std::size_t i = 0; i < n_test; ++i) test_idx.push_back(indices[i]);
    for (std::size_t i = n_test; i < n_test + n_val; ++i)
      val_idx.push_back(indices[i]);
    for (std::size_t i = n_test + n_val; i < n; ++i)
      train_idx.push_back(indices[i]);
  }
  DatasetSplits out;
  out.train = ds.subset(std::move(train_idx), ds.provenance + "/train");
  out.val = ds.subset(std::move(val_idx), ds.provenance + "/val");
  out.test = ds.subset(std::move(test_idx), ds.provenance + "/test");
  return out;
}

/// Draws min(per_class_count, available) samples per class without
/// replacement; classes smaller than the quota are taken in full.
inline LabeledDataset balance_classes(const LabeledDataset& ds,
                                      std::size_t per_class_count,
                                      std::uint64_t seed) {
  if (per_class_count < 1) throw ConfigError("per_class_count must be >= 1");
  std::vector<std::size_t> keep;
  const auto by_class = ds.indices_by_class();
  for (int cls = 0; cls < ds.num_classes; ++cls) {
    auto indices = by_class[cls];
    Rng rng(seed_mix(seed, static_cast<std::uint64_t>(cls)));
    rng.shuffle(indices);
    const std::size_t take = std::min(per_class_count, indices.size());
    for (std::size_t i = 0; i < take; ++i) keep.push_back(indices[i]);
  }
  return ds.subset(std::move(keep), ds.provenance + "/balanced");
}

/// Stratified subsample: round(fraction * class_size) per class.
inline LabeledDataset subsample_fraction(const LabeledDataset& ds,
                                         double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0) || fraction > 1.0)
    throw ConfigError("fraction must lie in (0, 1]");
  std::vector<std::size_t> keep;
  const auto by_class = ds.indices_by_class();
  for (int cls = 0; cls < ds.num_classes; ++cls) {
    auto indices = by_class[cls];
    Rng rng(seed_mix(seed, static_cast<std::uint64_t>(cls)));
    rng.shuffle(indices);
    const std::size_t take = static_cast<std::size_t>(
        std::llround(fraction * static_cast<double>(indices.size())));
    for (std::size_t i = 0; i < std::min(take, indices.size()); ++i)
      keep.push_back(indices[i]);
  }
  return ds.subset(std::move(keep), ds.provenance + "/subsampled");
}

/// Manifest export: CSV with columns id,label,split.
inline void write_manifest(
    const std::string& path,
    const std::vector<std::pair<std::string, const LabeledDataset*>>& splits) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest " + path);
  out << "id,label,split\n";
  for (const auto& [name, ds] : splits)
    for (const auto& s : ds->samples)
      out << s.id << "," << s.label << "," << name << "\n";
}

}  // namespace bolt::data
