// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>

#include "bolt/core/error.hpp"
#include "bolt/core/matrix.hpp"
#include "bolt/core/rng.hpp"
#include "bolt/data/dataset.hpp"

namespace bolt {

/// Patch-grid geometry. N = H*W/P^2 tokens, S = W/P is both the patch-grid
/// row length and the window stride used by the perturbation module.
struct PatchEmbedConfig {
  int height = 32;
  int width = 32;
  int channels = 3;
  int patch = 8;
  int dim = 64;

  void validate() const {
    if (patch <= 0 || height <= 0 || width <= 0 || channels <= 0 || dim <= 0)
      throw ConfigError("patch embed dimensions must be positive");
    if (height % patch != 0)
      throw ConfigError("P must divide H (" + std::to_string(patch) + " vs " +
                        std::to_string(height) + ")");
    if (width % patch != 0)
      throw ConfigError("P must divide W (" + std::to_string(patch) + " vs " +
                        std::to_string(width) + ")");
  }

  int tokens() const { return (height / patch) * (width / patch); }
  int stride() const { return width / patch; }
  int patch_dim() const { return patch * patch * channels; }
};

/// Crops an image into N rows of flattened P x P x C patches.
/// Row k is the raster-flattened block at grid (k / S, k % S).
template <class T>
Mat<T> patchify(const data::ImageSample& image, const PatchEmbedConfig& cfg) {
  cfg.validate();
  if (static_cast<int>(image.pixels.size()) !=
      cfg.height * cfg.width * cfg.channels)
    throw ShapeError("image pixel count does not match declared shape");
  const int n = cfg.tokens();
  const int s = cfg.stride();
  Mat<T> out(n, cfg.patch_dim());
  for (int k = 0; k < n; ++k) {
    const int gy = k / s;
    const int gx = k % s;
    int col = 0;
    for (int py = 0; py < cfg.patch; ++py) {
      const int y = gy * cfg.patch + py;
      for (int px = 0; px < cfg.patch; ++px) {
        const int x = gx * cfg.patch + px;
        const std::size_t base =
            (static_cast<std::size_t>(y) * cfg.width + x) * cfg.channels;
        for (int c = 0; c < cfg.channels; ++c)
          out(k, col++) = static_cast<T>(image.pixels[base + c]);
      }
    }
  }
  return out;
}

/// Inverse of patchify; patches tile the image disjointly so this is exact.
template <class T>
data::ImageSample unpatchify(const Mat<T>& patches,
                             const PatchEmbedConfig& cfg) {
  cfg.validate();
  if (patches.rows() != cfg.tokens() || patches.cols() != cfg.patch_dim())
    throw ShapeError("patch matrix shape does not match config");
  data::ImageSample image;
  image.pixels.assign(
      static_cast<std::size_t>(cfg.height) * cfg.width * cfg.channels, 0.0f);
  const int s = cfg.stride();
  for (int k = 0; k < cfg.tokens(); ++k) {
    const int gy = k / s;
    const int gx = k % s;
    int col = 0;
    for (int py = 0; py < cfg.patch; ++py)
      for (int px = 0; px < cfg.patch; ++px) {
        const std::size_t base =
            ((static_cast<std::size_t>(gy) * cfg.patch + py) * cfg.width +
             gx * cfg.patch + px) *
            cfg.channels;
        for (int c = 0; c < cfg.channels; ++c)
          image.pixels[base + c] = static_cast<float>(patches(k, col++));
      }
  }
  return image;
}

/// Trainable patch projection plus positional/class-token furniture.
template <class T>
struct EmbedParams {
  Mat<T> proj;       // (P^2 C) x D
  Mat<T> pos;        // (N+1) x D, row 0 belongs to the class token
  Mat<T> class_tok;  // 1 x D
};

template <class T>
EmbedParams<T> init_embed(const PatchEmbedConfig& cfg, Rng& rng) {
  cfg.validate();
  EmbedParams<T> p;
  p.proj.resize(cfg.patch_dim(), cfg.dim);
  for (Index i = 0; i < p.proj.rows(); ++i)
    for (Index j = 0; j < p.proj.cols(); ++j)
      p.proj(i, j) = static_cast<T>(rng.trunc_normal(0.02));
  p.pos.resize(cfg.tokens() + 1, cfg.dim);
  for (Index i = 0; i < p.pos.rows(); ++i)
    for (Index j = 0; j < p.pos.cols(); ++j)
      p.pos(i, j) = static_cast<T>(rng.trunc_normal(0.02));
  p.class_tok = Mat<T>::Zero(1, cfg.dim);
  return p;
}

/// tokens = patches * proj
template <class T>
Mat<T> embed(const Mat<T>& patches, const Mat<T>& proj) {
  if (patches.cols() != proj.rows())
    throw ShapeError("embed: patch width " + std::to_string(patches.cols()) +
                     " does not match projection rows " +
                     std::to_string(proj.rows()));
  return patches * proj;
}

template <class T>
void embed_backward(const Mat<T>& patches, const Mat<T>& grad_tokens,
                    Mat<T>& grad_proj) {
  grad_proj.noalias() += patches.transpose() * grad_tokens;
}

/// Prepends the class token and adds slot-indexed positional embeddings.
/// Positions are bound to slots, not to original patch identity, so they are
/// attached after token perturbation.
template <class T>
Mat<T> attach_position_and_class(const Mat<T>& tokens,
                                 const EmbedParams<T>& params) {
  if (tokens.rows() + 1 != params.pos.rows() ||
      tokens.cols() != params.pos.cols())
    throw ShapeError("attach: token/positional shape mismatch");
  Mat<T> seq(tokens.rows() + 1, tokens.cols());
  seq.row(0) = params.class_tok.row(0) + params.pos.row(0);
  seq.bottomRows(tokens.rows()) = tokens + params.pos.bottomRows(tokens.rows());
  return seq;
}

template <class T>
void attach_backward(const Mat<T>& grad_seq, Mat<T>& grad_tokens,
                     Mat<T>& grad_pos, Mat<T>& grad_class_tok) {
  grad_class_tok.row(0) += grad_seq.row(0);
  grad_pos += grad_seq;
  grad_tokens = grad_seq.bottomRows(grad_seq.rows() - 1);
}

}  // namespace bolt
