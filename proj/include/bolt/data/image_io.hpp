// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "bolt/core/error.hpp"

namespace bolt::data {

/// Raw decoded raster: H*W*C floats in [0,1], row-major (y, x, c).
struct RawImage {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<float> pixels;
};

namespace detail {

inline int pnm_next_int(std::istream& in, const std::string& path) {
  // Skips whitespace and '#' comments, then reads one decimal integer.
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (std::isspace(c)) {
      c = in.get();
    } else {
      break;
    }
  }
  if (c == EOF || !std::isdigit(c))
    throw IoError("malformed netpbm header in " + path);
  int value = 0;
  while (c != EOF && std::isdigit(c)) {
    value = value * 10 + (c - '0');
    c = in.get();
  }
  return value;
}

}  // namespace detail

/// Reads a netpbm image (P2/P3 ASCII, P5/P6 binary, maxval <= 255).
/// Grayscale files decode to channels = 1.
inline RawImage read_pnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image file " + path);

  char m0 = 0, m1 = 0;
  in.get(m0);
  in.get(m1);
  if (m0 != 'P' || (m1 != '2' && m1 != '3' && m1 != '5' && m1 != '6'))
    throw IoError("unsupported image format in " + path);
  const bool binary = (m1 == '5' || m1 == '6');
  const int channels = (m1 == '3' || m1 == '6') ? 3 : 1;

  RawImage img;
  img.width = detail::pnm_next_int(in, path);
  img.height = detail::pnm_next_int(in, path);
  const int maxval = detail::pnm_next_int(in, path);
  if (img.width <= 0 || img.height <= 0)
    throw IoError("bad image dimensions in " + path);
  if (maxval <= 0 || maxval > 255)
    throw IoError("unsupported maxval in " + path);
  img.channels = channels;

  const std::size_t count =
      static_cast<std::size_t>(img.width) * img.height * channels;
  img.pixels.resize(count);
  if (binary) {
    std::vector<unsigned char> buf(count);
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(count));
    if (static_cast<std::size_t>(in.gcount()) != count)
      throw IoError("truncated image payload in " + path);
    for (std::size_t i = 0; i < count; ++i)
      img.pixels[i] = static_cast<float>(buf[i]) / static_cast<float>(maxval);
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      const int v = detail::pnm_next_int(in, path);
      if (v < 0 || v > maxval) throw IoError("pixel out of range in " + path);
      img.pixels[i] = static_cast<float>(v) / static_cast<float>(maxval);
    }
  }
  return img;
}

/// Writes binary PPM (C==3) or PGM (C==1), maxval 255.
inline void write_pnm(const std::string& path, const RawImage& img) {
  if (img.channels != 1 && img.channels != 3)
    throw IoError("write_pnm supports 1 or 3 channels");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write image file " + path);
  out << (img.channels == 3 ? "P6" : "P5") << "\n"
      << img.width << " " << img.height << "\n255\n";
  std::vector<unsigned char> buf(img.pixels.size());
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    const float v = std::clamp(img.pixels[i], 0.0f, 1.0f);
    buf[i] = static_cast<unsigned char>(std::lround(v * 255.0f));
  }
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("failed writing image payload to " + path);
}

/// Nearest-neighbour resize plus channel conversion (gray is replicated,
/// RGB collapses by mean when a single channel is requested).
inline RawImage convert_raster(const RawImage& src, int h, int w, int c) {
  RawImage dst;
  dst.height = h;
  dst.width = w;
  dst.channels = c;
  dst.pixels.resize(static_cast<std::size_t>(h) * w * c);
  for (int y = 0; y < h; ++y) {
    const int sy = std::min(src.height - 1, y * src.height / h);
    for (int x = 0; x < w; ++x) {
      const int sx = std::min(src.width - 1, x * src.width / w);
      const float* sp =
          &src.pixels[(static_cast<std::size_t>(sy) * src.width + sx) *
                      src.channels];
      float* dp = &dst.pixels[(static_cast<std::size_t>(y) * w + x) * c];
      if (src.channels == c) {
        for (int k = 0; k < c; ++k) dp[k] = sp[k];
      } else if (src.channels == 1) {
        for (int k = 0; k < c; ++k) dp[k] = sp[0];
      } else {
        float mean = 0.0f;
        for (int k = 0; k < src.channels; ++k) mean += sp[k];
        mean /= static_cast<float>(src.channels);
        for (int k = 0; k < c; ++k) dp[k] = mean;
      }
    }
  }
  return dst;
}

}  // namespace bolt::data
