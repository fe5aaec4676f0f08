// Copyright 2026 trajset contributors
// Licensed under the terms of the Apache 2.0 License.
// See the LICENSE file in the project root for terms.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "trajset/errors.hpp"

namespace trajset {

// One grayscale frame, row-major intensities in [0,1].
struct GrayFrame {
  int width = 0;
  int height = 0;
  std::vector<float> data;
  int frame_index = 0;

  float at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
  float& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }

  static GrayFrame filled(int w, int h, float value, int index = 0) {
    GrayFrame f;
    f.width = w;
    f.height = h;
    f.frame_index = index;
    f.data.assign(static_cast<std::size_t>(w) * h, value);
    return f;
  }
};

inline float clamp_sample(const GrayFrame& f, int x, int y) {
  x = std::clamp(x, 0, f.width - 1);
  y = std::clamp(y, 0, f.height - 1);
  return f.at(x, y);
}

// Bilinear intensity lookup with edge clamping.
inline float bilinear_sample(const GrayFrame& f, float x, float y) {
  const float fx = std::floor(x), fy = std::floor(y);
  const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
  const float ax = x - fx, ay = y - fy;
  const float v00 = clamp_sample(f, x0, y0);
  const float v10 = clamp_sample(f, x0 + 1, y0);
  const float v01 = clamp_sample(f, x0, y0 + 1);
  const float v11 = clamp_sample(f, x0 + 1, y0 + 1);
  return (1 - ay) * ((1 - ax) * v00 + ax * v10) + ay * ((1 - ax) * v01 + ax * v11);
}

inline std::vector<float> gaussian_kernel(double sigma, int radius) {
  std::vector<float> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * i * i / (sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = static_cast<float>(v);
    sum += v;
  }
  for (auto& v : k) v = static_cast<float>(v / sum);
  return k;
}

// Separable Gaussian blur with edge clamping. Weights sum to one, so
// constant images pass through unchanged.
inline GrayFrame gaussian_blur(const GrayFrame& src, double sigma, int radius) {
  const auto k = gaussian_kernel(sigma, radius);
  GrayFrame tmp = GrayFrame::filled(src.width, src.height, 0.f, src.frame_index);
  for (int y = 0; y < src.height; ++y)
    for (int x = 0; x < src.width; ++x) {
      float acc = 0.f;
      for (int i = -radius; i <= radius; ++i)
        acc += k[static_cast<std::size_t>(i + radius)] * clamp_sample(src, x + i, y);
      tmp.at(x, y) = acc;
    }
  GrayFrame dst = GrayFrame::filled(src.width, src.height, 0.f, src.frame_index);
  for (int y = 0; y < src.height; ++y)
    for (int x = 0; x < src.width; ++x) {
      float acc = 0.f;
      for (int i = -radius; i <= radius; ++i)
        acc += k[static_cast<std::size_t>(i + radius)] * clamp_sample(tmp, x, y + i);
      dst.at(x, y) = acc;
    }
  return dst;
}

// Bilinear resampling with pixel-center alignment.
inline GrayFrame resize_bilinear(const GrayFrame& src, int dst_w, int dst_h) {
  GrayFrame dst = GrayFrame::filled(dst_w, dst_h, 0.f, src.frame_index);
  const float sx = static_cast<float>(src.width) / dst_w;
  const float sy = static_cast<float>(src.height) / dst_h;
  for (int y = 0; y < dst_h; ++y) {
    const float src_y = (y + 0.5f) * sy - 0.5f;
    for (int x = 0; x < dst_w; ++x) {
      const float src_x = (x + 0.5f) * sx - 0.5f;
      dst.at(x, y) = bilinear_sample(src, src_x, src_y);
    }
  }
  return dst;
}

struct PyramidParams {
  double scale_factor = 1.0 / std::numbers::sqrt2;
  int min_side = 32;
  double smooth_sigma = 0.8;  // anti-alias blur before each downsample
  int smooth_radius = 2;      // 5-tap kernel
};

// Spatial pyramid of one frame. Level 0 is the original resolution; each
// following level is round(scale_factor x previous dims).
struct Pyramid {
  std::vector<GrayFrame> levels;
  double scale_factor = 0.0;

  // Ratio mapping level coordinates back to level-0 coordinates, taken from
  // the actual rounded dimensions so the mapping is exact per axis.
  double inv_scale_x(std::size_t level) const {
    return static_cast<double>(levels[0].width) / levels[level].width;
  }
  double inv_scale_y(std::size_t level) const {
    return static_cast<double>(levels[0].height) / levels[level].height;
  }
};

inline Pyramid build_pyramid(const GrayFrame& frame, const PyramidParams& params = {}) {
  if (params.scale_factor <= 0.0 || params.scale_factor >= 1.0)
    throw BadConfig("scale_factor must be in (0,1)");
  if (params.min_side < 8) throw BadConfig("min_side must be >= 8");
  if (std::min(frame.width, frame.height) < params.min_side)
    throw FrameTooSmall("frame min side below pyramid min_side");

  Pyramid pyr;
  pyr.scale_factor = params.scale_factor;
  pyr.levels.push_back(frame);
  int w = frame.width, h = frame.height;
  while (true) {
    const int nw = static_cast<int>(std::lround(w * params.scale_factor));
    const int nh = static_cast<int>(std::lround(h * params.scale_factor));
    if (std::min(nw, nh) < params.min_side) break;
    GrayFrame smoothed =
        gaussian_blur(pyr.levels.back(), params.smooth_sigma, params.smooth_radius);
    pyr.levels.push_back(resize_bilinear(smoothed, nw, nh));
    w = nw;
    h = nh;
  }
  return pyr;
}

}  // namespace trajset
