// Copyright 2026 trajset contributors
// Licensed under the terms of the Apache 2.0 License.
// See the LICENSE file in the project root for terms.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <utility>
#include <vector>

#include "trajset/errors.hpp"
#include "trajset/image.hpp"

namespace trajset {

struct FlowParams {
  int window = 15;         // weighted-averaging window for the 2x2 solve
  int iterations = 3;      // displacement refinement passes per level
  int levels = 3;          // internal coarse-to-fine levels (auto-capped)
  int poly_n = 5;          // polynomial expansion neighborhood side (odd)
  double poly_sigma = 1.1; // applicability Gaussian
};

// Dense per-pixel displacement, prev -> next, in pixels per frame step.
struct FlowField {
  int width = 0;
  int height = 0;
  std::vector<float> dx;
  std::vector<float> dy;

  static FlowField zeros(int w, int h) {
    FlowField f;
    f.width = w;
    f.height = h;
    f.dx.assign(static_cast<std::size_t>(w) * h, 0.f);
    f.dy.assign(static_cast<std::size_t>(w) * h, 0.f);
    return f;
  }

  std::size_t idx(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
};

// Bilinear flow lookup with edge clamping; returns (dx, dy) at a subpixel point.
inline std::pair<float, float> sample_flow(const FlowField& f, float x, float y) {
  x = std::clamp(x, 0.f, static_cast<float>(f.width - 1));
  y = std::clamp(y, 0.f, static_cast<float>(f.height - 1));
  const int x0 = std::min(static_cast<int>(x), f.width - 2 >= 0 ? f.width - 2 : 0);
  const int y0 = std::min(static_cast<int>(y), f.height - 2 >= 0 ? f.height - 2 : 0);
  const int x1 = std::min(x0 + 1, f.width - 1);
  const int y1 = std::min(y0 + 1, f.height - 1);
  const float ax = x - x0, ay = y - y0;
  auto lerp2 = [&](const std::vector<float>& v) {
    const float top = (1 - ax) * v[f.idx(x0, y0)] + ax * v[f.idx(x1, y0)];
    const float bot = (1 - ax) * v[f.idx(x0, y1)] + ax * v[f.idx(x1, y1)];
    return (1 - ay) * top + ay * bot;
  };
  return {lerp2(f.dx), lerp2(f.dy)};
}

namespace detail {

// Per-pixel quadratic model f ~ c + b.x + x'Ax, stored as 5 channels:
// (b_x, b_y, a_xx, a_yy, a_xy) where A = [[a_xx, a_xy/2], [a_xy/2, a_yy]].
struct PolyExpansion {
  int width = 0;
  int height = 0;
  std::vector<float> c;  // interleaved, 5 per pixel

  const float* at(int x, int y) const {
    return &c[(static_cast<std::size_t>(y) * width + x) * 5];
  }
};

inline PolyExpansion poly_expansion(const GrayFrame& img, int poly_n, double sigma) {
  const int n = poly_n / 2;
  std::vector<double> g(static_cast<std::size_t>(2 * n + 1));
  double gsum = 0.0;
  for (int i = -n; i <= n; ++i) {
    g[static_cast<std::size_t>(i + n)] = std::exp(-0.5 * i * i / (sigma * sigma));
    gsum += g[static_cast<std::size_t>(i + n)];
  }
  for (auto& v : g) v /= gsum;
  std::vector<double> xg(g.size()), xxg(g.size());
  double s2 = 0.0, s4 = 0.0;
  for (int i = -n; i <= n; ++i) {
    xg[static_cast<std::size_t>(i + n)] = i * g[static_cast<std::size_t>(i + n)];
    xxg[static_cast<std::size_t>(i + n)] = double(i) * i * g[static_cast<std::size_t>(i + n)];
    s2 += double(i) * i * g[static_cast<std::size_t>(i + n)];
    s4 += double(i) * i * i * i * g[static_cast<std::size_t>(i + n)];
  }

  // Gram matrix of the (1, x^2, y^2) sub-basis under the separable weight;
  // the x, y and xy rows decouple with scales s2, s2 and s2^2.
  const double q = s2 * s2;
  const double m[3][3] = {{1, s2, s2}, {s2, s4, q}, {s2, q, s4}};
  double inv[3][3];
  {
    const double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                       m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                       m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    const double id = 1.0 / det;
    inv[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) * id;
    inv[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) * id;
    inv[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) * id;
    inv[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) * id;
    inv[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) * id;
    inv[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) * id;
    inv[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) * id;
    inv[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) * id;
    inv[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) * id;
  }
  const double inv_s2 = 1.0 / s2;
  const double inv_s22 = 1.0 / q;

  const int w = img.width, h = img.height;
  // Vertical moment pass: t0 = sum g f, t1 = sum (y g) f, t2 = sum (y^2 g) f.
  std::vector<double> t0(static_cast<std::size_t>(w) * h);
  std::vector<double> t1(t0.size()), t2(t0.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double a0 = 0, a1 = 0, a2 = 0;
      for (int j = -n; j <= n; ++j) {
        const double v = clamp_sample(img, x, y + j);
        a0 += g[static_cast<std::size_t>(j + n)] * v;
        a1 += xg[static_cast<std::size_t>(j + n)] * v;
        a2 += xxg[static_cast<std::size_t>(j + n)] * v;
      }
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      t0[i] = a0;
      t1[i] = a1;
      t2[i] = a2;
    }

  PolyExpansion out;
  out.width = w;
  out.height = h;
  out.c.resize(static_cast<std::size_t>(w) * h * 5);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double m0 = 0, mx = 0, mxx = 0, my = 0, mxy = 0, myy = 0;
      for (int i = -n; i <= n; ++i) {
        const int xs = std::clamp(x + i, 0, w - 1);
        const std::size_t idx = static_cast<std::size_t>(y) * w + xs;
        m0 += g[static_cast<std::size_t>(i + n)] * t0[idx];
        mx += xg[static_cast<std::size_t>(i + n)] * t0[idx];
        mxx += xxg[static_cast<std::size_t>(i + n)] * t0[idx];
        my += g[static_cast<std::size_t>(i + n)] * t1[idx];
        mxy += xg[static_cast<std::size_t>(i + n)] * t1[idx];
        myy += g[static_cast<std::size_t>(i + n)] * t2[idx];
      }
      float* dst = &out.c[(static_cast<std::size_t>(y) * w + x) * 5];
      dst[0] = static_cast<float>(mx * inv_s2);                                   // b_x
      dst[1] = static_cast<float>(my * inv_s2);                                   // b_y
      dst[2] = static_cast<float>(inv[1][0] * m0 + inv[1][1] * mxx + inv[1][2] * myy);  // a_xx
      dst[3] = static_cast<float>(inv[2][0] * m0 + inv[2][1] * mxx + inv[2][2] * myy);  // a_yy
      dst[4] = static_cast<float>(mxy * inv_s22);                                 // a_xy
    }
  return out;
}

inline std::array<float, 5> sample_expansion(const PolyExpansion& e, float x, float y) {
  x = std::clamp(x, 0.f, static_cast<float>(e.width - 1));
  y = std::clamp(y, 0.f, static_cast<float>(e.height - 1));
  const int x0 = std::min(static_cast<int>(x), std::max(e.width - 2, 0));
  const int y0 = std::min(static_cast<int>(y), std::max(e.height - 2, 0));
  const int x1 = std::min(x0 + 1, e.width - 1);
  const int y1 = std::min(y0 + 1, e.height - 1);
  const float ax = x - x0, ay = y - y0;
  const float w00 = (1 - ax) * (1 - ay), w10 = ax * (1 - ay);
  const float w01 = (1 - ax) * ay, w11 = ax * ay;
  const float* p00 = e.at(x0, y0);
  const float* p10 = e.at(x1, y0);
  const float* p01 = e.at(x0, y1);
  const float* p11 = e.at(x1, y1);
  std::array<float, 5> r;
  for (int k = 0; k < 5; ++k) r[static_cast<std::size_t>(k)] =
      w00 * p00[k] + w10 * p10[k] + w01 * p01[k] + w11 * p11[k];
  return r;
}

// One Farneback refinement pass: build the per-pixel 2x2 normal equations
// from the two expansions and the running displacement, average them over
// the window, and re-solve.
inline void refine_flow(const PolyExpansion& e1, const PolyExpansion& e2, FlowField& flow,
                        int window) {
  const int w = e1.width, h = e1.height;
  std::vector<float> m(static_cast<std::size_t>(w) * h * 5);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      const float dx = flow.dx[i], dy = flow.dy[i];
      const float* r0 = e1.at(x, y);
      const auto r1 = sample_expansion(e2, x + dx, y + dy);
      const float a = 0.5f * (r0[2] + r1[2]);        // A(0,0)
      const float c = 0.5f * (r0[3] + r1[3]);        // A(1,1)
      const float b = 0.25f * (r0[4] + r1[4]);       // A(0,1) = avg(a_xy)/2
      const float db_x = 0.5f * (r0[0] - r1[0]) + a * dx + b * dy;
      const float db_y = 0.5f * (r0[1] - r1[1]) + b * dx + c * dy;
      float* dst = &m[i * 5];
      dst[0] = a * a + b * b;        // G(0,0)
      dst[1] = a * b + b * c;        // G(0,1)
      dst[2] = b * b + c * c;        // G(1,1)
      dst[3] = a * db_x + b * db_y;  // h(0)
      dst[4] = b * db_x + c * db_y;  // h(1)
    }

  // Gaussian window average of the five channels (separable, clamped).
  const int radius = window / 2;
  const auto kern = gaussian_kernel(window / 4.0, radius);
  std::vector<float> tmp(m.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      float acc[5] = {0, 0, 0, 0, 0};
      for (int i = -radius; i <= radius; ++i) {
        const int xs = std::clamp(x + i, 0, w - 1);
        const float* src = &m[(static_cast<std::size_t>(y) * w + xs) * 5];
        const float kw = kern[static_cast<std::size_t>(i + radius)];
        for (int k = 0; k < 5; ++k) acc[k] += kw * src[k];
      }
      float* dst = &tmp[(static_cast<std::size_t>(y) * w + x) * 5];
      for (int k = 0; k < 5; ++k) dst[k] = acc[k];
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      float acc[5] = {0, 0, 0, 0, 0};
      for (int i = -radius; i <= radius; ++i) {
        const int ys = std::clamp(y + i, 0, h - 1);
        const float* src = &tmp[(static_cast<std::size_t>(ys) * w + x) * 5];
        const float kw = kern[static_cast<std::size_t>(i + radius)];
        for (int k = 0; k < 5; ++k) acc[k] += kw * src[k];
      }
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      const double g11 = acc[0], g12 = acc[1], g22 = acc[2], h1 = acc[3], h2 = acc[4];
      const double det = g11 * g22 - g12 * g12;
      if (det > 1e-20) {
        flow.dx[i] = static_cast<float>((g22 * h1 - g12 * h2) / det);
        flow.dy[i] = static_cast<float>((g11 * h2 - g12 * h1) / det);
      }
      // else: untextured neighborhood, keep the coarse-level estimate
    }
}

inline GrayFrame half_size(const GrayFrame& src) {
  const int nw = std::max(1, (src.width + 1) / 2);
  const int nh = std::max(1, (src.height + 1) / 2);
  return resize_bilinear(gaussian_blur(src, 1.0, 2), nw, nh);
}

}  // namespace detail

// Dense displacement field mapping prev onto next via polynomial-expansion
// flow with coarse-to-fine refinement.
inline FlowField estimate_flow(const GrayFrame& prev, const GrayFrame& next,
                               const FlowParams& params = {}) {
  if (prev.width != next.width || prev.height != next.height)
    throw DimensionMismatch("estimate_flow: frame sizes differ");

  std::vector<GrayFrame> pyr_prev{prev}, pyr_next{next};
  for (int l = 1; l < params.levels; ++l) {
    if (std::min(pyr_prev.back().width, pyr_prev.back().height) < 24) break;
    pyr_prev.push_back(detail::half_size(pyr_prev.back()));
    pyr_next.push_back(detail::half_size(pyr_next.back()));
  }

  FlowField flow = FlowField::zeros(pyr_prev.back().width, pyr_prev.back().height);
  for (int level = static_cast<int>(pyr_prev.size()) - 1; level >= 0; --level) {
    const auto& p = pyr_prev[static_cast<std::size_t>(level)];
    const auto& n = pyr_next[static_cast<std::size_t>(level)];
    if (flow.width != p.width || flow.height != p.height) {
      // Upsample the coarse estimate and rescale the displacements.
      FlowField up = FlowField::zeros(p.width, p.height);
      const float rx = static_cast<float>(p.width) / flow.width;
      const float ry = static_cast<float>(p.height) / flow.height;
      for (int y = 0; y < p.height; ++y)
        for (int x = 0; x < p.width; ++x) {
          const auto [dx, dy] =
              sample_flow(flow, (x + 0.5f) / rx - 0.5f, (y + 0.5f) / ry - 0.5f);
          up.dx[up.idx(x, y)] = dx * rx;
          up.dy[up.idx(x, y)] = dy * ry;
        }
      flow = std::move(up);
    }
    const auto e1 = detail::poly_expansion(p, params.poly_n, params.poly_sigma);
    const auto e2 = detail::poly_expansion(n, params.poly_n, params.poly_sigma);
    for (int it = 0; it < params.iterations; ++it)
      detail::refine_flow(e1, e2, flow, params.window);
  }
  return flow;
}

// Component-wise median filter; borders handled by clamping.
inline FlowField median_filter_flow(const FlowField& flow, int kernel) {
  if (kernel < 1 || kernel % 2 == 0) throw BadKernel("median kernel must be odd and >= 1");
  if (kernel == 1) return flow;
  const int radius = kernel / 2;
  FlowField out = FlowField::zeros(flow.width, flow.height);
  std::vector<float> vals(static_cast<std::size_t>(kernel) * kernel);
  for (int y = 0; y < flow.height; ++y)
    for (int x = 0; x < flow.width; ++x) {
      for (int c = 0; c < 2; ++c) {
        const auto& src = c == 0 ? flow.dx : flow.dy;
        std::size_t n = 0;
        for (int j = -radius; j <= radius; ++j)
          for (int i = -radius; i <= radius; ++i) {
            const int xs = std::clamp(x + i, 0, flow.width - 1);
            const int ys = std::clamp(y + j, 0, flow.height - 1);
            vals[n++] = src[flow.idx(xs, ys)];
          }
        auto mid = vals.begin() + static_cast<long>(n / 2);
        std::nth_element(vals.begin(), mid, vals.begin() + static_cast<long>(n));
        (c == 0 ? out.dx : out.dy)[flow.idx(x, y)] = *mid;
      }
    }
  return out;
}

}  // namespace trajset
