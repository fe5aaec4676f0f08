// Copyright 2026 trajset contributors
// Licensed under the terms of the Apache 2.0 License.
// See the LICENSE file in the project root for terms.
#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "trajset/errors.hpp"
#include "trajset/flow.hpp"
#include "trajset/image.hpp"
#include "trajset/io_util.hpp"

namespace trajset {

struct Vec2f {
  float x = 0.f;
  float y = 0.f;
};

struct TrackerParams {
  int traj_len = 15;           // L: steps per trajectory (L+1 points)
  int sample_stride = 5;       // dense sampling grid spacing, pixels
  double quality_frac = 0.001; // min-eigenvalue threshold, fraction of frame max
  double static_thresh = std::numbers::sqrt3;  // reject if point std below this (px)
  double erratic_frac = 0.7;   // reject if one step dominates the path
  double max_disp = 20.0;      // max step length in level-0 pixels
};

// One tracked point over traj_len+1 frames, in level-0 coordinates.
// points are rebuilt by accumulating displacements from points[0], so
// points[i+1] == points[i] + displacements[i] holds exactly.
struct Trajectory {
  int start_frame = 0;
  int level = 0;
  std::vector<Vec2f> points;
  std::vector<Vec2f> displacements;
};

// ---------------------------------------------------------------------------
// Dense sampling

// Minimum eigenvalue of the 3x3-summed gradient structure tensor, per pixel.
inline std::vector<float> min_eigenvalue_map(const GrayFrame& f) {
  const int w = f.width, h = f.height;
  std::vector<float> gx(static_cast<std::size_t>(w) * h), gy(gx.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      gx[f.width * static_cast<std::size_t>(y) + x] =
          0.5f * (clamp_sample(f, x + 1, y) - clamp_sample(f, x - 1, y));
      gy[f.width * static_cast<std::size_t>(y) + x] =
          0.5f * (clamp_sample(f, x, y + 1) - clamp_sample(f, x, y - 1));
    }
  std::vector<float> out(gx.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      float sxx = 0, sxy = 0, syy = 0;
      for (int j = -1; j <= 1; ++j)
        for (int i = -1; i <= 1; ++i) {
          const int xs = std::clamp(x + i, 0, w - 1);
          const int ys = std::clamp(y + j, 0, h - 1);
          const float ix = gx[static_cast<std::size_t>(ys) * w + xs];
          const float iy = gy[static_cast<std::size_t>(ys) * w + xs];
          sxx += ix * ix;
          sxy += ix * iy;
          syy += iy * iy;
        }
      const float tr = sxx + syy;
      const float d = std::sqrt((sxx - syy) * (sxx - syy) + 4 * sxy * sxy);
      out[static_cast<std::size_t>(y) * w + x] = 0.5f * (tr - d);
    }
  return out;
}

// Grid points at multiples of `stride` whose corner energy clears the
// quality threshold and that are not within stride/2 of an occupied point.
inline std::vector<Vec2f> sample_points(const GrayFrame& frame, int stride, double quality_frac,
                                        std::span<const Vec2f> occupied) {
  if (stride < 1) throw BadConfig("sample stride must be >= 1");
  const auto eig = min_eigenvalue_map(frame);
  float max_eig = 0.f;
  for (const float v : eig) max_eig = std::max(max_eig, v);
  const float thresh = static_cast<float>(quality_frac) * max_eig;
  const float excl_r2 = static_cast<float>(stride) * stride / 4.f;

  std::vector<Vec2f> out;
  for (int y = 0; y < frame.height; y += stride)
    for (int x = 0; x < frame.width; x += stride) {
      if (eig[static_cast<std::size_t>(y) * frame.width + x] <= thresh) continue;
      bool taken = false;
      for (const auto& o : occupied) {
        const float dx = o.x - x, dy = o.y - y;
        if (dx * dx + dy * dy <= excl_r2) {
          taken = true;
          break;
        }
      }
      if (!taken) out.push_back({static_cast<float>(x), static_cast<float>(y)});
    }
  return out;
}

// ---------------------------------------------------------------------------
// Tracking

struct AdvanceLimits {
  float margin = 0.f;    // low-confidence border width, pixels
  float max_step = 20.f; // termination threshold on one step, same units as flow
};

// One tracking step: move the point by the (median-filtered) flow sampled at
// its position. Returns nullopt when the trajectory terminates.
inline std::optional<Vec2f> advance_point(Vec2f p, const FlowField& flow,
                                          const AdvanceLimits& lim) {
  const auto [dx, dy] = sample_flow(flow, p.x, p.y);
  const Vec2f next{p.x + dx, p.y + dy};
  if (next.x < lim.margin || next.y < lim.margin ||
      next.x > static_cast<float>(flow.width - 1) - lim.margin ||
      next.y > static_cast<float>(flow.height - 1) - lim.margin)
    return std::nullopt;
  if (std::sqrt(dx * dx + dy * dy) > lim.max_step) return std::nullopt;
  return next;
}

// Prune a completed track and rescale it to level-0 coordinates.
// Rejects static tracks (coordinate std below static_thresh) and erratic
// tracks (one step longer than erratic_frac of the total path length).
inline std::optional<Trajectory> finalize(std::span<const Vec2f> level_points, int start_frame,
                                          int level, double inv_scale_x, double inv_scale_y,
                                          const TrackerParams& params) {
  const std::size_t n = level_points.size();
  if (n != static_cast<std::size_t>(params.traj_len) + 1)
    throw BadConfig("finalize: track must have traj_len+1 points");

  std::vector<Vec2f> pts(n);
  for (std::size_t i = 0; i < n; ++i) {
    pts[i].x = static_cast<float>(level_points[i].x * inv_scale_x);
    pts[i].y = static_cast<float>(level_points[i].y * inv_scale_y);
  }

  double mx = 0, my = 0;
  for (const auto& p : pts) {
    mx += p.x;
    my += p.y;
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double var = 0;
  for (const auto& p : pts) var += (p.x - mx) * (p.x - mx) + (p.y - my) * (p.y - my);
  var /= static_cast<double>(n);
  if (std::sqrt(var) < params.static_thresh) return std::nullopt;

  std::vector<Vec2f> disp(n - 1);
  double total_len = 0;
  double max_len = 0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    disp[i].x = pts[i + 1].x - pts[i].x;
    disp[i].y = pts[i + 1].y - pts[i].y;
    const double len = std::sqrt(double(disp[i].x) * disp[i].x + double(disp[i].y) * disp[i].y);
    total_len += len;
    max_len = std::max(max_len, len);
  }
  if (total_len <= 0.0 || max_len > params.erratic_frac * total_len) return std::nullopt;

  Trajectory t;
  t.start_frame = start_frame;
  t.level = level;
  t.displacements = std::move(disp);
  t.points.resize(n);
  t.points[0] = pts[0];
  for (std::size_t i = 0; i + 1 < n; ++i) {
    t.points[i + 1].x = t.points[i].x + t.displacements[i].x;
    t.points[i + 1].y = t.points[i].y + t.displacements[i].y;
  }
  return t;
}

// ---------------------------------------------------------------------------
// Whole-video driver

struct TrackOptions {
  TrackerParams tracker;
  FlowParams flow;
  PyramidParams pyramid;
  int median_kernel = 3;
  bool level0_only = false;
};

namespace detail {

struct ActiveTrack {
  int start_frame;
  std::vector<Vec2f> pts;  // level coordinates
};

struct LevelState {
  std::vector<ActiveTrack> active;
};

}  // namespace detail

struct TrackResult {
  std::vector<Trajectory> trajectories;
  int width = 0;
  int height = 0;
  int frame_count = 0;
};

// Track densely sampled points across the whole frame sequence, per pyramid
// level, emitting pruned trajectories in level-0 coordinates.
template <typename FrameRange>
TrackResult track_frames(const FrameRange& frames, const TrackOptions& opt) {
  TrackResult result;
  std::vector<detail::LevelState> states;
  Pyramid prev;
  const float margin = static_cast<float>(opt.flow.window / 2);

  auto seed_level = [&](const Pyramid& pyr, std::size_t level, int frame_index) {
    auto& state = states[level];
    std::vector<Vec2f> occupied;
    occupied.reserve(state.active.size());
    for (const auto& tr : state.active) occupied.push_back(tr.pts.back());
    const auto& img = pyr.levels[level];
    auto pts = sample_points(img, opt.tracker.sample_stride, opt.tracker.quality_frac, occupied);
    for (const auto& p : pts) {
      if (p.x < margin || p.y < margin || p.x > static_cast<float>(img.width - 1) - margin ||
          p.y > static_cast<float>(img.height - 1) - margin)
        continue;  // would terminate immediately in the low-confidence border
      state.active.push_back({frame_index, {p}});
    }
  };

  bool first = true;
  for (const GrayFrame& frame : frames) {
    if (result.frame_count == 0) {
      result.width = frame.width;
      result.height = frame.height;
    } else if (frame.width != result.width || frame.height != result.height) {
      throw InconsistentDimensions("track_frames: frame size changed mid-stream");
    }
    ++result.frame_count;

    Pyramid pyr = build_pyramid(frame, opt.pyramid);
    const std::size_t n_levels = opt.level0_only ? 1 : pyr.levels.size();
    if (first) {
      states.resize(n_levels);
      for (std::size_t l = 0; l < n_levels; ++l) seed_level(pyr, l, frame.frame_index);
      prev = std::move(pyr);
      first = false;
      continue;
    }

    for (std::size_t l = 0; l < n_levels && l < prev.levels.size(); ++l) {
      const double inv_sx = pyr.inv_scale_x(l);
      const double inv_sy = pyr.inv_scale_y(l);
      FlowField flow = median_filter_flow(
          estimate_flow(prev.levels[l], pyr.levels[l], opt.flow), opt.median_kernel);
      const AdvanceLimits lim{
          margin, static_cast<float>(opt.tracker.max_disp / std::max(inv_sx, inv_sy))};

      auto& state = states[l];
      std::vector<detail::ActiveTrack> kept;
      kept.reserve(state.active.size());
      for (auto& tr : state.active) {
        const auto next = advance_point(tr.pts.back(), flow, lim);
        if (!next) continue;
        tr.pts.push_back(*next);
        if (tr.pts.size() == static_cast<std::size_t>(opt.tracker.traj_len) + 1) {
          if (auto done = finalize(tr.pts, tr.start_frame, static_cast<int>(l), inv_sx, inv_sy,
                                   opt.tracker))
            result.trajectories.push_back(std::move(*done));
        } else {
          kept.push_back(std::move(tr));
        }
      }
      state.active = std::move(kept);
      seed_level(pyr, l, frame.frame_index);
    }
    prev = std::move(pyr);
  }
  return result;
}

// ---------------------------------------------------------------------------
// TRJ1 trajectory dump

inline void write_trj(const std::string& path, const std::vector<Trajectory>& trajs, int traj_len) {
  std::string out = "TRJ1";
  io::put_u32(out, static_cast<std::uint32_t>(traj_len));
  io::put_u64(out, trajs.size());
  for (const auto& t : trajs) {
    io::put_u32(out, static_cast<std::uint32_t>(t.start_frame));
    io::put_u32(out, static_cast<std::uint32_t>(t.level));
    for (const auto& p : t.points) {
      io::put_f32(out, p.x);
      io::put_f32(out, p.y);
    }
  }
  io::write_file(path, out);
}

inline std::vector<Trajectory> read_trj(const std::string& path, int* traj_len_out = nullptr) {
  const auto bytes = io::read_file(path);
  io::Reader r(bytes.data(), bytes.size(), path);
  r.expect_magic("TRJ1");
  const int traj_len = static_cast<int>(r.u32());
  const std::uint64_t count = r.u64();
  if (traj_len_out) *traj_len_out = traj_len;
  std::vector<Trajectory> out;
  out.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    Trajectory t;
    t.start_frame = static_cast<int>(r.u32());
    t.level = static_cast<int>(r.u32());
    t.points.resize(static_cast<std::size_t>(traj_len) + 1);
    for (auto& p : t.points) {
      p.x = r.f32();
      p.y = r.f32();
    }
    t.displacements.resize(static_cast<std::size_t>(traj_len));
    for (int j = 0; j < traj_len; ++j) {
      t.displacements[static_cast<std::size_t>(j)].x =
          t.points[static_cast<std::size_t>(j) + 1].x - t.points[static_cast<std::size_t>(j)].x;
      t.displacements[static_cast<std::size_t>(j)].y =
          t.points[static_cast<std::size_t>(j) + 1].y - t.points[static_cast<std::size_t>(j)].y;
    }
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace trajset
