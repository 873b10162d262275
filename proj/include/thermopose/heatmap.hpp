#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "thermopose/common.hpp"
#include "thermopose/rng.hpp"

namespace thermopose {

/// Stack of non-negative grids over image space. Used both for encoding 2D
/// points as Gaussian bumps (inputs) and as categorical distributions over
/// grid cells (outputs). When `normalized`, every channel sums to 1.
struct HeatmapGrid {
  int channels = 0;
  int h = 0;
  int w = 0;
  std::vector<float> v;  // channel-major, row-major within a channel
  bool normalized = false;

  HeatmapGrid() = default;
  HeatmapGrid(int c, int h_, int w_) : channels(c), h(h_), w(w_), v(size_t(c) * h_ * w_, 0.f) {}

  float& at(int c, int y, int x) { return v[(size_t(c) * h + y) * w + x]; }
  float at(int c, int y, int x) const { return v[(size_t(c) * h + y) * w + x]; }
  const float* channel(int c) const { return v.data() + size_t(c) * h * w; }
  float* channel(int c) { return v.data() + size_t(c) * h * w; }
};

// Grid <-> pixel mapping. Cells of a 72x96 grid cover 4x4 pixel tiles; the
// pixel coordinate of cell (gy,gx) is its tile center (gx*4+2, gy*4+2). Grids
// at full 288x384 resolution map cell indices to pixel coordinates directly.
inline Vec2 grid_cell_to_pixel(int gy, int gx, int h, int w) {
  if (h == kFrameH && w == kFrameW) return {float(gx), float(gy)};
  const float sy = float(kFrameH) / h, sx = float(kFrameW) / w;
  return {gx * sx + sx / 2.f, gy * sy + sy / 2.f};
}

/// Cell containing a pixel coordinate (clamped into the grid).
inline std::pair<int, int> pixel_to_grid_cell(Vec2 p, int h, int w) {
  const float sy = float(kFrameH) / h, sx = float(kFrameW) / w;
  int gx = int(std::floor(p.x / sx));
  int gy = int(std::floor(p.y / sy));
  return {clamp(gy, 0, h - 1), clamp(gx, 0, w - 1)};
}

/// Continuous grid coordinate whose cell-center mapping inverts
/// grid_cell_to_pixel.
inline Vec2 pixel_to_grid_continuous(Vec2 p, int h, int w) {
  if (h == kFrameH && w == kFrameW) return p;
  const float sy = float(kFrameH) / h, sx = float(kFrameW) / w;
  return {(p.x - sx / 2.f) / sx, (p.y - sy / 2.f) / sy};
}

inline void normalize_channel(HeatmapGrid& g, int c) {
  double sum = 0;
  float* ch = g.channel(c);
  const size_t n = size_t(g.h) * g.w;
  for (size_t i = 0; i < n; ++i) sum += ch[i];
  if (sum > 0)
    for (size_t i = 0; i < n; ++i) ch[i] = float(ch[i] / sum);
}

inline void normalize(HeatmapGrid& g) {
  for (int c = 0; c < g.channels; ++c) normalize_channel(g, c);
  g.normalized = true;
}

/// Renders one isotropic Gaussian bump per point, each channel normalized to
/// sum 1. Points are pixel coordinates; `sigma` is measured in cells of the
/// target grid (the default bump is sigma=2 on 72x96 grids, i.e. 8 px).
/// Points outside the frame produce a bump clamped to the nearest border cell.
inline HeatmapGrid render_heatmap(const std::vector<Vec2>& points, float sigma, int out_h,
                                  int out_w) {
  if (!(sigma > 0.f)) throw ParamError("render_heatmap: sigma must be positive");
  if (!((out_h == kFrameH && out_w == kFrameW) || (out_h == kGridH && out_w == kGridW)))
    throw ParamError("render_heatmap: unsupported grid size");
  HeatmapGrid g(int(points.size()), out_h, out_w);
  const int radius = int(std::ceil(4 * sigma));
  for (size_t i = 0; i < points.size(); ++i) {
    Vec2 p = points[i];
    if (!is_finite(p)) throw ParamError("render_heatmap: non-finite point");
    Vec2 c = pixel_to_grid_continuous(p, out_h, out_w);
    c.x = clamp(c.x, 0.f, float(out_w - 1));
    c.y = clamp(c.y, 0.f, float(out_h - 1));
    const int y0 = std::max(0, int(std::floor(c.y)) - radius);
    const int y1 = std::min(out_h - 1, int(std::ceil(c.y)) + radius);
    const int x0 = std::max(0, int(std::floor(c.x)) - radius);
    const int x1 = std::min(out_w - 1, int(std::ceil(c.x)) + radius);
    const float inv = 1.f / (2.f * sigma * sigma);
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        const float dx = x - c.x, dy = y - c.y;
        g.at(int(i), y, x) = std::exp(-(dx * dx + dy * dy) * inv);
      }
  }
  normalize(g);
  return g;
}

struct DecodedPoints {
  std::vector<Vec2> points;      // pixel coordinates
  std::vector<bool> degenerate;  // true when a channel was constant
};

/// Picks the argmax cell of each channel and maps it to pixel coordinates.
/// Ties break to the smallest row-major index. Constant channels (all values
/// equal, e.g. all-zero or uniform) decode to the grid-center cell and are
/// flagged degenerate.
inline DecodedPoints decode_argmax(const HeatmapGrid& g) {
  if (g.channels < 1) throw ParamError("decode_argmax: no channels");
  DecodedPoints out;
  out.points.resize(g.channels);
  out.degenerate.resize(g.channels);
  const size_t n = size_t(g.h) * g.w;
  for (int c = 0; c < g.channels; ++c) {
    const float* ch = g.channel(c);
    size_t best = 0;
    float lo = ch[0], hi = ch[0];
    for (size_t i = 0; i < n; ++i) {
      if (!std::isfinite(ch[i])) throw ParamError("decode_argmax: non-finite value");
      if (ch[i] > hi) hi = ch[i], best = i;
      if (ch[i] < lo) lo = ch[i];
    }
    const bool degenerate = (lo == hi);
    if (degenerate) best = size_t(g.h / 2) * g.w + g.w / 2;
    out.points[c] = grid_cell_to_pixel(int(best / g.w), int(best % g.w), g.h, g.w);
    out.degenerate[c] = degenerate;
  }
  return out;
}

/// Draws a cell from the categorical distribution of channel `c` and returns
/// its center pixel coordinate. Unnormalized channels are normalized on the
/// fly; all-zero channels are an error.
inline Vec2 sample_from_heatmap(const HeatmapGrid& g, std::mt19937_64& rng, int c = 0) {
  const float* ch = g.channel(c);
  const size_t n = size_t(g.h) * g.w;
  double total = 0;
  for (size_t i = 0; i < n; ++i) {
    if (ch[i] < 0 || !std::isfinite(ch[i]))
      throw ParamError("sample_from_heatmap: invalid channel value");
    total += ch[i];
  }
  if (total <= 0) throw ParamError("sample_from_heatmap: all-zero channel");
  const double u = uniform_real(rng, 0.0, 1.0) * total;
  double acc = 0;
  size_t pick = n - 1;
  for (size_t i = 0; i < n; ++i) {
    acc += ch[i];
    if (u < acc) {
      pick = i;
      break;
    }
  }
  return grid_cell_to_pixel(int(pick / g.w), int(pick % g.w), g.h, g.w);
}

inline Vec2 sample_from_heatmap(const HeatmapGrid& g, uint64_t seed, int c = 0) {
  auto rng = make_rng(seed);
  return sample_from_heatmap(g, rng, c);
}

/// Bilinear resize; normalized inputs stay normalized (channels re-sum to 1).
inline HeatmapGrid resize_bilinear(const HeatmapGrid& g, int out_h, int out_w) {
  HeatmapGrid out(g.channels, out_h, out_w);
  const float sy = float(g.h) / out_h, sx = float(g.w) / out_w;
  for (int c = 0; c < g.channels; ++c) {
    for (int y = 0; y < out_h; ++y) {
      const float fy = clamp((y + 0.5f) * sy - 0.5f, 0.f, float(g.h - 1));
      const int y0 = int(fy), y1 = std::min(y0 + 1, g.h - 1);
      const float wy = fy - y0;
      for (int x = 0; x < out_w; ++x) {
        const float fx = clamp((x + 0.5f) * sx - 0.5f, 0.f, float(g.w - 1));
        const int x0 = int(fx), x1 = std::min(x0 + 1, g.w - 1);
        const float wx = fx - x0;
        out.at(c, y, x) = (1 - wy) * ((1 - wx) * g.at(c, y0, x0) + wx * g.at(c, y0, x1)) +
                          wy * ((1 - wx) * g.at(c, y1, x0) + wx * g.at(c, y1, x1));
      }
    }
  }
  if (g.normalized) normalize(out);
  return out;
}

}  // namespace thermopose
