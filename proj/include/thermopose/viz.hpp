#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "thermopose/io.hpp"
#include "thermopose/pipeline.hpp"

namespace thermopose {

struct Rgb {
  uint8_t r = 0, g = 0, b = 0;
};

/// 8-bit RGB canvas.
struct Canvas {
  int h = 0, w = 0;
  std::vector<uint8_t> px;  // h*w*3

  Canvas(int h_, int w_, Rgb fill = {0, 0, 0}) : h(h_), w(w_), px(size_t(h_) * w_ * 3) {
    for (size_t i = 0; i < px.size(); i += 3) {
      px[i] = fill.r;
      px[i + 1] = fill.g;
      px[i + 2] = fill.b;
    }
  }

  void set(int y, int x, Rgb c) {
    if (y < 0 || y >= h || x < 0 || x >= w) return;
    const size_t i = (size_t(y) * w + x) * 3;
    px[i] = c.r;
    px[i + 1] = c.g;
    px[i + 2] = c.b;
  }

  void save(const std::string& path) const { write_png8_rgb(path, px.data(), h, w); }
};

inline Canvas thermal_to_canvas(const Image2D& img) {
  Canvas c(img.h, img.w);
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x) {
      const float v = clamp(img.at(y, x), 0.f, 1.f);
      // warm monochrome ramp
      c.set(y, x, {uint8_t(v * 255), uint8_t(v * 200), uint8_t(v * 140)});
    }
  return c;
}

inline void draw_line(Canvas& c, Vec2 a, Vec2 b, Rgb color, int thickness = 1) {
  const float len = float(distance(a, b));
  const int steps = std::max(1, int(len * 2));
  for (int i = 0; i <= steps; ++i) {
    const float t = float(i) / steps;
    const int x = int(std::lround(a.x + (b.x - a.x) * t));
    const int y = int(std::lround(a.y + (b.y - a.y) * t));
    for (int dy = -(thickness / 2); dy <= thickness / 2; ++dy)
      for (int dx = -(thickness / 2); dx <= thickness / 2; ++dx) c.set(y + dy, x + dx, color);
  }
}

inline void draw_pose(Canvas& c, const Pose2D& pose, Rgb color, int thickness = 1) {
  for (auto [a, b] : skeleton_bones())
    draw_line(c, pose.joints[a], pose.joints[b], color, thickness);
}

/// Panel grid of ranked hypotheses over the thermal frame. The current pose
/// is drawn in cyan, each hypothesis in a rank-graded warm color.
inline Canvas render_hypothesis_panels(const ThermalFrame& frame, const Pose2D& current,
                                       std::vector<Hypothesis> hypotheses, int columns = 6) {
  std::sort(hypotheses.begin(), hypotheses.end(), [](const Hypothesis& a, const Hypothesis& b) {
    auto total = [](const Hypothesis& h) {
      double t = h.logp_torso + h.logp_type;
      for (double v : h.logp_joints) t += v;
      return t;
    };
    return total(a) > total(b);
  });
  const int rows = (int(hypotheses.size()) + columns - 1) / columns;
  const int pad = 2;
  Canvas grid(rows * (kFrameH + pad) - pad, columns * (kFrameW + pad) - pad, {40, 40, 40});
  for (size_t i = 0; i < hypotheses.size(); ++i) {
    Canvas panel = thermal_to_canvas(frame.img);
    draw_pose(panel, current, {0, 220, 220}, 1);
    const float rank = hypotheses.size() > 1 ? float(i) / (hypotheses.size() - 1) : 0.f;
    draw_pose(panel, hypotheses[i].pose, {255, uint8_t(60 + 160 * rank), 40}, 2);
    const int oy = int(i) / columns * (kFrameH + pad);
    const int ox = int(i) % columns * (kFrameW + pad);
    for (int y = 0; y < kFrameH; ++y)
      for (int x = 0; x < kFrameW; ++x) {
        const size_t src = (size_t(y) * kFrameW + x) * 3;
        const size_t dst = (size_t(oy + y) * grid.w + ox + x) * 3;
        grid.px[dst] = panel.px[src];
        grid.px[dst + 1] = panel.px[src + 1];
        grid.px[dst + 2] = panel.px[src + 2];
      }
  }
  return grid;
}

/// Minimal line plot (axes box plus polyline), for the intensity sweep.
inline Canvas plot_curve(const std::vector<double>& xs, const std::vector<double>& ys,
                         int width = 480, int height = 360) {
  Canvas c(height, width, {255, 255, 255});
  if (xs.empty() || xs.size() != ys.size()) return c;
  const int m = 40;  // margin
  double x0 = xs[0], x1 = xs[0], y0 = ys[0], y1 = ys[0];
  for (size_t i = 0; i < xs.size(); ++i) {
    x0 = std::min(x0, xs[i]);
    x1 = std::max(x1, xs[i]);
    y0 = std::min(y0, ys[i]);
    y1 = std::max(y1, ys[i]);
  }
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  const double ypad = 0.05 * (y1 - y0);
  y0 -= ypad;
  y1 += ypad;
  auto px = [&](double x) { return float(m + (x - x0) / (x1 - x0) * (width - 2 * m)); };
  auto py = [&](double y) { return float(height - m - (y - y0) / (y1 - y0) * (height - 2 * m)); };
  const Rgb axis{90, 90, 90}, line{200, 60, 30};
  draw_line(c, {float(m), float(m)}, {float(m), float(height - m)}, axis);
  draw_line(c, {float(m), float(height - m)}, {float(width - m), float(height - m)}, axis);
  for (size_t i = 0; i + 1 < xs.size(); ++i)
    draw_line(c, {px(xs[i]), py(ys[i])}, {px(xs[i + 1]), py(ys[i + 1])}, line, 2);
  for (size_t i = 0; i < xs.size(); ++i) {
    for (int dy = -2; dy <= 2; ++dy)
      for (int dx = -2; dx <= 2; ++dx)
        c.set(int(py(ys[i])) + dy, int(px(xs[i])) + dx, line);
  }
  return c;
}

}  // namespace thermopose
