#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace thermopose {

// Working resolution of the thermal camera / model input.
inline constexpr int kFrameH = 288;
inline constexpr int kFrameW = 384;
// Model output grids are 4x coarser.
inline constexpr int kGridH = 72;
inline constexpr int kGridW = 96;
inline constexpr int kGridStride = 4;
inline constexpr int kGridCells = kGridH * kGridW;

inline constexpr int kJointCount = 15;
inline constexpr int kFps = 15;
inline constexpr int kPastOffsetFrames = 45;  // 3 s at 15 fps

/// Invalid argument to an operation (bad sigma, bad k, ...).
struct ParamError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Malformed or inconsistent data on disk.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Bad run configuration.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Vec2 {
  float x = 0.f;
  float y = 0.f;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(Vec2 a, float s) { return {a.x * s, a.y * s}; }
inline bool operator==(Vec2 a, Vec2 b) { return a.x == b.x && a.y == b.y; }

inline double norm(Vec2 v) {
  const double x = v.x, y = v.y;
  return std::sqrt(x * x + y * y);
}

/// Euclidean distance with the subtraction done in double, so results agree
/// with scalar double-precision loops bit-for-bit.
inline double distance(Vec2 a, Vec2 b) {
  const double dx = double(a.x) - double(b.x);
  const double dy = double(a.y) - double(b.y);
  return std::sqrt(dx * dx + dy * dy);
}
inline bool is_finite(Vec2 v) { return std::isfinite(v.x) && std::isfinite(v.y); }

template <typename T>
inline T clamp(T v, T lo, T hi) {
  return std::min(std::max(v, lo), hi);
}

/// Dense single-channel float image, row-major.
struct Image2D {
  int h = 0;
  int w = 0;
  std::vector<float> v;

  Image2D() = default;
  Image2D(int h_, int w_, float fill = 0.f) : h(h_), w(w_), v(size_t(h_) * w_, fill) {}

  float& at(int y, int x) { return v[size_t(y) * w + x]; }
  float at(int y, int x) const { return v[size_t(y) * w + x]; }
  bool same_size(const Image2D& o) const { return h == o.h && w == o.w; }
};

/// One thermal frame: normalized radiometric intensity in [0,1].
struct ThermalFrame {
  Image2D img{kFrameH, kFrameW, 0.f};
  double timestamp = 0.0;  // seconds since clip start
};

inline uint64_t fnv1a64(std::string_view s, uint64_t h = 0xcbf29ce484222325ull) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hash_hex(uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace thermopose
