#pragma once

#include <array>
#include <cmath>

#include "thermopose/skeleton.hpp"

namespace thermopose {

struct Vec3 {
  double x = 0, y = 0, z = 0;
};

/// 3D body pose in some camera's coordinates.
struct Pose3D {
  std::array<Vec3, kJointCount> joints{};
  std::array<bool, kJointCount> valid{};
  Pose3D() { valid.fill(true); }
};

/// Rigid camera-to-world transform: X_world = R * x + t.
struct Extrinsics {
  std::array<std::array<double, 3>, 3> r = {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
  Vec3 t;
};

inline Vec3 apply(const Extrinsics& e, Vec3 p) {
  return {e.r[0][0] * p.x + e.r[0][1] * p.y + e.r[0][2] * p.z + e.t.x,
          e.r[1][0] * p.x + e.r[1][1] * p.y + e.r[1][2] * p.z + e.t.y,
          e.r[2][0] * p.x + e.r[2][1] * p.y + e.r[2][2] * p.z + e.t.z};
}

/// Pinhole model plus the native sensor resolution it was calibrated at.
struct Intrinsics {
  double fx = 1, fy = 1, cx = 0, cy = 0;
  int width = kFrameW, height = kFrameH;
};

/// Least-squares scale alignment of two monocular 3D poses mapped into a
/// shared world frame. The joint (a,b) objective is degenerate at (0,0), so
/// camera 1 anchors the metric scale: a is fixed at 1 and
/// b = <P,Q> / <Q,Q> over jointly valid joints.
inline std::pair<double, double> triangulate_scales(const Pose3D& p_cam1, const Pose3D& q_cam2,
                                                    const Extrinsics& cam1,
                                                    const Extrinsics& cam2) {
  double pq = 0, qq = 0;
  int n = 0;
  for (int j = 0; j < kJointCount; ++j) {
    if (!p_cam1.valid[j] || !q_cam2.valid[j]) continue;
    const Vec3 P = apply(cam1, p_cam1.joints[j]);
    const Vec3 Q = apply(cam2, q_cam2.joints[j]);
    pq += P.x * Q.x + P.y * Q.y + P.z * Q.z;
    qq += Q.x * Q.x + Q.y * Q.y + Q.z * Q.z;
    ++n;
  }
  if (n < 3) throw ParamError("triangulate_scales: fewer than 3 jointly valid joints");
  if (qq <= 0) throw ParamError("triangulate_scales: degenerate second pose (<Q,Q> = 0)");
  return {1.0, pq / qq};
}

/// Pinhole projection to the calibrated sensor, rescaled to 288x384. Joints
/// with non-positive depth are marked invalid.
inline Pose2D project_to_image(const Pose3D& pose, const Intrinsics& K) {
  std::array<Vec2, kJointCount> pts;
  std::array<bool, kJointCount> valid;
  const double sx = double(kFrameW) / K.width;
  const double sy = double(kFrameH) / K.height;
  for (int j = 0; j < kJointCount; ++j) {
    const Vec3& P = pose.joints[j];
    if (!pose.valid[j] || P.z <= 0) {
      valid[j] = false;
      pts[j] = {0.f, 0.f};
      continue;
    }
    valid[j] = true;
    pts[j] = {float((K.fx * P.x / P.z + K.cx) * sx), float((K.fy * P.y / P.z + K.cy) * sy)};
  }
  return make_pose(pts, valid);
}

}  // namespace thermopose
