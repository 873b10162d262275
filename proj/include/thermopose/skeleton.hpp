#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "thermopose/common.hpp"

namespace thermopose {

/// 15-joint skeleton: the first 15 joints of the OpenPose body_25 convention.
/// The torso joint is MidHip and anchors every pose.
struct Skeleton {
  int joint_count = kJointCount;
  int torso_index = 8;  // MidHip
  std::array<const char*, kJointCount> joint_names = {
      "Nose",      "Neck",   "RShoulder", "RElbow", "RWrist",
      "LShoulder", "LElbow", "LWrist",    "MidHip", "RHip",
      "RKnee",     "RAnkle", "LHip",      "LKnee",  "LAnkle"};
  // Left/right limb pairs, swapped on horizontal flip.
  std::array<std::pair<int, int>, 6> flip_pairs = {
      {{2, 5}, {3, 6}, {4, 7}, {9, 12}, {10, 13}, {11, 14}}};
};

inline const Skeleton& skeleton() {
  static const Skeleton s;
  return s;
}

/// Bone segments used for rendering stick figures and overlays.
inline const std::vector<std::pair<int, int>>& skeleton_bones() {
  static const std::vector<std::pair<int, int>> bones = {
      {0, 1}, {1, 2}, {2, 3}, {3, 4},  {1, 5},  {5, 6},   {6, 7},
      {1, 8}, {8, 9}, {9, 10}, {10, 11}, {8, 12}, {12, 13}, {13, 14}};
  return bones;
}

/// 2D body pose in pixel coordinates at 288x384.
struct Pose2D {
  std::array<Vec2, kJointCount> joints{};
  std::array<bool, kJointCount> valid{};

  Pose2D() { valid.fill(true); }
  Vec2 torso() const { return joints[skeleton().torso_index]; }
};

/// Builds a pose, clamping valid joints just inside [0,W)x[0,H).
/// Non-finite coordinates are rejected.
inline Pose2D make_pose(const std::array<Vec2, kJointCount>& joints,
                        const std::array<bool, kJointCount>& valid) {
  Pose2D p;
  for (int j = 0; j < kJointCount; ++j) {
    if (!is_finite(joints[j])) throw ParamError("make_pose: non-finite joint coordinate");
    p.valid[j] = valid[j];
    Vec2 v = joints[j];
    if (valid[j]) {
      v.x = clamp(v.x, 0.f, float(kFrameW) - 1e-3f);
      v.y = clamp(v.y, 0.f, float(kFrameH) - 1e-3f);
    }
    p.joints[j] = v;
  }
  return p;
}

inline Pose2D make_pose(const std::array<Vec2, kJointCount>& joints) {
  std::array<bool, kJointCount> valid;
  valid.fill(true);
  return make_pose(joints, valid);
}

inline Pose2D translate(const Pose2D& p, Vec2 off) {
  Pose2D out = p;
  for (auto& j : out.joints) j = j + off;
  return out;
}

inline Pose2D clamp_to_frame(const Pose2D& p) {
  Pose2D out = p;
  for (auto& j : out.joints) {
    j.x = clamp(j.x, 0.f, float(kFrameW) - 1e-3f);
    j.y = clamp(j.y, 0.f, float(kFrameH) - 1e-3f);
  }
  return out;
}

/// Non-torso joints in skeleton order (J-1 entries).
inline std::array<Vec2, kJointCount - 1> split_pose(const Pose2D& p) {
  std::array<Vec2, kJointCount - 1> rest;
  int out = 0;
  for (int j = 0; j < kJointCount; ++j)
    if (j != skeleton().torso_index) rest[out++] = p.joints[j];
  return rest;
}

/// Inverse of split_pose: 14 non-torso joints plus a torso position.
inline Pose2D compose_pose(const std::array<Vec2, kJointCount - 1>& rest, Vec2 torso) {
  Pose2D p;
  int in = 0;
  for (int j = 0; j < kJointCount; ++j)
    p.joints[j] = (j == skeleton().torso_index) ? torso : rest[in++];
  return p;
}

inline Pose2D compose_pose(const std::vector<Vec2>& rest, Vec2 torso) {
  if (rest.size() != kJointCount - 1)
    throw ParamError("compose_pose: expected " + std::to_string(kJointCount - 1) + " joints, got " +
                     std::to_string(rest.size()));
  std::array<Vec2, kJointCount - 1> arr;
  std::copy(rest.begin(), rest.end(), arr.begin());
  return compose_pose(arr, torso);
}

/// Mirrors a pose about the vertical line x = (W-1)/2 and swaps left/right
/// joints so labels stay anatomically correct.
inline Pose2D flip_pose(const Pose2D& p) {
  Pose2D out = p;
  for (int j = 0; j < kJointCount; ++j) out.joints[j].x = float(kFrameW) - 1.f - p.joints[j].x;
  for (auto [l, r] : skeleton().flip_pairs) {
    std::swap(out.joints[l], out.joints[r]);
    std::swap(out.valid[l], out.valid[r]);
  }
  return out;
}

inline nlohmann::json pose_to_json(const Pose2D& p) {
  nlohmann::json joints = nlohmann::json::array();
  nlohmann::json valid = nlohmann::json::array();
  for (int j = 0; j < kJointCount; ++j) {
    joints.push_back({p.joints[j].x, p.joints[j].y});
    valid.push_back(p.valid[j]);
  }
  return {{"joints", joints}, {"valid", valid}};
}

inline Pose2D pose_from_json(const nlohmann::json& j) {
  const auto& joints = j.at("joints");
  if (joints.size() != kJointCount) throw DataError("pose_from_json: wrong joint count");
  std::array<Vec2, kJointCount> pts;
  std::array<bool, kJointCount> valid;
  valid.fill(true);
  for (int i = 0; i < kJointCount; ++i)
    pts[i] = {joints[i].at(0).get<float>(), joints[i].at(1).get<float>()};
  if (j.contains("valid")) {
    const auto& v = j.at("valid");
    if (v.size() != kJointCount) throw DataError("pose_from_json: wrong validity count");
    for (int i = 0; i < kJointCount; ++i) valid[i] = v[i].get<bool>();
  }
  return make_pose(pts, valid);
}

}  // namespace thermopose
