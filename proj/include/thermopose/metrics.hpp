#pragma once

#include <algorithm>
#include <vector>

#include "thermopose/skeleton.hpp"

namespace thermopose {

/// Mean per-joint position error in pixels. Joints are averaged over the
/// ground truth's validity mask; a ground truth with no valid joints is an
/// error.
inline double mpjpe(const Pose2D& pred, const Pose2D& gt) {
  double sum = 0;
  int n = 0;
  for (int j = 0; j < kJointCount; ++j) {
    if (!gt.valid[j]) continue;
    sum += distance(pred.joints[j], gt.joints[j]);
    ++n;
  }
  if (n == 0) throw ParamError("mpjpe: ground truth has no valid joints");
  return sum / n;
}

/// Mean MPJPE of the k predictions closest to the ground truth.
inline double topk_mpjpe(const std::vector<Pose2D>& preds, const Pose2D& gt, int k) {
  if (k <= 0) throw ParamError("topk_mpjpe: k must be positive");
  if (int(preds.size()) < k) throw ParamError("topk_mpjpe: fewer predictions than k");
  std::vector<double> errs(preds.size());
  for (size_t i = 0; i < preds.size(); ++i) errs[i] = mpjpe(preds[i], gt);
  std::sort(errs.begin(), errs.end());
  double sum = 0;
  for (int i = 0; i < k; ++i) sum += errs[i];
  return sum / k;
}

}  // namespace thermopose
