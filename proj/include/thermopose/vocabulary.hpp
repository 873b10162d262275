#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include <json.hpp>

#include "thermopose/rng.hpp"
#include "thermopose/skeleton.hpp"

namespace thermopose {

/// Torso-aligned pose as a 2(J-1) vector: every non-torso joint minus the
/// torso coordinate, flattened (x,y) in skeleton order. No scale or rotation
/// normalization.
inline std::vector<double> pose_to_vector(const Pose2D& p) {
  if (!p.valid[skeleton().torso_index]) throw ParamError("pose_to_vector: invalid torso joint");
  const Vec2 t = p.torso();
  std::vector<double> v;
  v.reserve(2 * (kJointCount - 1));
  for (int j = 0; j < kJointCount; ++j) {
    if (j == skeleton().torso_index) continue;
    v.push_back(double(p.joints[j].x) - t.x);
    v.push_back(double(p.joints[j].y) - t.y);
  }
  return v;
}

/// Inverse of pose_to_vector at torso position r.
inline Pose2D vector_to_pose(const std::vector<double>& v, Vec2 r) {
  if (v.size() != 2 * (kJointCount - 1)) throw ParamError("vector_to_pose: wrong dimension");
  std::vector<Vec2> rest(kJointCount - 1);
  for (int j = 0; j < kJointCount - 1; ++j)
    rest[j] = {float(v[2 * j] + r.x), float(v[2 * j + 1] + r.y)};
  return compose_pose(rest, r);
}

inline double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

/// K-means pose vocabulary. Centers are torso-relative offsets; index z is
/// the pose type.
struct PoseTypeVocabulary {
  int k = 0;
  std::vector<std::vector<double>> centers;  // k x 28
  std::vector<int> member_counts;
  uint64_t fit_seed = 0;
  double inertia = 0;
  std::vector<double> iteration_inertia;  // Lloyd objective per iteration

  bool fitted() const { return k > 0 && int(centers.size()) == k; }
};

inline int nearest_center(const std::vector<std::vector<double>>& centers,
                          const std::vector<double>& v) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (size_t c = 0; c < centers.size(); ++c) {
    const double d = sq_dist(centers[c], v);
    if (d < best_d) {
      best_d = d;
      best = int(c);
    }
  }
  return best;
}

/// Lloyd's K-means with k-means++ seeding. Runs until the relative inertia
/// change drops below 1e-6 or 100 iterations. Empty clusters are re-seeded to
/// the point farthest from its assigned center. Deterministic per seed.
inline PoseTypeVocabulary build_vocabulary(const std::vector<Pose2D>& poses, int k,
                                           uint64_t seed) {
  if (k <= 0) throw ParamError("build_vocabulary: k must be positive");
  if (int(poses.size()) < k) throw ParamError("build_vocabulary: fewer poses than clusters");
  const size_t n = poses.size();
  std::vector<std::vector<double>> pts(n);
  for (size_t i = 0; i < n; ++i) pts[i] = pose_to_vector(poses[i]);
  const size_t dim = pts[0].size();
  auto rng = make_rng(seed);

  // k-means++ seeding
  std::vector<std::vector<double>> centers;
  centers.reserve(k);
  centers.push_back(pts[uniform_int(rng, 0, int64_t(n) - 1)]);
  std::vector<double> d2(n);
  for (int c = 1; c < k; ++c) {
    double total = 0;
    for (size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& ctr : centers) best = std::min(best, sq_dist(ctr, pts[i]));
      d2[i] = best;
      total += best;
    }
    size_t pick = 0;
    if (total > 0) {
      const double u = uniform_real(rng, 0.0, 1.0) * total;
      double acc = 0;
      pick = n - 1;
      for (size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (u < acc) {
          pick = i;
          break;
        }
      }
    } else {
      pick = size_t(uniform_int(rng, 0, int64_t(n) - 1));
    }
    centers.push_back(pts[pick]);
  }

  std::vector<int> assign(n, 0);
  std::vector<int> counts(k, 0);
  PoseTypeVocabulary vocab;
  vocab.k = k;
  vocab.fit_seed = seed;

  double prev_inertia = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < 100; ++iter) {
    double inertia = 0;
    for (size_t i = 0; i < n; ++i) {
      assign[i] = nearest_center(centers, pts[i]);
      inertia += sq_dist(centers[assign[i]], pts[i]);
    }
    vocab.iteration_inertia.push_back(inertia);

    std::vector<std::vector<double>> sums(k, std::vector<double>(dim, 0.0));
    std::fill(counts.begin(), counts.end(), 0);
    for (size_t i = 0; i < n; ++i) {
      ++counts[assign[i]];
      for (size_t d = 0; d < dim; ++d) sums[assign[i]][d] += pts[i][d];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        for (size_t d = 0; d < dim; ++d) centers[c][d] = sums[c][d] / counts[c];
      } else {
        // farthest-point repair keeps every cluster populated
        size_t far = 0;
        double far_d = -1;
        for (size_t i = 0; i < n; ++i) {
          const double d = sq_dist(centers[assign[i]], pts[i]);
          if (d > far_d) {
            far_d = d;
            far = i;
          }
        }
        centers[c] = pts[far];
        assign[far] = c;
        counts[c] = 1;
      }
    }
    if (std::isfinite(prev_inertia) &&
        std::abs(prev_inertia - inertia) <= 1e-6 * std::max(prev_inertia, 1e-30))
      break;
    prev_inertia = inertia;
  }

  // final assignment against the converged centers
  std::fill(counts.begin(), counts.end(), 0);
  double inertia = 0;
  for (size_t i = 0; i < n; ++i) {
    const int c = nearest_center(centers, pts[i]);
    ++counts[c];
    inertia += sq_dist(centers[c], pts[i]);
  }
  vocab.centers = std::move(centers);
  vocab.member_counts = std::move(counts);
  vocab.inertia = inertia;
  return vocab;
}

/// Index of the nearest cluster center; ties take the smallest index.
inline int assign_type(const Pose2D& p, const PoseTypeVocabulary& vocab) {
  if (!vocab.fitted()) throw ParamError("assign_type: vocabulary not fitted");
  return nearest_center(vocab.centers, pose_to_vector(p));
}

/// Paints cluster z's center pose at torso position r.
inline Pose2D center_pose(const PoseTypeVocabulary& vocab, int z, Vec2 r) {
  if (z < 0 || z >= vocab.k) throw ParamError("center_pose: type index out of range");
  return vector_to_pose(vocab.centers[z], r);
}

inline nlohmann::json vocabulary_to_json(const PoseTypeVocabulary& v) {
  nlohmann::json centers = nlohmann::json::array();
  for (const auto& c : v.centers) {
    nlohmann::json joints = nlohmann::json::array();
    for (size_t j = 0; j + 1 < c.size(); j += 2) joints.push_back({c[j], c[j + 1]});
    centers.push_back(joints);
  }
  return {{"k", v.k},
          {"fit_seed", v.fit_seed},
          {"inertia", v.inertia},
          {"centers", centers},
          {"member_counts", v.member_counts}};
}

inline PoseTypeVocabulary vocabulary_from_json(const nlohmann::json& j) {
  PoseTypeVocabulary v;
  v.k = j.at("k").get<int>();
  v.fit_seed = j.at("fit_seed").get<uint64_t>();
  v.inertia = j.at("inertia").get<double>();
  for (const auto& c : j.at("centers")) {
    std::vector<double> vec;
    for (const auto& xy : c) {
      vec.push_back(xy.at(0).get<double>());
      vec.push_back(xy.at(1).get<double>());
    }
    if (vec.size() != 2 * (kJointCount - 1)) throw DataError("vocabulary: bad center dimension");
    v.centers.push_back(std::move(vec));
  }
  v.member_counts = j.at("member_counts").get<std::vector<int>>();
  if (int(v.centers.size()) != v.k) throw DataError("vocabulary: center count mismatch");
  return v;
}

}  // namespace thermopose
