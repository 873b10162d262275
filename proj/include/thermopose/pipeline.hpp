#pragma once

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <vector>

#include <json.hpp>

#include "thermopose/models.hpp"

namespace thermopose {

struct Hypothesis {
  Pose2D pose;
  Vec2 torso;
  int type = 0;
  double logp_torso = 0;
  double logp_type = 0;  // under the full type distribution, before top-k
  std::array<double, kJointCount - 1> logp_joints{};
};

struct InferenceResult {
  std::vector<Hypothesis> hypotheses;
  int m = 0;
  int topk = 0;
  uint64_t seed = 0;
};

namespace detail {

inline int sample_cell(const HeatmapGrid& g, std::mt19937_64& rng) {
  double total = 0;
  for (int i = 0; i < kGridCells; ++i) total += g.v[i];
  if (total <= 0) {
    std::fprintf(stderr, "warning: degenerate goal map, sampling uniformly\n");
    return int(uniform_int(rng, 0, kGridCells - 1));
  }
  const double u = uniform_real(rng, 0.0, 1.0) * total;
  double acc = 0;
  for (int i = 0; i < kGridCells; ++i) {
    acc += g.v[i];
    if (u < acc) return i;
  }
  return kGridCells - 1;
}

/// Indices of the k largest probabilities; ties resolve to smaller indices.
inline std::vector<int> topk_indices(const float* logp, int k_total, int k) {
  std::vector<int> idx(k_total);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](int a, int b) { return logp[a] > logp[b]; });
  idx.resize(std::min(k, k_total));
  return idx;
}

}  // namespace detail

/// Full three-stage stochastic inference: M torso samples from GoalNet, one
/// top-k-restricted type draw and one argmax pose decode per sample.
/// Deterministic per seed.
inline InferenceResult infer_past(GoalModel& goal, TypeModel& type_m, PoseModel& pose_m,
                                  const PoseTypeVocabulary& vocab, const ThermalFrame& frame,
                                  const Pose2D& current, int M = 30, int topk = 5,
                                  uint64_t seed = 0) {
  if (M <= 0) throw ParamError("infer_past: M must be positive");
  if (topk <= 0 || topk > vocab.k) throw ParamError("infer_past: topk out of range");
  auto rng = make_rng(derive_seed(seed, 0x1F));

  InferenceResult result;
  result.m = M;
  result.topk = topk;
  result.seed = seed;
  result.hypotheses.resize(M);

  // stage 1: goal distribution, sampled M times
  const HeatmapGrid goal_map = goal.forward(frame, current);
  std::vector<int> cells(M);
  for (int i = 0; i < M; ++i) {
    cells[i] = detail::sample_cell(goal_map, rng);
    auto& h = result.hypotheses[i];
    h.torso = grid_cell_to_pixel(cells[i] / kGridW, cells[i] % kGridW, kGridH, kGridW);
    h.logp_torso = std::log(std::max(double(goal_map.v[cells[i]]), kProbClamp));
  }

  // stage 2: type distributions for all sampled positions in one batch
  nn::Tensor type_input({M, kTypeChannels, kGridH, kGridW});
  {
    std::vector<float> common(size_t(kGoalChannels) * kGridCells);
    assemble_goal_input(common.data(), frame, current);
    for (int i = 0; i < M; ++i) {
      float* slot = type_input.data.data() + size_t(i) * kTypeChannels * kGridCells;
      std::copy(common.begin(), common.end(), slot);
      detail::fill_point_channels(slot + size_t(kGoalChannels) * kGridCells,
                                  &result.hypotheses[i].torso, 1);
    }
  }
  auto type_logp = type_m.batch_logp(std::move(type_input));
  for (int i = 0; i < M; ++i) {
    const float* row = type_logp->value.data.data() + size_t(i) * vocab.k;
    const auto top = detail::topk_indices(row, vocab.k, topk);
    double norm = 0;
    for (int z : top) norm += std::exp(double(row[z]));
    const double u = uniform_real(rng, 0.0, 1.0) * norm;
    double acc = 0;
    int pick = top.back();
    for (int z : top) {
      acc += std::exp(double(row[z]));
      if (u < acc) {
        pick = z;
        break;
      }
    }
    result.hypotheses[i].type = pick;
    result.hypotheses[i].logp_type = row[pick];
  }

  // stage 3: pose refinement, decoded by per-joint argmax
  nn::Tensor pose_input({M, kPoseChannels, kGridH, kGridW});
  for (int i = 0; i < M; ++i) {
    auto& h = result.hypotheses[i];
    const Pose2D painted = center_pose(vocab, h.type, h.torso);
    assemble_pose_input(pose_input.data.data() + size_t(i) * kPoseChannels * kGridCells, frame,
                        current, h.torso, painted);
  }
  auto pose_logp = pose_m.batch_logp(std::move(pose_input));
  for (int i = 0; i < M; ++i) {
    auto& h = result.hypotheses[i];
    std::array<Vec2, kJointCount - 1> rest;
    for (int j = 0; j < kJointCount - 1; ++j) {
      const float* plane =
          pose_logp->value.data.data() + (size_t(i) * (kJointCount - 1) + j) * kGridCells;
      int best = 0;
      for (int c = 1; c < kGridCells; ++c)
        if (plane[c] > plane[best]) best = c;
      rest[j] = grid_cell_to_pixel(best / kGridW, best % kGridW, kGridH, kGridW);
      h.logp_joints[j] = plane[best];
    }
    h.pose = compose_pose(rest, h.torso);
  }
  return result;
}

/// Teacher-forced negative log-likelihood of the ground-truth past pose under
/// the factored model P(r)P(z|r)prod_j P(q_j|r,z), cells snapped to the
/// output grid and probabilities clamped at 1e-12.
inline double nll_ground_truth(GoalModel& goal, TypeModel& type_m, PoseModel& pose_m,
                               const PoseTypeVocabulary& vocab, const SamplePair& sample) {
  if (sample.past_type < 0) throw ParamError("nll_ground_truth: past_type unset");
  for (int j = 0; j < kJointCount; ++j)
    if (!sample.past_pose.valid[j])
      throw ParamError("nll_ground_truth: ground-truth pose has invalid joints");

  const HeatmapGrid goal_map = goal.forward(*sample.image, sample.current_pose);
  double nll = ce_loss_grid(goal_map, sample.past_torso);

  const auto type_probs =
      type_m.forward(*sample.image, sample.current_pose, sample.past_torso);
  nll += ce_loss_class(type_probs, sample.past_type);

  const Pose2D painted = center_pose(vocab, sample.past_type, sample.past_torso);
  const HeatmapGrid pose_map =
      pose_m.forward(*sample.image, sample.current_pose, sample.past_torso, painted);
  const auto rest = split_pose(sample.past_pose);
  nll += ce_loss_grid_sum(pose_map, std::vector<Vec2>(rest.begin(), rest.end()));
  return nll;
}

// ---------------------------------------------------------------------------
// KNN baseline

struct KnnPool {
  struct Entry {
    std::vector<double> current_vec;  // torso-aligned current pose
    Vec2 current_torso;
    Pose2D past;
    int source_index = 0;
  };
  std::vector<Entry> entries;
};

/// Subsamples every `stride`-th pair per clip stream (adjacent frames are
/// alike) and stores (current-pose vector, past pose) retrieval entries.
inline KnnPool knn_baseline_build(const std::vector<PairRef>& pairs, int stride = 15) {
  if (stride < 1) throw ParamError("knn_baseline_build: stride must be >= 1");
  KnnPool pool;
  std::string clip;
  int counter = 0;
  for (size_t i = 0; i < pairs.size(); ++i) {
    if (pairs[i].clip_id != clip) {
      clip = pairs[i].clip_id;
      counter = 0;
    }
    if (counter++ % stride != 0) continue;
    KnnPool::Entry e;
    e.current_vec = pose_to_vector(pairs[i].current_pose);
    e.current_torso = pairs[i].current_pose.torso();
    e.past = pairs[i].past_pose;
    e.source_index = int(i);
    pool.entries.push_back(std::move(e));
  }
  return pool;
}

/// M nearest neighbors by torso-aligned current-pose distance; each
/// retrieved past pose is re-anchored by the query/neighbor torso offset so
/// results live in the query's image region.
inline std::vector<Pose2D> knn_baseline_query(const KnnPool& pool, const Pose2D& query, int M = 30) {
  if (int(pool.entries.size()) < M) throw ParamError("knn_baseline_query: pool smaller than M");
  const auto qvec = pose_to_vector(query);
  const Vec2 qtorso = query.torso();
  std::vector<std::pair<double, int>> scored(pool.entries.size());
  for (size_t i = 0; i < pool.entries.size(); ++i)
    scored[i] = {sq_dist(pool.entries[i].current_vec, qvec), int(i)};
  std::sort(scored.begin(), scored.end());
  std::vector<Pose2D> out;
  out.reserve(M);
  for (int i = 0; i < M; ++i) {
    const auto& e = pool.entries[scored[i].second];
    out.push_back(clamp_to_frame(translate(e.past, qtorso - e.current_torso)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// direct heatmap (Hourglass) baseline

/// Candidate pool: every `subsample`-th training past pose, kept at its
/// stored absolute coordinates.
inline std::vector<Pose2D> baseline_candidates(const std::vector<PairRef>& train_pairs,
                                               int subsample = 200) {
  if (subsample < 1) throw ParamError("baseline_candidates: subsample must be >= 1");
  std::vector<Pose2D> out;
  for (size_t i = 0; i < train_pairs.size(); i += subsample)
    out.push_back(train_pairs[i].past_pose);
  return out;
}

/// Sum of per-joint log-probabilities of a candidate pose under the predicted
/// maps.
inline double baseline_pose_loglik(const HeatmapGrid& maps, const Pose2D& candidate) {
  double sum = 0;
  for (int j = 0; j < kJointCount; ++j) {
    auto [gy, gx] = pixel_to_grid_cell(candidate.joints[j], maps.h, maps.w);
    sum += std::log(std::max(double(maps.at(j, gy, gx)), kProbClamp));
  }
  return sum;
}

/// Scores every candidate under the model's 15 predicted joint maps and
/// returns the M most likely, descending; ties break to the smaller
/// candidate index.
inline std::vector<Pose2D> heatmap_baseline_rank(HeatmapBaselineModel& model,
                                                 const std::vector<Pose2D>& candidates,
                                                 const ThermalFrame& frame,
                                                 const Pose2D& current, int M = 30) {
  if (int(candidates.size()) < M)
    throw ParamError("heatmap_baseline_rank: fewer candidates than M");
  const HeatmapGrid maps = model.forward(frame, current);
  std::vector<std::pair<double, int>> scored(candidates.size());
  for (size_t i = 0; i < candidates.size(); ++i)
    scored[i] = {-baseline_pose_loglik(maps, candidates[i]), int(i)};
  std::sort(scored.begin(), scored.end());
  std::vector<Pose2D> out;
  out.reserve(M);
  for (int i = 0; i < M; ++i) out.push_back(candidates[scored[i].second]);
  return out;
}

// ---------------------------------------------------------------------------
// serialization

inline nlohmann::json inference_to_json(const InferenceResult& r) {
  nlohmann::json hyps = nlohmann::json::array();
  for (const auto& h : r.hypotheses) {
    nlohmann::json jl = nlohmann::json::array();
    for (double v : h.logp_joints) jl.push_back(v);
    hyps.push_back({{"pose", pose_to_json(h.pose)},
                    {"torso", {h.torso.x, h.torso.y}},
                    {"type", h.type},
                    {"logp_torso", h.logp_torso},
                    {"logp_type", h.logp_type},
                    {"logp_joints", jl}});
  }
  return {{"m", r.m}, {"topk", r.topk}, {"seed", r.seed}, {"hypotheses", hyps}};
}

}  // namespace thermopose
