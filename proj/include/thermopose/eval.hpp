#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "thermopose/metrics.hpp"
#include "thermopose/pipeline.hpp"

namespace thermopose {

struct SampleRecord {
  std::string clip_id;
  int frame_index = 0;
  double top1 = 0, top3 = 0, top5 = 0;
  double nll = std::numeric_limits<double>::quiet_NaN();
  double semantic_frac = std::numeric_limits<double>::quiet_NaN();
  bool skipped = false;
};

struct MetricsReport {
  double mpjpe_top1 = 0, mpjpe_top3 = 0, mpjpe_top5 = 0;
  double nll = std::numeric_limits<double>::quiet_NaN();
  double semantic_score = std::numeric_limits<double>::quiet_NaN();  // percent
  int n_samples = 0;
  int n_skipped = 0;
  std::string config_hash;
  std::vector<SampleRecord> records;
};

/// Thrown when more than the tolerated fraction of samples failed.
struct EvalSkipError : DataError {
  int skipped = 0, total = 0;
  EvalSkipError(int s, int t)
      : DataError("evaluation skipped " + std::to_string(s) + " of " + std::to_string(t) +
                  " samples"),
        skipped(s),
        total(t) {}
};

using HypothesisGenerator =
    std::function<std::vector<Pose2D>(const SamplePair&, uint64_t sample_seed)>;
using NllFunction = std::function<double(const SamplePair&)>;

/// Runs a hypothesis generator over the test pairs and aggregates the
/// paper's three metrics. Per-sample failures count as skipped; more than
/// `skip_tolerance` of them aborts with EvalSkipError.
inline MetricsReport evaluate(const HypothesisGenerator& generate, const NllFunction& nll_fn,
                              const std::vector<PairRef>& pairs, int M, uint64_t seed,
                              SemanticClassifier* classifier = nullptr,
                              double skip_tolerance = 0.01) {
  if (pairs.empty()) throw ParamError("evaluate: empty test set");
  MetricsReport report;
  double sum1 = 0, sum3 = 0, sum5 = 0, sum_nll = 0, sum_sem = 0;
  int n_nll = 0, n_sem = 0;
  for (size_t i = 0; i < pairs.size(); ++i) {
    SampleRecord rec;
    rec.clip_id = pairs[i].clip_id;
    rec.frame_index = pairs[i].frame_index;
    try {
      const SamplePair sample = materialize(pairs[i]);
      const auto hyps = generate(sample, derive_seed(seed, i));
      if (int(hyps.size()) != M) throw DataError("generator returned wrong hypothesis count");
      rec.top1 = topk_mpjpe(hyps, sample.past_pose, 1);
      rec.top3 = topk_mpjpe(hyps, sample.past_pose, std::min(3, M));
      rec.top5 = topk_mpjpe(hyps, sample.past_pose, std::min(5, M));
      if (nll_fn) {
        rec.nll = nll_fn(sample);
        sum_nll += rec.nll;
        ++n_nll;
      }
      if (classifier) {
        int plausible = 0;
        for (const auto& h : hyps)
          if (classifier->score(*sample.image, h) >= 0.5) ++plausible;
        rec.semantic_frac = double(plausible) / hyps.size();
        sum_sem += rec.semantic_frac;
        ++n_sem;
      }
      sum1 += rec.top1;
      sum3 += rec.top3;
      sum5 += rec.top5;
    } catch (const std::exception&) {
      rec.skipped = true;
      ++report.n_skipped;
    }
    report.records.push_back(std::move(rec));
  }
  report.n_samples = int(pairs.size()) - report.n_skipped;
  if (report.n_samples == 0 ||
      double(report.n_skipped) > skip_tolerance * double(pairs.size()))
    throw EvalSkipError(report.n_skipped, int(pairs.size()));
  report.mpjpe_top1 = sum1 / report.n_samples;
  report.mpjpe_top3 = sum3 / report.n_samples;
  report.mpjpe_top5 = sum5 / report.n_samples;
  if (n_nll > 0) report.nll = sum_nll / n_nll;
  if (n_sem > 0) report.semantic_score = 100.0 * sum_sem / n_sem;
  return report;
}

/// Adapter running the trained three-stage pipeline.
inline HypothesisGenerator ours_generator(GoalModel& goal, TypeModel& type_m, PoseModel& pose_m,
                                          const PoseTypeVocabulary& vocab, int M, int topk) {
  return [&goal, &type_m, &pose_m, &vocab, M, topk](const SamplePair& s, uint64_t seed) {
    auto r = infer_past(goal, type_m, pose_m, vocab, *s.image, s.current_pose, M, topk, seed);
    std::vector<Pose2D> poses;
    poses.reserve(r.hypotheses.size());
    for (const auto& h : r.hypotheses) poses.push_back(h.pose);
    return poses;
  };
}

inline NllFunction ours_nll(GoalModel& goal, TypeModel& type_m, PoseModel& pose_m,
                            const PoseTypeVocabulary& vocab) {
  return [&goal, &type_m, &pose_m, &vocab](const SamplePair& s) {
    SamplePair copy = s;
    if (copy.past_type < 0) copy.past_type = assign_type(copy.past_pose, vocab);
    return nll_ground_truth(goal, type_m, pose_m, vocab, copy);
  };
}

// ---------------------------------------------------------------------------
// semantic score

struct SemanticSample {
  PairRef src;          // frame provider
  Pose2D pose;          // candidate painted into that frame
  bool positive = true;
  std::string negative_kind;  // replace | shift | perturb
};

/// Balanced plausible/implausible set: positives are the true 3s-ago poses;
/// each gets one negative built by replacing the pose shape, shifting the
/// torso by 40-120 px, or perturbing joints with sigma=15 noise.
inline std::vector<SemanticSample> make_semantic_dataset(const std::vector<PairRef>& pairs,
                                                         uint64_t seed) {
  if (pairs.size() < 2) throw ParamError("make_semantic_dataset: need at least 2 pairs");
  auto rng = make_rng(derive_seed(seed, 0x5E17));
  std::vector<SemanticSample> out;
  out.reserve(pairs.size() * 2);
  for (size_t i = 0; i < pairs.size(); ++i) {
    SemanticSample pos;
    pos.src = pairs[i];
    pos.pose = pairs[i].past_pose;
    pos.positive = true;
    out.push_back(pos);

    SemanticSample neg;
    neg.src = pairs[i];
    neg.positive = false;
    const int kind = int(uniform_int(rng, 0, 2));
    if (kind == 0) {
      neg.negative_kind = "replace";
      Pose2D candidate = pos.pose;
      for (int attempt = 0; attempt < 10; ++attempt) {
        size_t other = size_t(uniform_int(rng, 0, int64_t(pairs.size()) - 1));
        if (other == i) continue;
        candidate = vector_to_pose(pose_to_vector(pairs[other].past_pose),
                                   pos.pose.torso());
        if (pose_to_vector(candidate) != pose_to_vector(pos.pose)) break;
      }
      neg.pose = clamp_to_frame(candidate);
    } else if (kind == 1) {
      neg.negative_kind = "shift";
      const Vec2 torso = pos.pose.torso();
      float dx = float(uniform_real(rng, 40, 120));
      float dy = float(uniform_real(rng, 40, 120));
      if (bernoulli(rng, 0.5)) dx = -dx;
      if (bernoulli(rng, 0.5)) dy = -dy;
      // keep the shifted torso inside the frame so the offset survives
      if (torso.x + dx < 0 || torso.x + dx >= kFrameW) dx = -dx;
      if (torso.y + dy < 0 || torso.y + dy >= kFrameH) dy = -dy;
      neg.pose = clamp_to_frame(translate(pos.pose, {dx, dy}));
    } else {
      neg.negative_kind = "perturb";
      std::array<Vec2, kJointCount> pts;
      for (int j = 0; j < kJointCount; ++j)
        pts[j] = {pos.pose.joints[j].x + float(normal(rng, 0, 15)),
                  pos.pose.joints[j].y + float(normal(rng, 0, 15))};
      neg.pose = make_pose(pts);
    }
    out.push_back(std::move(neg));
  }
  return out;
}

/// Binary-CE training on the semantic dataset; reports held-out accuracy.
inline TrainResult train_semantic(SemanticClassifier& model,
                                  const std::vector<SemanticSample>& train_set,
                                  const std::vector<SemanticSample>& holdout,
                                  const TrainConfig& cfg) {
  if (train_set.empty()) throw ParamError("train_semantic: empty training set");
  std::vector<nn::Parameter*> params;
  model.net.collect(params);
  auto snapshot = [&](const std::string& file) {
    std::ofstream os(file, std::ios::binary);
    nn::save_parameters(os, params);
  };
  auto result = detail::run_training(
      params, train_set.size(),
      [&](const std::function<size_t()>& next, std::mt19937_64& rng) {
        const int b = cfg.batch_size;
        nn::Tensor input({b, kSemanticChannels, kGridH, kGridW});
        std::vector<float> labels(b);
        for (int i = 0; i < b; ++i) {
          const SemanticSample& s = train_set[next()];
          SamplePair shim;
          shim.image = load_clip_frame(s.src.clip_dir, s.src.frame_index);
          shim.current_pose = s.pose;
          shim.past_pose = s.pose;  // the candidate is the augmented target
          const bool flip = cfg.flip_aug && bernoulli(rng, 0.5);
          AugmentedPair a = augment_pair(shim, nullptr, flip, cfg.crop_aug, rng);
          if (!a.valid) {  // crop clipped the candidate; use untransformed
            a.frame = *shim.image;
            a.past_pose = s.pose;
          }
          assemble_semantic_input(input.data.data() + size_t(i) * kSemanticChannels * kGridCells,
                                  a.frame, a.past_pose);
          labels[i] = s.positive ? 1.f : 0.f;
        }
        return nn::bce_with_logits(model.batch_logits(std::move(input)), std::move(labels));
      },
      cfg, snapshot);

  if (!holdout.empty()) {
    int correct = 0;
    for (const auto& s : holdout) {
      auto frame = load_clip_frame(s.src.clip_dir, s.src.frame_index);
      const double p = model.score(*frame, s.pose);
      if ((p >= 0.5) == s.positive) ++correct;
    }
    model.reported_accuracy = double(correct) / holdout.size();
  }
  return result;
}

/// Fraction (percent) of all hypotheses the classifier accepts.
inline double semantic_score(SemanticClassifier& classifier,
                             const std::vector<InferenceResult>& results,
                             const std::vector<const ThermalFrame*>& frames) {
  if (results.size() != frames.size()) throw ParamError("semantic_score: size mismatch");
  int64_t total = 0, plausible = 0;
  for (size_t i = 0; i < results.size(); ++i)
    for (const auto& h : results[i].hypotheses) {
      ++total;
      if (classifier.score(*frames[i], h.pose) >= 0.5) ++plausible;
    }
  if (total == 0) throw ParamError("semantic_score: no hypotheses");
  return 100.0 * double(plausible) / double(total);
}

// ---------------------------------------------------------------------------
// thermal-intensity sweep

struct SweepPoint {
  double scale = 0;
  double expected_distance = 0;
};

/// Intensity-weighted centroid of a mark layer.
inline Vec2 mark_centroid(const Image2D& marks) {
  double mass = 0, mx = 0, my = 0;
  for (int y = 0; y < marks.h; ++y)
    for (int x = 0; x < marks.w; ++x) {
      const double v = marks.at(y, x);
      mass += v;
      mx += v * x;
      my += v * y;
    }
  if (mass <= 0) throw ParamError("mark_centroid: empty mark region");
  return {float(mx / mass), float(my / mass)};
}

/// Scales the mark layer, recomposes the frame (max with the mark-free base,
/// exactly as the renderer does), and measures the exact expectation of the
/// goal-sample-to-mark distance over all grid cells. scale=0 reproduces the
/// mark-ablated frame bit for bit.
inline std::vector<SweepPoint> intensity_sweep(GoalModel& goal, const ThermalFrame& base,
                                               const Image2D& marks, const Pose2D& current,
                                               const std::vector<double>& scales) {
  for (double s : scales)
    if (s < 0) throw ParamError("intensity_sweep: scales must be non-negative");
  const Vec2 centroid = mark_centroid(marks);
  std::vector<SweepPoint> out;
  for (double s : scales) {
    ThermalFrame frame = base;
    if (s > 0)
      for (size_t i = 0; i < frame.img.v.size(); ++i)
        frame.img.v[i] = clamp(std::max(frame.img.v[i], float(s) * marks.v[i]), 0.f, 1.f);
    const HeatmapGrid dist = goal.forward(frame, current);
    double expected = 0;
    for (int gy = 0; gy < kGridH; ++gy)
      for (int gx = 0; gx < kGridW; ++gx)
        expected += double(dist.at(0, gy, gx)) *
                    distance(grid_cell_to_pixel(gy, gx, kGridH, kGridW), centroid);
    out.push_back({s, expected});
  }
  return out;
}

/// Spearman rank correlation with average ranks on ties.
inline double spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2) throw ParamError("spearman: bad input");
  auto ranks = [](const std::vector<double>& v) {
    std::vector<size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    size_t i = 0;
    while (i < idx.size()) {
      size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      const double avg = (double(i) + double(j)) / 2.0 + 1.0;
      for (size_t t = i; t <= j; ++t) r[idx[t]] = avg;
      i = j + 1;
    }
    return r;
  };
  const auto rx = ranks(xs), ry = ranks(ys);
  double mx = 0, my = 0;
  for (size_t i = 0; i < rx.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= rx.size();
  my /= ry.size();
  double num = 0, dx = 0, dy = 0;
  for (size_t i = 0; i < rx.size(); ++i) {
    num += (rx[i] - mx) * (ry[i] - my);
    dx += (rx[i] - mx) * (rx[i] - mx);
    dy += (ry[i] - my) * (ry[i] - my);
  }
  if (dx <= 0 || dy <= 0) return 0;
  return num / std::sqrt(dx * dy);
}

// ---------------------------------------------------------------------------
// report serialization

inline nlohmann::json report_to_json(const MetricsReport& r) {
  nlohmann::json records = nlohmann::json::array();
  for (const auto& rec : r.records) {
    nlohmann::json j = {{"clip_id", rec.clip_id},
                        {"frame", rec.frame_index},
                        {"skipped", rec.skipped}};
    if (!rec.skipped) {
      j["top1"] = rec.top1;
      j["top3"] = rec.top3;
      j["top5"] = rec.top5;
      if (std::isfinite(rec.nll)) j["nll"] = rec.nll;
      if (std::isfinite(rec.semantic_frac)) j["semantic_frac"] = rec.semantic_frac;
    }
    records.push_back(std::move(j));
  }
  nlohmann::json j = {{"mpjpe_top1", r.mpjpe_top1},
                      {"mpjpe_top3", r.mpjpe_top3},
                      {"mpjpe_top5", r.mpjpe_top5},
                      {"n_samples", r.n_samples},
                      {"n_skipped", r.n_skipped},
                      {"config_hash", r.config_hash},
                      {"records", records}};
  if (std::isfinite(r.nll)) j["nll"] = r.nll;
  if (std::isfinite(r.semantic_score)) j["semantic_score"] = r.semantic_score;
  return j;
}

inline std::string report_to_csv(const MetricsReport& r) {
  std::ostringstream os;
  os << "clip_id,frame,top1,top3,top5,nll,semantic_frac,skipped\n";
  for (const auto& rec : r.records) {
    os << rec.clip_id << "," << rec.frame_index << ",";
    if (rec.skipped) {
      os << ",,,,,1\n";
      continue;
    }
    os << rec.top1 << "," << rec.top3 << "," << rec.top5 << ",";
    if (std::isfinite(rec.nll)) os << rec.nll;
    os << ",";
    if (std::isfinite(rec.semantic_frac)) os << rec.semantic_frac;
    os << ",0\n";
  }
  return os.str();
}

}  // namespace thermopose
