#include <gtest/gtest.h>

#include "thermopose/pipeline.hpp"

using namespace thermopose;

namespace {

const nn::EncDecConfig kTinyEncDec{.width = 8, .blocks = 1, .depth = 1};
const nn::ClassifierConfig kTinyClassifier{.width = 8, .blocks = 2};

Pose2D random_pose(std::mt19937_64& rng) {
  std::array<Vec2, kJointCount> pts;
  for (auto& p : pts)
    p = {float(uniform_int(rng, 20, kFrameW - 20)), float(uniform_int(rng, 20, kFrameH - 20))};
  return make_pose(pts);
}

std::shared_ptr<ThermalFrame> random_frame(std::mt19937_64& rng) {
  auto f = std::make_shared<ThermalFrame>();
  for (auto& v : f->img.v) v = float(uniform_real(rng, 0, 1));
  return f;
}

PoseTypeVocabulary make_vocab(std::mt19937_64& rng, int k) {
  std::vector<Pose2D> poses;
  for (int i = 0; i < 10 * k + 20; ++i) poses.push_back(random_pose(rng));
  return build_vocabulary(poses, k, 5);
}

void zero_all(std::vector<nn::Parameter*> params) {
  for (auto* p : params)
    std::fill(p->value.data.begin(), p->value.data.end(), 0.f);
}

struct Rig {
  GoalModel goal{kTinyEncDec, 1};
  TypeModel type_m;
  PoseModel pose_m{kTinyEncDec, 3};
  PoseTypeVocabulary vocab;

  explicit Rig(std::mt19937_64& rng, int k = 8)
      : type_m(k, kTinyClassifier, 2), vocab(make_vocab(rng, k)) {}
};

}  // namespace

TEST(InferPast, ReturnsExactlyMHypothesesWithTorsoEqualToSample) {
  auto rng = make_rng(90);
  Rig rig(rng);
  auto frame = random_frame(rng);
  Pose2D current = random_pose(rng);
  auto result = infer_past(rig.goal, rig.type_m, rig.pose_m, rig.vocab, *frame, current, 30, 5,
                           123);
  ASSERT_EQ(int(result.hypotheses.size()), 30);
  EXPECT_EQ(result.m, 30);
  for (const auto& h : result.hypotheses) {
    EXPECT_EQ(h.pose.torso().x, h.torso.x);
    EXPECT_EQ(h.pose.torso().y, h.torso.y);
    EXPECT_GE(h.type, 0);
    EXPECT_LT(h.type, rig.vocab.k);
    EXPECT_TRUE(std::isfinite(h.logp_torso));
    EXPECT_TRUE(std::isfinite(h.logp_type));
    for (double lp : h.logp_joints) EXPECT_TRUE(std::isfinite(lp));
  }
}

TEST(InferPast, DeterministicPerSeed) {
  auto rng = make_rng(91);
  Rig rig(rng);
  auto frame = random_frame(rng);
  Pose2D current = random_pose(rng);
  auto a = infer_past(rig.goal, rig.type_m, rig.pose_m, rig.vocab, *frame, current, 10, 5, 77);
  auto b = infer_past(rig.goal, rig.type_m, rig.pose_m, rig.vocab, *frame, current, 10, 5, 77);
  for (size_t i = 0; i < a.hypotheses.size(); ++i) {
    EXPECT_EQ(a.hypotheses[i].type, b.hypotheses[i].type);
    EXPECT_EQ(a.hypotheses[i].torso.x, b.hypotheses[i].torso.x);
    for (int j = 0; j < kJointCount; ++j)
      EXPECT_EQ(a.hypotheses[i].pose.joints[j].x, b.hypotheses[i].pose.joints[j].x);
  }
  auto c = infer_past(rig.goal, rig.type_m, rig.pose_m, rig.vocab, *frame, current, 10, 5, 78);
  bool differs = false;
  for (size_t i = 0; i < a.hypotheses.size() && !differs; ++i)
    differs = a.hypotheses[i].torso.x != c.hypotheses[i].torso.x;
  EXPECT_TRUE(differs);
}

TEST(InferPast, SampledTypesAlwaysInTopFiveSupport) {
  auto rng = make_rng(92);
  Rig rig(rng, 12);
  for (int run = 0; run < 20; ++run) {
    auto frame = random_frame(rng);
    Pose2D current = random_pose(rng);
    auto result =
        infer_past(rig.goal, rig.type_m, rig.pose_m, rig.vocab, *frame, current, 6, 5, run);
    for (const auto& h : result.hypotheses) {
      auto probs = rig.type_m.forward(*frame, current, h.torso);
      std::vector<int> idx(probs.size());
      std::iota(idx.begin(), idx.end(), 0);
      std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return probs[a] > probs[b]; });
      const bool in_top5 = std::find(idx.begin(), idx.begin() + 5, h.type) != idx.begin() + 5;
      EXPECT_TRUE(in_top5) << "run " << run << " type " << h.type;
    }
  }
}

TEST(InferPast, BadArgumentsRejected) {
  auto rng = make_rng(93);
  Rig rig(rng);
  auto frame = random_frame(rng);
  Pose2D current = random_pose(rng);
  EXPECT_THROW(infer_past(rig.goal, rig.type_m, rig.pose_m, rig.vocab, *frame, current, 0, 5, 1),
               ParamError);
  EXPECT_THROW(
      infer_past(rig.goal, rig.type_m, rig.pose_m, rig.vocab, *frame, current, 5, 100, 1),
      ParamError);
}

TEST(NllGroundTruth, UniformModelsMatchAnalyticSum) {
  auto rng = make_rng(94);
  Rig rig(rng, 8);
  zero_all([&] {
    std::vector<nn::Parameter*> p;
    rig.goal.net.collect(p);
    rig.type_m.net.collect(p);
    rig.pose_m.net.collect(p);
    return p;
  }());

  SamplePair s;
  s.image = random_frame(rng);
  s.current_pose = random_pose(rng);
  s.past_pose = random_pose(rng);
  s.past_torso = s.past_pose.torso();
  s.past_type = 3;
  const double expected = 15.0 * std::log(double(kGridCells)) + std::log(8.0);
  EXPECT_NEAR(nll_ground_truth(rig.goal, rig.type_m, rig.pose_m, rig.vocab, s), expected, 0.01);
}

TEST(NllGroundTruth, ErrorsOnUnsetTypeOrInvalidJoints) {
  auto rng = make_rng(95);
  Rig rig(rng);
  SamplePair s;
  s.image = random_frame(rng);
  s.current_pose = random_pose(rng);
  s.past_pose = random_pose(rng);
  s.past_torso = s.past_pose.torso();
  s.past_type = -1;
  EXPECT_THROW(nll_ground_truth(rig.goal, rig.type_m, rig.pose_m, rig.vocab, s), ParamError);
  s.past_type = 0;
  s.past_pose.valid[4] = false;
  EXPECT_THROW(nll_ground_truth(rig.goal, rig.type_m, rig.pose_m, rig.vocab, s), ParamError);
}

TEST(KnnBaseline, PoolSubsamplesPerClipStream) {
  auto rng = make_rng(96);
  std::vector<PairRef> pairs;
  auto add_clip = [&](const std::string& id, int n) {
    for (int i = 0; i < n; ++i) {
      PairRef r;
      r.clip_id = id;
      r.frame_index = 45 + i;
      r.current_pose = random_pose(rng);
      r.past_pose = random_pose(rng);
      r.past_torso = r.past_pose.torso();
      pairs.push_back(r);
    }
  };
  add_clip("a", 31);   // ceil(31/15) = 3
  add_clip("b", 45);   // 3
  add_clip("c", 1);    // 1
  auto pool = knn_baseline_build(pairs, 15);
  EXPECT_EQ(pool.entries.size(), 7u);
  // entries preserve their source pair bit-exactly
  for (const auto& e : pool.entries) {
    const auto& src = pairs[e.source_index];
    EXPECT_EQ(e.past.joints, src.past_pose.joints);
    EXPECT_EQ(e.current_vec, pose_to_vector(src.current_pose));
  }
  auto pool2 = knn_baseline_build(pairs, 15);
  EXPECT_EQ(pool2.entries.size(), pool.entries.size());
}

TEST(KnnBaseline, ExactQueryRetrievesItselfFirst) {
  auto rng = make_rng(97);
  std::vector<PairRef> pairs;
  for (int i = 0; i < 50; ++i) {
    PairRef r;
    r.clip_id = "a";
    r.frame_index = i;
    r.current_pose = random_pose(rng);
    r.past_pose = random_pose(rng);
    r.past_torso = r.past_pose.torso();
    pairs.push_back(r);
  }
  auto pool = knn_baseline_build(pairs, 1);
  const auto& probe = pairs[17];
  auto results = knn_baseline_query(pool, probe.current_pose, 5);
  ASSERT_EQ(results.size(), 5u);
  // first result: probe's own past pose re-anchored by a zero offset
  for (int j = 0; j < kJointCount; ++j) {
    EXPECT_NEAR(results[0].joints[j].x, probe.past_pose.joints[j].x, 1e-3);
    EXPECT_NEAR(results[0].joints[j].y, probe.past_pose.joints[j].y, 1e-3);
  }
}

TEST(KnnBaseline, MatchesLinearScanOracle) {
  auto rng = make_rng(98);
  std::vector<PairRef> pairs;
  for (int i = 0; i < 300; ++i) {
    PairRef r;
    r.clip_id = "a";
    r.frame_index = i;
    r.current_pose = random_pose(rng);
    r.past_pose = random_pose(rng);
    r.past_torso = r.past_pose.torso();
    pairs.push_back(r);
  }
  auto pool = knn_baseline_build(pairs, 1);
  for (int q = 0; q < 200; ++q) {
    Pose2D query = random_pose(rng);
    auto got = knn_baseline_query(pool, query, 3);
    // oracle: full scan for the single nearest entry
    const auto qv = pose_to_vector(query);
    size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < pool.entries.size(); ++i) {
      const double d = sq_dist(pool.entries[i].current_vec, qv);
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    const auto& e = pool.entries[best];
    const Vec2 off = query.torso() - e.current_torso;
    for (int j = 0; j < kJointCount; ++j) {
      const float ex = clamp(e.past.joints[j].x + off.x, 0.f, float(kFrameW) - 1e-3f);
      EXPECT_NEAR(got[0].joints[j].x, ex, 1e-4);
    }
  }
  EXPECT_THROW(knn_baseline_query(pool, random_pose(rng), 10000), ParamError);
}

TEST(HeatmapBaseline, UniformMapsTieBreakByCandidateIndex) {
  auto rng = make_rng(99);
  HeatmapBaselineModel model(kTinyEncDec, 4);
  std::vector<nn::Parameter*> params;
  model.net.collect(params);
  zero_all(params);  // uniform maps -> identical scores
  auto frame = random_frame(rng);
  std::vector<Pose2D> candidates;
  for (int i = 0; i < 40; ++i) candidates.push_back(random_pose(rng));
  auto got = heatmap_baseline_rank(model, candidates, *frame, random_pose(rng), 10);
  for (int i = 0; i < 10; ++i)
    EXPECT_EQ(got[i].joints, candidates[i].joints);
}

TEST(HeatmapBaseline, ScoresMatchBruteForceAndSortDescending) {
  auto rng = make_rng(100);
  HeatmapBaselineModel model(kTinyEncDec, 5);
  auto frame = random_frame(rng);
  Pose2D current = random_pose(rng);
  std::vector<Pose2D> candidates;
  for (int i = 0; i < 50; ++i) candidates.push_back(random_pose(rng));
  auto got = heatmap_baseline_rank(model, candidates, *frame, current, 50);

  const HeatmapGrid maps = model.forward(*frame, current);
  auto oracle_score = [&](const Pose2D& p) {
    double sum = 0;
    for (int j = 0; j < kJointCount; ++j) {
      auto [gy, gx] = pixel_to_grid_cell(p.joints[j], kGridH, kGridW);
      sum += std::log(std::max(double(maps.at(j, gy, gx)), 1e-12));
    }
    return sum;
  };
  double prev = std::numeric_limits<double>::infinity();
  for (const auto& p : got) {
    const double s = oracle_score(p);
    EXPECT_LE(s, prev + 1e-9);
    prev = s;
  }
  EXPECT_THROW(heatmap_baseline_rank(model, candidates, *frame, current, 60), ParamError);
}

TEST(BaselineCandidates, SubsamplesEveryNth) {
  auto rng = make_rng(101);
  std::vector<PairRef> pairs(450);
  for (auto& r : pairs) {
    r.past_pose = random_pose(rng);
    r.current_pose = random_pose(rng);
  }
  auto cands = baseline_candidates(pairs, 200);
  EXPECT_EQ(cands.size(), 3u);  // indices 0, 200, 400
  EXPECT_EQ(cands[1].joints, pairs[200].past_pose.joints);
}

TEST(InferenceResultJson, SerializesAllFields) {
  auto rng = make_rng(102);
  Rig rig(rng);
  auto frame = random_frame(rng);
  auto result =
      infer_past(rig.goal, rig.type_m, rig.pose_m, rig.vocab, *frame, random_pose(rng), 4, 5, 9);
  auto j = inference_to_json(result);
  EXPECT_EQ(j.at("m").get<int>(), 4);
  EXPECT_EQ(j.at("hypotheses").size(), 4u);
  EXPECT_EQ(j.at("hypotheses")[0].at("logp_joints").size(), size_t(kJointCount - 1));
}
