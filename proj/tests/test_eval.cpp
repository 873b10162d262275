#include <gtest/gtest.h>

#include <filesystem>

#include "thermopose/eval.hpp"
#include "thermopose/synth.hpp"

using namespace thermopose;
namespace fs = std::filesystem;

namespace {

const nn::EncDecConfig kTinyEncDec{.width = 8, .blocks = 1, .depth = 1};
const nn::ClassifierConfig kTinyClassifier{.width = 8, .blocks = 2};

/// Small on-disk synthetic dataset shared by the eval tests.
struct Fixture {
  fs::path root;
  std::vector<PairRef> pairs;

  Fixture() {
    root = fs::temp_directory_path() / "thermopose_eval_fixture";
    fs::remove_all(root);
    fs::create_directories(root / "clips");
    for (uint64_t seed = 0; seed < 2; ++seed) {
      SceneSpec scene = generate_scene(seed);
      const std::string id = "clip" + std::to_string(seed);
      ClipRecord clip = simulate_clip(scene, seed, 12.0, kDefaultTau, false, id);
      write_clip((root / "clips" / id).string(), clip);
    }
    for (const auto& dir : list_clip_dirs(root.string())) {
      auto refs = index_clip_pairs(dir, kPastOffsetFrames, 9, true);
      pairs.insert(pairs.end(), refs.begin(), refs.end());
    }
  }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

}  // namespace

TEST(Evaluate, OraclePredictorScoresZeroMpjpe) {
  auto& f = fixture();
  ASSERT_GE(f.pairs.size(), 3u);
  auto oracle = [](const SamplePair& s, uint64_t) {
    return std::vector<Pose2D>(30, s.past_pose);
  };
  auto report = evaluate(oracle, nullptr, f.pairs, 30, 5);
  EXPECT_EQ(report.n_skipped, 0);
  EXPECT_DOUBLE_EQ(report.mpjpe_top1, 0.0);
  EXPECT_DOUBLE_EQ(report.mpjpe_top3, 0.0);
  EXPECT_DOUBLE_EQ(report.mpjpe_top5, 0.0);
  EXPECT_TRUE(std::isnan(report.nll));
}

TEST(Evaluate, TopkMonotonePerSample) {
  auto& f = fixture();
  auto noisy = [](const SamplePair& s, uint64_t seed) {
    auto rng = make_rng(seed);
    std::vector<Pose2D> out;
    for (int i = 0; i < 30; ++i) {
      Pose2D p = s.past_pose;
      const Vec2 off{float(normal(rng, 0, 10 + i)), float(normal(rng, 0, 10 + i))};
      out.push_back(clamp_to_frame(translate(p, off)));
    }
    return out;
  };
  auto report = evaluate(noisy, nullptr, f.pairs, 30, 7);
  for (const auto& rec : report.records) {
    ASSERT_FALSE(rec.skipped);
    EXPECT_LE(rec.top1, rec.top3 + 1e-12);
    EXPECT_LE(rec.top3, rec.top5 + 1e-12);
  }
  EXPECT_LE(report.mpjpe_top1, report.mpjpe_top3 + 1e-12);
  EXPECT_LE(report.mpjpe_top3, report.mpjpe_top5 + 1e-12);
}

TEST(Evaluate, SkipThresholdAborts) {
  auto& f = fixture();
  int calls = 0;
  auto flaky = [&calls](const SamplePair& s, uint64_t) -> std::vector<Pose2D> {
    if (++calls % 3 == 0) throw DataError("injected failure");
    return std::vector<Pose2D>(5, s.past_pose);
  };
  EXPECT_THROW(evaluate(flaky, nullptr, f.pairs, 5, 1), EvalSkipError);
  calls = 0;
  auto report = evaluate(flaky, nullptr, f.pairs, 5, 1, nullptr, /*skip_tolerance=*/0.5);
  EXPECT_GT(report.n_skipped, 0);
  EXPECT_GT(report.n_samples, 0);
}

TEST(Evaluate, ReportMeansMatchRecords) {
  auto& f = fixture();
  auto noisy = [](const SamplePair& s, uint64_t seed) {
    auto rng = make_rng(seed);
    std::vector<Pose2D> out;
    for (int i = 0; i < 10; ++i)
      out.push_back(clamp_to_frame(
          translate(s.past_pose, {float(normal(rng, 0, 20)), float(normal(rng, 0, 20))})));
    return out;
  };
  auto report = evaluate(noisy, nullptr, f.pairs, 10, 3);
  double sum1 = 0;
  int n = 0;
  for (const auto& rec : report.records)
    if (!rec.skipped) {
      sum1 += rec.top1;
      ++n;
    }
  ASSERT_EQ(n, report.n_samples);
  EXPECT_NEAR(report.mpjpe_top1, sum1 / n, 1e-9);
}

TEST(MakeSemanticDataset, BalancedAndNegativesDiffer) {
  auto& f = fixture();
  auto samples = make_semantic_dataset(f.pairs, 11);
  ASSERT_EQ(samples.size(), f.pairs.size() * 2);
  int positives = 0;
  for (size_t i = 0; i < samples.size(); i += 2) {
    const auto& pos = samples[i];
    const auto& neg = samples[i + 1];
    EXPECT_TRUE(pos.positive);
    EXPECT_FALSE(neg.positive);
    ++positives;
    // negatives never equal their positives
    bool identical = true;
    for (int j = 0; j < kJointCount && identical; ++j)
      identical = pos.pose.joints[j].x == neg.pose.joints[j].x &&
                  pos.pose.joints[j].y == neg.pose.joints[j].y;
    EXPECT_FALSE(identical) << "kind " << neg.negative_kind;
    if (neg.negative_kind == "shift") {
      EXPECT_GE(distance(pos.pose.torso(), neg.pose.torso()), 40.0 - 1e-3);
    }
  }
  EXPECT_EQ(positives, int(f.pairs.size()));

  auto again = make_semantic_dataset(f.pairs, 11);
  for (size_t i = 0; i < samples.size(); ++i)
    EXPECT_EQ(samples[i].pose.joints, again[i].pose.joints);
}

TEST(SemanticScore, AcceptAllAndRejectAllBounds) {
  auto& f = fixture();
  SemanticClassifier cls(kTinyClassifier, 3);
  // zero weights -> sigmoid(0) = 0.5 -> everything counts as plausible
  std::vector<nn::Parameter*> params;
  cls.net.collect(params);
  for (auto* p : params) std::fill(p->value.data.begin(), p->value.data.end(), 0.f);

  SamplePair s = materialize(f.pairs[0]);
  InferenceResult r;
  r.m = 4;
  for (int i = 0; i < 4; ++i) {
    Hypothesis h;
    h.pose = s.past_pose;
    h.torso = s.past_torso;
    r.hypotheses.push_back(h);
  }
  std::vector<const ThermalFrame*> frames = {s.image.get()};
  EXPECT_DOUBLE_EQ(semantic_score(cls, {r}, frames), 100.0);

  // a strongly negative bias rejects everything
  cls.net.fc.b.value.data[0] = -50.f;
  EXPECT_DOUBLE_EQ(semantic_score(cls, {r}, frames), 0.0);
}

TEST(TrainSemantic, LearnsBetterThanChanceOnItsOwnData) {
  auto& f = fixture();
  auto samples = make_semantic_dataset(f.pairs, 21);
  SemanticClassifier cls(kTinyClassifier, 9);
  TrainConfig cfg;
  cfg.iterations = 300;
  cfg.batch_size = 8;
  cfg.learning_rate = 3e-3;
  cfg.flip_aug = false;
  cfg.crop_aug = false;
  train_semantic(cls, samples, samples, cfg);
  EXPECT_GT(cls.reported_accuracy, 0.5);
}

TEST(IntensitySweep, ScaleZeroEqualsAblatedAndMatchesBruteForce) {
  auto rng = make_rng(31);
  SceneSpec scene = generate_scene(31);
  ClipRecord clip = simulate_clip(scene, 31, 12.0, kDefaultTau, false, "sweep");
  const int frame_idx = clip.length() - 1;
  ThermalState state = reconstruct_thermal_state(clip.meta, frame_idx);
  ThermalFrame base = render_frame(scene, clip.poses[frame_idx], state, /*render_marks=*/false);

  GoalModel goal(kTinyEncDec, 17);
  if (mark_centroid(state.mark_buffer).x >= 0) {
    auto points = intensity_sweep(goal, base, state.mark_buffer, clip.poses[frame_idx],
                                  {0.0, 0.5, 1.0});
    ASSERT_EQ(points.size(), 3u);

    // scale 0: identical to running the model on the ablated frame directly
    const HeatmapGrid dist = goal.forward(base, clip.poses[frame_idx]);
    const Vec2 centroid = mark_centroid(state.mark_buffer);
    double expected = 0;
    for (int gy = 0; gy < kGridH; ++gy)
      for (int gx = 0; gx < kGridW; ++gx)
        expected += double(dist.at(0, gy, gx)) *
                    distance(grid_cell_to_pixel(gy, gx, kGridH, kGridW), centroid);
    EXPECT_DOUBLE_EQ(points[0].expected_distance, expected);
    for (const auto& p : points) {
      EXPECT_GE(p.expected_distance, 0.0);
      EXPECT_LT(p.expected_distance, 480.0);  // frame diagonal bound
    }
  }
  Image2D empty(kFrameH, kFrameW, 0.f);
  EXPECT_THROW(intensity_sweep(goal, base, empty, clip.poses[frame_idx], {1.0}), ParamError);
}

TEST(Spearman, KnownValuesAndTies) {
  EXPECT_DOUBLE_EQ(spearman({1, 2, 3, 4}, {10, 20, 30, 40}), 1.0);
  EXPECT_DOUBLE_EQ(spearman({1, 2, 3, 4}, {9, 7, 5, 3}), -1.0);
  EXPECT_NEAR(spearman({1, 2, 3, 4}, {1, 1, 2, 2}), 2.0 / std::sqrt(5.0), 1e-9);
  EXPECT_THROW(spearman({1}, {1}), ParamError);
}

TEST(ReportSerialization, JsonAndCsvCarryRecords) {
  MetricsReport r;
  r.mpjpe_top1 = 4.5;
  r.mpjpe_top3 = 6.0;
  r.mpjpe_top5 = 7.5;
  r.nll = 100.25;
  r.semantic_score = 81.5;
  r.n_samples = 2;
  r.config_hash = "abc123";
  SampleRecord rec;
  rec.clip_id = "clipX";
  rec.frame_index = 77;
  rec.top1 = 4.0;
  rec.top3 = 5.0;
  rec.top5 = 6.0;
  rec.nll = 99.0;
  r.records.push_back(rec);
  auto j = report_to_json(r);
  EXPECT_DOUBLE_EQ(j.at("mpjpe_top1").get<double>(), 4.5);
  EXPECT_DOUBLE_EQ(j.at("nll").get<double>(), 100.25);
  EXPECT_EQ(j.at("records")[0].at("clip_id"), "clipX");
  const std::string csv = report_to_csv(r);
  EXPECT_NE(csv.find("clipX,77,4,5,6,99"), std::string::npos);
}
