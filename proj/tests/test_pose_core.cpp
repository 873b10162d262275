#include <gtest/gtest.h>

#include <random>

#include "thermopose/heatmap.hpp"
#include "thermopose/metrics.hpp"
#include "thermopose/rng.hpp"
#include "thermopose/skeleton.hpp"

using namespace thermopose;

namespace {

// Coordinates snapped to 0.25 px are exactly representable in float, so the
// exact-equality properties below are not at the mercy of rounding.
Pose2D random_pose(std::mt19937_64& rng) {
  std::array<Vec2, kJointCount> pts;
  for (auto& p : pts)
    p = {float(uniform_int(rng, 0, 4 * (kFrameW - 1))) / 4.f,
         float(uniform_int(rng, 0, 4 * (kFrameH - 1))) / 4.f};
  return make_pose(pts);
}

}  // namespace

TEST(RenderHeatmap, PeakAtExactCell) {
  auto g = render_heatmap({{20.f, 10.f}}, 2.f, kFrameH, kFrameW);
  auto dec = decode_argmax(g);
  EXPECT_EQ(dec.points[0].x, 20.f);
  EXPECT_EQ(dec.points[0].y, 10.f);
  EXPECT_FALSE(dec.degenerate[0]);
}

TEST(RenderHeatmap, IdenticalPointsIdenticalChannels) {
  auto g = render_heatmap({{55.5f, 77.25f}, {55.5f, 77.25f}}, 2.f, kGridH, kGridW);
  const size_t n = size_t(g.h) * g.w;
  for (size_t i = 0; i < n; ++i) EXPECT_EQ(g.v[i], g.v[n + i]);
}

TEST(RenderHeatmap, NormalizedAndCenterOfMass) {
  auto g = render_heatmap({{100.3f, 57.8f}}, 2.f, kFrameH, kFrameW);
  double sum = 0, mx = 0, my = 0;
  for (int y = 0; y < g.h; ++y)
    for (int x = 0; x < g.w; ++x) {
      const double v = g.at(0, y, x);
      sum += v;
      mx += v * x;
      my += v * y;
    }
  EXPECT_NEAR(sum, 1.0, 1e-5);
  EXPECT_NEAR(mx / sum, 100.3, 0.5);
  EXPECT_NEAR(my / sum, 57.8, 0.5);
}

TEST(RenderHeatmap, OutOfFramePointClampsBump) {
  auto g = render_heatmap({{-50.f, 1000.f}}, 2.f, kGridH, kGridW);
  double sum = 0;
  for (float v : g.v) sum += v;
  EXPECT_NEAR(sum, 1.0, 1e-5);
  auto dec = decode_argmax(g);
  EXPECT_EQ(dec.points[0].x, 2.f);                 // cell 0 center
  EXPECT_EQ(dec.points[0].y, (kGridH - 1) * 4.f + 2.f);
}

TEST(RenderHeatmap, NonPositiveSigmaRejected) {
  EXPECT_THROW(render_heatmap({{1.f, 1.f}}, 0.f, kGridH, kGridW), ParamError);
  EXPECT_THROW(render_heatmap({{1.f, 1.f}}, -1.f, kGridH, kGridW), ParamError);
}

TEST(DecodeArgmax, CellCenterMapping) {
  HeatmapGrid g(1, kGridH, kGridW);
  g.at(0, 5, 7) = 1.f;
  auto dec = decode_argmax(g);
  EXPECT_EQ(dec.points[0].x, 7 * 4 + 2);
  EXPECT_EQ(dec.points[0].y, 5 * 4 + 2);
  EXPECT_FALSE(dec.degenerate[0]);
}

TEST(DecodeArgmax, UniformChannelIsDegenerate) {
  HeatmapGrid g(1, kGridH, kGridW);
  std::fill(g.v.begin(), g.v.end(), 1.f / kGridCells);
  auto dec = decode_argmax(g);
  EXPECT_TRUE(dec.degenerate[0]);
  EXPECT_EQ(dec.points[0].x, (kGridW / 2) * 4 + 2);
  EXPECT_EQ(dec.points[0].y, (kGridH / 2) * 4 + 2);
}

TEST(DecodeArgmax, TieBreaksToSmallestRowMajorIndex) {
  HeatmapGrid g(1, kGridH, kGridW);
  g.at(0, 10, 20) = 1.f;
  g.at(0, 40, 3) = 1.f;
  auto dec = decode_argmax(g);
  EXPECT_EQ(dec.points[0].y, 10 * 4 + 2);
  EXPECT_EQ(dec.points[0].x, 20 * 4 + 2);
}

TEST(DecodeArgmax, RenderRoundtripWithinOneCell) {
  auto rng = make_rng(7);
  for (int i = 0; i < 100; ++i) {
    Vec2 p{float(uniform_real(rng, 0, kFrameW - 1)), float(uniform_real(rng, 0, kFrameH - 1))};
    auto g = render_heatmap({p}, 2.f, kGridH, kGridW);
    auto dec = decode_argmax(g);
    EXPECT_LE(std::abs(dec.points[0].x - p.x), 4.f) << "x roundtrip, point " << i;
    EXPECT_LE(std::abs(dec.points[0].y - p.y), 4.f) << "y roundtrip, point " << i;
  }
}

TEST(SampleFromHeatmap, OneHotAlwaysSampled) {
  HeatmapGrid g(1, kGridH, kGridW);
  g.at(0, 33, 44) = 1.f;
  g.normalized = true;
  for (uint64_t s = 0; s < 20; ++s) {
    Vec2 p = sample_from_heatmap(g, s);
    EXPECT_EQ(p.x, 44 * 4 + 2);
    EXPECT_EQ(p.y, 33 * 4 + 2);
  }
}

TEST(SampleFromHeatmap, TwoCellFrequencies) {
  HeatmapGrid g(1, kGridH, kGridW);
  g.at(0, 0, 0) = 0.5f;
  g.at(0, 50, 60) = 0.5f;
  g.normalized = true;
  auto rng = make_rng(123);
  int first = 0;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i)
    if (sample_from_heatmap(g, rng).x == 2.f) ++first;
  EXPECT_NEAR(first / double(draws), 0.5, 0.02);
}

TEST(SampleFromHeatmap, DeterministicPerSeed) {
  auto g = render_heatmap({{190.f, 140.f}}, 2.f, kGridH, kGridW);
  Vec2 a = sample_from_heatmap(g, 99u);
  Vec2 b = sample_from_heatmap(g, 99u);
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.y, b.y);
}

TEST(SampleFromHeatmap, ChiSquareOnFourCells) {
  // 4-cell categorical; chi-square (df=3) must stay below the 0.99 quantile.
  HeatmapGrid g(1, kGridH, kGridW);
  const double probs[4] = {0.1, 0.2, 0.3, 0.4};
  const int cells[4][2] = {{0, 0}, {10, 10}, {20, 20}, {30, 30}};
  for (int i = 0; i < 4; ++i) g.at(0, cells[i][0], cells[i][1]) = float(probs[i]);
  g.normalized = true;
  auto rng = make_rng(2024);
  const int draws = 100000;
  int count[4] = {0, 0, 0, 0};
  for (int i = 0; i < draws; ++i) {
    Vec2 p = sample_from_heatmap(g, rng);
    for (int c = 0; c < 4; ++c)
      if (p.x == cells[c][1] * 4 + 2 && p.y == cells[c][0] * 4 + 2) ++count[c];
  }
  double chi2 = 0;
  for (int c = 0; c < 4; ++c) {
    const double expect = draws * probs[c];
    chi2 += (count[c] - expect) * (count[c] - expect) / expect;
  }
  EXPECT_LT(chi2, 11.345);  // chi2 0.99 quantile, df=3
}

TEST(SampleFromHeatmap, AllZeroChannelRejected) {
  HeatmapGrid g(1, kGridH, kGridW);
  EXPECT_THROW(sample_from_heatmap(g, 0u), ParamError);
}

TEST(ResizeBilinear, PreservesNormalization) {
  auto g = render_heatmap({{100.f, 100.f}, {333.f, 20.f}}, 2.f, kGridH, kGridW);
  auto up = resize_bilinear(g, kFrameH, kFrameW);
  for (int c = 0; c < up.channels; ++c) {
    double sum = 0;
    for (int i = 0; i < kFrameH * kFrameW; ++i) sum += up.channel(c)[i];
    EXPECT_NEAR(sum, 1.0, 1e-5);
  }
}

TEST(Mpjpe, IdenticalPosesZero) {
  auto rng = make_rng(1);
  Pose2D p = random_pose(rng);
  EXPECT_EQ(mpjpe(p, p), 0.0);
}

TEST(Mpjpe, UniformDisplacementExact) {
  auto rng = make_rng(2);
  Pose2D gt = random_pose(rng);
  Pose2D pred = gt;
  for (auto& j : pred.joints) j = j + Vec2{3.f, 4.f};
  EXPECT_DOUBLE_EQ(mpjpe(pred, gt), 5.0);
}

TEST(Mpjpe, MatchesScalarLoopOracle) {
  auto rng = make_rng(3);
  for (int i = 0; i < 1000; ++i) {
    Pose2D a = random_pose(rng), b = random_pose(rng);
    double sum = 0;
    for (int j = 0; j < kJointCount; ++j) {
      const double dx = double(a.joints[j].x) - b.joints[j].x;
      const double dy = double(a.joints[j].y) - b.joints[j].y;
      sum += std::sqrt(dx * dx + dy * dy);
    }
    const double oracle = sum / kJointCount;
    const double got = mpjpe(a, b);
    EXPECT_NEAR(got, oracle, 1e-9 * std::max(1.0, oracle));
  }
}

TEST(Mpjpe, TranslationInvariant) {
  auto rng = make_rng(4);
  Pose2D a = random_pose(rng), b = random_pose(rng);
  const double base = mpjpe(a, b);
  const Vec2 off{17.f, -9.f};
  EXPECT_EQ(mpjpe(translate(a, off), translate(b, off)), base);
}

TEST(Mpjpe, ValidMaskAveragesSubset) {
  Pose2D gt;
  Pose2D pred;
  for (int j = 0; j < kJointCount; ++j) {
    gt.joints[j] = {10.f, 10.f};
    pred.joints[j] = {10.f, 10.f};
  }
  pred.joints[0] = {13.f, 14.f};  // distance 5 on the only difference
  gt.valid.fill(false);
  gt.valid[0] = true;
  EXPECT_DOUBLE_EQ(mpjpe(pred, gt), 5.0);
  gt.valid.fill(false);
  EXPECT_THROW(mpjpe(pred, gt), ParamError);
}

TEST(TopkMpjpe, SortAndAverage) {
  Pose2D gt;
  for (int j = 0; j < kJointCount; ++j) gt.joints[j] = {100.f, 100.f};
  auto with_error = [&](float d) {
    Pose2D p = gt;
    for (auto& j : p.joints) j.x += d;
    return p;
  };
  std::vector<Pose2D> preds = {with_error(7.f), with_error(2.f), with_error(9.f)};
  EXPECT_DOUBLE_EQ(topk_mpjpe(preds, gt, 2), 4.5);
  EXPECT_DOUBLE_EQ(topk_mpjpe(preds, gt, 3), 6.0);  // plain mean at k=len
  EXPECT_THROW(topk_mpjpe(preds, gt, 0), ParamError);
  EXPECT_THROW(topk_mpjpe(preds, gt, 4), ParamError);
}

TEST(TopkMpjpe, AllPerfectPredsZeroForAnyK) {
  auto rng = make_rng(5);
  Pose2D gt = random_pose(rng);
  std::vector<Pose2D> preds(6, gt);
  for (int k = 1; k <= 6; ++k) EXPECT_EQ(topk_mpjpe(preds, gt, k), 0.0);
}

TEST(TopkMpjpe, MonotoneInK) {
  auto rng = make_rng(6);
  Pose2D gt = random_pose(rng);
  std::vector<Pose2D> preds;
  for (int i = 0; i < 10; ++i) preds.push_back(random_pose(rng));
  double prev = 0;
  for (int k = 1; k <= 10; ++k) {
    const double cur = topk_mpjpe(preds, gt, k);
    EXPECT_GE(cur, prev - 1e-12);
    prev = cur;
  }
}

TEST(ComposePose, SplitComposeRoundtrip) {
  auto rng = make_rng(8);
  for (int i = 0; i < 50; ++i) {
    Pose2D p = random_pose(rng);
    Pose2D back = compose_pose(split_pose(p), p.torso());
    for (int j = 0; j < kJointCount; ++j) {
      EXPECT_EQ(back.joints[j].x, p.joints[j].x);
      EXPECT_EQ(back.joints[j].y, p.joints[j].y);
    }
  }
}

TEST(ComposePose, ZeroRestAtOrigin) {
  std::vector<Vec2> rest(kJointCount - 1, Vec2{0.f, 0.f});
  Pose2D p = compose_pose(rest, {0.f, 0.f});
  for (const auto& j : p.joints) {
    EXPECT_EQ(j.x, 0.f);
    EXPECT_EQ(j.y, 0.f);
  }
}

TEST(ComposePose, WrongCountRejected) {
  std::vector<Vec2> rest(kJointCount, Vec2{0.f, 0.f});
  EXPECT_THROW(compose_pose(rest, {0.f, 0.f}), ParamError);
}

TEST(FlipPose, InvolutionAndPairSwap) {
  auto rng = make_rng(9);
  Pose2D p = random_pose(rng);
  Pose2D f = flip_pose(p);
  EXPECT_EQ(f.joints[5].y, p.joints[2].y);  // RShoulder lands on LShoulder slot
  EXPECT_EQ(f.joints[5].x, float(kFrameW) - 1.f - p.joints[2].x);
  Pose2D ff = flip_pose(f);
  for (int j = 0; j < kJointCount; ++j) {
    EXPECT_FLOAT_EQ(ff.joints[j].x, p.joints[j].x);
    EXPECT_EQ(ff.joints[j].y, p.joints[j].y);
  }
}
