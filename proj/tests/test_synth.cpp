#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "thermopose/synth.hpp"

using namespace thermopose;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("thermopose_synth_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST(GenerateScene, DeterministicPerSeed) {
  SceneSpec a = generate_scene(5);
  SceneSpec b = generate_scene(5);
  ASSERT_EQ(a.furniture.size(), b.furniture.size());
  for (size_t i = 0; i < a.furniture.size(); ++i) {
    EXPECT_EQ(a.furniture[i].x0, b.furniture[i].x0);
    EXPECT_EQ(a.furniture[i].y1, b.furniture[i].y1);
    EXPECT_EQ(a.furniture[i].affordance, b.furniture[i].affordance);
  }
}

TEST(GenerateScene, RectanglesInBoundsAndDisjointOver100Seeds) {
  for (uint64_t seed = 0; seed < 100; ++seed) {
    SceneSpec s = generate_scene(seed);
    ASSERT_GE(s.furniture.size(), 2u) << "seed " << seed;
    ASSERT_LE(s.furniture.size(), 5u);
    for (size_t i = 0; i < s.furniture.size(); ++i) {
      const auto& f = s.furniture[i];
      EXPECT_GE(f.x0, 0.f);
      EXPECT_GE(f.y0, 0.f);
      EXPECT_LE(f.x1, float(s.room_w));
      EXPECT_LE(f.y1, float(s.room_h));
      EXPECT_LT(f.x0, f.x1);
      EXPECT_LT(f.y0, f.y1);
      for (size_t j = i + 1; j < s.furniture.size(); ++j)
        EXPECT_FALSE(overlaps(f, s.furniture[j], 0.f)) << "seed " << seed;
    }
  }
}

TEST(GenerateScene, NeighboringSeedsDiffer) {
  SceneSpec a = generate_scene(7), b = generate_scene(8);
  bool differ = a.furniture.size() != b.furniture.size();
  for (size_t i = 0; !differ && i < a.furniture.size(); ++i)
    differ = a.furniture[i].x0 != b.furniture[i].x0 || a.furniture[i].y0 != b.furniture[i].y0;
  EXPECT_TRUE(differ);
}

TEST(PoseTemplate, SitTorsoLowerThanStand) {
  const Vec2 anchor{200.f, 200.f};
  Pose2D sit = pose_template(Action::Sit, 1, anchor);
  Pose2D stand = pose_template(Action::Stand, 1, anchor);
  const int torso = skeleton().torso_index;
  const float sit_height = anchor.y - sit.joints[torso].y;
  const float stand_height = anchor.y - stand.joints[torso].y;
  EXPECT_LT(sit_height, stand_height);
}

TEST(PoseTemplate, FacingMirrorIsExactReflection) {
  const Vec2 anchor{200.f, 200.f};
  for (Action a : {Action::Walk, Action::Sit, Action::Lie, Action::Touch, Action::Stand}) {
    Pose2D r = pose_template(a, 1, anchor);
    Pose2D l = pose_template(a, -1, anchor);
    for (int j = 0; j < kJointCount; ++j) {
      EXPECT_FLOAT_EQ(l.joints[j].x - anchor.x, -(r.joints[j].x - anchor.x));
      EXPECT_EQ(l.joints[j].y, r.joints[j].y);
    }
  }
}

TEST(PoseTemplate, LieBoundingBoxWiderThanTall) {
  Pose2D lie = pose_template(Action::Lie, 1, {200.f, 200.f});
  float x0 = 1e9f, x1 = -1e9f, y0 = 1e9f, y1 = -1e9f;
  for (const auto& j : lie.joints) {
    x0 = std::min(x0, j.x);
    x1 = std::max(x1, j.x);
    y0 = std::min(y0, j.y);
    y1 = std::max(y1, j.y);
  }
  EXPECT_GT(x1 - x0, y1 - y0);
}

TEST(StepThermal, HalfLifeScalesBufferByHalf) {
  ThermalState s;
  s.tau = 8.0;
  s.mark_buffer.at(100, 100) = 0.6f;
  s.mark_buffer.at(30, 40) = 0.22f;
  ThermalState out = step_thermal(s, {}, s.tau * std::log(2.0));
  EXPECT_NEAR(out.mark_buffer.at(100, 100), 0.3f, 1e-6);
  EXPECT_NEAR(out.mark_buffer.at(30, 40), 0.11f, 1e-6);
}

TEST(StepThermal, ContactDepositsAtLeastDepositIntensity) {
  ThermalState s;
  std::vector<uint8_t> contact(size_t(kFrameH) * kFrameW, 0);
  contact[size_t(50) * kFrameW + 60] = 1;
  ThermalState out = step_thermal(s, contact, 1.0 / kFps);
  EXPECT_GE(out.mark_buffer.at(50, 60), kMarkDeposit);
  EXPECT_EQ(out.mark_buffer.at(50, 61), 0.f);
}

TEST(StepThermal, FortyFiveStepsMatchClosedForm) {
  ThermalState s;
  s.tau = 20.0;
  s.mark_buffer.at(10, 10) = 1.0f;
  for (int i = 0; i < 45; ++i) s = step_thermal(s, {}, 1.0 / kFps);
  EXPECT_NEAR(s.mark_buffer.at(10, 10), std::exp(-0.15), 1e-4);
}

TEST(StepThermal, NonPositiveDtRejected) {
  ThermalState s;
  EXPECT_THROW(step_thermal(s, {}, 0.0), ParamError);
}

TEST(SimulateClip, SitLeavesMarkCentroidInsideRect) {
  // Controlled script: approach, sit for 3 s, walk away. The centroid of the
  // decaying mark must stay inside the sat-upon rectangle afterwards.
  SceneSpec scene;
  scene.seed = 3;
  FurnitureRect couch{150.f, 140.f, 260.f, 200.f, Affordance::Sit, 20.f};
  scene.furniture.push_back(couch);
  ActionScript script;
  script.push_back({Action::Walk, -1, {80.f, 160.f}, 1, 15});
  script.push_back({Action::Walk, -1, {205.f, couch.y0 + couch.surface_height}, 1, 30});
  script.push_back({Action::Sit, 0, {205.f, couch.y0 + couch.surface_height}, 1, 45});
  script.push_back({Action::Walk, -1, {60.f, 230.f}, -1, 75});
  SimConfig cfg;
  cfg.duration_s = 11.0;
  ClipRecord clip = simulate_script(scene, script, 17, cfg, "sit_test");

  // 1.5 s after standing up (sit ends at frame 90)
  const int frame = 90 + 22;
  ThermalState state = reconstruct_thermal_state(clip.meta, frame);
  double mass = 0, mx = 0, my = 0;
  for (int y = 0; y < kFrameH; ++y)
    for (int x = 0; x < kFrameW; ++x) {
      const double v = state.mark_buffer.at(y, x);
      mass += v;
      mx += v * x;
      my += v * y;
    }
  ASSERT_GT(mass, 0.0);
  const float cx = float(mx / mass), cy = float(my / mass);
  EXPECT_TRUE(couch.contains({cx, cy})) << "centroid (" << cx << "," << cy << ")";
}

TEST(SimulateClip, ReplayIsByteIdentical) {
  SceneSpec scene = generate_scene(11);
  ClipRecord a = simulate_clip(scene, 21, 12.0, kDefaultTau, false, "replay");
  ClipRecord b = simulate_clip(scene, 21, 12.0, kDefaultTau, false, "replay");
  auto da = temp_dir("replay_a"), db = temp_dir("replay_b");
  write_clip((da / "replay").string(), a);
  write_clip((db / "replay").string(), b);
  for (int t : {0, 50, a.length() - 1})
    EXPECT_EQ(slurp(da / "replay" / "thermal" / frame_filename(t)),
              slurp(db / "replay" / "thermal" / frame_filename(t)));
  EXPECT_EQ(slurp(da / "replay" / "poses.json"), slurp(db / "replay" / "poses.json"));
}

TEST(SimulateClip, AblationChangesPixelsOnly) {
  SceneSpec scene = generate_scene(13);
  ClipRecord normal = simulate_clip(scene, 31, 12.0, kDefaultTau, false, "abl");
  ClipRecord ablated = simulate_clip(scene, 31, 12.0, kDefaultTau, true, "abl");
  ASSERT_EQ(normal.length(), ablated.length());
  for (int t = 0; t < normal.length(); ++t)
    for (int j = 0; j < kJointCount; ++j) {
      EXPECT_EQ(normal.poses[t].joints[j].x, ablated.poses[t].joints[j].x);
      EXPECT_EQ(normal.poses[t].joints[j].y, ablated.poses[t].joints[j].y);
    }
  ASSERT_EQ(normal.meta.annotations.size(), ablated.meta.annotations.size());
  for (size_t i = 0; i < normal.meta.annotations.size(); ++i) {
    EXPECT_EQ(normal.meta.annotations[i].action, ablated.meta.annotations[i].action);
    EXPECT_EQ(normal.meta.annotations[i].start_frame, ablated.meta.annotations[i].start_frame);
  }
}

TEST(SimulateClip, AblatedFramesHaveNoMarks) {
  // Away from the actor, ablated pixels never exceed the furniture outline.
  SceneSpec scene = generate_scene(19);
  ClipRecord clip = simulate_clip(scene, 41, 12.0, kDefaultTau, true, "nomarks");
  for (int t : {60, clip.length() - 1}) {
    const auto& img = clip.frames[t]->img;
    const Pose2D& pose = clip.poses[t];
    for (int y = 0; y < kFrameH; y += 3)
      for (int x = 0; x < kFrameW; x += 3) {
        double d = 1e9;
        for (const auto& j : pose.joints)
          d = std::min(d, distance({float(x), float(y)}, j));
        if (d > 60) EXPECT_LE(img.at(y, x), kFurnitureOutline + 1e-5);
      }
  }
}

TEST(SimulateClip, MarkIntensityNonIncreasingSinceContact) {
  // After the last contact, a marked cell decays monotonically.
  SceneSpec scene;
  scene.seed = 1;
  scene.furniture.push_back({100.f, 150.f, 200.f, 210.f, Affordance::Sit, 20.f});
  ActionScript script;
  script.push_back({Action::Walk, -1, {60.f, 170.f}, 1, 15});
  script.push_back({Action::Sit, 0, {150.f, 170.f}, 1, 30});
  script.push_back({Action::Walk, -1, {320.f, 120.f}, 1, 120});
  SimConfig cfg;
  ClipRecord clip = simulate_script(scene, script, 5, cfg, "decay");
  float prev = 1e9f;
  for (int t = 50; t < clip.length(); t += 15) {
    ThermalState s = reconstruct_thermal_state(clip.meta, t);
    const float v = s.mark_buffer.at(172, 150);
    if (prev < 1e9f) EXPECT_LE(v, prev + 1e-7f);
    prev = v;
  }
  EXPECT_GT(prev, 0.f);
}

TEST(ScriptEpisode, DeterministicAndCoversDuration) {
  SceneSpec scene = generate_scene(2);
  ActionScript a = script_episode(scene, 9, 20.0);
  ActionScript b = script_episode(scene, 9, 20.0);
  ASSERT_EQ(a.size(), b.size());
  int frames = 0;
  bool has_interaction = false;
  for (size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].action, b[i].action);
    EXPECT_EQ(a[i].duration, b[i].duration);
    frames += a[i].duration;
    if (a[i].action != Action::Walk && a[i].action != Action::Stand) {
      has_interaction = true;
      // interactions are preceded by a walk segment
      ASSERT_GT(i, 0u);
      EXPECT_EQ(a[i - 1].action, Action::Walk);
    }
  }
  EXPECT_EQ(frames, int(20.0 * kFps));
  EXPECT_TRUE(has_interaction);
  EXPECT_THROW(script_episode(scene, 9, 5.0), ParamError);
}
