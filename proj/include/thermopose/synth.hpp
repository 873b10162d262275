#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "thermopose/dataset.hpp"
#include "thermopose/rng.hpp"
#include "thermopose/skeleton.hpp"

namespace thermopose {

// Render intensities. The actor is the hottest surface, fresh contact marks
// sit between the body and the ambient room, and furniture is drawn as a
// faint outline so the mark-ablated control still carries scene geometry
// (the RGB-like condition).
inline constexpr float kAmbientTemp = 0.2f;
inline constexpr float kBodyTemp = 0.9f;
inline constexpr float kMarkDeposit = 0.6f;
inline constexpr float kFurnitureOutline = kAmbientTemp + 0.04f;
inline constexpr float kSilhouetteRadius = 3.f;  // half-width of limb strokes
inline constexpr double kDefaultTau = 20.0;      // mark decay constant, seconds

enum class Affordance { None, Sit, Lie, Touch };

inline const char* to_string(Affordance a) {
  switch (a) {
    case Affordance::Sit: return "sit";
    case Affordance::Lie: return "lie";
    case Affordance::Touch: return "touch";
    default: return "none";
  }
}

enum class Action { Walk, Sit, Lie, Touch, Stand };

inline const char* to_string(Action a) {
  switch (a) {
    case Action::Walk: return "walk";
    case Action::Sit: return "sit";
    case Action::Lie: return "lie";
    case Action::Touch: return "touch";
    default: return "stand";
  }
}

struct FurnitureRect {
  float x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // inclusive-exclusive pixel bounds
  Affordance affordance = Affordance::None;
  float surface_height = 12.f;  // seat surface depth below y0

  float width() const { return x1 - x0; }
  float height() const { return y1 - y0; }
  Vec2 center() const { return {(x0 + x1) / 2.f, (y0 + y1) / 2.f}; }
  bool contains(Vec2 p) const { return p.x >= x0 && p.x < x1 && p.y >= y0 && p.y < y1; }
};

inline bool overlaps(const FurnitureRect& a, const FurnitureRect& b, float margin) {
  return a.x0 - margin < b.x1 && b.x0 - margin < a.x1 && a.y0 - margin < b.y1 &&
         b.y0 - margin < a.y1;
}

/// Procedural room: 2-5 disjoint furniture rectangles in a 288x384 frame.
struct SceneSpec {
  int room_h = kFrameH;
  int room_w = kFrameW;
  std::vector<FurnitureRect> furniture;
  float ambient = kAmbientTemp;
  uint64_t seed = 0;
};

/// One scripted step. Walk steps move the body anchor to `anchor`;
/// interaction steps hold the pose at `anchor` (hip position) for the
/// duration.
struct ScriptStep {
  Action action = Action::Walk;
  int furniture = -1;  // index into scene.furniture, -1 for walk/stand
  Vec2 anchor;         // walk: target hip position; interaction: hip position
  int facing = 1;      // +1 faces +x, -1 faces -x
  int duration = 1;    // frames
};

using ActionScript = std::vector<ScriptStep>;

/// Decaying contact-heat buffer.
struct ThermalState {
  Image2D mark_buffer{kFrameH, kFrameW, 0.f};
  float body_temp = kBodyTemp;
  double tau = kDefaultTau;
};

// ---------------------------------------------------------------------------
// scene generation

inline SceneSpec generate_scene(uint64_t seed) {
  SceneSpec scene;
  scene.seed = seed;
  auto rng = make_rng(derive_seed(seed, 0xA11CE));
  const int count = int(uniform_int(rng, 2, 5));
  int attempts = 0;
  while (int(scene.furniture.size()) < count && attempts < 400) {
    ++attempts;
    FurnitureRect f;
    const float w = float(uniform_int(rng, 50, 115));
    const float h = float(uniform_int(rng, 32, 68));
    f.x0 = float(uniform_int(rng, 24, int(scene.room_w - 24 - w)));
    f.y0 = float(uniform_int(rng, 96, int(scene.room_h - 40 - h)));
    f.x1 = f.x0 + w;
    f.y1 = f.y0 + h;
    bool ok = true;
    for (const auto& other : scene.furniture)
      if (overlaps(f, other, 14.f)) ok = false;
    if (!ok) continue;
    if (scene.furniture.empty()) {
      // the first piece is always interactable so every episode has cues
      f.affordance = (w >= 90 && bernoulli(rng, 0.4)) ? Affordance::Lie : Affordance::Sit;
    } else {
      const double u = uniform_real(rng, 0, 1);
      if (w >= 90 && u < 0.25)
        f.affordance = Affordance::Lie;
      else if (u < 0.6)
        f.affordance = Affordance::Sit;
      else if (u < 0.85)
        f.affordance = Affordance::Touch;
      else
        f.affordance = Affordance::None;
    }
    f.surface_height = float(uniform_int(rng, 8, std::max(9, int(h) - 10)));
    scene.furniture.push_back(f);
  }
  return scene;
}

inline nlohmann::json scene_to_json(const SceneSpec& s) {
  nlohmann::json furn = nlohmann::json::array();
  for (const auto& f : s.furniture)
    furn.push_back({{"rect", {f.x0, f.y0, f.x1, f.y1}},
                    {"affordance", to_string(f.affordance)},
                    {"surface_height", f.surface_height}});
  return {{"room", {s.room_h, s.room_w}},
          {"furniture", furn},
          {"ambient", s.ambient},
          {"seed", s.seed}};
}

inline SceneSpec scene_from_json(const nlohmann::json& j) {
  SceneSpec s;
  s.room_h = j.at("room")[0].get<int>();
  s.room_w = j.at("room")[1].get<int>();
  s.ambient = j.at("ambient").get<float>();
  s.seed = j.at("seed").get<uint64_t>();
  for (const auto& fj : j.at("furniture")) {
    FurnitureRect f;
    f.x0 = fj.at("rect")[0].get<float>();
    f.y0 = fj.at("rect")[1].get<float>();
    f.x1 = fj.at("rect")[2].get<float>();
    f.y1 = fj.at("rect")[3].get<float>();
    const std::string a = fj.at("affordance").get<std::string>();
    f.affordance = a == "sit"    ? Affordance::Sit
                   : a == "lie"  ? Affordance::Lie
                   : a == "touch" ? Affordance::Touch
                                  : Affordance::None;
    f.surface_height = fj.at("surface_height").get<float>();
    s.furniture.push_back(f);
  }
  return s;
}

// ---------------------------------------------------------------------------
// stick-figure templates

namespace detail {

struct TemplateSpec {
  std::array<Vec2, kJointCount> offsets;  // hip-relative, facing +x
  float torso_height;                     // hip height above the ground anchor
};

inline const TemplateSpec& template_spec(Action action, bool phase_b = false) {
  static const TemplateSpec stand{{{{2, -58},  {0, -46},  {-7, -44}, {-8, -27}, {-7, -11},
                                    {7, -44},  {8, -27},  {7, -11},  {0, 0},    {-6, 1},
                                    {-6, 25},  {-7, 49},  {6, 1},    {6, 25},   {7, 49}}},
                                  50.f};
  static const TemplateSpec walk_a{{{{4, -57},  {0, -46},  {-7, -44}, {-13, -26}, {-17, -10},
                                     {7, -44},  {12, -27}, {16, -12}, {0, 0},     {-6, 1},
                                     {-13, 24}, {-20, 47}, {6, 1},    {10, 25},   {16, 48}}},
                                   50.f};
  static const TemplateSpec walk_b{{{{4, -57},  {0, -46},  {-7, -44}, {12, -26}, {16, -10},
                                     {7, -44},  {-13, -27}, {-17, -12}, {0, 0},   {-6, 1},
                                     {10, 24},  {16, 47},  {6, 1},    {-13, 25}, {-20, 48}}},
                                   50.f};
  static const TemplateSpec sit{{{{3, -55},  {0, -44},  {-7, -42}, {-6, -24}, {12, -10},
                                  {7, -42},  {8, -24},  {14, -9},  {0, 0},    {-5, 1},
                                  {16, 3},   {15, 26},  {5, 1},    {18, 2},   {17, 25}}},
                                28.f};
  static const TemplateSpec lie{{{{48, -10}, {38, -8},  {36, -6},  {26, -4},  {16, -3},
                                  {37, -10}, {27, -9},  {17, -8},  {0, 0},    {-3, 1},
                                  {-23, 2},  {-43, 3},  {-2, -2},  {-22, -1}, {-42, 0}}},
                                10.f};
  static const TemplateSpec touch{{{{3, -57}, {0, -46},  {-7, -44}, {10, -38}, {26, -40},
                                    {7, -44}, {8, -27},  {7, -11},  {0, 0},    {-6, 1},
                                    {-6, 25}, {-7, 49},  {6, 1},    {6, 25},   {7, 49}}},
                                  50.f};
  switch (action) {
    case Action::Sit: return sit;
    case Action::Lie: return lie;
    case Action::Touch: return touch;
    case Action::Walk: return phase_b ? walk_b : walk_a;
    default: return stand;
  }
}

/// Joints for a template placed with its hip at `hip`.
inline Pose2D pose_at_hip(Action action, int facing, Vec2 hip, float scale = 1.f,
                          bool phase_b = false) {
  const TemplateSpec& t = template_spec(action, phase_b);
  std::array<Vec2, kJointCount> pts;
  for (int j = 0; j < kJointCount; ++j)
    pts[j] = {hip.x + facing * t.offsets[j].x * scale, hip.y + t.offsets[j].y * scale};
  return make_pose(pts);
}

}  // namespace detail

/// Canonical stick figure for an action, standing on the ground point
/// `anchor`, facing +x or -x. Walk returns the first gait phase.
inline Pose2D pose_template(Action action, int facing, Vec2 anchor, float scale = 1.f) {
  const auto& t = detail::template_spec(action);
  return detail::pose_at_hip(action, facing, {anchor.x, anchor.y - t.torso_height * scale},
                             scale);
}

inline float torso_height(Action action) { return detail::template_spec(action).torso_height; }

// ---------------------------------------------------------------------------
// scripting

/// Alternates walking with interactions / idle standing so that the pose
/// three seconds before an interaction end is usually a transition.
inline ActionScript script_episode(const SceneSpec& scene, uint64_t seed, double duration_s) {
  if (duration_s < 10) throw ParamError("script_episode: duration must be >= 10 s");
  auto rng = make_rng(derive_seed(seed, 0x5C817));
  const int total_frames = int(std::lround(duration_s * kFps));

  std::vector<int> interactable;
  for (size_t i = 0; i < scene.furniture.size(); ++i)
    if (scene.furniture[i].affordance != Affordance::None) interactable.push_back(int(i));

  auto random_waypoint = [&]() -> Vec2 {
    for (int tries = 0; tries < 50; ++tries) {
      Vec2 p{float(uniform_int(rng, 30, scene.room_w - 30)),
             float(uniform_int(rng, 110, scene.room_h - 55))};
      bool inside = false;
      for (const auto& f : scene.furniture)
        if (f.contains(p)) inside = true;
      if (!inside) return p;
    }
    return {float(scene.room_w / 2), float(scene.room_h - 60)};
  };

  ActionScript script;
  Vec2 hip = random_waypoint();
  hip.y -= torso_height(Action::Stand);
  int frames = 0;
  auto push_walk = [&](Vec2 target_hip) {
    const double dist = distance(hip, target_hip);
    const double speed = uniform_real(rng, 28, 40);  // px/s
    ScriptStep s;
    s.action = Action::Walk;
    s.anchor = target_hip;
    s.facing = (target_hip.x >= hip.x) ? 1 : -1;
    // capped so even short episodes fit an interaction before trimming
    s.duration = clamp(int(std::lround(dist / speed * kFps)), 6, 75);
    script.push_back(s);
    frames += s.duration;
    hip = target_hip;
  };

  while (frames < total_frames) {
    // walk somewhere, then interact or idle; the first activity always
    // interacts so every clip carries thermal cues
    const bool interact = !interactable.empty() && (script.empty() || bernoulli(rng, 0.72));
    if (interact) {
      const int fi = interactable[uniform_int(rng, 0, int64_t(interactable.size()) - 1)];
      const FurnitureRect& f = scene.furniture[fi];
      ScriptStep s;
      s.furniture = fi;
      s.facing = bernoulli(rng, 0.5) ? 1 : -1;
      switch (f.affordance) {
        case Affordance::Sit: {
          s.action = Action::Sit;
          const float x = float(uniform_real(rng, f.x0 + 18, f.x1 - 18));
          s.anchor = {x, f.y0 + f.surface_height};
          s.duration = int(std::lround(uniform_real(rng, 2.5, 6.0) * kFps));
          break;
        }
        case Affordance::Lie: {
          s.action = Action::Lie;
          s.anchor = {f.center().x, f.y0 + f.surface_height};
          s.duration = int(std::lround(uniform_real(rng, 2.5, 6.0) * kFps));
          break;
        }
        default: {
          s.action = Action::Touch;
          // stand beside the rect so the extended palm (offset ~(26,-40)
          // from the hip) lands just inside it
          const bool from_left = bernoulli(rng, 0.5);
          s.facing = from_left ? 1 : -1;
          const float hip_x = from_left ? f.x0 - 18 : f.x1 + 18;
          const float hip_y = clamp(f.y0 + 44.f, 62.f, float(scene.room_h) - 58.f);
          s.anchor = {hip_x, hip_y};
          s.duration = int(std::lround(uniform_real(rng, 1.5, 3.0) * kFps));
          break;
        }
      }
      push_walk(s.anchor);
      script.push_back(s);
      frames += s.duration;
    } else {
      Vec2 wp = random_waypoint();
      wp.y -= torso_height(Action::Stand);
      push_walk(wp);
      ScriptStep s;
      s.action = Action::Stand;
      s.anchor = hip;
      s.facing = script.back().facing;
      s.duration = int(std::lround(uniform_real(rng, 1.0, 2.0) * kFps));
      script.push_back(s);
      frames += s.duration;
    }
  }
  // trim to the requested length
  int excess = frames - total_frames;
  while (excess > 0 && !script.empty()) {
    int cut = std::min(excess, script.back().duration - 1);
    script.back().duration -= cut;
    excess -= cut;
    if (excess > 0) {
      excess -= script.back().duration;
      script.pop_back();
    }
  }
  return script;
}

inline nlohmann::json script_to_json(const ActionScript& script) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& s : script)
    arr.push_back({{"action", to_string(s.action)},
                   {"furniture", s.furniture},
                   {"anchor", {s.anchor.x, s.anchor.y}},
                   {"facing", s.facing},
                   {"duration", s.duration}});
  return arr;
}

inline ActionScript script_from_json(const nlohmann::json& arr) {
  ActionScript script;
  for (const auto& j : arr) {
    ScriptStep s;
    const std::string a = j.at("action").get<std::string>();
    s.action = a == "walk"  ? Action::Walk
               : a == "sit"  ? Action::Sit
               : a == "lie"  ? Action::Lie
               : a == "touch" ? Action::Touch
                              : Action::Stand;
    s.furniture = j.at("furniture").get<int>();
    s.anchor = {j.at("anchor")[0].get<float>(), j.at("anchor")[1].get<float>()};
    s.facing = j.at("facing").get<int>();
    s.duration = j.at("duration").get<int>();
    script.push_back(s);
  }
  return script;
}

// ---------------------------------------------------------------------------
// thermal dynamics

/// Exponential relaxation toward ambient-zero plus saturating deposits under
/// the contact mask. Pure: returns the stepped state.
inline ThermalState step_thermal(const ThermalState& state, const std::vector<uint8_t>& contact,
                                 double dt, float deposit = kMarkDeposit) {
  if (!(dt > 0)) throw ParamError("step_thermal: dt must be positive");
  ThermalState out = state;
  const float decay = float(std::exp(-dt / state.tau));
  for (auto& v : out.mark_buffer.v) v *= decay;
  if (!contact.empty()) {
    if (contact.size() != out.mark_buffer.v.size())
      throw ParamError("step_thermal: contact mask size mismatch");
    for (size_t i = 0; i < contact.size(); ++i)
      if (contact[i]) out.mark_buffer.v[i] = std::max(out.mark_buffer.v[i], deposit);
  }
  return out;
}

namespace detail {

inline void stamp_segment(Image2D& img, Vec2 a, Vec2 b, float radius, float intensity) {
  const int x0 = std::max(0, int(std::floor(std::min(a.x, b.x) - radius)));
  const int x1 = std::min(img.w - 1, int(std::ceil(std::max(a.x, b.x) + radius)));
  const int y0 = std::max(0, int(std::floor(std::min(a.y, b.y) - radius)));
  const int y1 = std::min(img.h - 1, int(std::ceil(std::max(a.y, b.y) + radius)));
  const float abx = b.x - a.x, aby = b.y - a.y;
  const float len2 = abx * abx + aby * aby;
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const float px = x - a.x, py = y - a.y;
      const float t = len2 > 0 ? clamp((px * abx + py * aby) / len2, 0.f, 1.f) : 0.f;
      const float dx = px - t * abx, dy = py - t * aby;
      if (dx * dx + dy * dy <= radius * radius)
        img.at(y, x) = std::max(img.at(y, x), intensity);
    }
}

inline void stamp_mask_segment(std::vector<uint8_t>& mask, int h, int w, Vec2 a, Vec2 b,
                               float radius) {
  const int x0 = std::max(0, int(std::floor(std::min(a.x, b.x) - radius)));
  const int x1 = std::min(w - 1, int(std::ceil(std::max(a.x, b.x) + radius)));
  const int y0 = std::max(0, int(std::floor(std::min(a.y, b.y) - radius)));
  const int y1 = std::min(h - 1, int(std::ceil(std::max(a.y, b.y) + radius)));
  const float abx = b.x - a.x, aby = b.y - a.y;
  const float len2 = abx * abx + aby * aby;
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const float px = x - a.x, py = y - a.y;
      const float t = len2 > 0 ? clamp((px * abx + py * aby) / len2, 0.f, 1.f) : 0.f;
      const float dx = px - t * abx, dy = py - t * aby;
      if (dx * dx + dy * dy <= radius * radius) mask[size_t(y) * w + x] = 1;
    }
}

}  // namespace detail

/// Pixels the body currently presses against furniture `f` for the given
/// action: hips and thighs while sitting, the whole silhouette while lying,
/// a palm patch while touching.
inline std::vector<uint8_t> contact_mask(const SceneSpec& scene, const Pose2D& pose,
                                         Action action, int furniture) {
  std::vector<uint8_t> mask(size_t(scene.room_h) * scene.room_w, 0);
  if (furniture < 0 || furniture >= int(scene.furniture.size())) return mask;
  const FurnitureRect& f = scene.furniture[furniture];
  std::vector<uint8_t> body(mask.size(), 0);
  auto stamp = [&](int ja, int jb, float r) {
    detail::stamp_mask_segment(body, scene.room_h, scene.room_w, pose.joints[ja],
                               pose.joints[jb], r);
  };
  switch (action) {
    case Action::Sit:
      stamp(8, 9, 4.f);
      stamp(8, 12, 4.f);
      stamp(9, 10, 4.f);
      stamp(12, 13, 4.f);
      break;
    case Action::Lie:
      for (auto [a, b] : skeleton_bones()) stamp(a, b, 4.f);
      break;
    case Action::Touch:
      stamp(4, 4, 5.f);  // right palm
      break;
    default:
      return mask;
  }
  const int fx0 = std::max(0, int(f.x0) - 2), fx1 = std::min(scene.room_w - 1, int(f.x1) + 2);
  const int fy0 = std::max(0, int(f.y0) - 2), fy1 = std::min(scene.room_h - 1, int(f.y1) + 2);
  for (int y = fy0; y <= fy1; ++y)
    for (int x = fx0; x <= fx1; ++x)
      if (body[size_t(y) * scene.room_w + x]) mask[size_t(y) * scene.room_w + x] = 1;
  return mask;
}

/// Ambient room + faint furniture outlines + residual marks + the actor
/// silhouette, composed by max and clamped to [0,1]. `render_marks=false` is
/// the thermal-ablation switch: pixels change, poses and annotations never
/// do.
inline ThermalFrame render_frame(const SceneSpec& scene, const Pose2D& pose,
                                 const ThermalState& state, bool render_marks = true,
                                 float scale = 1.f) {
  ThermalFrame frame;
  frame.img = Image2D(scene.room_h, scene.room_w, scene.ambient);
  for (const auto& f : scene.furniture) {
    const int x0 = int(f.x0), x1 = int(f.x1), y0 = int(f.y0), y1 = int(f.y1);
    for (int y = std::max(0, y0); y < std::min(scene.room_h, y1); ++y)
      for (int x = std::max(0, x0); x < std::min(scene.room_w, x1); ++x) {
        const bool border = (y - y0 < 2) || (y1 - 1 - y < 2) || (x - x0 < 2) || (x1 - 1 - x < 2);
        if (border) frame.img.at(y, x) = std::max(frame.img.at(y, x), kFurnitureOutline);
      }
  }
  if (render_marks)
    for (size_t i = 0; i < frame.img.v.size(); ++i)
      frame.img.v[i] = std::max(frame.img.v[i], state.mark_buffer.v[i]);
  for (auto [a, b] : skeleton_bones())
    detail::stamp_segment(frame.img, pose.joints[a], pose.joints[b], kSilhouetteRadius,
                          state.body_temp);
  // head disk
  detail::stamp_segment(frame.img, pose.joints[0], pose.joints[0], 4.5f * scale,
                        state.body_temp);
  for (auto& v : frame.img.v) v = clamp(v, 0.f, 1.f);
  return frame;
}

struct SimConfig {
  double duration_s = 20.0;
  double tau = kDefaultTau;
  bool ablate_marks = false;
  float jitter_sigma = 0.7f;  // per-joint per-frame pose noise
};

/// Runs a script through the pose and thermal models, emitting a full clip.
/// Deterministic per (scene, script, seed, config); ablation changes pixels
/// only.
inline ClipRecord simulate_script(const SceneSpec& scene, const ActionScript& script,
                                  uint64_t seed, const SimConfig& cfg,
                                  const std::string& clip_id) {
  auto rng = make_rng(derive_seed(seed, 0x51D));
  const float body_scale = float(uniform_real(rng, 0.9, 1.1));
  const double dt = 1.0 / kFps;
  const int blend_frames = 5;

  ClipRecord clip;
  clip.meta.clip_id = clip_id;
  clip.meta.fps = kFps;
  clip.meta.actor = "synthetic-actor";
  clip.meta.room = "synthetic-room";
  clip.meta.source = "synthetic";
  clip.meta.extra = {{"seed", seed},
                     {"tau", cfg.tau},
                     {"duration_s", cfg.duration_s},
                     {"ablate_marks", cfg.ablate_marks},
                     {"body_scale", body_scale},
                     {"scene", scene_to_json(scene)},
                     {"script", script_to_json(script)}};

  ThermalState state;
  state.tau = cfg.tau;

  // Raw per-frame poses (pre-blend), plus the action/furniture active per frame.
  std::vector<Pose2D> raw;
  std::vector<Action> frame_action;
  std::vector<int> frame_furniture;
  Vec2 hip = script.empty() ? Vec2{float(scene.room_w / 2), float(scene.room_h / 2)}
                            : script.front().anchor;
  int facing = 1;
  int frame = 0;
  for (size_t si = 0; si < script.size(); ++si) {
    const ScriptStep& s = script[si];
    const Vec2 from = hip;
    for (int i = 0; i < s.duration; ++i, ++frame) {
      Pose2D p;
      if (s.action == Action::Walk) {
        const float t = s.duration > 1 ? float(i) / (s.duration - 1) : 1.f;
        hip = {from.x + (s.anchor.x - from.x) * t, from.y + (s.anchor.y - from.y) * t};
        facing = s.facing;
        const bool phase_b = (i / 4) % 2 == 1;  // gait alternates every 4 frames
        p = detail::pose_at_hip(Action::Walk, facing, hip, body_scale, phase_b);
      } else {
        hip = s.anchor;
        facing = s.facing;
        p = detail::pose_at_hip(s.action, facing, hip, body_scale);
      }
      raw.push_back(p);
      frame_action.push_back(s.action);
      frame_furniture.push_back(s.furniture);
    }
  }

  // Temporal blend across step boundaries, then jitter.
  std::vector<Pose2D> poses = raw;
  int step_start = 0;
  for (size_t si = 0; si + 1 < script.size(); ++si) {
    step_start += script[si].duration;
    const int lo = std::max(0, step_start - blend_frames / 2);
    const int hi = std::min(int(raw.size()) - 1, step_start + blend_frames / 2);
    for (int t = lo; t <= hi; ++t) {
      const float w = float(t - lo + 1) / float(hi - lo + 2);
      const Pose2D& a = raw[std::max(0, lo - 1)];
      const Pose2D& b = raw[hi];
      for (int j = 0; j < kJointCount; ++j)
        poses[t].joints[j] = {a.joints[j].x * (1 - w) + b.joints[j].x * w,
                              a.joints[j].y * (1 - w) + b.joints[j].y * w};
    }
  }
  for (auto& p : poses) {
    std::array<Vec2, kJointCount> pts;
    for (int j = 0; j < kJointCount; ++j)
      pts[j] = {p.joints[j].x + float(normal(rng, 0, cfg.jitter_sigma)),
                p.joints[j].y + float(normal(rng, 0, cfg.jitter_sigma))};
    p = make_pose(pts);
  }

  // Thermal pass + rendering.
  for (size_t t = 0; t < poses.size(); ++t) {
    std::vector<uint8_t> contact;
    if (frame_action[t] == Action::Sit || frame_action[t] == Action::Lie ||
        frame_action[t] == Action::Touch)
      contact = contact_mask(scene, poses[t], frame_action[t], frame_furniture[t]);
    state = step_thermal(state, contact, dt);
    auto frame_ptr = std::make_shared<ThermalFrame>(
        render_frame(scene, poses[t], state, !cfg.ablate_marks, body_scale));
    frame_ptr->timestamp = double(t) / kFps;
    clip.frames.push_back(std::move(frame_ptr));
  }
  clip.poses = std::move(poses);

  // Annotations: contiguous interaction intervals.
  int cursor = 0;
  for (const auto& s : script) {
    if (s.action != Action::Walk && s.action != Action::Stand) {
      clip.meta.annotations.push_back({to_string(s.action),
                                       "furniture" + std::to_string(s.furniture), cursor,
                                       cursor + s.duration - 1});
    }
    cursor += s.duration;
  }
  return clip;
}

inline ClipRecord simulate_clip(const SceneSpec& scene, uint64_t seed, double duration_s,
                                double tau, bool ablate_marks = false,
                                const std::string& clip_id = "clip") {
  if (duration_s < 10) throw ParamError("simulate_clip: duration must be >= 10 s");
  SimConfig cfg;
  cfg.duration_s = duration_s;
  cfg.tau = tau;
  cfg.ablate_marks = ablate_marks;
  auto script = script_episode(scene, seed, duration_s);
  return simulate_script(scene, script, seed, cfg, clip_id);
}

/// Re-runs the simulation recorded in a synthetic clip's meta and returns the
/// mark buffer right after `frame_index` was produced. Used by the intensity
/// sweep, which needs the pre-composite mark layer.
inline ThermalState reconstruct_thermal_state(const ClipMeta& meta, int frame_index) {
  if (meta.extra.is_null()) throw DataError("clip has no simulation parameters");
  const SceneSpec scene = scene_from_json(meta.extra.at("scene"));
  const ActionScript script = script_from_json(meta.extra.at("script"));
  SimConfig cfg;
  cfg.duration_s = meta.extra.at("duration_s").get<double>();
  cfg.tau = meta.extra.at("tau").get<double>();
  cfg.ablate_marks = false;  // the state itself is mark-accurate either way
  ClipRecord clip = simulate_script(scene, script, meta.extra.at("seed").get<uint64_t>(), cfg,
                                    meta.clip_id);
  if (frame_index < 0 || frame_index >= clip.length())
    throw ParamError("reconstruct_thermal_state: frame out of range");
  ThermalState state;
  state.tau = cfg.tau;
  const double dt = 1.0 / kFps;
  for (int t = 0; t <= frame_index; ++t) {
    std::vector<uint8_t> contact;
    // replay exactly as simulate_script did
    int cursor = 0;
    Action act = Action::Stand;
    int furn = -1;
    for (const auto& s : script) {
      if (t < cursor + s.duration) {
        act = s.action;
        furn = s.furniture;
        break;
      }
      cursor += s.duration;
    }
    if (act == Action::Sit || act == Action::Lie || act == Action::Touch)
      contact = contact_mask(scene, clip.poses[t], act, furn);
    state = step_thermal(state, contact, dt);
  }
  return state;
}

}  // namespace thermopose
