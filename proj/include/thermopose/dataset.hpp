#pragma once

#include <cstdio>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "thermopose/common.hpp"
#include "thermopose/io.hpp"
#include "thermopose/rng.hpp"
#include "thermopose/skeleton.hpp"

namespace thermopose {

namespace fs = std::filesystem;

struct ActionAnnotation {
  std::string action;
  std::string object;
  int start_frame = 0;
  int end_frame = 0;
};

struct ClipMeta {
  std::string clip_id;
  int fps = kFps;
  std::string actor;
  std::string room;
  std::array<float, 2> intensity_range = {0.f, 1.f};
  std::vector<ActionAnnotation> annotations;
  std::string source = "real";  // or "synthetic"
  nlohmann::json extra;         // scene/script parameters for synthetic clips
};

/// One ingested clip: frames at 1/fps spacing with per-frame poses.
struct ClipRecord {
  ClipMeta meta;
  std::vector<std::shared_ptr<const ThermalFrame>> frames;
  std::vector<Pose2D> poses;

  int length() const { return int(frames.size()); }
};

/// One supervised instance: frame at time t, pose at t, pose 3 s earlier.
struct SamplePair {
  std::shared_ptr<const ThermalFrame> image;
  Pose2D current_pose;
  Pose2D past_pose;
  Vec2 past_torso;
  int past_type = -1;  // set after the vocabulary is fitted
  std::string clip_id;
  int frame_index = 0;
};

/// SamplePair without pixels; the frame is read from disk on demand.
struct PairRef {
  std::string clip_dir;
  std::string clip_id;
  int frame_index = 0;
  Pose2D current_pose;
  Pose2D past_pose;
  Vec2 past_torso;
  int past_type = -1;
};

struct SplitManifest {
  std::vector<std::string> train, val, test;
  uint64_t seed = 0;
  std::array<double, 3> ratios = {0.8, 0.1, 0.1};
};

inline std::string frame_filename(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%06d.png", index);
  return buf;
}

inline ClipMeta clip_meta_from_json(const nlohmann::json& j, const std::string& clip_id) {
  ClipMeta m;
  m.clip_id = clip_id;
  m.fps = j.value("fps", kFps);
  m.actor = j.value("actor", "");
  m.room = j.value("room", "");
  if (j.contains("intensity_range")) {
    m.intensity_range[0] = j["intensity_range"][0].get<float>();
    m.intensity_range[1] = j["intensity_range"][1].get<float>();
  }
  m.source = j.value("source", "real");
  for (const auto& a : j.value("annotations", nlohmann::json::array()))
    m.annotations.push_back({a.at("action").get<std::string>(), a.value("object", ""),
                             a.at("start_frame").get<int>(), a.at("end_frame").get<int>()});
  if (j.contains("sim")) m.extra = j["sim"];
  return m;
}

inline nlohmann::json clip_meta_to_json(const ClipMeta& m) {
  nlohmann::json ann = nlohmann::json::array();
  for (const auto& a : m.annotations)
    ann.push_back({{"action", a.action},
                   {"object", a.object},
                   {"start_frame", a.start_frame},
                   {"end_frame", a.end_frame}});
  nlohmann::json j = {{"fps", m.fps},
                      {"actor", m.actor},
                      {"room", m.room},
                      {"intensity_range", {m.intensity_range[0], m.intensity_range[1]}},
                      {"annotations", ann},
                      {"source", m.source}};
  if (!m.extra.is_null()) j["sim"] = m.extra;
  return j;
}

/// Parses poses.json; shared by eager and lazy loading paths.
inline std::vector<Pose2D> load_clip_poses(const std::string& clip_dir) {
  auto j = load_json((fs::path(clip_dir) / "poses.json").string());
  std::vector<Pose2D> poses;
  for (const auto& f : j.at("frames")) poses.push_back(pose_from_json(f));
  return poses;
}

inline ClipMeta load_clip_meta(const std::string& clip_dir) {
  const std::string clip_id = fs::path(clip_dir).filename().string();
  return clip_meta_from_json(load_json((fs::path(clip_dir) / "meta.json").string()), clip_id);
}

/// Reads one thermal frame of a clip, rescaled from 16-bit to [0,1].
inline std::shared_ptr<const ThermalFrame> load_clip_frame(const std::string& clip_dir,
                                                           int index, int fps = kFps) {
  const fs::path p = fs::path(clip_dir) / "thermal" / frame_filename(index);
  if (!fs::exists(p)) throw DataError("missing thermal frame: " + p.string());
  auto frame = std::make_shared<ThermalFrame>();
  frame->img = read_frame_png(p.string());
  if (frame->img.h != kFrameH || frame->img.w != kFrameW)
    throw DataError("unexpected frame size in " + p.string());
  frame->timestamp = double(index) / fps;
  return frame;
}

/// Loads one clip directory eagerly (frames, poses, meta). Frame/pose count
/// mismatches and missing files are rejected with the offending frame named.
inline ClipRecord load_clip(const std::string& clip_dir) {
  ClipRecord clip;
  clip.meta = load_clip_meta(clip_dir);
  clip.poses = load_clip_poses(clip_dir);

  const fs::path thermal = fs::path(clip_dir) / "thermal";
  if (!fs::exists(thermal)) throw DataError("missing thermal directory in " + clip_dir);
  size_t frame_count = 0;
  for (const auto& e : fs::directory_iterator(thermal))
    if (e.path().extension() == ".png") ++frame_count;
  if (frame_count != clip.poses.size())
    throw DataError("clip " + clip.meta.clip_id + ": " + std::to_string(frame_count) +
                    " frames but " + std::to_string(clip.poses.size()) + " poses");
  for (size_t i = 0; i < clip.poses.size(); ++i)
    clip.frames.push_back(load_clip_frame(clip_dir, int(i), clip.meta.fps));
  return clip;
}

/// Writes a clip in the dataset layout (thermal/%06d.png, poses.json,
/// meta.json).
inline void write_clip(const std::string& clip_dir, const ClipRecord& clip) {
  ensure_dir(fs::path(clip_dir) / "thermal");
  for (size_t i = 0; i < clip.frames.size(); ++i)
    write_frame_png((fs::path(clip_dir) / "thermal" / frame_filename(int(i))).string(),
                    clip.frames[i]->img);
  nlohmann::json frames = nlohmann::json::array();
  for (const auto& p : clip.poses) frames.push_back(pose_to_json(p));
  save_json((fs::path(clip_dir) / "poses.json").string(), {{"frames", frames}});
  save_json((fs::path(clip_dir) / "meta.json").string(), clip_meta_to_json(clip.meta));
}

/// Mean per-joint displacement between two poses, over joints valid in both.
inline double mean_joint_displacement(const Pose2D& a, const Pose2D& b) {
  double sum = 0;
  int n = 0;
  for (int j = 0; j < kJointCount; ++j) {
    if (!a.valid[j] || !b.valid[j]) continue;
    sum += distance(a.joints[j], b.joints[j]);
    ++n;
  }
  return n == 0 ? 0.0 : sum / n;
}

/// Indices t whose pose moved at least `threshold_px` per joint on average
/// over the past `window` frames. Static stretches produce trivial pairs and
/// are dropped.
inline std::vector<int> motion_filter(const std::vector<Pose2D>& poses,
                                      int window = kPastOffsetFrames,
                                      double threshold_px = 45.0) {
  std::vector<int> kept;
  for (int t = window; t < int(poses.size()); ++t)
    if (mean_joint_displacement(poses[t], poses[t - window]) >= threshold_px) kept.push_back(t);
  return kept;
}

inline std::vector<int> motion_filter(const ClipRecord& clip, int window = kPastOffsetFrames,
                                      double threshold_px = 45.0) {
  return motion_filter(clip.poses, window, threshold_px);
}

/// Emits (frame t, pose t, pose t-offset) for t = offset, offset+stride, ...
/// past_type stays unset until a vocabulary exists.
inline std::vector<SamplePair> make_pairs(const ClipRecord& clip, int offset = kPastOffsetFrames,
                                          int stride = 1) {
  if (stride < 1) throw ParamError("make_pairs: stride must be >= 1");
  std::vector<SamplePair> pairs;
  for (int t = offset; t < clip.length(); t += stride) {
    SamplePair s;
    s.image = clip.frames[t];
    s.current_pose = clip.poses[t];
    s.past_pose = clip.poses[t - offset];
    s.past_torso = s.past_pose.torso();
    s.clip_id = clip.meta.clip_id;
    s.frame_index = t;
    pairs.push_back(std::move(s));
  }
  return pairs;
}

/// Lazy variant of motion_filter + make_pairs over a clip directory: only
/// poses.json is read. Returns pair metadata referencing frames on disk.
inline std::vector<PairRef> index_clip_pairs(const std::string& clip_dir,
                                             int offset = kPastOffsetFrames, int stride = 1,
                                             bool apply_motion_filter = true,
                                             double threshold_px = 45.0) {
  const std::string clip_id = fs::path(clip_dir).filename().string();
  auto poses = load_clip_poses(clip_dir);
  std::vector<PairRef> refs;
  for (int t = offset; t < int(poses.size()); t += stride) {
    if (apply_motion_filter &&
        mean_joint_displacement(poses[t], poses[t - offset]) < threshold_px)
      continue;
    PairRef r;
    r.clip_dir = clip_dir;
    r.clip_id = clip_id;
    r.frame_index = t;
    r.current_pose = poses[t];
    r.past_pose = poses[t - offset];
    r.past_torso = r.past_pose.torso();
    refs.push_back(std::move(r));
  }
  return refs;
}

inline SamplePair materialize(const PairRef& r) {
  SamplePair s;
  s.image = load_clip_frame(r.clip_dir, r.frame_index);
  s.current_pose = r.current_pose;
  s.past_pose = r.past_pose;
  s.past_torso = r.past_torso;
  s.past_type = r.past_type;
  s.clip_id = r.clip_id;
  s.frame_index = r.frame_index;
  return s;
}

/// Deterministic clip-level split: shuffle by seed, cut by ratios.
inline SplitManifest split_by_clip(std::vector<std::string> clip_ids,
                                   std::array<double, 3> ratios, uint64_t seed) {
  if (clip_ids.size() < 3) throw ParamError("split_by_clip: need at least 3 clips");
  const double total = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(total - 1.0) > 1e-9) throw ParamError("split_by_clip: ratios must sum to 1");
  std::sort(clip_ids.begin(), clip_ids.end());
  auto rng = make_rng(seed);
  std::shuffle(clip_ids.begin(), clip_ids.end(), rng);

  SplitManifest m;
  m.seed = seed;
  m.ratios = ratios;
  const size_t n = clip_ids.size();
  const size_t n_train = size_t(std::llround(n * ratios[0]));
  const size_t n_val = size_t(std::llround(n * ratios[1]));
  for (size_t i = 0; i < n; ++i) {
    if (i < n_train)
      m.train.push_back(clip_ids[i]);
    else if (i < n_train + n_val)
      m.val.push_back(clip_ids[i]);
    else
      m.test.push_back(clip_ids[i]);
  }
  return m;
}

inline nlohmann::json split_to_json(const SplitManifest& m) {
  return {{"seed", m.seed},
          {"ratios", {m.ratios[0], m.ratios[1], m.ratios[2]}},
          {"train", m.train},
          {"val", m.val},
          {"test", m.test}};
}

inline SplitManifest split_from_json(const nlohmann::json& j) {
  SplitManifest m;
  m.seed = j.at("seed").get<uint64_t>();
  for (int i = 0; i < 3; ++i) m.ratios[i] = j.at("ratios")[i].get<double>();
  m.train = j.at("train").get<std::vector<std::string>>();
  m.val = j.at("val").get<std::vector<std::string>>();
  m.test = j.at("test").get<std::vector<std::string>>();
  return m;
}

/// All clip directories under root/clips, sorted by id.
inline std::vector<std::string> list_clip_dirs(const std::string& dataset_root) {
  const fs::path clips = fs::path(dataset_root) / "clips";
  if (!fs::exists(clips)) throw DataError("no clips directory under " + dataset_root);
  std::vector<std::string> dirs;
  for (const auto& e : fs::directory_iterator(clips))
    if (e.is_directory()) dirs.push_back(e.path().string());
  std::sort(dirs.begin(), dirs.end());
  return dirs;
}

/// Pair index for a list of clip ids under a dataset root.
inline std::vector<PairRef> index_pairs(const std::string& dataset_root,
                                        const std::vector<std::string>& clip_ids, int stride = 1,
                                        bool motion_filtered = true) {
  std::vector<PairRef> all;
  for (const auto& id : clip_ids) {
    const fs::path dir = fs::path(dataset_root) / "clips" / id;
    auto refs = index_clip_pairs(dir.string(), kPastOffsetFrames, stride, motion_filtered);
    all.insert(all.end(), refs.begin(), refs.end());
  }
  return all;
}

/// Stable digest of a pair set (ids, frame indices, pose bytes), used in
/// output manifests.
inline std::string pairs_digest(const std::vector<PairRef>& refs) {
  uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](const void* p, size_t n) {
    h = fnv1a64(std::string_view(static_cast<const char*>(p), n), h);
  };
  for (const auto& r : refs) {
    mix(r.clip_id.data(), r.clip_id.size());
    mix(&r.frame_index, sizeof(r.frame_index));
    mix(r.current_pose.joints.data(), sizeof(r.current_pose.joints));
    mix(r.past_pose.joints.data(), sizeof(r.past_pose.joints));
  }
  return hash_hex(h);
}

}  // namespace thermopose
