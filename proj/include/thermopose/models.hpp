#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "thermopose/dataset.hpp"
#include "thermopose/heatmap.hpp"
#include "thermopose/nn/layers.hpp"
#include "thermopose/vocabulary.hpp"

namespace thermopose {

inline constexpr float kInputSigma = 2.f;  // bump width on the 72x96 grid
inline constexpr int kGoalChannels = 1 + kJointCount;                      // I, H_p
inline constexpr int kTypeChannels = kGoalChannels + 1;                    // + H_r
inline constexpr int kPoseChannels = kTypeChannels + (kJointCount - 1);    // + H_{C_z+r}
inline constexpr int kSemanticChannels = 1 + kJointCount;                  // I, H_q
inline constexpr int kBaselineChannels = 1 + kJointCount;                  // I, H_p

// ---------------------------------------------------------------------------
// input assembly: all models consume [C,72,96] stacks; the thermal frame is
// reduced 4x by exact block averaging and every encoded point becomes a
// peak-normalized Gaussian channel.

namespace detail {

inline void fill_frame_channel(float* dst, const Image2D& img) {
  for (int gy = 0; gy < kGridH; ++gy)
    for (int gx = 0; gx < kGridW; ++gx) {
      float sum = 0;
      for (int dy = 0; dy < kGridStride; ++dy)
        for (int dx = 0; dx < kGridStride; ++dx)
          sum += img.at(gy * kGridStride + dy, gx * kGridStride + dx);
      dst[gy * kGridW + gx] = sum / (kGridStride * kGridStride);
    }
}

inline void fill_point_channels(float* dst, const Vec2* pts, int count) {
  HeatmapGrid g = render_heatmap(std::vector<Vec2>(pts, pts + count), kInputSigma, kGridH,
                                 kGridW);
  for (int c = 0; c < count; ++c) {
    const float* src = g.channel(c);
    float mx = 0;
    for (int i = 0; i < kGridCells; ++i) mx = std::max(mx, src[i]);
    const float inv = mx > 0 ? 1.f / mx : 0.f;
    float* out = dst + size_t(c) * kGridCells;
    for (int i = 0; i < kGridCells; ++i) out[i] = src[i] * inv;
  }
}

}  // namespace detail

/// Writes one sample's channel stack into `slot` ([channels x 72 x 96]).
inline void assemble_goal_input(float* slot, const ThermalFrame& frame, const Pose2D& current) {
  detail::fill_frame_channel(slot, frame.img);
  detail::fill_point_channels(slot + kGridCells, current.joints.data(), kJointCount);
}

inline void assemble_type_input(float* slot, const ThermalFrame& frame, const Pose2D& current,
                                Vec2 r) {
  assemble_goal_input(slot, frame, current);
  detail::fill_point_channels(slot + size_t(kGoalChannels) * kGridCells, &r, 1);
}

inline void assemble_pose_input(float* slot, const ThermalFrame& frame, const Pose2D& current,
                                Vec2 r, const Pose2D& painted_center) {
  assemble_type_input(slot, frame, current, r);
  const auto rest = split_pose(painted_center);
  detail::fill_point_channels(slot + size_t(kTypeChannels) * kGridCells, rest.data(),
                              kJointCount - 1);
}

inline void assemble_semantic_input(float* slot, const ThermalFrame& frame,
                                    const Pose2D& candidate) {
  detail::fill_frame_channel(slot, frame.img);
  detail::fill_point_channels(slot + kGridCells, candidate.joints.data(), kJointCount);
}

// ---------------------------------------------------------------------------
// models

/// GoalNet: thermal frame + current pose -> distribution over 72x96 torso
/// cells.
struct GoalModel {
  nn::EncDecConfig cfg;
  uint64_t init_seed = 0;
  nn::EncDecNet net;

  GoalModel(nn::EncDecConfig c, uint64_t seed)
      : cfg(c), init_seed(seed), net(kGoalChannels, 1, c, seed) {}

  nn::NodePtr batch_logp(nn::Tensor input) { return net.forward_logp(nn::constant(std::move(input))); }

  HeatmapGrid forward(const ThermalFrame& frame, const Pose2D& current) {
    nn::Tensor input({1, kGoalChannels, kGridH, kGridW});
    assemble_goal_input(input.data.data(), frame, current);
    auto logp = batch_logp(std::move(input));
    HeatmapGrid g(1, kGridH, kGridW);
    for (int i = 0; i < kGridCells; ++i) g.v[i] = std::exp(logp->value.data[i]);
    g.normalized = true;
    return g;
  }
};

/// TypeNet: adds the proposed torso position, emits a k-way simplex.
struct TypeModel {
  nn::ClassifierConfig cfg;
  int k = 0;
  uint64_t init_seed = 0;
  nn::ClassifierNet net;

  TypeModel(int k_, nn::ClassifierConfig c, uint64_t seed)
      : cfg(c), k(k_), init_seed(seed), net(kTypeChannels, k_, c, seed) {}

  nn::NodePtr batch_logp(nn::Tensor input) { return net.forward_logp(nn::constant(std::move(input))); }

  std::vector<double> forward(const ThermalFrame& frame, const Pose2D& current, Vec2 r) {
    nn::Tensor input({1, kTypeChannels, kGridH, kGridW});
    assemble_type_input(input.data.data(), frame, current, r);
    auto logp = batch_logp(std::move(input));
    std::vector<double> probs(k);
    for (int i = 0; i < k; ++i) probs[i] = std::exp(double(logp->value.data[i]));
    return probs;
  }
};

/// PoseNet: refines a painted cluster center into 14 per-joint cell
/// distributions.
struct PoseModel {
  nn::EncDecConfig cfg;
  uint64_t init_seed = 0;
  nn::EncDecNet net;

  PoseModel(nn::EncDecConfig c, uint64_t seed)
      : cfg(c), init_seed(seed), net(kPoseChannels, kJointCount - 1, c, seed) {}

  nn::NodePtr batch_logp(nn::Tensor input) { return net.forward_logp(nn::constant(std::move(input))); }

  HeatmapGrid forward(const ThermalFrame& frame, const Pose2D& current, Vec2 r,
                      const Pose2D& painted_center) {
    nn::Tensor input({1, kPoseChannels, kGridH, kGridW});
    assemble_pose_input(input.data.data(), frame, current, r, painted_center);
    auto logp = batch_logp(std::move(input));
    HeatmapGrid g(kJointCount - 1, kGridH, kGridW);
    for (size_t i = 0; i < g.v.size(); ++i) g.v[i] = std::exp(logp->value.data[i]);
    g.normalized = true;
    return g;
  }
};

/// Direct past-pose heatmap model (the Hourglass baseline): 15 channels, no
/// r/z conditioning.
struct HeatmapBaselineModel {
  nn::EncDecConfig cfg;
  uint64_t init_seed = 0;
  nn::EncDecNet net;

  HeatmapBaselineModel(nn::EncDecConfig c, uint64_t seed)
      : cfg(c), init_seed(seed), net(kBaselineChannels, kJointCount, c, seed) {}

  nn::NodePtr batch_logp(nn::Tensor input) { return net.forward_logp(nn::constant(std::move(input))); }

  HeatmapGrid forward(const ThermalFrame& frame, const Pose2D& current) {
    nn::Tensor input({1, kBaselineChannels, kGridH, kGridW});
    assemble_goal_input(input.data.data(), frame, current);
    auto logp = batch_logp(std::move(input));
    HeatmapGrid g(kJointCount, kGridH, kGridW);
    for (size_t i = 0; i < g.v.size(); ++i) g.v[i] = std::exp(logp->value.data[i]);
    g.normalized = true;
    return g;
  }
};

/// Binary plausibility scorer for the semantic metric.
struct SemanticClassifier {
  nn::ClassifierConfig cfg;
  uint64_t init_seed = 0;
  nn::ClassifierNet net;
  double reported_accuracy = 0;

  SemanticClassifier(nn::ClassifierConfig c, uint64_t seed)
      : cfg(c), init_seed(seed), net(kSemanticChannels, 1, c, seed) {}

  nn::NodePtr batch_logits(nn::Tensor input) {
    return net.forward_logits(nn::constant(std::move(input)));
  }

  double score(const ThermalFrame& frame, const Pose2D& candidate) {
    nn::Tensor input({1, kSemanticChannels, kGridH, kGridW});
    assemble_semantic_input(input.data.data(), frame, candidate);
    auto z = batch_logits(std::move(input));
    return 1.0 / (1.0 + std::exp(-double(z->value.data[0])));
  }
};

// ---------------------------------------------------------------------------
// cross-entropy losses on normalized predictions (evaluation path; training
// uses the fused log-softmax graph ops)

inline constexpr double kProbClamp = 1e-12;

/// -log of the predicted probability at the target's grid cell.
inline double ce_loss_grid(const HeatmapGrid& pred, Vec2 target, int channel = 0) {
  if (!pred.normalized) throw ParamError("ce_loss_grid: prediction must be normalized");
  if (target.x < 0 || target.x >= kFrameW || target.y < 0 || target.y >= kFrameH)
    throw ParamError("ce_loss_grid: target outside the frame");
  auto [gy, gx] = pixel_to_grid_cell(target, pred.h, pred.w);
  const double p = std::max(double(pred.at(channel, gy, gx)), kProbClamp);
  return -std::log(p);
}

/// Summed per-joint grid CE (the PoseNet objective shape).
inline double ce_loss_grid_sum(const HeatmapGrid& pred, const std::vector<Vec2>& targets) {
  if (int(targets.size()) != pred.channels) throw ParamError("ce_loss_grid_sum: channel count");
  double sum = 0;
  for (int c = 0; c < pred.channels; ++c) sum += ce_loss_grid(pred, targets[c], c);
  return sum;
}

inline double ce_loss_class(const std::vector<double>& simplex, int target) {
  if (target < 0 || target >= int(simplex.size()))
    throw ParamError("ce_loss_class: target out of range");
  return -std::log(std::max(simplex[target], kProbClamp));
}

// ---------------------------------------------------------------------------
// training

enum class ModuleKind { Goal, Type, Pose, Semantic, HeatmapBaseline };

inline const char* to_string(ModuleKind k) {
  switch (k) {
    case ModuleKind::Goal: return "goal";
    case ModuleKind::Type: return "type";
    case ModuleKind::Pose: return "pose";
    case ModuleKind::Semantic: return "semantic";
    default: return "heatmap_baseline";
  }
}

struct TrainConfig {
  double learning_rate = 5e-5;
  int batch_size = 32;
  int iterations = 6000;
  uint64_t seed = 0;
  bool flip_aug = true;
  bool crop_aug = true;
  double weight_decay = 0;
  double early_stop_fraction = 0;  // 0 disables; else stop when recent mean
                                   // loss < fraction * first-iteration loss
  int checkpoint_every = 0;
  std::string checkpoint_dir;
};

/// Appendix-scale defaults per module.
inline TrainConfig default_train_config(ModuleKind kind) {
  TrainConfig c;
  switch (kind) {
    case ModuleKind::Goal: c.learning_rate = 5e-5; c.batch_size = 32; break;
    case ModuleKind::Type: c.learning_rate = 5e-5; c.batch_size = 128; break;
    case ModuleKind::Pose: c.learning_rate = 1e-4; c.batch_size = 32; break;
    case ModuleKind::Semantic:
      c.learning_rate = 3e-5;
      c.batch_size = 128;
      c.weight_decay = 1e-3;
      break;
    case ModuleKind::HeatmapBaseline: c.learning_rate = 1e-4; c.batch_size = 32; break;
  }
  return c;
}

struct TrainResult {
  std::vector<float> loss_curve;
  std::vector<int> checkpoint_iterations;
  std::vector<std::string> checkpoint_files;
};

/// Augmentation output: a transformed copy of the pair. `valid` is false
/// when the random crop clipped a supervision target, in which case the
/// sample is skipped for this batch.
struct AugmentedPair {
  ThermalFrame frame;
  Pose2D current_pose;
  Pose2D past_pose;
  Vec2 past_torso;
  int past_type = -1;
  bool valid = true;
};

namespace detail {

inline Image2D flip_image(const Image2D& img) {
  Image2D out(img.h, img.w);
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x) out.at(y, x) = img.at(y, img.w - 1 - x);
  return out;
}

inline bool in_frame(Vec2 p) {
  return p.x >= 0 && p.x < kFrameW && p.y >= 0 && p.y < kFrameH;
}

}  // namespace detail

/// Horizontal flip plus random crop/re-pad. The flip mirrors the image and
/// both poses consistently and re-derives the past type from the vocabulary
/// (a flipped pose is a different pose). The crop translates content by
/// (paste - source) and zero-pads; supervision targets that fall outside
/// invalidate the sample.
inline AugmentedPair augment_pair(const SamplePair& s, const PoseTypeVocabulary* vocab,
                                  bool do_flip, bool do_crop, std::mt19937_64& rng) {
  AugmentedPair out;
  out.frame = *s.image;
  out.current_pose = s.current_pose;
  out.past_pose = s.past_pose;
  out.past_type = s.past_type;

  if (do_flip) {
    out.frame.img = detail::flip_image(out.frame.img);
    out.current_pose = flip_pose(out.current_pose);
    out.past_pose = flip_pose(out.past_pose);
    if (vocab && vocab->fitted()) out.past_type = assign_type(out.past_pose, *vocab);
  }

  if (do_crop) {
    const double scale = uniform_real(rng, 0.85, 1.0);
    const int ch = int(std::lround(kFrameH * scale));
    const int cw = int(std::lround(kFrameW * scale));
    const int sy = int(uniform_int(rng, 0, kFrameH - ch));
    const int sx = int(uniform_int(rng, 0, kFrameW - cw));
    const int py = int(uniform_int(rng, 0, kFrameH - ch));
    const int px = int(uniform_int(rng, 0, kFrameW - cw));
    Image2D img(kFrameH, kFrameW, 0.f);
    for (int y = 0; y < ch; ++y)
      for (int x = 0; x < cw; ++x) img.at(py + y, px + x) = out.frame.img.at(sy + y, sx + x);
    out.frame.img = std::move(img);
    const Vec2 shift{float(px - sx), float(py - sy)};
    auto shift_pose = [&](const Pose2D& p) {
      Pose2D q = p;
      for (auto& j : q.joints) j = j + shift;
      return q;
    };
    out.current_pose = shift_pose(out.current_pose);
    out.past_pose = shift_pose(out.past_pose);
    // targets must stay inside the pasted region
    const float rx0 = float(px), ry0 = float(py);
    const float rx1 = float(px + cw), ry1 = float(py + ch);
    auto inside = [&](Vec2 p) { return p.x >= rx0 && p.x < rx1 && p.y >= ry0 && p.y < ry1; };
    for (int j = 0; j < kJointCount && out.valid; ++j)
      if (!inside(out.past_pose.joints[j])) out.valid = false;
    // inputs are clamped, not skipped
    out.current_pose = clamp_to_frame(out.current_pose);
  }
  out.past_torso = out.past_pose.torso();
  return out;
}

using SampleLoader = std::function<SamplePair(size_t)>;

inline SampleLoader loader_from_refs(const std::vector<PairRef>& refs) {
  return [&refs](size_t i) { return materialize(refs[i]); };
}

inline SampleLoader loader_from_pairs(const std::vector<SamplePair>& pairs) {
  return [&pairs](size_t i) { return pairs[i]; };
}

inline void annotate_types(std::vector<PairRef>& refs, const PoseTypeVocabulary& vocab) {
  for (auto& r : refs) r.past_type = assign_type(r.past_pose, vocab);
}

inline void annotate_types(std::vector<SamplePair>& pairs, const PoseTypeVocabulary& vocab) {
  for (auto& p : pairs) p.past_type = assign_type(p.past_pose, vocab);
}

namespace detail {

/// Shared training loop: epoch-shuffled batches, Adam, loss curve,
/// checkpoints, optional early stop.
template <typename AssembleBatch>
TrainResult run_training(std::vector<nn::Parameter*>& params, size_t pair_count,
                         AssembleBatch&& assemble, const TrainConfig& cfg,
                         const std::function<void(const std::string&)>& save_snapshot = {}) {
  if (pair_count == 0) throw ParamError("train: empty pair set");
  nn::Adam opt({.lr = cfg.learning_rate, .weight_decay = cfg.weight_decay});
  auto rng_order = make_rng(derive_seed(cfg.seed, 1));
  auto rng_aug = make_rng(derive_seed(cfg.seed, 2));

  std::vector<size_t> order(pair_count);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng_order);
  size_t cursor = 0;
  auto next_index = [&]() {
    if (cursor >= order.size()) {
      std::shuffle(order.begin(), order.end(), rng_order);
      cursor = 0;
    }
    return order[cursor++];
  };

  TrainResult result;
  auto checkpoint = [&](int iter) {
    if (!save_snapshot || cfg.checkpoint_every <= 0) return;
    const std::string file =
        (std::filesystem::path(cfg.checkpoint_dir) / ("iter" + std::to_string(iter) + ".ckpt"))
            .string();
    save_snapshot(file);
    result.checkpoint_iterations.push_back(iter);
    result.checkpoint_files.push_back(file);
  };

  for (int it = 0; it < cfg.iterations; ++it) {
    auto loss = assemble(next_index, rng_aug);
    result.loss_curve.push_back(loss->value.data[0]);
    nn::backward(loss);
    opt.step(params);
    if (cfg.checkpoint_every > 0 && (it + 1) % cfg.checkpoint_every == 0) checkpoint(it + 1);
    if (cfg.early_stop_fraction > 0 && result.loss_curve.size() >= 10) {
      double recent = 0;
      for (size_t i = result.loss_curve.size() - 10; i < result.loss_curve.size(); ++i)
        recent += result.loss_curve[i];
      recent /= 10;
      if (recent < cfg.early_stop_fraction * result.loss_curve.front()) break;
    }
  }
  if (cfg.checkpoint_every > 0 &&
      (result.checkpoint_iterations.empty() ||
       result.checkpoint_iterations.back() != int(result.loss_curve.size())))
    checkpoint(int(result.loss_curve.size()));
  return result;
}

/// Draws one augmented sample, retrying while crops invalidate targets.
inline AugmentedPair draw_sample(const SampleLoader& load,
                                 const std::function<size_t()>& next_index,
                                 const PoseTypeVocabulary* vocab, const TrainConfig& cfg,
                                 std::mt19937_64& rng) {
  for (int attempt = 0; attempt < 16; ++attempt) {
    const SamplePair s = load(next_index());
    const bool flip = cfg.flip_aug && bernoulli(rng, 0.5);
    const bool crop = cfg.crop_aug;
    AugmentedPair a = augment_pair(s, vocab, flip, crop, rng);
    if (a.valid) return a;
  }
  // fall back to an untransformed sample
  AugmentedPair a;
  const SamplePair s = load(next_index());
  a.frame = *s.image;
  a.current_pose = s.current_pose;
  a.past_pose = s.past_pose;
  a.past_torso = s.past_torso;
  a.past_type = s.past_type;
  return a;
}

inline int torso_cell(Vec2 p) {
  auto [gy, gx] = pixel_to_grid_cell(p, kGridH, kGridW);
  return gy * kGridW + gx;
}

}  // namespace detail

inline TrainResult train_goal(GoalModel& model, const SampleLoader& load, size_t count,
                              const TrainConfig& cfg) {
  std::vector<nn::Parameter*> params;
  model.net.collect(params);
  auto snapshot = [&](const std::string& file) {
    std::ofstream os(file, std::ios::binary);
    nn::save_parameters(os, params);
  };
  return detail::run_training(
      params, count,
      [&](const std::function<size_t()>& next, std::mt19937_64& rng) {
        const int b = cfg.batch_size;
        nn::Tensor input({b, kGoalChannels, kGridH, kGridW});
        std::vector<int> targets(b);
        for (int i = 0; i < b; ++i) {
          auto a = detail::draw_sample(load, next, nullptr, cfg, rng);
          assemble_goal_input(input.data.data() + size_t(i) * kGoalChannels * kGridCells,
                              a.frame, a.current_pose);
          targets[i] = detail::torso_cell(a.past_torso);
        }
        return nn::nll_cells(model.batch_logp(std::move(input)), std::move(targets));
      },
      cfg, snapshot);
}

inline TrainResult train_type(TypeModel& model, const SampleLoader& load, size_t count,
                              const PoseTypeVocabulary& vocab, const TrainConfig& cfg) {
  std::vector<nn::Parameter*> params;
  model.net.collect(params);
  auto snapshot = [&](const std::string& file) {
    std::ofstream os(file, std::ios::binary);
    nn::save_parameters(os, params);
  };
  return detail::run_training(
      params, count,
      [&](const std::function<size_t()>& next, std::mt19937_64& rng) {
        const int b = cfg.batch_size;
        nn::Tensor input({b, kTypeChannels, kGridH, kGridW});
        std::vector<int> targets(b);
        for (int i = 0; i < b; ++i) {
          auto a = detail::draw_sample(load, next, &vocab, cfg, rng);
          if (a.past_type < 0) throw ParamError("train_type: past_type unset; fit the vocabulary first");
          // teacher forcing: ground-truth past torso conditions the classifier
          assemble_type_input(input.data.data() + size_t(i) * kTypeChannels * kGridCells,
                              a.frame, a.current_pose, a.past_torso);
          targets[i] = a.past_type;
        }
        return nn::nll_classes(model.batch_logp(std::move(input)), std::move(targets));
      },
      cfg, snapshot);
}

inline TrainResult train_pose(PoseModel& model, const SampleLoader& load, size_t count,
                              const PoseTypeVocabulary& vocab, const TrainConfig& cfg) {
  std::vector<nn::Parameter*> params;
  model.net.collect(params);
  auto snapshot = [&](const std::string& file) {
    std::ofstream os(file, std::ios::binary);
    nn::save_parameters(os, params);
  };
  return detail::run_training(
      params, count,
      [&](const std::function<size_t()>& next, std::mt19937_64& rng) {
        const int b = cfg.batch_size;
        nn::Tensor input({b, kPoseChannels, kGridH, kGridW});
        std::vector<int> targets(size_t(b) * (kJointCount - 1));
        for (int i = 0; i < b; ++i) {
          auto a = detail::draw_sample(load, next, &vocab, cfg, rng);
          if (a.past_type < 0) throw ParamError("train_pose: past_type unset; fit the vocabulary first");
          // teacher forcing: ground-truth torso and type paint the prior pose
          const Pose2D painted = center_pose(vocab, a.past_type, a.past_torso);
          assemble_pose_input(input.data.data() + size_t(i) * kPoseChannels * kGridCells,
                              a.frame, a.current_pose, a.past_torso, painted);
          const auto rest = split_pose(a.past_pose);
          for (int j = 0; j < kJointCount - 1; ++j)
            targets[size_t(i) * (kJointCount - 1) + j] = detail::torso_cell(rest[j]);
        }
        return nn::nll_cells(model.batch_logp(std::move(input)), std::move(targets));
      },
      cfg, snapshot);
}

inline TrainResult train_heatmap_baseline(HeatmapBaselineModel& model, const SampleLoader& load,
                                          size_t count, const TrainConfig& cfg) {
  std::vector<nn::Parameter*> params;
  model.net.collect(params);
  auto snapshot = [&](const std::string& file) {
    std::ofstream os(file, std::ios::binary);
    nn::save_parameters(os, params);
  };
  return detail::run_training(
      params, count,
      [&](const std::function<size_t()>& next, std::mt19937_64& rng) {
        const int b = cfg.batch_size;
        nn::Tensor input({b, kBaselineChannels, kGridH, kGridW});
        std::vector<int> targets(size_t(b) * kJointCount);
        for (int i = 0; i < b; ++i) {
          auto a = detail::draw_sample(load, next, nullptr, cfg, rng);
          assemble_goal_input(input.data.data() + size_t(i) * kBaselineChannels * kGridCells,
                              a.frame, a.current_pose);
          for (int j = 0; j < kJointCount; ++j)
            targets[size_t(i) * kJointCount + j] = detail::torso_cell(a.past_pose.joints[j]);
        }
        return nn::nll_cells(model.batch_logp(std::move(input)), std::move(targets));
      },
      cfg, snapshot);
}

// ---------------------------------------------------------------------------
// checkpoints

namespace detail {

inline constexpr char kCheckpointMagic[] = "TPCKPT1\n";

inline void save_model_file(const std::string& path, const nlohmann::json& header,
                            const std::vector<nn::Parameter*>& params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write checkpoint: " + path);
  os.write(kCheckpointMagic, 8);
  const std::string hdr = header.dump();
  const uint32_t len = uint32_t(hdr.size());
  os.write(reinterpret_cast<const char*>(&len), sizeof(len));
  os.write(hdr.data(), std::streamsize(hdr.size()));
  nn::save_parameters(os, params);
}

inline nlohmann::json load_model_header(std::istream& is, const std::string& path) {
  char magic[8];
  is.read(magic, 8);
  if (!is || std::string(magic, 8) != kCheckpointMagic)
    throw DataError("not a checkpoint file: " + path);
  uint32_t len = 0;
  is.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string hdr(len, '\0');
  is.read(hdr.data(), len);
  return nlohmann::json::parse(hdr);
}

inline nlohmann::json encdec_json(const nn::EncDecConfig& c) {
  return {{"width", c.width}, {"blocks", c.blocks}, {"depth", c.depth}};
}
inline nn::EncDecConfig encdec_from_json(const nlohmann::json& j) {
  return {j.at("width").get<int>(), j.at("blocks").get<int>(), j.at("depth").get<int>()};
}
inline nlohmann::json classifier_json(const nn::ClassifierConfig& c) {
  return {{"width", c.width}, {"blocks", c.blocks}};
}
inline nn::ClassifierConfig classifier_from_json(const nlohmann::json& j) {
  return {j.at("width").get<int>(), j.at("blocks").get<int>()};
}

}  // namespace detail

inline void save_goal_model(const std::string& path, GoalModel& m) {
  std::vector<nn::Parameter*> params;
  m.net.collect(params);
  detail::save_model_file(
      path, {{"module", "goal"}, {"arch", detail::encdec_json(m.cfg)}, {"seed", m.init_seed}},
      params);
}

inline GoalModel load_goal_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint: " + path);
  auto hdr = detail::load_model_header(is, path);
  if (hdr.at("module") != "goal") throw DataError("checkpoint is not a goal model: " + path);
  GoalModel m(detail::encdec_from_json(hdr.at("arch")), hdr.value("seed", 0ull));
  std::vector<nn::Parameter*> params;
  m.net.collect(params);
  nn::load_parameters(is, params);
  return m;
}

inline void save_type_model(const std::string& path, TypeModel& m) {
  std::vector<nn::Parameter*> params;
  m.net.collect(params);
  detail::save_model_file(path,
                          {{"module", "type"},
                           {"arch", detail::classifier_json(m.cfg)},
                           {"k", m.k},
                           {"seed", m.init_seed}},
                          params);
}

inline TypeModel load_type_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint: " + path);
  auto hdr = detail::load_model_header(is, path);
  if (hdr.at("module") != "type") throw DataError("checkpoint is not a type model: " + path);
  TypeModel m(hdr.at("k").get<int>(), detail::classifier_from_json(hdr.at("arch")),
              hdr.value("seed", 0ull));
  std::vector<nn::Parameter*> params;
  m.net.collect(params);
  nn::load_parameters(is, params);
  return m;
}

inline void save_pose_model(const std::string& path, PoseModel& m) {
  std::vector<nn::Parameter*> params;
  m.net.collect(params);
  detail::save_model_file(
      path, {{"module", "pose"}, {"arch", detail::encdec_json(m.cfg)}, {"seed", m.init_seed}},
      params);
}

inline PoseModel load_pose_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint: " + path);
  auto hdr = detail::load_model_header(is, path);
  if (hdr.at("module") != "pose") throw DataError("checkpoint is not a pose model: " + path);
  PoseModel m(detail::encdec_from_json(hdr.at("arch")), hdr.value("seed", 0ull));
  std::vector<nn::Parameter*> params;
  m.net.collect(params);
  nn::load_parameters(is, params);
  return m;
}

inline void save_baseline_model(const std::string& path, HeatmapBaselineModel& m) {
  std::vector<nn::Parameter*> params;
  m.net.collect(params);
  detail::save_model_file(path,
                          {{"module", "heatmap_baseline"},
                           {"arch", detail::encdec_json(m.cfg)},
                           {"seed", m.init_seed}},
                          params);
}

inline HeatmapBaselineModel load_baseline_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint: " + path);
  auto hdr = detail::load_model_header(is, path);
  if (hdr.at("module") != "heatmap_baseline")
    throw DataError("checkpoint is not a heatmap_baseline model: " + path);
  HeatmapBaselineModel m(detail::encdec_from_json(hdr.at("arch")), hdr.value("seed", 0ull));
  std::vector<nn::Parameter*> params;
  m.net.collect(params);
  nn::load_parameters(is, params);
  return m;
}

inline void save_semantic_model(const std::string& path, SemanticClassifier& m) {
  std::vector<nn::Parameter*> params;
  m.net.collect(params);
  detail::save_model_file(path,
                          {{"module", "semantic"},
                           {"arch", detail::classifier_json(m.cfg)},
                           {"accuracy", m.reported_accuracy},
                           {"seed", m.init_seed}},
                          params);
}

inline SemanticClassifier load_semantic_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint: " + path);
  auto hdr = detail::load_model_header(is, path);
  if (hdr.at("module") != "semantic")
    throw DataError("checkpoint is not a semantic model: " + path);
  SemanticClassifier m(detail::classifier_from_json(hdr.at("arch")), hdr.value("seed", 0ull));
  m.reported_accuracy = hdr.value("accuracy", 0.0);
  std::vector<nn::Parameter*> params;
  m.net.collect(params);
  nn::load_parameters(is, params);
  return m;
}

/// Restores training snapshots written by TrainConfig::checkpoint_every.
template <typename Model>
inline void load_snapshot_into(Model& model, const std::string& file) {
  std::vector<nn::Parameter*> params;
  model.net.collect(params);
  std::ifstream is(file, std::ios::binary);
  if (!is) throw DataError("cannot open snapshot: " + file);
  nn::load_parameters(is, params);
}

}  // namespace thermopose
