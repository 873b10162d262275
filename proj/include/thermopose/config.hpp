#pragma once

#include <array>
#include <cstdlib>
#include <string>

#include <json.hpp>

#include "thermopose/io.hpp"
#include "thermopose/models.hpp"
#include "thermopose/synth.hpp"

namespace thermopose {

struct SynthConfig {
  int n_clips = 12;
  double duration_s = 20.0;
  double tau = kDefaultTau;
  uint64_t seed = 5;
  bool ablate_marks = false;
};

/// Resolved run configuration. Defaults mirror the full-scale training
/// recipe (3-block hourglass, 8-unit classifier, 6k iterations, module
/// learning rates); desk-scale runs override via the config file.
struct RunConfig {
  std::string dataset_root = "data";
  std::string output_root = "out";

  uint64_t split_seed = 1;
  std::array<double, 3> split_ratios = {0.8, 0.1, 0.1};

  int vocab_k = 200;
  uint64_t vocab_seed = 1;

  nn::EncDecConfig encdec{32, 3, 2};
  nn::ClassifierConfig classifier{32, 8};
  uint64_t model_seed = 7;

  TrainConfig train_goal = default_train_config(ModuleKind::Goal);
  TrainConfig train_type = default_train_config(ModuleKind::Type);
  TrainConfig train_pose = default_train_config(ModuleKind::Pose);
  TrainConfig train_semantic = default_train_config(ModuleKind::Semantic);
  TrainConfig train_baseline = default_train_config(ModuleKind::HeatmapBaseline);

  int infer_m = 30;
  int infer_topk = 5;
  uint64_t infer_seed = 9;

  SynthConfig synth;

  int train_pair_stride = 3;  // subsampling of training pairs
  int eval_pair_stride = 45;  // subsampling of evaluation pairs
  int eval_max_pairs = 0;     // 0 = no cap
  uint64_t eval_seed = 11;
  uint64_t semantic_seed = 13;
};

namespace detail {

inline void parse_train(const nlohmann::json& j, TrainConfig& c) {
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.iterations = j.value("iterations", c.iterations);
  c.seed = j.value("seed", c.seed);
  c.flip_aug = j.value("flip_aug", c.flip_aug);
  c.crop_aug = j.value("crop_aug", c.crop_aug);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.early_stop_fraction = j.value("early_stop_fraction", c.early_stop_fraction);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  if (c.learning_rate <= 0 || c.batch_size <= 0 || c.iterations <= 0)
    throw ConfigError("train config: hyperparameters must be positive");
}

inline nlohmann::json train_to_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate},
          {"batch_size", c.batch_size},
          {"iterations", c.iterations},
          {"seed", c.seed},
          {"flip_aug", c.flip_aug},
          {"crop_aug", c.crop_aug},
          {"weight_decay", c.weight_decay},
          {"early_stop_fraction", c.early_stop_fraction},
          {"checkpoint_every", c.checkpoint_every}};
}

}  // namespace detail

inline RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig c;
  static const std::vector<std::string> known = {
      "dataset_root", "output_root", "split", "vocab",  "model",
      "train",        "infer",       "synth", "pairs",  "eval"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::find(known.begin(), known.end(), it.key()) == known.end())
      throw ConfigError("unknown config key: " + it.key());

  c.dataset_root = j.value("dataset_root", c.dataset_root);
  c.output_root = j.value("output_root", c.output_root);
  if (j.contains("split")) {
    const auto& s = j["split"];
    c.split_seed = s.value("seed", c.split_seed);
    if (s.contains("ratios"))
      for (int i = 0; i < 3; ++i) c.split_ratios[i] = s["ratios"][i].get<double>();
  }
  if (j.contains("vocab")) {
    c.vocab_k = j["vocab"].value("k", c.vocab_k);
    c.vocab_seed = j["vocab"].value("seed", c.vocab_seed);
    if (c.vocab_k <= 0) throw ConfigError("vocab.k must be positive");
  }
  if (j.contains("model")) {
    const auto& m = j["model"];
    c.encdec.width = m.value("width", c.encdec.width);
    c.encdec.blocks = m.value("blocks", c.encdec.blocks);
    c.encdec.depth = m.value("depth", c.encdec.depth);
    c.classifier.width = m.value("classifier_width", c.classifier.width);
    c.classifier.blocks = m.value("classifier_blocks", c.classifier.blocks);
    c.model_seed = m.value("seed", c.model_seed);
  }
  if (j.contains("train")) {
    const auto& t = j["train"];
    if (t.contains("goal")) detail::parse_train(t["goal"], c.train_goal);
    if (t.contains("type")) detail::parse_train(t["type"], c.train_type);
    if (t.contains("pose")) detail::parse_train(t["pose"], c.train_pose);
    if (t.contains("semantic")) detail::parse_train(t["semantic"], c.train_semantic);
    if (t.contains("heatmap_baseline")) detail::parse_train(t["heatmap_baseline"], c.train_baseline);
  }
  if (j.contains("infer")) {
    c.infer_m = j["infer"].value("m", c.infer_m);
    c.infer_topk = j["infer"].value("topk", c.infer_topk);
    c.infer_seed = j["infer"].value("seed", c.infer_seed);
    if (c.infer_m <= 0 || c.infer_topk <= 0) throw ConfigError("infer.m and infer.topk must be positive");
  }
  if (j.contains("synth")) {
    const auto& s = j["synth"];
    c.synth.n_clips = s.value("n_clips", c.synth.n_clips);
    c.synth.duration_s = s.value("duration_s", c.synth.duration_s);
    c.synth.tau = s.value("tau", c.synth.tau);
    c.synth.seed = s.value("seed", c.synth.seed);
    c.synth.ablate_marks = s.value("ablate_marks", c.synth.ablate_marks);
    if (c.synth.n_clips <= 0 || c.synth.duration_s < 10 || c.synth.tau <= 0)
      throw ConfigError("synth config: need n_clips > 0, duration >= 10, tau > 0");
  }
  if (j.contains("pairs")) c.train_pair_stride = j["pairs"].value("train_stride", c.train_pair_stride);
  if (j.contains("eval")) {
    c.eval_pair_stride = j["eval"].value("pair_stride", c.eval_pair_stride);
    c.eval_max_pairs = j["eval"].value("max_pairs", c.eval_max_pairs);
    c.eval_seed = j["eval"].value("seed", c.eval_seed);
    c.semantic_seed = j["eval"].value("semantic_seed", c.semantic_seed);
  }
  return c;
}

inline nlohmann::json run_config_to_json(const RunConfig& c) {
  return {
      {"dataset_root", c.dataset_root},
      {"output_root", c.output_root},
      {"split", {{"seed", c.split_seed}, {"ratios", {c.split_ratios[0], c.split_ratios[1], c.split_ratios[2]}}}},
      {"vocab", {{"k", c.vocab_k}, {"seed", c.vocab_seed}}},
      {"model",
       {{"width", c.encdec.width},
        {"blocks", c.encdec.blocks},
        {"depth", c.encdec.depth},
        {"classifier_width", c.classifier.width},
        {"classifier_blocks", c.classifier.blocks},
        {"seed", c.model_seed}}},
      {"train",
       {{"goal", detail::train_to_json(c.train_goal)},
        {"type", detail::train_to_json(c.train_type)},
        {"pose", detail::train_to_json(c.train_pose)},
        {"semantic", detail::train_to_json(c.train_semantic)},
        {"heatmap_baseline", detail::train_to_json(c.train_baseline)}}},
      {"infer", {{"m", c.infer_m}, {"topk", c.infer_topk}, {"seed", c.infer_seed}}},
      {"synth",
       {{"n_clips", c.synth.n_clips},
        {"duration_s", c.synth.duration_s},
        {"tau", c.synth.tau},
        {"seed", c.synth.seed},
        {"ablate_marks", c.synth.ablate_marks}}},
      {"pairs", {{"train_stride", c.train_pair_stride}}},
      {"eval",
       {{"pair_stride", c.eval_pair_stride},
        {"max_pairs", c.eval_max_pairs},
        {"seed", c.eval_seed},
        {"semantic_seed", c.semantic_seed}}}};
}

/// Loads a config file (or defaults), then applies the output-root
/// environment override.
inline RunConfig load_run_config(const std::string& path) {
  RunConfig c;
  if (!path.empty()) {
    try {
      c = run_config_from_json(load_json(path));
    } catch (const DataError& e) {
      throw ConfigError(e.what());
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("config parse: ") + e.what());
    }
  }
  if (const char* env = std::getenv("THERMOPOSE_OUTPUT_ROOT"); env && *env)
    c.output_root = env;
  return c;
}

inline std::string config_hash(const RunConfig& c) {
  return hash_hex(fnv1a64(run_config_to_json(c).dump()));
}

/// One manifest per command: resolved config, its hash, and the arguments
/// that shaped the outputs. No timestamps, so reruns are byte-identical.
inline void write_manifest(const RunConfig& c, const std::string& command,
                           const nlohmann::json& args) {
  ensure_dir(c.output_root);
  nlohmann::json m = {{"command", command},
                      {"config_hash", config_hash(c)},
                      {"config", run_config_to_json(c)},
                      {"args", args}};
  save_json((std::filesystem::path(c.output_root) / ("manifest-" + command + ".json")).string(),
            m);
}

}  // namespace thermopose
