#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "thermopose/config.hpp"
#include "thermopose/eval.hpp"
#include "thermopose/synth.hpp"
#include "thermopose/viz.hpp"

namespace thermopose {

namespace fs = std::filesystem;

namespace detail {

inline std::string synth_section_hash(const RunConfig& c) {
  nlohmann::json j = {{"n_clips", c.synth.n_clips},
                      {"duration_s", c.synth.duration_s},
                      {"tau", c.synth.tau},
                      {"seed", c.synth.seed},
                      {"ablate_marks", c.synth.ablate_marks},
                      {"split_seed", c.split_seed},
                      {"ratios", {c.split_ratios[0], c.split_ratios[1], c.split_ratios[2]}}};
  return hash_hex(fnv1a64(j.dump()));
}

inline std::string file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open: " + path);
  std::string content((std::istreambuf_iterator<char>(in)), {});
  return hash_hex(fnv1a64(content));
}

inline std::vector<PairRef> split_pairs(const RunConfig& c, const std::vector<std::string>& ids,
                                        int stride) {
  auto refs = index_pairs(c.dataset_root, ids, stride, true);
  if (refs.empty()) throw DataError("no pairs survive the motion filter in this split");
  return refs;
}

inline SplitManifest load_splits(const RunConfig& c) {
  const fs::path p = fs::path(c.dataset_root) / "splits.json";
  if (!fs::exists(p)) throw DataError("missing splits.json; run `thermopose synth` first");
  return split_from_json(load_json(p.string()));
}

inline PoseTypeVocabulary load_vocab(const RunConfig& c) {
  const fs::path p = fs::path(c.output_root) / "vocab.json";
  if (!fs::exists(p)) throw DataError("missing vocab.json; run `thermopose build-vocab` first");
  return vocabulary_from_json(load_json(p.string()));
}

inline std::string ckpt_path(const RunConfig& c, const std::string& module) {
  return (fs::path(c.output_root) / (module + ".ckpt")).string();
}

inline void write_loss_csv(const RunConfig& c, const std::string& module,
                           const TrainResult& result) {
  std::ofstream os(fs::path(c.output_root) / ("loss_" + module + ".csv"));
  os << "iteration,loss\n";
  for (size_t i = 0; i < result.loss_curve.size(); ++i)
    os << (i + 1) << "," << result.loss_curve[i] << "\n";
}

inline void write_sidecar(const RunConfig& c, const std::string& module, double final_loss,
                          const std::string& data_hash, const std::string& vocab_hash,
                          const nlohmann::json& extra = nlohmann::json::object()) {
  nlohmann::json j = {{"module", module},
                      {"config_hash", config_hash(c)},
                      {"data_hash", data_hash},
                      {"vocab_hash", vocab_hash},
                      {"final_loss", final_loss}};
  for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
  save_json((fs::path(c.output_root) / (module + ".ckpt.json")).string(), j);
}

}  // namespace detail

/// Generates the synthetic dataset plus splits.json. Idempotent: a matching
/// generation manifest short-circuits the simulation.
inline void cmd_synth(const RunConfig& c) {
  const fs::path root(c.dataset_root);
  const fs::path stamp = root / "synth-manifest.json";
  const std::string want = detail::synth_section_hash(c);
  if (fs::exists(stamp) && load_json(stamp.string()).value("hash", "") == want) {
    std::fprintf(stderr, "synth: dataset already generated (hash %s)\n", want.c_str());
    write_manifest(c, "synth", {{"skipped", true}});
    return;
  }
  ensure_dir(root / "clips");
  std::vector<std::string> ids;
  for (int i = 0; i < c.synth.n_clips; ++i) {
    const uint64_t seed = derive_seed(c.synth.seed, uint64_t(i));
    char buf[16];
    std::snprintf(buf, sizeof(buf), "synth%04d", i);
    const std::string id = buf;
    SceneSpec scene = generate_scene(seed);
    ClipRecord clip =
        simulate_clip(scene, seed, c.synth.duration_s, c.synth.tau, c.synth.ablate_marks, id);
    write_clip((root / "clips" / id).string(), clip);
    ids.push_back(id);
    std::fprintf(stderr, "synth: wrote %s (%d frames)\n", id.c_str(), clip.length());
  }
  const SplitManifest splits = split_by_clip(ids, c.split_ratios, c.split_seed);
  save_json((root / "splits.json").string(), split_to_json(splits));
  save_json(stamp.string(), {{"hash", want}});
  write_manifest(c, "synth", {{"clips", int(ids.size())}});
}

/// Fits the pose-type vocabulary on the training split's past poses.
inline void cmd_build_vocab(const RunConfig& c) {
  const auto splits = detail::load_splits(c);
  auto refs = detail::split_pairs(c, splits.train, c.train_pair_stride);
  std::vector<Pose2D> past;
  past.reserve(refs.size());
  for (const auto& r : refs) past.push_back(r.past_pose);
  const auto vocab = build_vocabulary(past, c.vocab_k, c.vocab_seed);
  ensure_dir(c.output_root);
  save_json((fs::path(c.output_root) / "vocab.json").string(), vocabulary_to_json(vocab));
  write_manifest(c, "build-vocab",
                 {{"poses", int(past.size())}, {"data_hash", pairs_digest(refs)}});
  std::fprintf(stderr, "build-vocab: k=%d inertia=%.1f over %zu poses\n", vocab.k,
               vocab.inertia, past.size());
}

/// Trains one module and writes checkpoint, loss CSV, and sidecar.
inline void cmd_train(const RunConfig& c, const std::string& module) {
  const auto splits = detail::load_splits(c);
  auto refs = detail::split_pairs(c, splits.train, c.train_pair_stride);
  ensure_dir(c.output_root);
  const std::string data_hash = pairs_digest(refs);
  std::string vocab_hash = "none";

  double final_loss = 0;
  nlohmann::json extra = nlohmann::json::object();
  TrainResult result;
  if (module == "goal") {
    GoalModel model(c.encdec, derive_seed(c.model_seed, 1));
    result = train_goal(model, loader_from_refs(refs), refs.size(), c.train_goal);
    save_goal_model(detail::ckpt_path(c, module), model);
  } else if (module == "type") {
    const auto vocab = detail::load_vocab(c);
    vocab_hash = detail::file_hash((fs::path(c.output_root) / "vocab.json").string());
    annotate_types(refs, vocab);
    TypeModel model(vocab.k, c.classifier, derive_seed(c.model_seed, 2));
    result = train_type(model, loader_from_refs(refs), refs.size(), vocab, c.train_type);
    save_type_model(detail::ckpt_path(c, module), model);
  } else if (module == "pose") {
    const auto vocab = detail::load_vocab(c);
    vocab_hash = detail::file_hash((fs::path(c.output_root) / "vocab.json").string());
    annotate_types(refs, vocab);
    PoseModel model(c.encdec, derive_seed(c.model_seed, 3));
    result = train_pose(model, loader_from_refs(refs), refs.size(), vocab, c.train_pose);
    save_pose_model(detail::ckpt_path(c, module), model);
  } else if (module == "heatmap-baseline") {
    HeatmapBaselineModel model(c.encdec, derive_seed(c.model_seed, 4));
    result =
        train_heatmap_baseline(model, loader_from_refs(refs), refs.size(), c.train_baseline);
    save_baseline_model(detail::ckpt_path(c, "heatmap_baseline"), model);
  } else if (module == "semantic") {
    auto train_samples = make_semantic_dataset(refs, c.semantic_seed);
    auto val_refs = detail::split_pairs(c, splits.val, c.train_pair_stride);
    auto holdout = make_semantic_dataset(val_refs, derive_seed(c.semantic_seed, 1));
    SemanticClassifier model(c.classifier, derive_seed(c.model_seed, 5));
    result = train_semantic(model, train_samples, holdout, c.train_semantic);
    save_semantic_model(detail::ckpt_path(c, module), model);
    extra["holdout_accuracy"] = model.reported_accuracy;
    std::fprintf(stderr, "train semantic: holdout accuracy %.2f%%\n",
                 100.0 * model.reported_accuracy);
  } else {
    throw ConfigError("unknown module: " + module);
  }
  final_loss = result.loss_curve.empty() ? 0.0 : result.loss_curve.back();
  const std::string file_module = module == "heatmap-baseline" ? "heatmap_baseline" : module;
  detail::write_loss_csv(c, file_module, result);
  detail::write_sidecar(c, file_module, final_loss, data_hash, vocab_hash, extra);
  write_manifest(c, "train-" + file_module,
                 {{"pairs", int(refs.size())}, {"final_loss", final_loss}});
  std::fprintf(stderr, "train %s: %zu iterations, final loss %.4f\n", module.c_str(),
               result.loss_curve.size(), final_loss);
}

/// Runs stochastic inference on one frame and writes JSON plus a ranked
/// overlay panel image.
inline void cmd_infer(const RunConfig& c, const std::string& clip_id, int frame) {
  const fs::path clip_dir = fs::path(c.dataset_root) / "clips" / clip_id;
  if (!fs::exists(clip_dir)) throw DataError("no such clip: " + clip_id);
  auto poses = load_clip_poses(clip_dir.string());
  if (frame < 0 || frame >= int(poses.size()))
    throw DataError("frame out of range for clip " + clip_id);
  auto image = load_clip_frame(clip_dir.string(), frame);

  auto vocab = detail::load_vocab(c);
  GoalModel goal = load_goal_model(detail::ckpt_path(c, "goal"));
  TypeModel type_m = load_type_model(detail::ckpt_path(c, "type"));
  PoseModel pose_m = load_pose_model(detail::ckpt_path(c, "pose"));

  const auto result = infer_past(goal, type_m, pose_m, vocab, *image, poses[frame], c.infer_m,
                                 c.infer_topk, c.infer_seed);
  ensure_dir(c.output_root);
  char tag[64];
  std::snprintf(tag, sizeof(tag), "infer_%s_%06d", clip_id.c_str(), frame);
  save_json((fs::path(c.output_root) / (std::string(tag) + ".json")).string(),
            inference_to_json(result));
  render_hypothesis_panels(*image, poses[frame], result.hypotheses)
      .save((fs::path(c.output_root) / (std::string(tag) + ".png")).string());
  write_manifest(c, "infer", {{"clip", clip_id}, {"frame", frame}, {"m", c.infer_m}});
  std::fprintf(stderr, "infer: wrote %s.{json,png}\n", tag);
}

/// Evaluates one method over the test split and writes the metrics report.
inline MetricsReport cmd_eval(const RunConfig& c, const std::string& method) {
  const auto splits = detail::load_splits(c);
  auto test_refs = detail::split_pairs(c, splits.test, c.eval_pair_stride);
  if (c.eval_max_pairs > 0 && int(test_refs.size()) > c.eval_max_pairs)
    test_refs.resize(c.eval_max_pairs);

  std::optional<SemanticClassifier> classifier;
  if (fs::exists(detail::ckpt_path(c, "semantic")))
    classifier = load_semantic_model(detail::ckpt_path(c, "semantic"));

  MetricsReport report;
  if (method == "ours") {
    auto vocab = detail::load_vocab(c);
    GoalModel goal = load_goal_model(detail::ckpt_path(c, "goal"));
    TypeModel type_m = load_type_model(detail::ckpt_path(c, "type"));
    PoseModel pose_m = load_pose_model(detail::ckpt_path(c, "pose"));
    report = evaluate(ours_generator(goal, type_m, pose_m, vocab, c.infer_m, c.infer_topk),
                      ours_nll(goal, type_m, pose_m, vocab), test_refs, c.infer_m, c.eval_seed,
                      classifier ? &*classifier : nullptr);
  } else if (method == "knn") {
    auto knn_refs = index_pairs(c.dataset_root, splits.train, 1, true);
    const KnnPool pool = knn_baseline_build(knn_refs, 15);
    auto generator = [&pool, &c](const SamplePair& s, uint64_t) {
      return knn_baseline_query(pool, s.current_pose, c.infer_m);
    };
    report = evaluate(generator, nullptr, test_refs, c.infer_m, c.eval_seed,
                      classifier ? &*classifier : nullptr);
  } else if (method == "heatmap-baseline") {
    HeatmapBaselineModel model = load_baseline_model(detail::ckpt_path(c, "heatmap_baseline"));
    auto train_refs = index_pairs(c.dataset_root, splits.train, 1, true);
    const auto candidates = baseline_candidates(train_refs, 200);
    auto generator = [&model, &candidates, &c](const SamplePair& s, uint64_t) {
      return heatmap_baseline_rank(model, candidates, *s.image, s.current_pose, c.infer_m);
    };
    report = evaluate(generator, nullptr, test_refs, c.infer_m, c.eval_seed,
                      classifier ? &*classifier : nullptr);
  } else {
    throw ConfigError("unknown eval method: " + method);
  }
  report.config_hash = config_hash(c);
  ensure_dir(c.output_root);
  const std::string base = "eval_" + (method == "heatmap-baseline" ? "heatmap_baseline" : method);
  save_json((fs::path(c.output_root) / (base + ".json")).string(), report_to_json(report));
  std::ofstream csv(fs::path(c.output_root) / (base + ".csv"));
  csv << report_to_csv(report);
  write_manifest(c, "eval-" + method, {{"samples", report.n_samples}});
  std::fprintf(stderr,
               "eval %s: top1 %.2f top3 %.2f top5 %.2f nll %.2f semantic %.2f%% (%d samples)\n",
               method.c_str(), report.mpjpe_top1, report.mpjpe_top3, report.mpjpe_top5,
               report.nll, report.semantic_score, report.n_samples);
  return report;
}

/// Re-renders a synthetic frame at several mark intensities and plots how far
/// the goal distribution sits from the mark.
inline std::vector<SweepPoint> cmd_intensity_sweep(const RunConfig& c,
                                                   const std::string& clip_id, int frame,
                                                   const std::vector<double>& scales) {
  const fs::path clip_dir = fs::path(c.dataset_root) / "clips" / clip_id;
  if (!fs::exists(clip_dir)) throw DataError("no such clip: " + clip_id);
  const ClipMeta meta = load_clip_meta(clip_dir.string());
  if (meta.extra.is_null())
    throw DataError("intensity sweep needs a synthetic clip with recorded scene parameters");
  auto poses = load_clip_poses(clip_dir.string());
  if (frame < 0 || frame >= int(poses.size())) throw DataError("frame out of range");

  const SceneSpec scene = scene_from_json(meta.extra.at("scene"));
  const ThermalState state = reconstruct_thermal_state(meta, frame);
  const float body_scale = meta.extra.value("body_scale", 1.0f);
  const ThermalFrame base =
      render_frame(scene, poses[frame], state, /*render_marks=*/false, body_scale);

  GoalModel goal = load_goal_model(detail::ckpt_path(c, "goal"));
  const auto points = intensity_sweep(goal, base, state.mark_buffer, poses[frame], scales);

  ensure_dir(c.output_root);
  char tag[64];
  std::snprintf(tag, sizeof(tag), "sweep_%s_%06d", clip_id.c_str(), frame);
  std::ofstream csv(fs::path(c.output_root) / (std::string(tag) + ".csv"));
  csv << "scale,expected_distance\n";
  std::vector<double> xs, ys;
  for (const auto& p : points) {
    csv << p.scale << "," << p.expected_distance << "\n";
    xs.push_back(p.scale);
    ys.push_back(p.expected_distance);
  }
  plot_curve(xs, ys).save((fs::path(c.output_root) / (std::string(tag) + ".png")).string());
  write_manifest(c, "intensity-sweep", {{"clip", clip_id}, {"frame", frame}});
  std::fprintf(stderr, "intensity-sweep: wrote %s.{csv,png}\n", tag);
  return points;
}

}  // namespace thermopose
