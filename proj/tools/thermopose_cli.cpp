// Command-line driver: synth -> build-vocab -> train -> eval / infer /
// intensity-sweep, all off one JSON config with flag overrides.
#include <CLI11.hpp>

#include "thermopose/commands.hpp"

using namespace thermopose;

namespace {

std::vector<double> parse_scales(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(std::stod(tok));
  if (out.empty()) throw ConfigError("empty scale list");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Past human pose inference from thermal images"};
  app.require_subcommand(1);

  std::string config_path;
  std::string dataset_root, output_root;
  app.add_option("--config", config_path, "JSON run configuration");
  app.add_option("--dataset-root", dataset_root, "override dataset root");
  app.add_option("--output-root", output_root, "override output root");

  auto* synth = app.add_subcommand("synth", "generate the synthetic dataset");
  bool ablate = false;
  synth->add_flag("--ablate", ablate, "render with thermal marks removed");

  app.add_subcommand("build-vocab", "fit the pose-type vocabulary");

  auto* train = app.add_subcommand("train", "train one module");
  std::string module;
  train->add_option("--module", module, "goal|type|pose|semantic|heatmap-baseline")
      ->required();

  auto* infer = app.add_subcommand("infer", "run inference on one frame");
  std::string clip_id;
  int frame = 0;
  infer->add_option("--clip", clip_id, "clip id")->required();
  infer->add_option("--frame", frame, "frame index")->required();

  auto* eval = app.add_subcommand("eval", "evaluate a method on the test split");
  std::string method = "ours";
  eval->add_option("--method", method, "ours|knn|heatmap-baseline");

  auto* sweep = app.add_subcommand("intensity-sweep", "thermal intensity sensitivity");
  std::string sweep_clip;
  int sweep_frame = 0;
  std::string scales_csv = "0.25,0.5,0.75,1.0";
  sweep->add_option("--clip", sweep_clip, "clip id")->required();
  sweep->add_option("--frame", sweep_frame, "frame index")->required();
  sweep->add_option("--scales", scales_csv, "comma-separated mark scales");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    RunConfig cfg = load_run_config(config_path);
    if (!dataset_root.empty()) cfg.dataset_root = dataset_root;
    if (!output_root.empty()) cfg.output_root = output_root;
    if (ablate) cfg.synth.ablate_marks = true;

    if (app.got_subcommand("synth")) cmd_synth(cfg);
    else if (app.got_subcommand("build-vocab")) cmd_build_vocab(cfg);
    else if (app.got_subcommand("train")) cmd_train(cfg, module);
    else if (app.got_subcommand("infer")) cmd_infer(cfg, clip_id, frame);
    else if (app.got_subcommand("eval")) cmd_eval(cfg, method);
    else if (app.got_subcommand("intensity-sweep"))
      cmd_intensity_sweep(cfg, sweep_clip, sweep_frame, parse_scales(scales_csv));
  } catch (const EvalSkipError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const ParamError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
