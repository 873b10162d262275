// End-to-end exercise of the command-line tool: synth -> build-vocab ->
// train -> eval/infer/sweep on a miniature configuration, plus exit-code and
// determinism contracts.
#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "thermopose/io.hpp"

using namespace thermopose;
namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "thermopose_cli_test";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  EXPECT_TRUE(in) << "missing " << p;
  return std::string(std::istreambuf_iterator<char>(in), {});
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(THERMOPOSE_CLI) + " " + args + " 2>>" +
                          (kWork / "cli.log").string();
  const int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

class CliPipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    fs::remove_all(kWork);
    fs::create_directories(kWork);
    nlohmann::json cfg = {
        {"dataset_root", (kWork / "data").string()},
        {"output_root", (kWork / "out").string()},
        {"vocab", {{"k", 8}, {"seed", 1}}},
        {"model",
         {{"width", 8}, {"blocks", 1}, {"depth", 1}, {"classifier_width", 8},
          {"classifier_blocks", 2}, {"seed", 7}}},
        {"train",
         {{"goal", {{"learning_rate", 1e-3}, {"batch_size", 4}, {"iterations", 10}}},
          {"type", {{"learning_rate", 1e-3}, {"batch_size", 4}, {"iterations", 10}}},
          {"pose", {{"learning_rate", 1e-3}, {"batch_size", 4}, {"iterations", 10}}},
          {"semantic", {{"learning_rate", 1e-3}, {"batch_size", 4}, {"iterations", 10}}},
          {"heatmap_baseline",
           {{"learning_rate", 1e-3}, {"batch_size", 4}, {"iterations", 10}}}}},
        {"infer", {{"m", 2}, {"topk", 3}, {"seed", 9}}},
        {"synth", {{"n_clips", 8}, {"duration_s", 12.0}, {"tau", 20.0}, {"seed", 5}}},
        {"pairs", {{"train_stride", 2}}},
        {"eval", {{"pair_stride", 45}, {"seed", 11}}}};
    save_json((kWork / "config.json").string(), cfg);
  }
  static std::string config_arg() { return "--config " + (kWork / "config.json").string(); }
};

}  // namespace

TEST_F(CliPipeline, Step01_EvalBeforeSynthIsDataError) {
  EXPECT_EQ(run_cli(config_arg() + " eval --method ours"), 3);
}

TEST_F(CliPipeline, Step02_SynthWritesDatasetAndManifest) {
  ASSERT_EQ(run_cli(config_arg() + " synth"), 0);
  EXPECT_TRUE(fs::exists(kWork / "data" / "clips" / "synth0000" / "thermal" / "000000.png"));
  EXPECT_TRUE(fs::exists(kWork / "data" / "splits.json"));
  auto manifest = nlohmann::json::parse(slurp(kWork / "out" / "manifest-synth.json"));
  EXPECT_FALSE(manifest.at("config_hash").get<std::string>().empty());
  EXPECT_EQ(manifest.at("config").at("synth").at("seed").get<int>(), 5);

  // idempotent per seed: the second run skips generation
  const std::string before = slurp(kWork / "data" / "clips" / "synth0000" / "poses.json");
  ASSERT_EQ(run_cli(config_arg() + " synth"), 0);
  EXPECT_EQ(slurp(kWork / "data" / "clips" / "synth0000" / "poses.json"), before);
}

TEST_F(CliPipeline, Step03_BuildVocabAndTrainAll) {
  ASSERT_EQ(run_cli(config_arg() + " build-vocab"), 0);
  EXPECT_TRUE(fs::exists(kWork / "out" / "vocab.json"));
  for (const std::string m : {"goal", "type", "pose", "semantic", "heatmap-baseline"})
    ASSERT_EQ(run_cli(config_arg() + " train --module " + m), 0) << m;
  for (const std::string f :
       {"goal.ckpt", "type.ckpt", "pose.ckpt", "semantic.ckpt", "heatmap_baseline.ckpt",
        "loss_goal.csv", "goal.ckpt.json"})
    EXPECT_TRUE(fs::exists(kWork / "out" / f)) << f;
  auto sidecar = nlohmann::json::parse(slurp(kWork / "out" / "goal.ckpt.json"));
  EXPECT_EQ(sidecar.at("module"), "goal");
  EXPECT_FALSE(sidecar.at("data_hash").get<std::string>().empty());
  // loss curve length equals iterations when early stop is off
  const std::string csv = slurp(kWork / "out" / "loss_goal.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 11);  // header + 10 iterations
}

TEST_F(CliPipeline, Step04_EvalAllMethodsAndDeterminism) {
  ASSERT_EQ(run_cli(config_arg() + " eval --method ours"), 0);
  const std::string first = slurp(kWork / "out" / "eval_ours.json");
  ASSERT_EQ(run_cli(config_arg() + " eval --method ours"), 0);
  EXPECT_EQ(slurp(kWork / "out" / "eval_ours.json"), first) << "eval must be byte-deterministic";

  ASSERT_EQ(run_cli(config_arg() + " eval --method knn"), 0);
  EXPECT_TRUE(fs::exists(kWork / "out" / "eval_knn.json"));
  EXPECT_TRUE(fs::exists(kWork / "out" / "eval_knn.csv"));

  auto report = nlohmann::json::parse(first);
  EXPECT_GT(report.at("n_samples").get<int>(), 0);
  EXPECT_TRUE(report.contains("nll"));
  EXPECT_TRUE(report.contains("semantic_score"));  // classifier checkpoint exists
}

TEST_F(CliPipeline, Step05_InferWritesJsonAndOverlay) {
  ASSERT_EQ(run_cli(config_arg() + " infer --clip synth0000 --frame 60"), 0);
  EXPECT_TRUE(fs::exists(kWork / "out" / "infer_synth0000_000060.json"));
  EXPECT_TRUE(fs::exists(kWork / "out" / "infer_synth0000_000060.png"));
  auto j = nlohmann::json::parse(slurp(kWork / "out" / "infer_synth0000_000060.json"));
  EXPECT_EQ(j.at("hypotheses").size(), 2u);  // m=2 in this config
}

TEST_F(CliPipeline, Step06_IntensitySweepWritesCsvAndPlot) {
  ASSERT_EQ(run_cli(config_arg() + " intensity-sweep --clip synth0000 --frame 100 --scales 0,0.5,1"),
            0);
  const std::string csv = slurp(kWork / "out" / "sweep_synth0000_000100.csv");
  EXPECT_NE(csv.find("scale,expected_distance"), std::string::npos);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);  // header + 3 scales
  EXPECT_TRUE(fs::exists(kWork / "out" / "sweep_synth0000_000100.png"));
}

TEST_F(CliPipeline, Step07_ManifestsForEveryCommand) {
  for (const std::string m :
       {"manifest-synth.json", "manifest-build-vocab.json", "manifest-train-goal.json",
        "manifest-train-type.json", "manifest-train-pose.json", "manifest-eval-ours.json",
        "manifest-eval-knn.json", "manifest-infer.json", "manifest-intensity-sweep.json"}) {
    ASSERT_TRUE(fs::exists(kWork / "out" / m)) << m;
    auto j = nlohmann::json::parse(slurp(kWork / "out" / m));
    EXPECT_FALSE(j.at("config_hash").get<std::string>().empty()) << m;
    EXPECT_TRUE(j.at("config").contains("synth")) << m;  // seeds recorded
  }
}

TEST_F(CliPipeline, Step08_ExitCodes) {
  // config error: malformed config file
  std::ofstream(kWork / "bad.json") << "{ not json";
  EXPECT_EQ(run_cli("--config " + (kWork / "bad.json").string() + " synth"), 2);
  // config error: unknown key
  save_json((kWork / "unknown.json").string(), {{"no_such_key", 1}});
  EXPECT_EQ(run_cli("--config " + (kWork / "unknown.json").string() + " synth"), 2);
  // unknown module
  EXPECT_EQ(run_cli(config_arg() + " train --module bogus"), 2);
  // data error: missing clip
  EXPECT_EQ(run_cli(config_arg() + " infer --clip nope --frame 3"), 3);
  // CLI parse error
  EXPECT_EQ(run_cli("definitely-not-a-command"), 2);
}
