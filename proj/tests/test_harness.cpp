#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include <filesystem>
#include <fstream>

#include "dp3/harness.hpp"

using namespace dp3;
namespace fs = std::filesystem;

namespace {

const char* kTinyConfig = R"(
seed = 5
env {
  horizon_steps = 6
  fps_count = 12
  gripper_points = 4
  target_points = 4
  ground_points = 8
}
demos { count = 2 }
diffusion {
  train_steps = 8
  inference_steps = 2
  embed_dim = 8
  hidden = 16
}
training {
  epochs = 2
  batch = 2
  lr = 0.001
  plateau_patience = 0
}
eval {
  sampler = fixed
  targets = 0.4,0.5,0.6; 0.6,0.5,0.4
}
)";

ExperimentConfig tiny_config() { return ExperimentConfig::parse_text(kTinyConfig, "tiny"); }

std::string scratch() {
  static const std::string dir = [] {
    fs::remove_all("dp3_harness_test");
    fs::create_directories("dp3_harness_test");
    return std::string("dp3_harness_test");
  }();
  return dir;
}

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  REQUIRE(bool(is));
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

}  // namespace

TEST_CASE("generate_demos records the configured demos with horizon padding") {
  ExperimentConfig cfg = tiny_config();
  EpisodeDataset data = generate_demos(cfg);
  REQUIRE(data.episodes.size() == 2);
  for (const auto& ep : data.episodes) {
    CHECK(ep.steps.size() >= 4);  // at least one prediction-horizon chunk
    CHECK(ep.steps.back().success);
  }
  EpisodeDataset again = generate_demos(cfg);
  CHECK(again.episodes[0].steps.size() == data.episodes[0].steps.size());
  CHECK(again.episodes[0].steps[0].pose == data.episodes[0].steps[0].pose);
}

TEST_CASE("run_gen_demos leaves the dataset and its resolved config behind") {
  ExperimentConfig cfg = tiny_config();
  const std::string out = scratch() + "/demos.bin";
  run_gen_demos(cfg, out);
  CHECK(fs::exists(out));
  CHECK(fs::exists(out + ".config"));
  EpisodeDataset back = EpisodeDataset::load(out);
  CHECK(back.episodes.size() == 2);
  const std::string resolved = slurp(out + ".config");
  CHECK(resolved.find("seed = 5") != std::string::npos);
  CHECK(resolved.find("fps_count = 12") != std::string::npos);
  CHECK(ExperimentConfig::parse_text(resolved, "resolved").serialize() == resolved);
}

TEST_CASE("run_training writes checkpoint, loss curve, and config; reruns are byte-identical") {
  ExperimentConfig cfg = tiny_config();
  const std::string demos = scratch() + "/train_demos.bin";
  run_gen_demos(cfg, demos);

  const std::string a = scratch() + "/a.ckpt";
  TrainOutputs ra = run_training(cfg, demos, a);
  CHECK(ra.result.epoch_loss.size() == 2);
  CHECK(ra.result.adam_steps == 4);  // 4 chunks / batch 2, times 2 epochs
  CHECK_FALSE(ra.resumed);
  CHECK(fs::exists(a));
  CHECK(fs::exists(a + ".json"));
  CHECK(fs::exists(a + ".config"));
  const std::string csv = slurp(a + ".loss.csv");
  CHECK(csv.rfind("epoch,loss\n0,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);

  const std::string b = scratch() + "/b.ckpt";
  run_training(cfg, demos, b);
  CHECK(slurp(a) == slurp(b));
  CHECK(slurp(a + ".loss.csv") == slurp(b + ".loss.csv"));
}

TEST_CASE("a manufactured interruption resumes to the uninterrupted result") {
  ExperimentConfig cfg = tiny_config();
  const std::string demos = scratch() + "/resume_demos.bin";
  run_gen_demos(cfg, demos);

  ExperimentConfig four = cfg;
  four.apply_override("training.epochs=4");
  const std::string full = scratch() + "/full.ckpt";
  run_training(four, demos, full);

  // a 2-epoch run's final state is exactly what a periodic save at epoch 2
  // of the 4-epoch run would hold
  const std::string half = scratch() + "/half.ckpt";
  run_training(cfg, demos, half);
  const std::string target = scratch() + "/resumed.ckpt";
  fs::copy_file(half, target + ".part");
  fs::copy_file(half + ".json", target + ".part.json");
  nlohmann::json state;
  state["epochs_done"] = 2;
  state["loss"] = nlohmann::json::array();
  {
    std::istringstream is(slurp(half + ".loss.csv"));
    std::string line;
    std::getline(is, line);
    while (std::getline(is, line))
      state["loss"].push_back(std::stod(line.substr(line.find(',') + 1)));
  }
  write_text_file(target + ".part.state", state.dump(2) + "\n");

  TrainOutputs rr = run_training(four, demos, target, true);
  CHECK(rr.resumed);
  CHECK(rr.result.epoch_loss.size() == 4);
  CHECK(slurp(target) == slurp(full));
  CHECK(slurp(target + ".loss.csv") == slurp(full + ".loss.csv"));
  CHECK_FALSE(fs::exists(target + ".part"));
  CHECK_FALSE(fs::exists(target + ".part.state"));

  TrainOutputs done = run_training(four, demos, target, true);
  CHECK(done.already_complete);
}

TEST_CASE("periodic saves appear at the configured cadence and clean up on success") {
  ExperimentConfig cfg = tiny_config();
  cfg.apply_override("training.epochs=3");
  cfg.apply_override("training.checkpoint_every=1");
  const std::string demos = scratch() + "/periodic_demos.bin";
  run_gen_demos(cfg, demos);

  const std::string ckpt = scratch() + "/periodic.ckpt";
  bool part_seen = false;
  // the hook only fires inside run_training; probe by rerunning with an
  // epoch budget that is never reached mid-save
  run_training(cfg, demos, ckpt);
  part_seen = fs::exists(ckpt + ".part");
  CHECK_FALSE(part_seen);  // deleted after the final save
  CHECK(fs::exists(ckpt));
}

TEST_CASE("evaluate_policy rolls one episode per target and accounts exactly") {
  ExperimentConfig cfg = tiny_config();
  Dp3Policy policy(cfg.policy_config());
  policy.init(3);
  EpisodeDataset demos = generate_demos(cfg);
  policy.fit_normalizers(demos);

  EvalReport rep = evaluate_policy(policy, cfg);
  CHECK(rep.episodes == 2);
  CHECK(rep.targets.size() == 2);
  CHECK(rep.success.size() == 2);
  CHECK(rep.length.size() == 2);
  CHECK(rep.success_rate == double(rep.successes) / 2.0);
  for (std::size_t l : rep.length) CHECK(l <= 6);
  // H=4, N_act=3: ceil(len / 3) diffusion calls per episode
  std::size_t expected_calls = 0;
  for (std::size_t l : rep.length) expected_calls += (l + 2) / 3;
  CHECK(rep.diffusion_calls == expected_calls);
}

TEST_CASE("run_eval writes deterministic metrics, scatter, and the resolved config") {
  ExperimentConfig cfg = tiny_config();
  const std::string demos = scratch() + "/eval_demos.bin";
  run_gen_demos(cfg, demos);
  const std::string ckpt = scratch() + "/eval.ckpt";
  run_training(cfg, demos, ckpt);

  const std::string dir1 = scratch() + "/eval_run1";
  const std::string dir2 = scratch() + "/eval_run2";
  EvalReport rep = run_eval(cfg, ckpt, dir1);
  run_eval(cfg, ckpt, dir2);
  for (const char* name : {"metrics.json", "report.txt", "scatter.csv", "resolved.config"})
    CHECK(fs::exists(fs::path(dir1) / name));

  nlohmann::json m;
  std::ifstream(dir1 + "/metrics.json") >> m;
  CHECK(m["episodes"] == 2);
  CHECK(m["successes"].get<std::size_t>() == rep.successes);
  CHECK(m["success_rate"].get<double>() == rep.success_rate);
  CHECK(m["per_target"].size() == 2);
  CHECK(m["per_target"][0]["x"].get<double>() == 0.4);

  const std::string scatter = slurp(dir1 + "/scatter.csv");
  CHECK(scatter.rfind("x,y,z,success\n", 0) == 0);
  CHECK(std::count(scatter.begin(), scatter.end(), '\n') == 3);

  CHECK(slurp(dir1 + "/metrics.json") == slurp(dir2 + "/metrics.json"));
  CHECK(slurp(dir1 + "/scatter.csv") == slurp(dir2 + "/scatter.csv"));
}

TEST_CASE("grid evaluation covers the full grid") {
  ExperimentConfig cfg = tiny_config();
  cfg.apply_override("eval.sampler=grid");
  cfg.apply_override("eval.grid_n=2");
  Dp3Policy policy(cfg.policy_config());
  policy.init(4);
  policy.fit_normalizers(generate_demos(cfg));
  EvalReport rep = evaluate_policy(policy, cfg);
  CHECK(rep.episodes == 8);
  CHECK(rep.targets[0] == Vec3{0.25, 0.25, 0.25});
}

TEST_CASE("ablation runs the axis cross product off a shared demo set") {
  ExperimentConfig cfg = tiny_config();
  const std::string dir = scratch() + "/sweep";
  auto arms = run_ablation(cfg, {"cropping"}, dir);
  REQUIRE(arms.size() == 2);
  CHECK(arms[0].name == "default");
  CHECK(arms[0].off_axes.empty());
  CHECK(arms[1].name == "no_crop");
  CHECK(arms[1].off_axes == std::vector<std::string>{"cropping"});

  CHECK(fs::exists(dir + "/demos.bin"));
  CHECK(fs::exists(dir + "/comparison.csv"));
  CHECK(fs::exists(dir + "/comparison.txt"));
  for (const char* arm : {"default", "no_crop"}) {
    CHECK(fs::exists(fs::path(dir) / arm / "policy.ckpt"));
    CHECK(fs::exists(fs::path(dir) / arm / "metrics.json"));
    CHECK(fs::exists(fs::path(dir) / arm / "resolved.config"));
  }
  CHECK(slurp(dir + "/no_crop/resolved.config").find("crop_enabled = false") != std::string::npos);
  CHECK(slurp(dir + "/default/resolved.config").find("crop_enabled = true") != std::string::npos);

  const std::string csv = slurp(dir + "/comparison.csv");
  CHECK(csv.rfind("arm,success_rate", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
  CHECK(csv.find("\nno_crop,") != std::string::npos);
}

TEST_CASE("unknown ablation axes are rejected with the axis vocabulary") {
  ExperimentConfig cfg = tiny_config();
  CHECK_THROWS_WITH_AS(run_ablation(cfg, {"cropping", "gravity"}, scratch() + "/bad"),
                       doctest::Contains("invalid ablation axis 'gravity'"), std::runtime_error);
  CHECK_THROWS_WITH_AS(run_ablation(cfg, {}, scratch() + "/bad2"),
                       doctest::Contains("at least one axis"), std::runtime_error);
}

TEST_CASE("two-axis ablation yields four arms") {
  ExperimentConfig cfg = tiny_config();
  cfg.apply_override("training.epochs=1");
  auto arms = run_ablation(cfg, {"cropping", "sample_pred"}, scratch() + "/sweep2");
  REQUIRE(arms.size() == 4);
  CHECK(arms[1].name == "no_crop");
  CHECK(arms[2].name == "epsilon_pred");
  CHECK(arms[3].name == "no_crop_epsilon_pred");
  CHECK(slurp(scratch() + "/sweep2/epsilon_pred/resolved.config").find("prediction_mode = epsilon") !=
        std::string::npos);
}
