#include "dp3/harness.hpp"

#include <json.hpp>

#include <charconv>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dp3/rng.hpp"

namespace dp3 {
namespace {

namespace fs = std::filesystem;

std::string format_real(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double now_seconds() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

}  // namespace

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << content;
  if (!os) throw std::runtime_error("short write to " + path);
}

EpisodeDataset generate_demos(const ExperimentConfig& cfg) {
  Reach3dEnv env(cfg.env_config());
  const auto targets = cfg.demo_targets();
  const std::uint64_t seed = cfg.seed();
  // Pad short episodes past 2H so their hold-at-goal steps can serve as
  // conditioning windows during training, not only as chunk tails.
  const auto H = static_cast<std::size_t>(cfg.get_int("horizon.prediction"));
  const auto min_len = 2 * H + 1;
  EpisodeDataset data;
  data.episodes.reserve(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i)
    data.episodes.push_back(
        record_expert_episode(env, derive_seed(seed, "demo", i), targets[i], min_len));
  return data;
}

void run_gen_demos(const ExperimentConfig& cfg, const std::string& out) {
  EpisodeDataset data = generate_demos(cfg);
  if (auto parent = fs::path(out).parent_path(); !parent.empty()) fs::create_directories(parent);
  data.save(out);
  write_text_file(out + ".config", cfg.serialize());
}

namespace {

std::string loss_csv(const std::vector<double>& loss) {
  std::ostringstream os;
  os << "epoch,loss\n";
  for (std::size_t e = 0; e < loss.size(); ++e) os << e << "," << format_real(loss[e]) << "\n";
  return os.str();
}

struct PartState {
  std::size_t epochs_done = 0;
  std::vector<double> loss;
};

void save_part_state(const std::string& path, const PartState& st) {
  nlohmann::json j;
  j["epochs_done"] = st.epochs_done;
  j["loss"] = st.loss;
  write_text_file(path, j.dump(2) + "\n");
}

PartState load_part_state(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open resume state " + path);
  nlohmann::json j;
  is >> j;
  PartState st;
  st.epochs_done = j.at("epochs_done").get<std::size_t>();
  st.loss = j.at("loss").get<std::vector<double>>();
  return st;
}

}  // namespace

TrainOutputs run_training(const ExperimentConfig& cfg, const std::string& data_path,
                          const std::string& ckpt_path, bool resume) {
  TrainOutputs out;
  const std::string part = ckpt_path + ".part";
  const std::string part_state = part + ".state";

  if (resume && fs::exists(ckpt_path) && !fs::exists(part)) {
    out.already_complete = true;
    return out;
  }

  EpisodeDataset data = EpisodeDataset::load(data_path);
  if (auto parent = fs::path(ckpt_path).parent_path(); !parent.empty())
    fs::create_directories(parent);

  Dp3Policy policy(cfg.policy_config());
  const TrainConfig tc = cfg.train_config();
  const std::uint64_t seed = cfg.seed();
  std::size_t start_epoch = 0;
  std::vector<double> prior;

  if (resume && fs::exists(part)) {
    PartState st = load_part_state(part_state);
    policy = Dp3Policy::load(part);
    start_epoch = st.epochs_done;
    prior = std::move(st.loss);
    out.resumed = true;
  } else {
    policy.init(seed);
  }

  const auto every = static_cast<std::size_t>(cfg.get_int("training.checkpoint_every"));
  std::vector<double> history = prior;
  TrainHook hook = [&](std::size_t epoch, double loss) {
    history.push_back(loss);
    if (every > 0 && (epoch + 1) % every == 0 && epoch + 1 < tc.epochs) {
      policy.save(part);
      save_part_state(part_state, {epoch + 1, history});
    }
  };

  out.result = policy.train(data, tc, seed, hook, start_epoch, prior);

  policy.save(ckpt_path);
  write_text_file(ckpt_path + ".loss.csv", loss_csv(out.result.epoch_loss));
  write_text_file(ckpt_path + ".config", cfg.serialize());
  std::error_code ec;
  fs::remove(part, ec);
  fs::remove(part + ".json", ec);
  fs::remove(part_state, ec);
  return out;
}

EvalReport evaluate_policy(Dp3Policy& policy, const ExperimentConfig& cfg) {
  const double t0 = now_seconds();
  EvalReport rep;
  rep.targets = cfg.eval_targets();
  const std::uint64_t seed = cfg.seed();
  const bool cloud_mode = policy.config().mode == ObservationMode::cloud;
  Reach3dEnv env(cfg.env_config());

  for (std::size_t i = 0; i < rep.targets.size(); ++i) {
    const std::uint64_t es = derive_seed(seed, "eval", i);
    env.reset(es, rep.targets[i]);
    Controller ctl(policy, es);
    std::size_t steps = 0;
    while (!env.done()) {
      RawObservation obs;
      obs.pose = env.pos();
      if (cloud_mode)
        obs.cloud = env.cloud();
      else
        obs.depth = env.depth();
      env.step(ctl.act(obs));
      ++steps;
    }
    rep.success.push_back(env.success() ? 1 : 0);
    rep.length.push_back(steps);
    rep.successes += env.success() ? 1 : 0;
    rep.diffusion_calls += ctl.diffusion_calls();
  }

  rep.episodes = rep.targets.size();
  rep.success_rate = rep.episodes ? static_cast<double>(rep.successes) / rep.episodes : 0.0;
  double total_len = 0;
  for (std::size_t l : rep.length) total_len += static_cast<double>(l);
  rep.mean_length = rep.episodes ? total_len / rep.episodes : 0.0;
  rep.wall_clock_s = now_seconds() - t0;
  return rep;
}

namespace {

std::string metrics_json(const EvalReport& rep) {
  nlohmann::json j;
  j["episodes"] = rep.episodes;
  j["successes"] = rep.successes;
  j["success_rate"] = rep.success_rate;
  j["mean_episode_length"] = rep.mean_length;
  j["diffusion_calls"] = rep.diffusion_calls;
  nlohmann::json per = nlohmann::json::array();
  for (std::size_t i = 0; i < rep.targets.size(); ++i) {
    per.push_back({{"x", rep.targets[i][0]},
                   {"y", rep.targets[i][1]},
                   {"z", rep.targets[i][2]},
                   {"success", static_cast<int>(rep.success[i])},
                   {"length", rep.length[i]}});
  }
  j["per_target"] = per;
  return j.dump(2) + "\n";
}

std::string report_text(const EvalReport& rep) {
  std::ostringstream os;
  auto row = [&](const std::string& k, const std::string& v) {
    std::string key = k;
    key.resize(22, ' ');
    os << key << v << "\n";
  };
  row("episodes", std::to_string(rep.episodes));
  row("successes", std::to_string(rep.successes));
  row("success rate", format_real(rep.success_rate * 100.0) + "%");
  row("mean episode length", format_real(rep.mean_length));
  row("diffusion calls", std::to_string(rep.diffusion_calls));
  row("wall clock", format_real(rep.wall_clock_s) + "s");
  return os.str();
}

std::string scatter_csv(const EvalReport& rep) {
  std::ostringstream os;
  os << "x,y,z,success\n";
  for (std::size_t i = 0; i < rep.targets.size(); ++i)
    os << format_real(rep.targets[i][0]) << "," << format_real(rep.targets[i][1]) << ","
       << format_real(rep.targets[i][2]) << "," << int(rep.success[i]) << "\n";
  return os.str();
}

}  // namespace

EvalReport run_eval(const ExperimentConfig& cfg, const std::string& ckpt_path,
                    const std::string& out_dir) {
  Dp3Policy policy = Dp3Policy::load(ckpt_path);
  EvalReport rep = evaluate_policy(policy, cfg);
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  write_text_file((dir / "metrics.json").string(), metrics_json(rep));
  write_text_file((dir / "report.txt").string(), report_text(rep));
  write_text_file((dir / "scatter.csv").string(), scatter_csv(rep));
  write_text_file((dir / "resolved.config").string(), cfg.serialize());
  return rep;
}

const std::vector<AblationAxisInfo>& ablation_axes() {
  static const std::vector<AblationAxisInfo> axes = {
      {"cropping", "env.crop_enabled=false", "no_crop"},
      {"layernorm", "encoder.use_layernorm=false", "no_layernorm"},
      {"projection", "encoder.use_projection=false", "no_projection"},
      {"color", "encoder.use_color=true", "with_color"},
      {"sample_pred", "diffusion.prediction_mode=epsilon", "epsilon_pred"},
      {"baseline", "env.observation_mode=depth", "depth_baseline"},
  };
  return axes;
}

namespace {

const AblationAxisInfo& find_axis(const std::string& name) {
  for (const auto& a : ablation_axes())
    if (a.name == name) return a;
  std::string known;
  for (const auto& a : ablation_axes()) known += (known.empty() ? "" : ", ") + a.name;
  throw std::runtime_error("invalid ablation axis '" + name + "' (axes: " + known + ")");
}

std::string comparison_csv(const std::vector<AblationArm>& arms) {
  std::ostringstream os;
  os << "arm,success_rate,successes,episodes,mean_episode_length\n";
  for (const auto& a : arms)
    os << a.name << "," << format_real(a.eval.success_rate) << "," << a.eval.successes << ","
       << a.eval.episodes << "," << format_real(a.eval.mean_length) << "\n";
  return os.str();
}

std::string comparison_text(const std::vector<AblationArm>& arms) {
  std::size_t width = 4;
  for (const auto& a : arms) width = std::max(width, a.name.size());
  std::ostringstream os;
  std::string head = "arm";
  head.resize(width + 2, ' ');
  os << head << "success rate   successes/episodes\n";
  for (const auto& a : arms) {
    std::string name = a.name;
    name.resize(width + 2, ' ');
    std::string rate = format_real(a.eval.success_rate * 100.0) + "%";
    rate.resize(15, ' ');
    os << name << rate << a.eval.successes << "/" << a.eval.episodes << "\n";
  }
  return os.str();
}

}  // namespace

std::vector<AblationArm> run_ablation(const ExperimentConfig& cfg,
                                      const std::vector<std::string>& axes,
                                      const std::string& out_dir) {
  std::vector<const AblationAxisInfo*> resolved;
  resolved.reserve(axes.size());
  for (const auto& name : axes) resolved.push_back(&find_axis(name));
  if (resolved.empty()) throw std::runtime_error("ablate needs at least one axis");

  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  write_text_file((dir / "resolved.config").string(), cfg.serialize());
  const std::string demos = (dir / "demos.bin").string();
  run_gen_demos(cfg, demos);

  std::vector<AblationArm> arms;
  const std::size_t n = resolved.size();
  for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
    AblationArm arm;
    ExperimentConfig arm_cfg = cfg;
    for (std::size_t i = 0; i < n; ++i) {
      if (!(mask & (std::size_t{1} << i))) continue;
      arm.off_axes.push_back(resolved[i]->name);
      arm_cfg.apply_override(resolved[i]->overrides);
      arm.name += (arm.name.empty() ? "" : "_") + resolved[i]->arm_label;
    }
    if (arm.name.empty()) arm.name = "default";

    const fs::path arm_dir = dir / arm.name;
    fs::create_directories(arm_dir);
    const std::string ckpt = (arm_dir / "policy.ckpt").string();
    run_training(arm_cfg, demos, ckpt);
    arm.eval = run_eval(arm_cfg, ckpt, arm_dir.string());
    arms.push_back(std::move(arm));
  }

  write_text_file((dir / "comparison.csv").string(), comparison_csv(arms));
  write_text_file((dir / "comparison.txt").string(), comparison_text(arms));
  return arms;
}

}  // namespace dp3
