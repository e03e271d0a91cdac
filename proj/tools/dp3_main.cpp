#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

#include "dp3/harness.hpp"

namespace {

dp3::ExperimentConfig load_config(const std::string& path,
                                  const std::vector<std::string>& overrides) {
  dp3::ExperimentConfig cfg = path.empty() ? dp3::ExperimentConfig::defaults()
                                           : dp3::ExperimentConfig::parse_file(path);
  for (const auto& o : overrides) cfg.apply_override(o);
  dp3::apply_env_seed(cfg);
  return cfg;
}

std::vector<std::string> split_axes(const std::string& list) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= list.size()) {
    std::size_t pos = list.find(',', start);
    std::string part = list.substr(start, pos - start);
    std::size_t b = part.find_first_not_of(" \t");
    std::size_t e = part.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(part.substr(b, e - b + 1));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"point-cloud diffusion policy workbench: demos, training, evaluation, ablations"};
  app.require_subcommand(0, 1);

  std::string config_path, out, data, ckpt, axes_list;
  std::vector<std::string> overrides;
  bool resume = false;
  bool help_config = false;

  app.add_flag("--help-config", help_config, "print the configuration schema and exit");

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "configuration file (defaults when omitted)");
    sub->add_option("--override", overrides, "dotted.key=value, repeatable")->type_size(1);
  };

  CLI::App* gen = app.add_subcommand("gen-demos", "record scripted-expert demonstrations");
  add_common(gen);
  gen->add_option("-o,--out", out, "dataset file to write")->required();

  CLI::App* train = app.add_subcommand("train", "train a policy on a demo dataset");
  add_common(train);
  train->add_option("--data", data, "demo dataset file")->required();
  train->add_option("-o,--out", ckpt, "checkpoint path to write")->required();
  train->add_flag("--resume", resume, "continue from a periodic checkpoint if one exists");

  CLI::App* eval = app.add_subcommand("eval", "roll a trained policy over the eval targets");
  add_common(eval);
  eval->add_option("--ckpt", ckpt, "checkpoint to load")->required();
  eval->add_option("-o,--out", out, "run directory to write")->required();

  CLI::App* ablate =
      app.add_subcommand("ablate", "train and eval every on/off combination of the given axes");
  add_common(ablate);
  ablate->add_option("--axes", axes_list, "comma-separated axis names")->required();
  ablate->add_option("-o,--out", out, "sweep directory to write")->required();

  CLI11_PARSE(app, argc, argv);

  if (help_config) {
    std::cout << dp3::ExperimentConfig::help_text();
    return 0;
  }
  if (app.get_subcommands().empty()) {
    std::cerr << app.help();
    return 1;
  }

  try {
    if (gen->parsed()) {
      dp3::ExperimentConfig cfg = load_config(config_path, overrides);
      dp3::run_gen_demos(cfg, out);
      dp3::EpisodeDataset data_back = dp3::EpisodeDataset::load(out);
      std::cout << "wrote " << data_back.episodes.size() << " episodes ("
                << data_back.total_steps() << " steps) to " << out << "\n";
    } else if (train->parsed()) {
      dp3::ExperimentConfig cfg = load_config(config_path, overrides);
      dp3::TrainOutputs res = dp3::run_training(cfg, data, ckpt, resume);
      if (res.already_complete) {
        std::cout << ckpt << " is already complete; nothing to do\n";
      } else {
        std::cout << (res.resumed ? "resumed; " : "") << "trained "
                  << res.result.epoch_loss.size() << " epochs ("
                  << res.result.adam_steps << " optimizer steps"
                  << (res.result.early_stopped ? ", stopped on plateau" : "") << "), final loss "
                  << res.result.epoch_loss.back() << "\nwrote " << ckpt << "\n";
      }
    } else if (eval->parsed()) {
      dp3::ExperimentConfig cfg = load_config(config_path, overrides);
      dp3::EvalReport rep = dp3::run_eval(cfg, ckpt, out);
      std::cout << "success rate " << rep.successes << "/" << rep.episodes << " over "
                << rep.episodes << " episodes\nwrote " << out << "\n";
    } else if (ablate->parsed()) {
      dp3::ExperimentConfig cfg = load_config(config_path, overrides);
      auto arms = dp3::run_ablation(cfg, split_axes(axes_list), out);
      for (const auto& arm : arms)
        std::cout << arm.name << ": " << arm.eval.successes << "/" << arm.eval.episodes << "\n";
      std::cout << "wrote " << out << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
