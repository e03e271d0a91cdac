#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dp3/config.hpp"

namespace dp3 {

// Experiment runner behind the CLI. Every entry point takes a resolved
// ExperimentConfig and leaves a self-describing set of files behind:
// the artifact, plus the resolved config that produced it.

// Rolls the scripted expert over the configured demo targets. Episode i uses
// the seed stream derive_seed(seed, "demo", i); episodes are padded to the
// prediction horizon so every one of them yields at least one training chunk.
EpisodeDataset generate_demos(const ExperimentConfig& cfg);

// generate_demos + dataset file at `out` + resolved config at `out`.config.
void run_gen_demos(const ExperimentConfig& cfg, const std::string& out);

struct TrainOutputs {
  TrainResult result;
  bool resumed = false;
  bool already_complete = false;  // final checkpoint existed; nothing ran
};

// Trains on the dataset at `data_path` and writes:
//   ckpt_path            parameters + optimizer state
//   ckpt_path.json       policy sidecar (architecture + normalizers)
//   ckpt_path.loss.csv   epoch,loss
//   ckpt_path.config     resolved config
// training.checkpoint_every > 0 additionally saves ckpt_path.part (+ .state
// bookkeeping) periodically; `resume` picks that up and continues to the
// configured epoch count, bitwise-identical to an uninterrupted run.
TrainOutputs run_training(const ExperimentConfig& cfg, const std::string& data_path,
                          const std::string& ckpt_path, bool resume = false);

struct EvalReport {
  std::vector<Vec3> targets;
  std::vector<std::uint8_t> success;   // per target
  std::vector<std::size_t> length;     // steps taken per episode
  std::size_t episodes = 0;
  std::size_t successes = 0;
  double success_rate = 0.0;           // successes / episodes, exactly
  double mean_length = 0.0;
  std::size_t diffusion_calls = 0;
  double wall_clock_s = 0.0;
};

// One closed-loop episode per eval target. Episode i derives env and
// controller streams from derive_seed(seed, "eval", i).
EvalReport evaluate_policy(Dp3Policy& policy, const ExperimentConfig& cfg);

// evaluate_policy on a loaded checkpoint; writes into out_dir:
//   metrics.json   machine-readable report (fully deterministic)
//   report.txt     aligned human-readable table (carries the wall clock)
//   scatter.csv    x,y,z,success rows, one per target
//   resolved.config
// The checkpoint sidecar decides policy internals; `cfg` supplies the
// environment, eval protocol, and seed.
EvalReport run_eval(const ExperimentConfig& cfg, const std::string& ckpt_path,
                    const std::string& out_dir);

struct AblationAxisInfo {
  std::string name;       // CLI-facing axis name
  std::string overrides;  // "key=value" applied when the axis is switched off
  std::string arm_label;  // directory fragment for switched-off arms
};

const std::vector<AblationAxisInfo>& ablation_axes();

struct AblationArm {
  std::string name;  // "default" or joined arm labels
  std::vector<std::string> off_axes;
  EvalReport eval;
};

// Shared demos, then train+eval for every on/off combination of the requested
// axes (2^n arms). Writes DIR/demos.bin, DIR/<arm>/ per arm, and the
// comparison table as DIR/comparison.{txt,csv}.
std::vector<AblationArm> run_ablation(const ExperimentConfig& cfg,
                                      const std::vector<std::string>& axes,
                                      const std::string& out_dir);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace dp3
