#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dp3/dataset.hpp"
#include "dp3/denoiser.hpp"
#include "dp3/normalizer.hpp"
#include "dp3/perception.hpp"

namespace dp3 {

struct HorizonConfig {
  std::size_t prediction = 4;   // H, action chunk length
  std::size_t observation = 2;  // steps conditioned on
  std::size_t execution = 3;    // steps executed before replanning
  void validate() const;        // 1 <= execution <= prediction, observation >= 1
};

enum class ObservationMode { cloud, depth };

const char* to_string(ObservationMode m);
ObservationMode parse_observation_mode(const std::string& s);

struct PolicyConfig {
  ObservationMode mode = ObservationMode::cloud;
  bool crop_enabled = true;
  Aabb crop_box{{0.0, 0.0, 0.01}, {1.0, 1.0, 1.0}};
  std::size_t fps_count = 512;
  std::size_t depth_width = 84;
  std::size_t depth_height = 84;
  bool use_color = false;
  bool use_projection = true;
  bool use_layernorm = true;
  HorizonConfig horizon;
  std::size_t train_steps = 100;      // diffusion steps K
  std::size_t inference_steps = 10;   // DDIM steps at decision time
  ScheduleKind schedule = ScheduleKind::squared_cosine;
  PredictionMode prediction = PredictionMode::sample;
  double eta = 0.0;
  std::vector<std::size_t> hidden = {256, 256};
  std::size_t embed_dim = 32;

  void validate() const;
};

struct TrainConfig {
  std::size_t epochs = 3000;
  std::size_t batch = 128;
  AdamConfig adam;
  std::size_t max_steps = 0;  // hard cap on optimizer steps; 0 = no cap
  // early stop: consecutive plateau_window-epoch averages must improve by
  // plateau_tol relative or patience runs out; patience 0 disables
  std::size_t plateau_window = 50;
  std::size_t plateau_patience = 3;
  double plateau_tol = 1e-3;
};

struct TrainResult {
  std::vector<double> epoch_loss;  // includes any prior history passed in
  std::size_t adam_steps = 0;      // total, per the store's step counter
  bool early_stopped = false;
};

// What the environment hands over each step, before any perception config
// is applied.
struct RawObservation {
  PointCloud cloud;
  DepthImage depth;
  Vec3 pose{0.0, 0.0, 0.0};
};

using TrainHook = std::function<void(std::size_t epoch, double loss)>;

// Perception encoders + conditional diffusion head over action chunks, with
// the behavior-cloning trainer and the chunk sampler. Control-loop state
// lives in Controller below.
class Dp3Policy {
public:
  explicit Dp3Policy(PolicyConfig cfg);

  void init(std::uint64_t seed);  // fresh parameters, replaces any loaded state

  const PolicyConfig& config() const { return cfg_; }
  const NoiseSchedule& schedule() const { return sched_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  std::size_t cond_dim() const;
  const Normalizer& pose_normalizer() const { return pose_norm_; }
  const Normalizer& action_normalizer() const { return act_norm_; }
  bool normalizers_fitted() const { return fitted_; }

  void fit_normalizers(const EpisodeDataset& data);

  // crop + downsample + normalize one recorded or live observation
  StepInput make_step_input(const RawObservation& obs, std::uint64_t fps_seed) const;
  StepInput make_step_input(const EpisodeStep& step, std::uint64_t fps_seed) const;

  // Builds the condition for one window (oldest first; padded by the caller)
  // on the given tape so encoder gradients flow.
  Var build_condition(Tape& t, ParamBind& bind, const std::vector<StepInput>& window) const;

  // Fits normalizers, then minimizes the denoising loss end to end through
  // encoders and denoiser. start_epoch/prior_loss continue an interrupted
  // run whose optimizer state was restored via load().
  TrainResult train(const EpisodeDataset& data, const TrainConfig& tc, std::uint64_t seed,
                    const TrainHook& on_epoch = {}, std::size_t start_epoch = 0,
                    std::vector<double> prior_loss = {});

  // One reverse-diffusion pass; returns the normalized [H, action_dim] chunk.
  Tensor sample_chunk(const std::vector<StepInput>& window, Rng& rng);

  void save(const std::string& ckpt_path) const;  // checkpoint + ".json" sidecar
  static Dp3Policy load(const std::string& ckpt_path);

private:
  PolicyConfig cfg_;
  NoiseSchedule sched_;
  std::optional<CloudEncoder> cloud_enc_;
  std::optional<PoseEncoder> pose_enc_;
  std::optional<DepthEncoder> depth_enc_;
  DenoiserMlp denoiser_;
  ParamStore params_;
  Normalizer pose_norm_;
  Normalizer act_norm_;
  bool fitted_ = false;
};

// Receding-horizon execution: keeps the observation window and the queue of
// pending actions; one reverse-diffusion call per execution-many env steps.
class Controller {
public:
  Controller(Dp3Policy& policy, std::uint64_t seed);

  Vec3 act(const RawObservation& obs);  // environment units

  std::size_t diffusion_calls() const { return calls_; }
  std::size_t queue_size() const { return queue_.size(); }

private:
  Dp3Policy* policy_;
  std::uint64_t seed_;
  Rng rng_;
  std::size_t step_ = 0;
  std::size_t calls_ = 0;
  std::vector<StepInput> window_;
  std::deque<Vec3> queue_;
};

}  // namespace dp3
