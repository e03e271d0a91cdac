#include "dp3/policy.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <json.hpp>

namespace dp3 {

void HorizonConfig::validate() const {
  if (prediction < 1) throw std::invalid_argument("horizon: prediction must be >= 1");
  if (observation < 1) throw std::invalid_argument("horizon: observation must be >= 1");
  if (execution < 1 || execution > prediction)
    throw std::invalid_argument("horizon: execution must be in [1, prediction]");
}

void PolicyConfig::validate() const {
  horizon.validate();
  if (fps_count < 1) throw std::invalid_argument("policy: fps_count must be >= 1");
  if (depth_width < 1 || depth_height < 1)
    throw std::invalid_argument("policy: depth dimensions must be >= 1");
  if (train_steps < 1) throw std::invalid_argument("policy: train_steps must be >= 1");
  if (inference_steps < 1 || inference_steps > train_steps)
    throw std::invalid_argument("policy: inference_steps must be in [1, train_steps]");
  if (eta < 0.0) throw std::invalid_argument("policy: eta must be >= 0");
  if (embed_dim < 4 || embed_dim % 2 != 0)
    throw std::invalid_argument("policy: embed_dim must be even and >= 4");
  if (hidden.empty()) throw std::invalid_argument("policy: hidden layer list is empty");
  for (std::size_t h : hidden)
    if (h < 1) throw std::invalid_argument("policy: hidden layer width must be >= 1");
  for (std::size_t c = 0; c < 3; ++c)
    if (crop_box.min[c] > crop_box.max[c])
      throw std::invalid_argument("policy: crop box min exceeds max");
}

const char* to_string(ObservationMode m) {
  return m == ObservationMode::cloud ? "cloud" : "depth";
}

ObservationMode parse_observation_mode(const std::string& s) {
  if (s == "cloud") return ObservationMode::cloud;
  if (s == "depth") return ObservationMode::depth;
  throw std::invalid_argument("unknown observation mode '" + s + "' (expected cloud or depth)");
}

namespace {

constexpr std::size_t kActionDim = 3;

DenoiserConfig denoiser_config(const PolicyConfig& cfg, std::size_t cond_dim) {
  DenoiserConfig d;
  d.horizon = cfg.horizon.prediction;
  d.action_dim = kActionDim;
  d.cond_dim = cond_dim;
  d.embed_dim = cfg.embed_dim;
  d.hidden = cfg.hidden;
  return d;
}

std::size_t compute_cond_dim(const PolicyConfig& cfg) {
  if (cfg.mode == ObservationMode::depth)
    return cfg.horizon.observation * DepthEncoder::feature_dim();
  const std::size_t cloud_feat = cfg.use_projection ? 64 : 256;
  return cfg.horizon.observation * (cloud_feat + PoseEncoder::feature_dim());
}

EncoderConfig encoder_config(const PolicyConfig& cfg) {
  EncoderConfig e;
  e.channels = cfg.use_color ? 6 : 3;
  e.pose_dim = kActionDim;
  e.use_layernorm = cfg.use_layernorm;
  e.use_projection = cfg.use_projection;
  return e;
}

}  // namespace

Dp3Policy::Dp3Policy(PolicyConfig cfg)
    : cfg_(std::move(cfg)),
      sched_(make_schedule(cfg_.train_steps, cfg_.schedule)),
      denoiser_(denoiser_config(cfg_, compute_cond_dim(cfg_))) {
  cfg_.validate();
  if (cfg_.mode == ObservationMode::cloud) {
    cloud_enc_.emplace(encoder_config(cfg_));
    pose_enc_.emplace(kActionDim);
  } else {
    depth_enc_.emplace(cfg_.depth_width, cfg_.depth_height);
  }
}

std::size_t Dp3Policy::cond_dim() const { return compute_cond_dim(cfg_); }

void Dp3Policy::init(std::uint64_t seed) {
  params_ = ParamStore();
  Rng rng(derive_seed(seed, "init"));
  if (cloud_enc_) cloud_enc_->init_params(params_, rng);
  if (pose_enc_) pose_enc_->init_params(params_, rng);
  if (depth_enc_) depth_enc_->init_params(params_, rng);
  denoiser_.init_params(params_, rng);
}

void Dp3Policy::fit_normalizers(const EpisodeDataset& data) {
  std::vector<std::vector<double>> poses;
  std::vector<std::vector<double>> actions;
  for (const auto& ep : data.episodes) {
    for (const auto& s : ep.steps) {
      const Vec3 p = step_pose(s);
      const Vec3 a = step_action(s);
      poses.push_back({p[0], p[1], p[2]});
      actions.push_back({a[0], a[1], a[2]});
    }
  }
  if (poses.empty()) throw std::runtime_error("policy: dataset has no steps to normalize over");
  pose_norm_ = Normalizer::fit(poses);
  act_norm_ = Normalizer::fit(actions);
  fitted_ = true;
}

StepInput Dp3Policy::make_step_input(const RawObservation& obs, std::uint64_t fps_seed) const {
  StepInput si;
  if (cfg_.mode == ObservationMode::depth) {
    if (obs.depth.width != cfg_.depth_width || obs.depth.height != cfg_.depth_height)
      throw std::invalid_argument("policy: depth image is " + std::to_string(obs.depth.width) +
                                  "x" + std::to_string(obs.depth.height) + ", expected " +
                                  std::to_string(cfg_.depth_width) + "x" +
                                  std::to_string(cfg_.depth_height));
    si.depth = Tensor({cfg_.depth_height, cfg_.depth_width}, obs.depth.z);
    return si;
  }
  if (!fitted_) throw std::logic_error("policy: normalizers not fitted; train or load first");
  PointCloud pc = cfg_.use_color ? obs.cloud : strip_color(obs.cloud);
  if (cfg_.use_color && !pc.has_colors())
    throw std::invalid_argument("policy: use_color is on but the observation has no colors");
  if (cfg_.crop_enabled) pc = crop(pc, cfg_.crop_box);
  if (pc.size() == 0)
    throw std::runtime_error("policy: point cloud is empty after cropping; loosen the crop box");
  pc = fps(pc, cfg_.fps_count, fps_seed);
  si.cloud = cloud_to_matrix(pc, cfg_.use_color);
  si.pose = Tensor::vec(pose_norm_.normalize(std::vector<double>{obs.pose[0], obs.pose[1],
                                                                 obs.pose[2]}));
  return si;
}

StepInput Dp3Policy::make_step_input(const EpisodeStep& step, std::uint64_t fps_seed) const {
  if (cfg_.mode == ObservationMode::depth) {
    StepInput si;
    si.depth = step_depth(step, cfg_.depth_width, cfg_.depth_height);
    return si;
  }
  RawObservation obs;
  obs.cloud = step_cloud(step);
  obs.pose = step_pose(step);
  return make_step_input(obs, fps_seed);
}

Var Dp3Policy::build_condition(Tape& t, ParamBind& bind,
                               const std::vector<StepInput>& window) const {
  ConditionBuilder builder(cloud_enc_ ? &*cloud_enc_ : nullptr, pose_enc_ ? &*pose_enc_ : nullptr,
                           depth_enc_ ? &*depth_enc_ : nullptr, cfg_.horizon.observation);
  return builder.build(t, bind, window);
}

TrainResult Dp3Policy::train(const EpisodeDataset& data, const TrainConfig& tc,
                             std::uint64_t seed, const TrainHook& on_epoch,
                             std::size_t start_epoch, std::vector<double> prior_loss) {
  if (tc.batch < 1) throw std::invalid_argument("train: batch must be >= 1");
  const std::size_t H = cfg_.horizon.prediction;
  const std::size_t n_obs = cfg_.horizon.observation;

  fit_normalizers(data);

  // chunk index and per-step perception cache; chunk (ep, t) pairs the
  // window ending at step t with actions t..t+H-1
  std::vector<std::pair<std::size_t, std::size_t>> chunks;
  for (std::size_t ep = 0; ep < data.episodes.size(); ++ep) {
    const std::size_t len = data.episodes[ep].steps.size();
    if (len < H) continue;
    for (std::size_t t0 = 0; t0 + H <= len; ++t0) chunks.emplace_back(ep, t0);
  }
  if (chunks.empty())
    throw std::runtime_error(
        "train: no usable chunks; every episode is shorter than the prediction horizon (" +
        std::to_string(H) + " steps)");

  std::vector<std::vector<StepInput>> inputs(data.episodes.size());
  std::vector<Tensor> norm_actions(data.episodes.size());
  for (std::size_t ep = 0; ep < data.episodes.size(); ++ep) {
    const auto& steps = data.episodes[ep].steps;
    inputs[ep].reserve(steps.size());
    std::vector<double> flat;
    flat.reserve(steps.size() * kActionDim);
    for (std::size_t s = 0; s < steps.size(); ++s) {
      inputs[ep].push_back(make_step_input(steps[s], derive_seed(seed, "fps", ep * 1000003 + s)));
      const Vec3 a = step_action(steps[s]);
      flat.insert(flat.end(), {a[0], a[1], a[2]});
    }
    const std::size_t len = steps.size();
    norm_actions[ep] = act_norm_.normalize(Tensor({len, kActionDim}, std::move(flat)));
  }

  TrainResult result;
  result.epoch_loss = std::move(prior_loss);
  const std::size_t batches = (chunks.size() + tc.batch - 1) / tc.batch;

  // plateau bookkeeping, replayed over any prior history so resumed runs
  // stop at the same epoch an uninterrupted run would
  double best_avg = std::numeric_limits<double>::infinity();
  std::size_t bad_windows = 0;
  auto plateau_update = [&](std::size_t epochs_done) {
    if (tc.plateau_patience == 0 || tc.plateau_window == 0) return false;
    if (epochs_done == 0 || epochs_done % tc.plateau_window != 0) return false;
    double avg = 0.0;
    for (std::size_t i = epochs_done - tc.plateau_window; i < epochs_done; ++i)
      avg += result.epoch_loss[i];
    avg /= static_cast<double>(tc.plateau_window);
    if (avg < best_avg * (1.0 - tc.plateau_tol)) {
      best_avg = avg;
      bad_windows = 0;
    } else {
      ++bad_windows;
    }
    return bad_windows >= tc.plateau_patience;
  };
  bool stop = false;
  if (tc.plateau_patience > 0 && tc.plateau_window > 0) {
    for (std::size_t done = tc.plateau_window; done <= result.epoch_loss.size() && !stop;
         done += tc.plateau_window)
      stop = plateau_update(done);
    result.early_stopped = stop;
  }

  for (std::size_t e = start_epoch; e < tc.epochs && !stop; ++e) {
    Rng erng(derive_seed(seed, "epoch", e));
    double esum = 0.0;
    std::size_t ebatches = 0;
    for (std::size_t b = 0; b < batches; ++b) {
      if (tc.max_steps && params_.step_count() >= static_cast<std::int64_t>(tc.max_steps)) {
        stop = true;
        break;
      }
      Tape tape;
      ParamBind bind(tape, params_);
      Var total;
      const std::size_t bsz = tc.batch;
      for (std::size_t i = 0; i < bsz; ++i) {
        const auto [ep, t0] = chunks[erng.index(chunks.size())];
        std::vector<StepInput> window;
        window.reserve(n_obs);
        for (std::size_t j = 0; j < n_obs; ++j) {
          const std::size_t back = n_obs - 1 - j;
          window.push_back(inputs[ep][t0 >= back ? t0 - back : 0]);
        }
        Var cond = build_condition(tape, bind, window);

        Tensor a0({H, kActionDim});
        for (std::size_t r = 0; r < H; ++r)
          for (std::size_t c = 0; c < kActionDim; ++c) a0.at(r, c) = norm_actions[ep].at(t0 + r, c);
        const std::size_t k = 1 + erng.index(sched_.K);
        Tensor eps({H, kActionDim});
        for (std::size_t n = 0; n < eps.numel(); ++n) eps[n] = erng.normal();
        const Tensor noisy = forward_diffuse(a0, k, eps, sched_);

        Var pred = denoiser_.forward(tape, bind, tape.constant(noisy.reshaped({1, H * kActionDim})),
                                     k, cond);
        const Tensor& target = cfg_.prediction == PredictionMode::epsilon ? eps : a0;
        Var item = tape.mse(pred, tape.constant(target.reshaped({1, H * kActionDim})));
        total = i == 0 ? item : tape.add(total, item);
      }
      Var loss = tape.scale(total, 1.0 / static_cast<double>(bsz));
      const double lv = tape.value(loss)[0];
      if (!std::isfinite(lv))
        throw std::runtime_error("train: loss is not finite at epoch " + std::to_string(e) +
                                 ", optimizer step " + std::to_string(params_.step_count()) +
                                 "; lower training.lr or check the dataset");
      tape.backward(loss);
      params_.zero_grad();
      bind.accumulate_grads();
      params_.adam_step(tc.adam);
      esum += lv;
      ++ebatches;
    }
    if (ebatches == 0) break;
    result.epoch_loss.push_back(esum / static_cast<double>(ebatches));
    if (on_epoch) on_epoch(e, result.epoch_loss.back());
    if (!stop && plateau_update(result.epoch_loss.size())) {
      stop = true;
      result.early_stopped = true;
    }
  }
  result.adam_steps = static_cast<std::size_t>(params_.step_count());
  return result;
}

Tensor Dp3Policy::sample_chunk(const std::vector<StepInput>& window, Rng& rng) {
  Tape tape;
  ParamBind bind(tape, params_);
  Var cond = build_condition(tape, bind, window);
  const Tensor cond_val = tape.value(cond);
  DenoiserFn fn = denoiser_.as_fn(params_, cond_val);
  return ddim_sample(fn, sched_, cfg_.prediction, {cfg_.horizon.prediction, kActionDim},
                     cfg_.inference_steps, cfg_.eta, rng);
}

void Dp3Policy::save(const std::string& ckpt_path) const {
  params_.save(ckpt_path);
  nlohmann::json j;
  j["format"] = "dp3-policy-1";
  j["mode"] = to_string(cfg_.mode);
  j["crop_enabled"] = cfg_.crop_enabled;
  j["crop_min"] = {cfg_.crop_box.min[0], cfg_.crop_box.min[1], cfg_.crop_box.min[2]};
  j["crop_max"] = {cfg_.crop_box.max[0], cfg_.crop_box.max[1], cfg_.crop_box.max[2]};
  j["fps_count"] = cfg_.fps_count;
  j["depth_width"] = cfg_.depth_width;
  j["depth_height"] = cfg_.depth_height;
  j["use_color"] = cfg_.use_color;
  j["use_projection"] = cfg_.use_projection;
  j["use_layernorm"] = cfg_.use_layernorm;
  j["horizon"] = {{"prediction", cfg_.horizon.prediction},
                  {"observation", cfg_.horizon.observation},
                  {"execution", cfg_.horizon.execution}};
  j["diffusion"] = {{"train_steps", cfg_.train_steps},
                    {"inference_steps", cfg_.inference_steps},
                    {"schedule", to_string(cfg_.schedule)},
                    {"prediction", to_string(cfg_.prediction)},
                    {"eta", cfg_.eta},
                    {"embed_dim", cfg_.embed_dim},
                    {"hidden", cfg_.hidden}};
  j["fitted"] = fitted_;
  if (fitted_) {
    j["normalizer"] = {{"pose_lo", pose_norm_.lo()},
                       {"pose_hi", pose_norm_.hi()},
                       {"action_lo", act_norm_.lo()},
                       {"action_hi", act_norm_.hi()}};
  }
  std::ofstream os(ckpt_path + ".json");
  if (!os) throw std::runtime_error("policy: cannot write sidecar " + ckpt_path + ".json");
  os << j.dump(2) << "\n";
}

Dp3Policy Dp3Policy::load(const std::string& ckpt_path) {
  std::ifstream is(ckpt_path + ".json");
  if (!is)
    throw std::runtime_error("policy: missing sidecar " + ckpt_path +
                             ".json (checkpoints travel with their sidecar)");
  nlohmann::json j;
  is >> j;
  if (j.value("format", "") != std::string("dp3-policy-1"))
    throw std::runtime_error("policy: unrecognized sidecar format in " + ckpt_path + ".json");

  PolicyConfig cfg;
  cfg.mode = parse_observation_mode(j.at("mode").get<std::string>());
  cfg.crop_enabled = j.at("crop_enabled").get<bool>();
  for (std::size_t c = 0; c < 3; ++c) {
    cfg.crop_box.min[c] = j.at("crop_min")[c].get<double>();
    cfg.crop_box.max[c] = j.at("crop_max")[c].get<double>();
  }
  cfg.fps_count = j.at("fps_count").get<std::size_t>();
  cfg.depth_width = j.at("depth_width").get<std::size_t>();
  cfg.depth_height = j.at("depth_height").get<std::size_t>();
  cfg.use_color = j.at("use_color").get<bool>();
  cfg.use_projection = j.at("use_projection").get<bool>();
  cfg.use_layernorm = j.at("use_layernorm").get<bool>();
  cfg.horizon.prediction = j.at("horizon").at("prediction").get<std::size_t>();
  cfg.horizon.observation = j.at("horizon").at("observation").get<std::size_t>();
  cfg.horizon.execution = j.at("horizon").at("execution").get<std::size_t>();
  cfg.train_steps = j.at("diffusion").at("train_steps").get<std::size_t>();
  cfg.inference_steps = j.at("diffusion").at("inference_steps").get<std::size_t>();
  cfg.schedule = parse_schedule_kind(j.at("diffusion").at("schedule").get<std::string>());
  cfg.prediction = parse_prediction_mode(j.at("diffusion").at("prediction").get<std::string>());
  cfg.eta = j.at("diffusion").at("eta").get<double>();
  cfg.embed_dim = j.at("diffusion").at("embed_dim").get<std::size_t>();
  cfg.hidden = j.at("diffusion").at("hidden").get<std::vector<std::size_t>>();

  Dp3Policy policy(cfg);
  policy.params_ = ParamStore::load(ckpt_path);
  if (j.at("fitted").get<bool>()) {
    const auto& n = j.at("normalizer");
    policy.pose_norm_ = Normalizer(n.at("pose_lo").get<std::vector<double>>(),
                                   n.at("pose_hi").get<std::vector<double>>());
    policy.act_norm_ = Normalizer(n.at("action_lo").get<std::vector<double>>(),
                                  n.at("action_hi").get<std::vector<double>>());
    policy.fitted_ = true;
  }
  return policy;
}

Controller::Controller(Dp3Policy& policy, std::uint64_t seed)
    : policy_(&policy), seed_(seed), rng_(derive_seed(seed, "sampler")) {}

Vec3 Controller::act(const RawObservation& obs) {
  const HorizonConfig& hz = policy_->config().horizon;
  window_.push_back(policy_->make_step_input(obs, derive_seed(seed_, "fps", step_)));
  ++step_;
  if (window_.size() > hz.observation) window_.erase(window_.begin());

  if (queue_.empty()) {
    std::vector<StepInput> padded = window_;
    while (padded.size() < hz.observation) {
      StepInput first = padded.front();
      padded.insert(padded.begin(), std::move(first));
    }
    const Tensor chunk = policy_->sample_chunk(padded, rng_);
    ++calls_;
    const Normalizer& an = policy_->action_normalizer();
    for (std::size_t r = hz.prediction - hz.execution; r < hz.prediction; ++r) {
      const std::vector<double> a =
          an.denormalize(std::vector<double>{chunk.at(r, 0), chunk.at(r, 1), chunk.at(r, 2)});
      queue_.push_back({a[0], a[1], a[2]});
    }
  }
  const Vec3 a = queue_.front();
  queue_.pop_front();
  return a;
}

}  // namespace dp3
