#pragma once

#include <string>
#include <vector>

#include "dp3/graph.hpp"
#include "dp3/pointcloud.hpp"

namespace dp3 {

struct EncoderConfig {
  std::size_t channels = 3;  // 6 with color
  std::size_t pose_dim = 3;
  bool use_layernorm = true;
  bool use_projection = true;
};

// [N,3] or [N,6] matrix for the encoder; colors appended when requested
Tensor cloud_to_matrix(const PointCloud& cloud, bool with_color);

// Per-point MLP channels->64->128->256 (linear + LayerNorm + ReLU each),
// columnwise max over points, then a 256->64 linear + LayerNorm projection.
// The LayerNorm and projection stages can be switched off for ablations;
// without the projection the feature stays 256 wide.
class CloudEncoder {
public:
  CloudEncoder(EncoderConfig cfg, std::string prefix = "enc");

  void init_params(ParamStore& store, Rng& rng) const;
  std::size_t feature_dim() const { return cfg_.use_projection ? 64 : 256; }
  const EncoderConfig& config() const { return cfg_; }

  // points: [N, channels] constant already on the tape; returns [1, feature_dim]
  Var encode(Tape& t, ParamBind& bind, Var points) const;
  Var encode(Tape& t, ParamBind& bind, const Tensor& points) const;

private:
  EncoderConfig cfg_;
  std::string p_;
};

// pose_dim -> 64 -> 64 with one ReLU between
class PoseEncoder {
public:
  explicit PoseEncoder(std::size_t pose_dim = 3, std::string prefix = "pose");

  void init_params(ParamStore& store, Rng& rng) const;
  static constexpr std::size_t feature_dim() { return 64; }

  Var encode(Tape& t, ParamBind& bind, Var pose_row) const;  // [1,pose_dim] -> [1,64]
  Var encode(Tape& t, ParamBind& bind, const Tensor& pose) const;

private:
  std::size_t pose_dim_;
  std::string p_;
};

// 2D baseline: flattened depth image through 7056 -> 256 -> 128 with ReLU,
// standing in for the whole [cloud ; pose] block of a condition step.
class DepthEncoder {
public:
  DepthEncoder(std::size_t width = 84, std::size_t height = 84, std::string prefix = "depth");

  void init_params(ParamStore& store, Rng& rng) const;
  static constexpr std::size_t feature_dim() { return 128; }

  Var encode(Tape& t, ParamBind& bind, const Tensor& depth) const;  // [h,w] or flat

private:
  std::size_t in_dim_;
  std::string p_;
};

// One observation as the policy sees it after perception config is applied.
struct StepInput {
  Tensor cloud;  // [N, channels] for the cloud path; empty for depth baseline
  Tensor depth;  // [h, w] for the baseline path; empty otherwise
  Tensor pose;   // [pose_dim], already normalized by the caller
};

// Concatenated per-step features, oldest step first: [1, n_obs * step_dim].
// Cloud path: step = [cloud feature ; pose feature]. Depth path: step = depth
// feature alone (it replaces the whole block).
class ConditionBuilder {
public:
  ConditionBuilder(const CloudEncoder* cloud, const PoseEncoder* pose, const DepthEncoder* depth,
                   std::size_t n_obs);

  std::size_t step_dim() const;
  std::size_t dim() const { return n_obs_ * step_dim(); }

  Var build(Tape& t, ParamBind& bind, const std::vector<StepInput>& window) const;

private:
  const CloudEncoder* cloud_;
  const PoseEncoder* pose_;
  const DepthEncoder* depth_;
  std::size_t n_obs_;
};

}  // namespace dp3
