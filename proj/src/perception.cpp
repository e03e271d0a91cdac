#include "dp3/perception.hpp"

#include <stdexcept>

namespace dp3 {

Tensor cloud_to_matrix(const PointCloud& cloud, bool with_color) {
  std::size_t n = cloud.size();
  if (!with_color) return cloud.points;
  if (!cloud.has_colors())
    throw std::invalid_argument("cloud_to_matrix: color channels requested but cloud has none");
  Tensor m({n, 6});
  for (std::size_t i = 0; i < n; ++i) {
    for (int k = 0; k < 3; ++k) {
      m.at(i, k) = cloud.points.at(i, k);
      m.at(i, 3 + k) = cloud.colors.at(i, k);
    }
  }
  return m;
}

CloudEncoder::CloudEncoder(EncoderConfig cfg, std::string prefix)
    : cfg_(cfg), p_(std::move(prefix)) {
  if (cfg_.channels != 3 && cfg_.channels != 6)
    throw std::invalid_argument("cloud encoder: channels must be 3 or 6");
}

void CloudEncoder::init_params(ParamStore& store, Rng& rng) const {
  const std::size_t dims[4] = {cfg_.channels, 64, 128, 256};
  for (int l = 0; l < 3; ++l) {
    std::string base = p_ + "/l" + std::to_string(l + 1);
    init_linear(store, base + "/w", base + "/b", dims[l], dims[l + 1], rng);
    if (cfg_.use_layernorm)
      init_layer_norm(store, p_ + "/ln" + std::to_string(l + 1) + "/g",
                      p_ + "/ln" + std::to_string(l + 1) + "/b", dims[l + 1]);
  }
  if (cfg_.use_projection) {
    init_linear(store, p_ + "/proj/w", p_ + "/proj/b", 256, 64, rng);
    if (cfg_.use_layernorm) init_layer_norm(store, p_ + "/projln/g", p_ + "/projln/b", 64);
  }
}

Var CloudEncoder::encode(Tape& t, ParamBind& bind, Var points) const {
  const Tensor& in = t.value(points);
  if (in.rank() != 2 || in.dim(1) != cfg_.channels)
    throw std::invalid_argument("cloud encoder: expected [N," + std::to_string(cfg_.channels) +
                                "] input, got " + in.shape_str());
  if (in.dim(0) == 0) throw std::invalid_argument("cloud encoder: empty cloud");

  Var h = points;
  for (int l = 0; l < 3; ++l) {
    std::string base = p_ + "/l" + std::to_string(l + 1);
    h = t.linear(h, bind[base + "/w"], bind[base + "/b"]);
    if (cfg_.use_layernorm) {
      std::string ln = p_ + "/ln" + std::to_string(l + 1);
      h = t.layer_norm(h, bind[ln + "/g"], bind[ln + "/b"]);
    }
    h = t.relu(h);
  }
  h = t.max_pool_rows(h);
  if (cfg_.use_projection) {
    h = t.linear(h, bind[p_ + "/proj/w"], bind[p_ + "/proj/b"]);
    if (cfg_.use_layernorm) h = t.layer_norm(h, bind[p_ + "/projln/g"], bind[p_ + "/projln/b"]);
  }
  return h;
}

Var CloudEncoder::encode(Tape& t, ParamBind& bind, const Tensor& points) const {
  return encode(t, bind, t.constant(points));
}

PoseEncoder::PoseEncoder(std::size_t pose_dim, std::string prefix)
    : pose_dim_(pose_dim), p_(std::move(prefix)) {
  if (pose_dim_ == 0) throw std::invalid_argument("pose encoder: zero pose dim");
}

void PoseEncoder::init_params(ParamStore& store, Rng& rng) const {
  init_linear(store, p_ + "/l1/w", p_ + "/l1/b", pose_dim_, 64, rng);
  init_linear(store, p_ + "/l2/w", p_ + "/l2/b", 64, 64, rng);
}

Var PoseEncoder::encode(Tape& t, ParamBind& bind, Var pose_row) const {
  const Tensor& in = t.value(pose_row);
  if (in.rank() != 2 || in.dim(0) != 1 || in.dim(1) != pose_dim_)
    throw std::invalid_argument("pose encoder: expected [1," + std::to_string(pose_dim_) +
                                "], got " + in.shape_str());
  Var h = t.relu(t.linear(pose_row, bind[p_ + "/l1/w"], bind[p_ + "/l1/b"]));
  return t.linear(h, bind[p_ + "/l2/w"], bind[p_ + "/l2/b"]);
}

Var PoseEncoder::encode(Tape& t, ParamBind& bind, const Tensor& pose) const {
  if (pose.rank() == 1) return encode(t, bind, t.constant(pose.reshaped({1, pose.numel()})));
  return encode(t, bind, t.constant(pose));
}

DepthEncoder::DepthEncoder(std::size_t width, std::size_t height, std::string prefix)
    : in_dim_(width * height), p_(std::move(prefix)) {
  if (in_dim_ == 0) throw std::invalid_argument("depth encoder: zero input dim");
}

void DepthEncoder::init_params(ParamStore& store, Rng& rng) const {
  init_linear(store, p_ + "/l1/w", p_ + "/l1/b", in_dim_, 256, rng);
  init_linear(store, p_ + "/l2/w", p_ + "/l2/b", 256, 128, rng);
}

Var DepthEncoder::encode(Tape& t, ParamBind& bind, const Tensor& depth) const {
  if (depth.numel() != in_dim_)
    throw std::invalid_argument("depth encoder: expected " + std::to_string(in_dim_) +
                                " pixels, got " + std::to_string(depth.numel()));
  Var x = t.constant(depth.reshaped({1, in_dim_}));
  Var h = t.relu(t.linear(x, bind[p_ + "/l1/w"], bind[p_ + "/l1/b"]));
  return t.linear(h, bind[p_ + "/l2/w"], bind[p_ + "/l2/b"]);
}

ConditionBuilder::ConditionBuilder(const CloudEncoder* cloud, const PoseEncoder* pose,
                                   const DepthEncoder* depth, std::size_t n_obs)
    : cloud_(cloud), pose_(pose), depth_(depth), n_obs_(n_obs) {
  if (n_obs_ == 0) throw std::invalid_argument("condition: n_obs must be >= 1");
  bool cloud_path = cloud_ != nullptr && pose_ != nullptr;
  bool depth_path = depth_ != nullptr;
  if (cloud_path == depth_path)
    throw std::invalid_argument("condition: exactly one of cloud+pose or depth must be given");
}

std::size_t ConditionBuilder::step_dim() const {
  if (depth_) return DepthEncoder::feature_dim();
  return cloud_->feature_dim() + PoseEncoder::feature_dim();
}

Var ConditionBuilder::build(Tape& t, ParamBind& bind, const std::vector<StepInput>& window) const {
  if (window.size() != n_obs_)
    throw std::invalid_argument("condition: window holds " + std::to_string(window.size()) +
                                " steps, expected " + std::to_string(n_obs_));
  Var out;
  for (std::size_t s = 0; s < n_obs_; ++s) {
    Var step;
    if (depth_) {
      step = depth_->encode(t, bind, window[s].depth);
    } else {
      Var v = cloud_->encode(t, bind, window[s].cloud);
      Var q = pose_->encode(t, bind, window[s].pose);
      step = t.concat_cols(v, q);
    }
    out = s == 0 ? step : t.concat_cols(out, step);
  }
  return out;
}

}  // namespace dp3
