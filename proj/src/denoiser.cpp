#include "dp3/denoiser.hpp"

#include <cmath>
#include <stdexcept>

namespace dp3 {

Tensor timestep_embedding(std::size_t k, std::size_t dim) {
  if (dim < 2 || dim % 2 != 0) throw std::invalid_argument("timestep embedding: dim must be even");
  std::size_t half = dim / 2;
  Tensor e({1, dim});
  for (std::size_t i = 0; i < half; ++i) {
    double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) /
                           static_cast<double>(half - 1));
    double x = static_cast<double>(k) * freq;
    e[2 * i] = std::sin(x);
    e[2 * i + 1] = std::cos(x);
  }
  return e;
}

DenoiserMlp::DenoiserMlp(DenoiserConfig cfg, std::string prefix)
    : cfg_(std::move(cfg)), p_(std::move(prefix)) {
  if (cfg_.horizon == 0 || cfg_.action_dim == 0 || cfg_.cond_dim == 0)
    throw std::invalid_argument("denoiser: zero dimension");
  if (cfg_.hidden.empty()) throw std::invalid_argument("denoiser: need at least one hidden layer");
}

void DenoiserMlp::init_params(ParamStore& store, Rng& rng) const {
  std::size_t in = flat_dim() + cfg_.embed_dim + cfg_.cond_dim;
  for (std::size_t l = 0; l < cfg_.hidden.size(); ++l) {
    std::string base = p_ + "/h" + std::to_string(l + 1);
    init_linear(store, base + "/w", base + "/b", in, cfg_.hidden[l], rng);
    in = cfg_.hidden[l];
  }
  init_linear(store, p_ + "/out/w", p_ + "/out/b", in, flat_dim(), rng);
}

Var DenoiserMlp::forward(Tape& t, ParamBind& bind, Var a_flat, std::size_t k, Var cond) const {
  const Tensor& a = t.value(a_flat);
  if (a.rank() != 2 || a.dim(0) != 1 || a.dim(1) != flat_dim())
    throw std::invalid_argument("denoiser: expected [1," + std::to_string(flat_dim()) +
                                "] noisy input, got " + a.shape_str());
  const Tensor& c = t.value(cond);
  if (c.rank() != 2 || c.dim(0) != 1 || c.dim(1) != cfg_.cond_dim)
    throw std::invalid_argument("denoiser: expected [1," + std::to_string(cfg_.cond_dim) +
                                "] condition, got " + c.shape_str());

  Var h = t.concat_cols(t.concat_cols(a_flat, t.constant(timestep_embedding(k, cfg_.embed_dim))),
                        cond);
  for (std::size_t l = 0; l < cfg_.hidden.size(); ++l) {
    std::string base = p_ + "/h" + std::to_string(l + 1);
    h = t.relu(t.linear(h, bind[base + "/w"], bind[base + "/b"]));
  }
  return t.linear(h, bind[p_ + "/out/w"], bind[p_ + "/out/b"]);
}

Tensor DenoiserMlp::eval(ParamStore& store, const Tensor& a, std::size_t k,
                         const Tensor& cond) const {
  Tape t;
  ParamBind bind(t, store);
  Var a_flat = t.constant(a.reshaped({1, flat_dim()}));
  Var out = forward(t, bind, a_flat, k, t.constant(cond));
  return t.value(out).reshaped({cfg_.horizon, cfg_.action_dim});
}

DenoiserFn DenoiserMlp::as_fn(ParamStore& store, Tensor cond) const {
  return [this, &store, cond = std::move(cond)](const Tensor& a, std::size_t k) {
    return eval(store, a, k, cond);
  };
}

Var training_loss(Tape& t, const std::vector<DiffusionBatchItem>& batch,
                  const DenoiserGraphFn& net, const NoiseSchedule& sched, PredictionMode mode,
                  Rng& rng) {
  if (batch.empty()) throw std::invalid_argument("training_loss: empty batch");
  Var total;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Tensor& a0 = batch[i].a0;
    std::size_t k = 1 + rng.index(sched.K);
    Tensor eps(a0.shape());
    for (std::size_t j = 0; j < eps.numel(); ++j) eps[j] = rng.normal();
    Tensor noisy = forward_diffuse(a0, k, eps, sched);
    std::size_t flat = a0.numel();
    Var a_flat = t.constant(noisy.reshaped({1, flat}));
    Var cond = t.constant(batch[i].cond);
    Var pred = net(t, a_flat, k, cond);
    const Tensor& target_src = mode == PredictionMode::epsilon ? eps : a0;
    Var target = t.constant(target_src.reshaped({1, flat}));
    Var item = t.mse(pred, target);
    total = i == 0 ? item : t.add(total, item);
  }
  return t.scale(total, 1.0 / static_cast<double>(batch.size()));
}

double training_loss_value(ParamStore& store, const DenoiserMlp& net,
                           const std::vector<DiffusionBatchItem>& batch,
                           const NoiseSchedule& sched, PredictionMode mode, Rng& rng,
                           bool with_grad) {
  Tape t;
  ParamBind bind(t, store);
  DenoiserGraphFn fn = [&](Tape& tape, Var a_flat, std::size_t k, Var cond) {
    return net.forward(tape, bind, a_flat, k, cond);
  };
  Var loss = training_loss(t, batch, fn, sched, mode, rng);
  double v = t.value(loss)[0];
  if (with_grad) {
    t.backward(loss);
    bind.accumulate_grads();
  }
  return v;
}

}  // namespace dp3
