#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dp3/diffusion.hpp"
#include "dp3/graph.hpp"

namespace dp3 {

// Fixed sinusoidal features of the integer timestep.
Tensor timestep_embedding(std::size_t k, std::size_t dim);

struct DenoiserConfig {
  std::size_t horizon = 4;
  std::size_t action_dim = 3;
  std::size_t cond_dim = 256;
  std::size_t embed_dim = 32;
  std::vector<std::size_t> hidden = {256, 256};
};

// Conditioned MLP: [flattened noisy chunk ; timestep embedding ; condition]
// -> hidden layers with ReLU -> flattened chunk prediction.
class DenoiserMlp {
public:
  explicit DenoiserMlp(DenoiserConfig cfg, std::string prefix = "den");

  void init_params(ParamStore& store, Rng& rng) const;
  const DenoiserConfig& config() const { return cfg_; }
  std::size_t flat_dim() const { return cfg_.horizon * cfg_.action_dim; }

  // a_flat: [1, H*A] already on the tape; cond: [1, cond_dim]; returns [1, H*A]
  Var forward(Tape& t, ParamBind& bind, Var a_flat, std::size_t k, Var cond) const;

  // standalone evaluation for samplers; a: [H, A], returns [H, A]
  Tensor eval(ParamStore& store, const Tensor& a, std::size_t k, const Tensor& cond) const;
  DenoiserFn as_fn(ParamStore& store, Tensor cond) const;

private:
  DenoiserConfig cfg_;
  std::string p_;
};

// Builds the prediction node for one batch item; lets tests swap the real
// network for a closed-form stand-in.
using DenoiserGraphFn = std::function<Var(Tape&, Var a_flat, std::size_t k, Var cond)>;

struct DiffusionBatchItem {
  Tensor a0;    // [H, A] normalized clean chunk
  Tensor cond;  // [1, cond_dim]
};

// Draws (k, eps) per item, forms the noisy input, and returns the mean MSE
// against the mode's target (epsilon or the clean chunk). Pure graph
// construction; caller decides whether to run backward.
Var training_loss(Tape& t, const std::vector<DiffusionBatchItem>& batch,
                  const DenoiserGraphFn& net, const NoiseSchedule& sched, PredictionMode mode,
                  Rng& rng);

// Convenience wrapper: full forward/backward on the MLP denoiser with
// already-built conditions; accumulates grads when asked.
double training_loss_value(ParamStore& store, const DenoiserMlp& net,
                           const std::vector<DiffusionBatchItem>& batch,
                           const NoiseSchedule& sched, PredictionMode mode, Rng& rng,
                           bool with_grad);

}  // namespace dp3
