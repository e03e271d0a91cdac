#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "dp3/rng.hpp"
#include "dp3/tensor.hpp"

namespace dp3 {

enum class ScheduleKind { squared_cosine, linear };
enum class PredictionMode { epsilon, sample };

const char* to_string(ScheduleKind k);
const char* to_string(PredictionMode m);
ScheduleKind parse_schedule_kind(const std::string& s);    // throws on unknown name
PredictionMode parse_prediction_mode(const std::string& s);

// Variance-preserving schedule. Index 0 is a sentinel for "fully clean"
// (signal 1, noise 0); real diffusion steps are 1..K.
struct NoiseSchedule {
  std::size_t K = 0;
  std::vector<double> betas;         // betas[k], k in 1..K; betas[0] unused
  std::vector<double> alphas;        // 1 - betas[k]
  std::vector<double> signal_scale;  // sqrt(prod_{j<=k} alphas[j])
  std::vector<double> noise_scale;   // sqrt(1 - signal^2)
};

NoiseSchedule make_schedule(std::size_t K, ScheduleKind kind = ScheduleKind::squared_cosine);

// a_k = signal[k] * a0 + noise[k] * eps
Tensor forward_diffuse(const Tensor& a0, std::size_t k, const Tensor& eps,
                       const NoiseSchedule& sched);

// Network raw output -> clean-sample estimate. sample mode passes the output
// through; epsilon mode inverts the forward process. Clipped to [-1,1]
// unless the caller asks for the raw estimate.
Tensor predict_clean(const Tensor& a_k, std::size_t k, const Tensor& raw_out,
                     const NoiseSchedule& sched, PredictionMode mode, bool clip = true);

// Evenly strided decreasing subsequence of 1..K, starting at K and ending at
// 1, with n_steps entries.
std::vector<std::size_t> inference_timesteps(std::size_t K, std::size_t n_steps);

// Frozen denoiser as a plain function of (noisy input, timestep); the
// condition is baked in by the caller. Lets closed-form oracles stand in for
// the trained network.
using DenoiserFn = std::function<Tensor(const Tensor& a_k, std::size_t k)>;

Tensor ddim_sample(const DenoiserFn& net, const NoiseSchedule& sched, PredictionMode mode,
                   const std::vector<std::size_t>& shape, std::size_t n_steps, double eta,
                   Rng& rng);

// One ancestral step a_k -> a_{k-1}; deterministic at k=1.
Tensor ddpm_step(const Tensor& a_k, std::size_t k, const DenoiserFn& net,
                 const NoiseSchedule& sched, PredictionMode mode, Rng& rng);

struct DdpmCoeffs {
  double clean;  // weight on the clean estimate
  double noisy;  // weight on a_k
  double sigma;  // posterior standard deviation
};
DdpmCoeffs ddpm_coeffs(const NoiseSchedule& sched, std::size_t k);

}  // namespace dp3
