#include "dp3/diffusion.hpp"

#include <cmath>
#include <stdexcept>

namespace dp3 {

namespace {

void check_k(const NoiseSchedule& sched, std::size_t k) {
  if (k < 1 || k > sched.K) throw std::out_of_range("diffusion: timestep out of range");
}

}  // namespace

const char* to_string(ScheduleKind k) {
  return k == ScheduleKind::squared_cosine ? "squared_cosine" : "linear";
}

const char* to_string(PredictionMode m) {
  return m == PredictionMode::epsilon ? "epsilon" : "sample";
}

ScheduleKind parse_schedule_kind(const std::string& s) {
  if (s == "squared_cosine") return ScheduleKind::squared_cosine;
  if (s == "linear") return ScheduleKind::linear;
  throw std::invalid_argument("unknown schedule '" + s + "' (expected squared_cosine or linear)");
}

PredictionMode parse_prediction_mode(const std::string& s) {
  if (s == "epsilon") return PredictionMode::epsilon;
  if (s == "sample") return PredictionMode::sample;
  throw std::invalid_argument("unknown prediction mode '" + s + "' (expected sample or epsilon)");
}

NoiseSchedule make_schedule(std::size_t K, ScheduleKind kind) {
  if (K < 1) throw std::invalid_argument("schedule: K must be >= 1");
  NoiseSchedule s;
  s.K = K;
  s.betas.assign(K + 1, 0.0);
  if (kind == ScheduleKind::linear) {
    double lo = 1e-4, hi = 0.02;
    for (std::size_t k = 1; k <= K; ++k)
      s.betas[k] = K == 1 ? lo : lo + (hi - lo) * static_cast<double>(k - 1) / static_cast<double>(K - 1);
  } else {
    // squared-cosine profile for the cumulative signal, betas derived from
    // consecutive ratios and clipped away from 1
    const double off = 0.008;
    auto f = [&](double t) {
      double c = std::cos((t / static_cast<double>(K) + off) / (1.0 + off) * 1.5707963267948966);
      return c * c;
    };
    double f0 = f(0.0);
    double prev = 1.0;
    for (std::size_t k = 1; k <= K; ++k) {
      double cur = f(static_cast<double>(k)) / f0;
      double beta = 1.0 - cur / prev;
      if (beta > 0.999) beta = 0.999;
      s.betas[k] = beta;
      prev = cur;
    }
  }
  s.alphas.assign(K + 1, 1.0);
  s.signal_scale.assign(K + 1, 1.0);
  s.noise_scale.assign(K + 1, 0.0);
  double prod = 1.0;
  for (std::size_t k = 1; k <= K; ++k) {
    s.alphas[k] = 1.0 - s.betas[k];
    prod *= s.alphas[k];
    s.signal_scale[k] = std::sqrt(prod);
    s.noise_scale[k] = std::sqrt(1.0 - prod);
  }
  return s;
}

Tensor forward_diffuse(const Tensor& a0, std::size_t k, const Tensor& eps,
                       const NoiseSchedule& sched) {
  check_k(sched, k);
  if (!a0.same_shape(eps)) throw std::invalid_argument("forward_diffuse: noise shape mismatch");
  Tensor out = a0;
  double sc = sched.signal_scale[k];
  double nc = sched.noise_scale[k];
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = sc * out[i] + nc * eps[i];
  return out;
}

Tensor predict_clean(const Tensor& a_k, std::size_t k, const Tensor& raw_out,
                     const NoiseSchedule& sched, PredictionMode mode, bool clip) {
  check_k(sched, k);
  if (!a_k.same_shape(raw_out)) throw std::invalid_argument("predict_clean: shape mismatch");
  Tensor a0 = raw_out;
  if (mode == PredictionMode::epsilon) {
    double sc = sched.signal_scale[k];
    double nc = sched.noise_scale[k];
    for (std::size_t i = 0; i < a0.numel(); ++i) a0[i] = (a_k[i] - nc * raw_out[i]) / sc;
  }
  if (clip)
    for (std::size_t i = 0; i < a0.numel(); ++i) a0[i] = std::clamp(a0[i], -1.0, 1.0);
  return a0;
}

std::vector<std::size_t> inference_timesteps(std::size_t K, std::size_t n_steps) {
  if (n_steps < 1) throw std::invalid_argument("inference: need at least one step");
  if (n_steps > K) throw std::invalid_argument("inference: more steps than the schedule has");
  std::vector<std::size_t> ts;
  if (n_steps == 1) {
    ts.push_back(K);
    return ts;
  }
  for (std::size_t i = 0; i < n_steps; ++i) {
    double v = static_cast<double>(K) -
               static_cast<double>(i) * static_cast<double>(K - 1) / static_cast<double>(n_steps - 1);
    ts.push_back(static_cast<std::size_t>(std::llround(v)));
  }
  return ts;
}

Tensor ddim_sample(const DenoiserFn& net, const NoiseSchedule& sched, PredictionMode mode,
                   const std::vector<std::size_t>& shape, std::size_t n_steps, double eta,
                   Rng& rng) {
  std::vector<std::size_t> ts = inference_timesteps(sched.K, n_steps);
  Tensor a(shape);
  for (std::size_t i = 0; i < a.numel(); ++i) a[i] = rng.normal();

  for (std::size_t i = 0; i < ts.size(); ++i) {
    std::size_t k = ts[i];
    std::size_t k_prev = i + 1 < ts.size() ? ts[i + 1] : 0;
    Tensor a0 = predict_clean(a, k, net(a, k), sched, mode);
    double sk = sched.signal_scale[k], nk = sched.noise_scale[k];
    double sp = sched.signal_scale[k_prev], np = sched.noise_scale[k_prev];
    // sigma per DDIM, zero when eta is zero or the target step is clean
    double sigma = 0.0;
    if (eta > 0.0 && k_prev > 0) {
      double r = (np * np) / (nk * nk);
      sigma = eta * std::sqrt(r * (1.0 - (sk * sk) / (sp * sp)));
    }
    double dir = std::sqrt(std::max(0.0, np * np - sigma * sigma));
    for (std::size_t j = 0; j < a.numel(); ++j) {
      double eps_implied = (a[j] - sk * a0[j]) / nk;
      a[j] = sp * a0[j] + dir * eps_implied;
    }
    if (sigma > 0.0)
      for (std::size_t j = 0; j < a.numel(); ++j) a[j] += sigma * rng.normal();
  }
  // the last update lands on the k=0 sentinel: a == clipped clean estimate
  return a;
}

DdpmCoeffs ddpm_coeffs(const NoiseSchedule& sched, std::size_t k) {
  check_k(sched, k);
  double abar = sched.signal_scale[k] * sched.signal_scale[k];
  double abar_prev = sched.signal_scale[k - 1] * sched.signal_scale[k - 1];
  double beta = sched.betas[k];
  double alpha = sched.alphas[k];
  DdpmCoeffs c;
  c.clean = sched.signal_scale[k - 1] * beta / (1.0 - abar);
  c.noisy = std::sqrt(alpha) * (1.0 - abar_prev) / (1.0 - abar);
  c.sigma = std::sqrt(beta * (1.0 - abar_prev) / (1.0 - abar));
  return c;
}

Tensor ddpm_step(const Tensor& a_k, std::size_t k, const DenoiserFn& net,
                 const NoiseSchedule& sched, PredictionMode mode, Rng& rng) {
  Tensor a0 = predict_clean(a_k, k, net(a_k, k), sched, mode);
  DdpmCoeffs c = ddpm_coeffs(sched, k);
  Tensor out = a_k;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = c.clean * a0[i] + c.noisy * a_k[i];
  if (k > 1 && c.sigma > 0.0)
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] += c.sigma * rng.normal();
  return out;
}

}  // namespace dp3
