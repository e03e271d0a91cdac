#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dp3/rng.hpp"
#include "dp3/tensor.hpp"

namespace dp3 {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.95;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Named parameter registry plus Adam state. Iteration is always in sorted
// name order so updates and serialization are order-deterministic no matter
// how models registered their layers.
class ParamStore {
public:
  Tensor& create(const std::string& name, Tensor init);
  bool has(const std::string& name) const;
  Tensor& value(const std::string& name);
  const Tensor& value(const std::string& name) const;
  Tensor& grad(const std::string& name);

  void zero_grad();
  void adam_step(const AdamConfig& cfg = {});

  std::int64_t step_count() const { return step_; }
  std::vector<std::string> names() const;
  std::size_t total_elements() const;

  // Flat binary checkpoint: magic "DP3CKPT1", u32 entry count, then per
  // entry sorted by name: length-prefixed UTF-8 name, u32 rank, u64 extents,
  // little-endian f64 payload. Adam state rides along as entries under the
  // reserved "opt/" prefix so interrupted training resumes exactly.
  void save(const std::string& path, bool with_optimizer_state = true) const;
  static ParamStore load(const std::string& path);

private:
  struct Entry {
    Tensor value;
    Tensor grad;
    Tensor m;
    Tensor v;
  };

  Entry& find(const std::string& name);
  const Entry& find(const std::string& name) const;

  std::map<std::string, Entry> params_;
  std::int64_t step_ = 0;
};

// Torch-style default Linear init: kernel and bias both uniform in
// +-1/sqrt(fan_in). Kernel is stored [fan_in, fan_out], drawn row-major.
void init_linear(ParamStore& s, const std::string& w_name, const std::string& b_name,
                 std::size_t fan_in, std::size_t fan_out, Rng& rng);

void init_layer_norm(ParamStore& s, const std::string& gamma_name, const std::string& beta_name,
                     std::size_t dim);

}  // namespace dp3
