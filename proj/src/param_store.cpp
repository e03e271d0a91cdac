#include "dp3/param_store.hpp"

#include <cmath>
#include <fstream>

#include "dp3/binio.hpp"

namespace dp3 {

namespace {
constexpr char kMagic[9] = "DP3CKPT1";
const std::string kOptPrefix = "opt/";
}  // namespace

Tensor& ParamStore::create(const std::string& name, Tensor init) {
  if (name.empty()) throw std::invalid_argument("param: empty name");
  if (name.rfind(kOptPrefix, 0) == 0)
    throw std::invalid_argument("param: name prefix 'opt/' is reserved: " + name);
  auto [it, fresh] = params_.try_emplace(name);
  if (!fresh) throw std::invalid_argument("param: duplicate name " + name);
  it->second.value = std::move(init);
  it->second.grad = Tensor::zeros(it->second.value.shape());
  it->second.m = Tensor::zeros(it->second.value.shape());
  it->second.v = Tensor::zeros(it->second.value.shape());
  return it->second.value;
}

bool ParamStore::has(const std::string& name) const { return params_.count(name) != 0; }

ParamStore::Entry& ParamStore::find(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("param: unknown name " + name);
  return it->second;
}

const ParamStore::Entry& ParamStore::find(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("param: unknown name " + name);
  return it->second;
}

Tensor& ParamStore::value(const std::string& name) { return find(name).value; }
const Tensor& ParamStore::value(const std::string& name) const { return find(name).value; }
Tensor& ParamStore::grad(const std::string& name) { return find(name).grad; }

void ParamStore::zero_grad() {
  for (auto& [name, e] : params_) e.grad.fill(0.0);
}

void ParamStore::adam_step(const AdamConfig& cfg) {
  ++step_;
  double t = static_cast<double>(step_);
  double c1 = 1.0 - std::pow(cfg.beta1, t);
  double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (auto& [name, e] : params_) {
    for (std::size_t i = 0; i < e.value.numel(); ++i) {
      double g = e.grad[i];
      e.m[i] = cfg.beta1 * e.m[i] + (1.0 - cfg.beta1) * g;
      e.v[i] = cfg.beta2 * e.v[i] + (1.0 - cfg.beta2) * g * g;
      double mhat = e.m[i] / c1;
      double vhat = e.v[i] / c2;
      e.value[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(params_.size());
  for (const auto& [name, e] : params_) out.push_back(name);
  return out;
}

std::size_t ParamStore::total_elements() const {
  std::size_t n = 0;
  for (const auto& [name, e] : params_) n += e.value.numel();
  return n;
}

namespace {

void write_entry(std::ostream& os, const std::string& name, const Tensor& t) {
  binio::write_string(os, name);
  binio::write_u32(os, static_cast<std::uint32_t>(t.rank()));
  for (auto d : t.shape()) binio::write_u64(os, d);
  for (std::size_t i = 0; i < t.numel(); ++i) binio::write_f64(os, t[i]);
}

Tensor read_entry_tensor(std::istream& is) {
  std::uint32_t rank = binio::read_u32(is);
  if (rank > 8) throw std::runtime_error("checkpoint: implausible tensor rank");
  std::vector<std::size_t> shape(rank);
  for (auto& d : shape) d = static_cast<std::size_t>(binio::read_u64(is));
  Tensor t(shape);
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = binio::read_f64(is);
  return t;
}

}  // namespace

void ParamStore::save(const std::string& path, bool with_optimizer_state) const {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
  os.write(kMagic, 8);
  std::uint32_t count = static_cast<std::uint32_t>(params_.size());
  if (with_optimizer_state) count = count * 3 + 1;
  binio::write_u32(os, count);
  for (const auto& [name, e] : params_) write_entry(os, name, e.value);
  if (with_optimizer_state) {
    for (const auto& [name, e] : params_) write_entry(os, kOptPrefix + "m/" + name, e.m);
    for (const auto& [name, e] : params_) write_entry(os, kOptPrefix + "v/" + name, e.v);
    write_entry(os, kOptPrefix + "step", Tensor::scalar(static_cast<double>(step_)));
  }
  if (!os) throw std::runtime_error("checkpoint: write failed for " + path);
}

ParamStore ParamStore::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
  binio::expect_magic(is, kMagic, "checkpoint");
  std::uint32_t count = binio::read_u32(is);
  ParamStore store;
  struct Pending {
    std::string name;
    Tensor t;
  };
  std::vector<Pending> opt;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = binio::read_string(is);
    Tensor t = read_entry_tensor(is);
    if (name.rfind(kOptPrefix, 0) == 0)
      opt.push_back({std::move(name), std::move(t)});
    else
      store.create(name, std::move(t));
  }
  for (auto& p : opt) {
    if (p.name == kOptPrefix + "step") {
      store.step_ = static_cast<std::int64_t>(p.t[0]);
    } else if (p.name.rfind(kOptPrefix + "m/", 0) == 0) {
      store.find(p.name.substr(kOptPrefix.size() + 2)).m = std::move(p.t);
    } else if (p.name.rfind(kOptPrefix + "v/", 0) == 0) {
      store.find(p.name.substr(kOptPrefix.size() + 2)).v = std::move(p.t);
    } else {
      throw std::runtime_error("checkpoint: unknown optimizer entry " + p.name);
    }
  }
  return store;
}

void init_linear(ParamStore& s, const std::string& w_name, const std::string& b_name,
                 std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  if (fan_in == 0 || fan_out == 0) throw std::invalid_argument("init_linear: zero fan");
  double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Tensor w({fan_in, fan_out});
  for (std::size_t i = 0; i < w.numel(); ++i) w[i] = rng.uniform(-bound, bound);
  Tensor b({fan_out});
  for (std::size_t i = 0; i < b.numel(); ++i) b[i] = rng.uniform(-bound, bound);
  s.create(w_name, std::move(w));
  s.create(b_name, std::move(b));
}

void init_layer_norm(ParamStore& s, const std::string& gamma_name, const std::string& beta_name,
                     std::size_t dim) {
  s.create(gamma_name, Tensor::full({dim}, 1.0));
  s.create(beta_name, Tensor::zeros({dim}));
}

}  // namespace dp3
