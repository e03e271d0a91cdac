#pragma once

#include <map>
#include <string>

#include "dp3/param_store.hpp"
#include "dp3/tape.hpp"

namespace dp3 {

// Binds store parameters into a tape graph, one node per parameter no matter
// how many times it is referenced, and routes gradients back after backward.
class ParamBind {
public:
  ParamBind(Tape& tape, ParamStore& store) : tape_(&tape), store_(&store) {}

  Var operator[](const std::string& name) {
    auto it = bound_.find(name);
    if (it != bound_.end()) return it->second;
    Var v = tape_->constant(store_->value(name));
    bound_.emplace(name, v);
    return v;
  }

  void accumulate_grads() {
    for (const auto& [name, var] : bound_) {
      const Tensor& g = tape_->grad(var);
      Tensor& dst = store_->grad(name);
      for (std::size_t i = 0; i < g.numel(); ++i) dst[i] += g[i];
    }
  }

private:
  Tape* tape_;
  ParamStore* store_;
  std::map<std::string, Var> bound_;
};

}  // namespace dp3
