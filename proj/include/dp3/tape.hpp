#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "dp3/tensor.hpp"

namespace dp3 {

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode tape. Nodes are appended in evaluation order, so running the
// stored closures back to front is a topological sweep. Values are computed
// eagerly; gradients exist only between backward() and the next clear().
// Training and inference share the same forward code, inference just never
// calls backward.
class Tape {
public:
  Var constant(Tensor v);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var scale(Var a, double s);
  Var linear(Var x, Var w, Var b);  // [n,in] @ [in,out] + [out]
  Var relu(Var x);
  Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-5);
  Var max_pool_rows(Var x);  // [n,d] -> [1,d], ties go to the lowest row
  Var concat_cols(Var a, Var b);
  Var mse(Var pred, Var target);  // scalar, mean over all elements
  Var sum(Var x);                 // scalar

  const Tensor& value(Var v) const { return nodes_[check(v)].value; }
  const Tensor& grad(Var v) const;

  void backward(Var loss);
  void clear();
  std::size_t size() const { return nodes_.size(); }

private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::function<void(Tape&)> back;
  };

  int check(Var v) const;
  Var push(Tensor v, std::function<void(Tape&)> back = nullptr);
  Tensor& g(int id) { return nodes_[id].grad; }
  const Tensor& val(int id) const { return nodes_[id].value; }

  std::vector<Node> nodes_;
  bool has_grads_ = false;
};

}  // namespace dp3
