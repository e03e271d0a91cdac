#pragma once

#include <vector>

#include "dp3/tensor.hpp"

namespace dp3 {

// Per-dimension min-max affine map onto [-1,1]. Dimensions with min == max
// normalize to 0 and denormalize back to the constant.
class Normalizer {
public:
  Normalizer() = default;
  Normalizer(std::vector<double> lo, std::vector<double> hi);  // throws if lo > hi anywhere

  static Normalizer fit(const std::vector<std::vector<double>>& rows);  // throws on empty

  std::size_t dim() const { return lo_.size(); }
  const std::vector<double>& lo() const { return lo_; }
  const std::vector<double>& hi() const { return hi_; }
  bool degenerate(std::size_t d) const { return hi_[d] == lo_[d]; }

  std::vector<double> normalize(const std::vector<double>& x) const;
  std::vector<double> denormalize(const std::vector<double>& y) const;

  // rowwise on [N,dim] matrices; [dim] vectors also accepted
  Tensor normalize(const Tensor& x) const;
  Tensor denormalize(const Tensor& y) const;

private:
  std::vector<double> lo_;
  std::vector<double> hi_;
};

}  // namespace dp3
