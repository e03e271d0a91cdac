#include "dp3/normalizer.hpp"

#include <functional>
#include <stdexcept>
#include <string>

namespace dp3 {

Normalizer::Normalizer(std::vector<double> lo, std::vector<double> hi)
    : lo_(std::move(lo)), hi_(std::move(hi)) {
  if (lo_.size() != hi_.size()) throw std::invalid_argument("normalizer: lo/hi size mismatch");
  for (std::size_t d = 0; d < lo_.size(); ++d) {
    if (!(lo_[d] <= hi_[d]))
      throw std::invalid_argument("normalizer: min > max in dim " + std::to_string(d));
  }
}

Normalizer Normalizer::fit(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw std::invalid_argument("normalizer: cannot fit on empty data");
  const std::size_t d = rows.front().size();
  std::vector<double> lo(rows.front());
  std::vector<double> hi(rows.front());
  for (const auto& r : rows) {
    if (r.size() != d) throw std::invalid_argument("normalizer: ragged rows");
    for (std::size_t i = 0; i < d; ++i) {
      if (r[i] < lo[i]) lo[i] = r[i];
      if (r[i] > hi[i]) hi[i] = r[i];
    }
  }
  return Normalizer(std::move(lo), std::move(hi));
}

std::vector<double> Normalizer::normalize(const std::vector<double>& x) const {
  if (x.size() != dim()) throw std::invalid_argument("normalizer: dimension mismatch");
  std::vector<double> y(x.size());
  for (std::size_t d = 0; d < x.size(); ++d)
    y[d] = degenerate(d) ? 0.0 : 2.0 * (x[d] - lo_[d]) / (hi_[d] - lo_[d]) - 1.0;
  return y;
}

std::vector<double> Normalizer::denormalize(const std::vector<double>& y) const {
  if (y.size() != dim()) throw std::invalid_argument("normalizer: dimension mismatch");
  std::vector<double> x(y.size());
  for (std::size_t d = 0; d < y.size(); ++d)
    x[d] = degenerate(d) ? lo_[d] : lo_[d] + (y[d] + 1.0) * 0.5 * (hi_[d] - lo_[d]);
  return x;
}

namespace {

Tensor map_rows(const Tensor& t, std::size_t dim,
                const std::function<std::vector<double>(const std::vector<double>&)>& f) {
  if (t.rank() == 1) {
    if (t.dim(0) != dim) throw std::invalid_argument("normalizer: dimension mismatch");
    std::vector<double> row(t.storage());
    return Tensor::vec(f(row));
  }
  if (t.rank() != 2 || t.cols() != dim)
    throw std::invalid_argument("normalizer: expected [N," + std::to_string(dim) + "] input, got " +
                                t.shape_str());
  Tensor out = Tensor::zeros(t.shape());
  std::vector<double> row(dim);
  for (std::size_t r = 0; r < t.rows(); ++r) {
    for (std::size_t d = 0; d < dim; ++d) row[d] = t.at(r, d);
    const std::vector<double> mapped = f(row);
    for (std::size_t d = 0; d < dim; ++d) out.at(r, d) = mapped[d];
  }
  return out;
}

}  // namespace

Tensor Normalizer::normalize(const Tensor& x) const {
  return map_rows(x, dim(), [this](const std::vector<double>& r) { return normalize(r); });
}

Tensor Normalizer::denormalize(const Tensor& y) const {
  return map_rows(y, dim(), [this](const std::vector<double>& r) { return denormalize(r); });
}

}  // namespace dp3
