#include "dp3/tape.hpp"

#include <cmath>
#include <stdexcept>

namespace dp3 {

int Tape::check(Var v) const {
  if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size())
    throw std::invalid_argument("tape: var does not belong to this tape");
  return v.id;
}

Var Tape::push(Tensor v, std::function<void(Tape&)> back) {
  nodes_.push_back(Node{std::move(v), Tensor(), std::move(back)});
  return Var{static_cast<int>(nodes_.size() - 1)};
}

Var Tape::constant(Tensor v) { return push(std::move(v)); }

const Tensor& Tape::grad(Var v) const {
  int id = check(v);
  if (!has_grads_) throw std::logic_error("tape: backward has not run");
  return nodes_[id].grad;
}

Var Tape::add(Var a, Var b) {
  int ia = check(a), ib = check(b);
  const Tensor& ta = val(ia);
  const Tensor& tb = val(ib);
  if (!ta.same_shape(tb)) throw std::invalid_argument("add: shape mismatch");
  Tensor out = ta;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] += tb[i];
  int io = static_cast<int>(nodes_.size());
  return push(std::move(out), [io, ia, ib](Tape& t) {
    const Tensor& go = t.g(io);
    Tensor& ga = t.g(ia);
    Tensor& gb = t.g(ib);
    for (std::size_t i = 0; i < go.numel(); ++i) {
      ga[i] += go[i];
      gb[i] += go[i];
    }
  });
}

Var Tape::sub(Var a, Var b) {
  int ia = check(a), ib = check(b);
  const Tensor& ta = val(ia);
  const Tensor& tb = val(ib);
  if (!ta.same_shape(tb)) throw std::invalid_argument("sub: shape mismatch");
  Tensor out = ta;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] -= tb[i];
  int io = static_cast<int>(nodes_.size());
  return push(std::move(out), [io, ia, ib](Tape& t) {
    const Tensor& go = t.g(io);
    Tensor& ga = t.g(ia);
    Tensor& gb = t.g(ib);
    for (std::size_t i = 0; i < go.numel(); ++i) {
      ga[i] += go[i];
      gb[i] -= go[i];
    }
  });
}

Var Tape::scale(Var a, double s) {
  int ia = check(a);
  Tensor out = val(ia);
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= s;
  int io = static_cast<int>(nodes_.size());
  return push(std::move(out), [io, ia, s](Tape& t) {
    const Tensor& go = t.g(io);
    Tensor& ga = t.g(ia);
    for (std::size_t i = 0; i < go.numel(); ++i) ga[i] += s * go[i];
  });
}

Var Tape::linear(Var x, Var w, Var b) {
  int ix = check(x), iw = check(w), ib = check(b);
  const Tensor& tx = val(ix);
  const Tensor& tw = val(iw);
  const Tensor& tb = val(ib);
  if (tx.rank() != 2 || tw.rank() != 2 || tb.rank() != 1)
    throw std::invalid_argument("linear: expected x[n,in] w[in,out] b[out]");
  std::size_t n = tx.dim(0), in = tx.dim(1), out_d = tw.dim(1);
  if (tw.dim(0) != in || tb.dim(0) != out_d)
    throw std::invalid_argument("linear: dimension mismatch " + tx.shape_str() + " @ " +
                                tw.shape_str() + " + " + tb.shape_str());

  Tensor out({n, out_d});
  const double* xp = tx.data();
  const double* wp = tw.data();
  const double* bp = tb.data();
  double* op = out.data();
  for (std::size_t i = 0; i < n; ++i) {
    double* orow = op + i * out_d;
    for (std::size_t j = 0; j < out_d; ++j) orow[j] = bp[j];
    const double* xrow = xp + i * in;
    for (std::size_t k = 0; k < in; ++k) {
      double a = xrow[k];
      const double* wrow = wp + k * out_d;
      for (std::size_t j = 0; j < out_d; ++j) orow[j] += a * wrow[j];
    }
  }

  int io = static_cast<int>(nodes_.size());
  return push(std::move(out), [io, ix, iw, ib, n, in, out_d](Tape& t) {
    const double* go = t.g(io).data();
    const double* xp = t.val(ix).data();
    const double* wp = t.val(iw).data();
    double* gx = t.g(ix).data();
    double* gw = t.g(iw).data();
    double* gb = t.g(ib).data();
    for (std::size_t i = 0; i < n; ++i) {
      const double* grow = go + i * out_d;
      const double* xrow = xp + i * in;
      double* gxrow = gx + i * in;
      for (std::size_t j = 0; j < out_d; ++j) gb[j] += grow[j];
      for (std::size_t k = 0; k < in; ++k) {
        const double* wrow = wp + k * out_d;
        double* gwrow = gw + k * out_d;
        double acc = 0.0;
        double a = xrow[k];
        for (std::size_t j = 0; j < out_d; ++j) {
          acc += grow[j] * wrow[j];
          gwrow[j] += a * grow[j];
        }
        gxrow[k] += acc;
      }
    }
  });
}

Var Tape::relu(Var x) {
  int ix = check(x);
  Tensor out = val(ix);
  for (std::size_t i = 0; i < out.numel(); ++i)
    if (out[i] < 0.0) out[i] = 0.0;
  int io = static_cast<int>(nodes_.size());
  // subgradient at exactly 0 is taken as 0
  return push(std::move(out), [io, ix](Tape& t) {
    const Tensor& go = t.g(io);
    const Tensor& tx = t.val(ix);
    Tensor& gx = t.g(ix);
    for (std::size_t i = 0; i < go.numel(); ++i)
      if (tx[i] > 0.0) gx[i] += go[i];
  });
}

Var Tape::layer_norm(Var x, Var gamma, Var beta, double eps) {
  int ix = check(x), ig = check(gamma), ib = check(beta);
  const Tensor& tx = val(ix);
  const Tensor& tg = val(ig);
  const Tensor& tb = val(ib);
  if (tx.rank() != 2 || tg.rank() != 1 || tb.rank() != 1)
    throw std::invalid_argument("layer_norm: expected x[n,d] gamma[d] beta[d]");
  std::size_t n = tx.dim(0), d = tx.dim(1);
  if (tg.dim(0) != d || tb.dim(0) != d)
    throw std::invalid_argument("layer_norm: dimension mismatch");

  Tensor out({n, d});
  std::vector<double> xhat(n * d);
  std::vector<double> inv_std(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* xrow = tx.data() + i * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += xrow[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      double c = xrow[j] - mu;
      var += c * c;
    }
    var /= static_cast<double>(d);
    double is = 1.0 / std::sqrt(var + eps);
    inv_std[i] = is;
    double* orow = out.data() + i * d;
    double* hrow = xhat.data() + i * d;
    for (std::size_t j = 0; j < d; ++j) {
      double h = (xrow[j] - mu) * is;
      hrow[j] = h;
      orow[j] = tg[j] * h + tb[j];
    }
  }

  int io = static_cast<int>(nodes_.size());
  return push(std::move(out),
              [io, ix, ig, ib, n, d, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& t) {
                const double* go = t.g(io).data();
                const double* gp = t.val(ig).data();
                double* gx = t.g(ix).data();
                double* gg = t.g(ig).data();
                double* gb = t.g(ib).data();
                std::vector<double> dyh(d);
                for (std::size_t i = 0; i < n; ++i) {
                  const double* grow = go + i * d;
                  const double* hrow = xhat.data() + i * d;
                  double m1 = 0.0, m2 = 0.0;
                  for (std::size_t j = 0; j < d; ++j) {
                    dyh[j] = grow[j] * gp[j];
                    m1 += dyh[j];
                    m2 += dyh[j] * hrow[j];
                    gg[j] += grow[j] * hrow[j];
                    gb[j] += grow[j];
                  }
                  m1 /= static_cast<double>(d);
                  m2 /= static_cast<double>(d);
                  double* gxrow = gx + i * d;
                  for (std::size_t j = 0; j < d; ++j)
                    gxrow[j] += (dyh[j] - m1 - hrow[j] * m2) * inv_std[i];
                }
              });
}

Var Tape::max_pool_rows(Var x) {
  int ix = check(x);
  const Tensor& tx = val(ix);
  if (tx.rank() != 2 || tx.dim(0) == 0)
    throw std::invalid_argument("max_pool_rows: expected non-empty [n,d]");
  std::size_t n = tx.dim(0), d = tx.dim(1);
  Tensor out({1, d});
  std::vector<std::size_t> arg(d, 0);
  for (std::size_t j = 0; j < d; ++j) out[j] = tx.at(0, j);
  for (std::size_t i = 1; i < n; ++i) {
    const double* xrow = tx.data() + i * d;
    for (std::size_t j = 0; j < d; ++j) {
      if (xrow[j] > out[j]) {  // strict: ties keep the lowest row index
        out[j] = xrow[j];
        arg[j] = i;
      }
    }
  }
  int io = static_cast<int>(nodes_.size());
  return push(std::move(out), [io, ix, d, arg = std::move(arg)](Tape& t) {
    const Tensor& go = t.g(io);
    Tensor& gx = t.g(ix);
    for (std::size_t j = 0; j < d; ++j) gx.at(arg[j], j) += go[j];
  });
}

Var Tape::concat_cols(Var a, Var b) {
  int ia = check(a), ib = check(b);
  const Tensor& ta = val(ia);
  const Tensor& tb = val(ib);
  if (ta.rank() != 2 || tb.rank() != 2 || ta.dim(0) != tb.dim(0))
    throw std::invalid_argument("concat_cols: row count mismatch");
  std::size_t n = ta.dim(0), da = ta.dim(1), db = tb.dim(1);
  Tensor out({n, da + db});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < da; ++j) out.at(i, j) = ta.at(i, j);
    for (std::size_t j = 0; j < db; ++j) out.at(i, da + j) = tb.at(i, j);
  }
  int io = static_cast<int>(nodes_.size());
  return push(std::move(out), [io, ia, ib, n, da, db](Tape& t) {
    const Tensor& go = t.g(io);
    Tensor& ga = t.g(ia);
    Tensor& gb = t.g(ib);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < da; ++j) ga.at(i, j) += go.at(i, j);
      for (std::size_t j = 0; j < db; ++j) gb.at(i, j) += go.at(i, da + j);
    }
  });
}

Var Tape::mse(Var pred, Var target) {
  int ip = check(pred), it = check(target);
  const Tensor& tp = val(ip);
  const Tensor& tt = val(it);
  if (!tp.same_shape(tt)) throw std::invalid_argument("mse: shape mismatch");
  std::size_t m = tp.numel();
  if (m == 0) throw std::invalid_argument("mse: empty tensors");
  double acc = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    double d = tp[i] - tt[i];
    acc += d * d;
  }
  acc /= static_cast<double>(m);
  int io = static_cast<int>(nodes_.size());
  return push(Tensor::scalar(acc), [io, ip, it, m](Tape& t) {
    double go = t.g(io)[0];
    const Tensor& tp = t.val(ip);
    const Tensor& tt = t.val(it);
    Tensor& gp = t.g(ip);
    Tensor& gt = t.g(it);
    double c = 2.0 * go / static_cast<double>(m);
    for (std::size_t i = 0; i < m; ++i) {
      double d = c * (tp[i] - tt[i]);
      gp[i] += d;
      gt[i] -= d;
    }
  });
}

Var Tape::sum(Var x) {
  int ix = check(x);
  const Tensor& tx = val(ix);
  double acc = 0.0;
  for (std::size_t i = 0; i < tx.numel(); ++i) acc += tx[i];
  int io = static_cast<int>(nodes_.size());
  return push(Tensor::scalar(acc), [io, ix](Tape& t) {
    double go = t.g(io)[0];
    Tensor& gx = t.g(ix);
    for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] += go;
  });
}

void Tape::backward(Var loss) {
  int il = check(loss);
  if (nodes_[il].value.numel() != 1)
    throw std::invalid_argument("backward: loss must be a scalar, got shape " +
                                nodes_[il].value.shape_str());
  for (auto& n : nodes_) n.grad = Tensor::zeros(n.value.shape());
  nodes_[il].grad[0] = 1.0;
  for (std::size_t i = nodes_.size(); i-- > 0;)
    if (nodes_[i].back) nodes_[i].back(*this);
  has_grads_ = true;
}

void Tape::clear() {
  nodes_.clear();
  has_grads_ = false;
}

}  // namespace dp3
