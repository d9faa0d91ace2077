#include "lgc/tape.hpp"

#include <cmath>
#include <string>

#include "lgc/errors.hpp"

namespace lgc::diff {

Tape::Node& Tape::push(Op op, int a, int b, int rows, int cols) {
  if (live_ == nodes_.size()) {
    nodes_.emplace_back();
  }
  Node& n = nodes_[live_++];
  n.op = op;
  n.a = a;
  n.b = b;
  n.s0 = 0.0;
  n.s1 = 0.0;
  n.value.resize(rows, cols);
  return n;
}

void Tape::check_same_shape(Var a, Var b, const char* who) const {
  const Matrix& ma = nodes_[a.id].value;
  const Matrix& mb = nodes_[b.id].value;
  if (!ma.same_shape(mb))
    throw ShapeError(std::string(who) + ": incompatible shapes " + shape_str(ma) + " and " +
                     shape_str(mb));
}

Var Tape::leaf(const Matrix& m) {
  Node& n = push(Op::leaf, -1, -1, m.rows, m.cols);
  n.value.data = m.data;
  return {static_cast<int>(live_) - 1};
}

Var Tape::leaf(double x) {
  Node& n = push(Op::leaf, -1, -1, 1, 1);
  n.value.data[0] = x;
  return {static_cast<int>(live_) - 1};
}

Var Tape::add(Var a, Var b) {
  check_same_shape(a, b, "add");
  // push may reallocate nodes_, so input references are taken afterwards
  Node& n = push(Op::add, a.id, b.id, nodes_[a.id].value.rows, nodes_[a.id].value.cols);
  const Matrix& ma = nodes_[a.id].value;
  const Matrix& mb = nodes_[b.id].value;
  for (int i = 0; i < ma.size(); ++i) n.value.data[i] = ma.data[i] + mb.data[i];
  return {static_cast<int>(live_) - 1};
}

Var Tape::sub(Var a, Var b) {
  check_same_shape(a, b, "sub");
  Node& n = push(Op::sub, a.id, b.id, nodes_[a.id].value.rows, nodes_[a.id].value.cols);
  const Matrix& ma = nodes_[a.id].value;
  const Matrix& mb = nodes_[b.id].value;
  for (int i = 0; i < ma.size(); ++i) n.value.data[i] = ma.data[i] - mb.data[i];
  return {static_cast<int>(live_) - 1};
}

Var Tape::mul(Var a, Var b) {
  check_same_shape(a, b, "mul");
  Node& n = push(Op::mul, a.id, b.id, nodes_[a.id].value.rows, nodes_[a.id].value.cols);
  const Matrix& ma = nodes_[a.id].value;
  const Matrix& mb = nodes_[b.id].value;
  for (int i = 0; i < ma.size(); ++i) n.value.data[i] = ma.data[i] * mb.data[i];
  return {static_cast<int>(live_) - 1};
}

Var Tape::matmul(Var a, Var b) {
  if (nodes_[a.id].value.cols != nodes_[b.id].value.rows)
    throw ShapeError("matmul: incompatible shapes " + shape_str(nodes_[a.id].value) + " and " +
                     shape_str(nodes_[b.id].value));
  Node& n = push(Op::matmul, a.id, b.id, nodes_[a.id].value.rows, nodes_[b.id].value.cols);
  const Matrix& ma = nodes_[a.id].value;
  const Matrix& mb = nodes_[b.id].value;
  n.value.fill(0.0);
  for (int i = 0; i < ma.rows; ++i)
    for (int k = 0; k < ma.cols; ++k) {
      const double aik = ma(i, k);
      if (aik == 0.0) continue;
      for (int j = 0; j < mb.cols; ++j) n.value(i, j) += aik * mb(k, j);
    }
  return {static_cast<int>(live_) - 1};
}

Var Tape::affine(Var a, double scale, double shift) {
  Node& n = push(Op::affine, a.id, -1, nodes_[a.id].value.rows, nodes_[a.id].value.cols);
  const Matrix& ma = nodes_[a.id].value;
  n.s0 = scale;
  n.s1 = shift;
  for (int i = 0; i < ma.size(); ++i) n.value.data[i] = scale * ma.data[i] + shift;
  return {static_cast<int>(live_) - 1};
}

Var Tape::activation(Act kind, Var a) {
  const Matrix& ma = nodes_[a.id].value;
  if (!ma.all_finite()) throw NumericError("activation: non-finite input");
  Op op = Op::sigmoid;
  switch (kind) {
    case Act::sigmoid: op = Op::sigmoid; break;
    case Act::tanh: op = Op::tanh_fn; break;
    case Act::relu: op = Op::relu; break;
    case Act::softplus: op = Op::softplus; break;
  }
  Node& n = push(op, a.id, -1, ma.rows, ma.cols);
  const Matrix& va = nodes_[a.id].value;
  for (int i = 0; i < va.size(); ++i) {
    const double x = va.data[i];
    switch (kind) {
      case Act::sigmoid: n.value.data[i] = diff::sigmoid(x); break;
      case Act::tanh: n.value.data[i] = std::tanh(x); break;
      case Act::relu: n.value.data[i] = diff::relu(x); break;
      case Act::softplus: n.value.data[i] = diff::softplus(x); break;
    }
  }
  return {static_cast<int>(live_) - 1};
}

Var Tape::exp(Var a) {
  Node& n = push(Op::exp_fn, a.id, -1, nodes_[a.id].value.rows, nodes_[a.id].value.cols);
  const Matrix& ma = nodes_[a.id].value;
  for (int i = 0; i < ma.size(); ++i) n.value.data[i] = std::exp(ma.data[i]);
  return {static_cast<int>(live_) - 1};
}

Var Tape::log(Var a) {
  const Matrix& ma = nodes_[a.id].value;
  for (double x : ma.data)
    if (!(x > 0.0)) throw DomainError("log: input must be positive");
  Node& n = push(Op::log_fn, a.id, -1, ma.rows, ma.cols);
  const Matrix& va = nodes_[a.id].value;
  for (int i = 0; i < va.size(); ++i) n.value.data[i] = std::log(va.data[i]);
  return {static_cast<int>(live_) - 1};
}

Var Tape::concat_rows(Var a, Var b) {
  const Matrix& ma = nodes_[a.id].value;
  const Matrix& mb = nodes_[b.id].value;
  if (ma.cols != mb.cols)
    throw ShapeError("concat_rows: incompatible shapes " + shape_str(ma) + " and " +
                     shape_str(mb));
  Node& n = push(Op::concat_rows, a.id, b.id, ma.rows + mb.rows, ma.cols);
  const Matrix& va = nodes_[a.id].value;
  const Matrix& vb = nodes_[b.id].value;
  std::copy(va.data.begin(), va.data.end(), n.value.data.begin());
  std::copy(vb.data.begin(), vb.data.end(), n.value.data.begin() + va.size());
  return {static_cast<int>(live_) - 1};
}

Var Tape::slice_rows(Var a, int r0, int r1) {
  const Matrix& ma = nodes_[a.id].value;
  if (r0 < 0 || r1 > ma.rows || r0 >= r1)
    throw ShapeError("slice_rows: range [" + std::to_string(r0) + "," + std::to_string(r1) +
                     ") invalid for " + shape_str(ma));
  Node& n = push(Op::slice_rows, a.id, -1, r1 - r0, ma.cols);
  n.s0 = r0;
  n.s1 = r1;
  const Matrix& va = nodes_[a.id].value;
  std::copy(va.data.begin() + static_cast<size_t>(r0) * va.cols,
            va.data.begin() + static_cast<size_t>(r1) * va.cols, n.value.data.begin());
  return {static_cast<int>(live_) - 1};
}

Var Tape::sum(Var a) {
  Node& n = push(Op::sum_all, a.id, -1, 1, 1);
  const Matrix& ma = nodes_[a.id].value;
  double s = 0.0;
  for (double x : ma.data) s += x;
  n.value.data[0] = s;
  return {static_cast<int>(live_) - 1};
}

Var Tape::mean(Var a) {
  const Matrix& ma = nodes_[a.id].value;
  if (ma.size() == 0) throw ShapeError("mean: empty matrix");
  Node& n = push(Op::mean_all, a.id, -1, 1, 1);
  const Matrix& va = nodes_[a.id].value;
  double s = 0.0;
  for (double x : va.data) s += x;
  n.value.data[0] = s / va.size();
  return {static_cast<int>(live_) - 1};
}

Var Tape::gaussian_logpdf(double y, Var mu, Var sigma) {
  const Matrix& mmu = nodes_[mu.id].value;
  const Matrix& msig = nodes_[sigma.id].value;
  if (mmu.size() != 1 || msig.size() != 1)
    throw ShapeError("gaussian_logpdf: mu and sigma must be scalars");
  const double s = msig.data[0];
  if (!(s > 0.0)) throw DomainError("gaussian_logpdf: sigma must be > 0, got " + std::to_string(s));
  static const double kHalfLog2Pi = 0.5 * std::log(2.0 * M_PI);
  const double m = mmu.data[0];
  const double z = (y - m) / s;
  Node& n = push(Op::gauss_logpdf, mu.id, sigma.id, 1, 1);
  n.s0 = y;
  n.value.data[0] = -kHalfLog2Pi - std::log(s) - 0.5 * z * z;
  return {static_cast<int>(live_) - 1};
}

Var Tape::reparam_sample(Var mu, Var sigma, Rng& rng) {
  check_same_shape(mu, sigma, "reparam_sample");
  const Matrix& mmu = nodes_[mu.id].value;
  const Matrix& msig = nodes_[sigma.id].value;
  for (double s : msig.data)
    if (s < 0.0) throw DomainError("reparam_sample: sigma must be >= 0");
  Node& n = push(Op::reparam, mu.id, sigma.id, mmu.rows, mmu.cols);
  const Matrix& vmu = nodes_[mu.id].value;
  const Matrix& vsig = nodes_[sigma.id].value;
  n.aux.resize(vmu.rows, vmu.cols);
  for (int i = 0; i < vmu.size(); ++i) {
    const double eps = rng.gauss();
    n.aux.data[i] = eps;
    n.value.data[i] = vmu.data[i] + vsig.data[i] * eps;
  }
  return {static_cast<int>(live_) - 1};
}

Var Tape::dropout(Var a, double rate, bool train, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0))
    throw DomainError("dropout: rate must be in [0,1), got " + std::to_string(rate));
  if (!train || rate == 0.0) return a;
  const Matrix& ma = nodes_[a.id].value;
  const double keep_scale = 1.0 / (1.0 - rate);
  Node& n = push(Op::dropout, a.id, -1, ma.rows, ma.cols);
  const Matrix& va = nodes_[a.id].value;
  n.aux.resize(va.rows, va.cols);
  for (int i = 0; i < va.size(); ++i) {
    const double mask = rng.bernoulli(rate) ? 0.0 : keep_scale;
    n.aux.data[i] = mask;
    n.value.data[i] = va.data[i] * mask;
  }
  return {static_cast<int>(live_) - 1};
}

Var Tape::stop_gradient(Var a) {
  Node& n = push(Op::stop_grad, a.id, -1, nodes_[a.id].value.rows, nodes_[a.id].value.cols);
  n.value.data = nodes_[a.id].value.data;
  return {static_cast<int>(live_) - 1};
}

void Tape::backward(Var loss) {
  if (!loss.valid() || static_cast<size_t>(loss.id) >= live_)
    throw ContractError("backward: loss is not a node on this tape");
  if (nodes_[loss.id].value.size() != 1)
    throw ContractError("backward: loss must be scalar, got " +
                        shape_str(nodes_[loss.id].value));

  for (size_t i = 0; i < live_; ++i) {
    Node& n = nodes_[i];
    n.grad.resize(n.value.rows, n.value.cols);
  }
  nodes_[loss.id].grad.data[0] = 1.0;

  for (int id = loss.id; id >= 0; --id) {
    const Node& n = nodes_[id];
    if (n.op == Op::leaf) continue;
    const Matrix& g = n.grad;
    Matrix& ga = nodes_[n.a].grad;
    switch (n.op) {
      case Op::add: {
        Matrix& gb = nodes_[n.b].grad;
        for (int i = 0; i < g.size(); ++i) {
          ga.data[i] += g.data[i];
          gb.data[i] += g.data[i];
        }
        break;
      }
      case Op::sub: {
        Matrix& gb = nodes_[n.b].grad;
        for (int i = 0; i < g.size(); ++i) {
          ga.data[i] += g.data[i];
          gb.data[i] -= g.data[i];
        }
        break;
      }
      case Op::mul: {
        Matrix& gb = nodes_[n.b].grad;
        const Matrix& va = nodes_[n.a].value;
        const Matrix& vb = nodes_[n.b].value;
        for (int i = 0; i < g.size(); ++i) {
          ga.data[i] += g.data[i] * vb.data[i];
          gb.data[i] += g.data[i] * va.data[i];
        }
        break;
      }
      case Op::matmul: {
        Matrix& gb = nodes_[n.b].grad;
        const Matrix& va = nodes_[n.a].value;
        const Matrix& vb = nodes_[n.b].value;
        // dA += G B^T, dB += A^T G
        for (int i = 0; i < va.rows; ++i)
          for (int j = 0; j < vb.cols; ++j) {
            const double gij = g(i, j);
            if (gij == 0.0) continue;
            for (int k = 0; k < va.cols; ++k) {
              ga(i, k) += gij * vb(k, j);
              gb(k, j) += va(i, k) * gij;
            }
          }
        break;
      }
      case Op::affine:
        for (int i = 0; i < g.size(); ++i) ga.data[i] += n.s0 * g.data[i];
        break;
      case Op::sigmoid:
        for (int i = 0; i < g.size(); ++i) {
          const double y = n.value.data[i];
          ga.data[i] += g.data[i] * y * (1.0 - y);
        }
        break;
      case Op::tanh_fn:
        for (int i = 0; i < g.size(); ++i) {
          const double y = n.value.data[i];
          ga.data[i] += g.data[i] * (1.0 - y * y);
        }
        break;
      case Op::relu: {
        const Matrix& va = nodes_[n.a].value;
        for (int i = 0; i < g.size(); ++i)
          if (va.data[i] > 0.0) ga.data[i] += g.data[i];
        break;
      }
      case Op::softplus: {
        const Matrix& va = nodes_[n.a].value;
        for (int i = 0; i < g.size(); ++i) ga.data[i] += g.data[i] * diff::sigmoid(va.data[i]);
        break;
      }
      case Op::exp_fn:
        for (int i = 0; i < g.size(); ++i) ga.data[i] += g.data[i] * n.value.data[i];
        break;
      case Op::log_fn: {
        const Matrix& va = nodes_[n.a].value;
        for (int i = 0; i < g.size(); ++i) ga.data[i] += g.data[i] / va.data[i];
        break;
      }
      case Op::concat_rows: {
        Matrix& gb = nodes_[n.b].grad;
        const int na = ga.size();
        for (int i = 0; i < na; ++i) ga.data[i] += g.data[i];
        for (int i = 0; i < gb.size(); ++i) gb.data[i] += g.data[na + i];
        break;
      }
      case Op::slice_rows: {
        const int r0 = static_cast<int>(n.s0);
        const int off = r0 * ga.cols;
        for (int i = 0; i < g.size(); ++i) ga.data[off + i] += g.data[i];
        break;
      }
      case Op::sum_all:
        for (int i = 0; i < ga.size(); ++i) ga.data[i] += g.data[0];
        break;
      case Op::mean_all: {
        const double w = g.data[0] / ga.size();
        for (int i = 0; i < ga.size(); ++i) ga.data[i] += w;
        break;
      }
      case Op::gauss_logpdf: {
        Matrix& gb = nodes_[n.b].grad;
        const double mu = nodes_[n.a].value.data[0];
        const double s = nodes_[n.b].value.data[0];
        const double d = n.s0 - mu;
        ga.data[0] += g.data[0] * d / (s * s);
        gb.data[0] += g.data[0] * (d * d / (s * s * s) - 1.0 / s);
        break;
      }
      case Op::reparam: {
        Matrix& gb = nodes_[n.b].grad;
        for (int i = 0; i < g.size(); ++i) {
          ga.data[i] += g.data[i];
          gb.data[i] += g.data[i] * n.aux.data[i];
        }
        break;
      }
      case Op::dropout:
        for (int i = 0; i < g.size(); ++i) ga.data[i] += g.data[i] * n.aux.data[i];
        break;
      case Op::stop_grad:
        break;
      case Op::leaf:
        break;
    }
  }
}

void adam_step(Matrix& param, const Matrix& grad, AdamState& state) {
  if (!param.same_shape(grad))
    throw ShapeError("adam_step: param " + shape_str(param) + " vs grad " + shape_str(grad));
  if (state.m.size() == 0) {
    state.m.resize(param.rows, param.cols);
    state.v.resize(param.rows, param.cols);
  }
  if (!state.m.same_shape(param))
    throw ShapeError("adam_step: state " + shape_str(state.m) + " vs param " + shape_str(param));
  state.t += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (int i = 0; i < param.size(); ++i) {
    const double g = grad.data[i];
    state.m.data[i] = state.beta1 * state.m.data[i] + (1.0 - state.beta1) * g;
    state.v.data[i] = state.beta2 * state.v.data[i] + (1.0 - state.beta2) * g * g;
    const double mhat = state.m.data[i] / bc1;
    const double vhat = state.v.data[i] / bc2;
    param.data[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
  }
}

}  // namespace lgc::diff
