#pragma once

#include <cstdint>
#include <vector>

#include "lgc/matrix.hpp"
#include "lgc/rng.hpp"

namespace lgc::diff {

// Handle to a node on a Tape.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Define-by-run reverse-mode tape over dense matrices. Nodes only reference
// earlier nodes, so one descending sweep from the loss fills every gradient.
// `reset` keeps node storage alive so rebuilding an identically shaped graph
// allocates nothing.
class Tape {
 public:
  enum class Op : uint8_t {
    leaf,
    add,
    sub,
    mul,          // elementwise
    matmul,
    affine,       // s0 * x + s1, elementwise
    sigmoid,
    tanh_fn,
    relu,
    softplus,
    exp_fn,
    log_fn,
    concat_rows,
    slice_rows,   // rows [s0, s1)
    sum_all,      // 1x1
    mean_all,     // 1x1
    gauss_logpdf, // inputs (mu, sigma), observed y in s0
    reparam,      // mu + sigma .* eps, eps cached in aux
    dropout,      // scaled keep-mask cached in aux
    stop_grad,
  };

  Var leaf(const Matrix& m);
  Var leaf(double x);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var matmul(Var a, Var b);
  Var affine(Var a, double scale, double shift);
  Var activation(Act kind, Var a);
  Var sigmoid(Var a) { return activation(Act::sigmoid, a); }
  Var tanh(Var a) { return activation(Act::tanh, a); }
  Var relu(Var a) { return activation(Act::relu, a); }
  Var softplus(Var a) { return activation(Act::softplus, a); }
  Var exp(Var a);
  Var log(Var a);
  Var concat_rows(Var a, Var b);
  Var slice_rows(Var a, int r0, int r1);
  Var sum(Var a);
  Var mean(Var a);

  // log N(y; mu, sigma). mu and sigma are 1x1 nodes; sigma must be > 0.
  Var gaussian_logpdf(double y, Var mu, Var sigma);

  // mu + sigma .* eps with eps ~ N(0,1); gradient flows through mu and
  // sigma only. sigma entries must be >= 0; sigma == 0 returns mu exactly.
  Var reparam_sample(Var mu, Var sigma, Rng& rng);

  // Inverted dropout. Identity (same node) when rate == 0 or train is false.
  Var dropout(Var a, double rate, bool train, Rng& rng);

  // Forward copy; blocks gradient flow.
  Var stop_gradient(Var a);

  // Fills gradients of every node reachable from `loss` (others stay zero).
  void backward(Var loss);

  const Matrix& value(Var v) const { return nodes_[v.id].value; }
  const Matrix& grad(Var v) const { return nodes_[v.id].grad; }
  double scalar(Var v) const { return nodes_[v.id].value.data[0]; }

  size_t size() const { return live_; }
  void reset() { live_ = 0; }

 private:
  struct Node {
    Op op = Op::leaf;
    int a = -1;
    int b = -1;
    double s0 = 0.0;
    double s1 = 0.0;
    Matrix value;
    Matrix grad;
    Matrix aux;
  };

  Node& push(Op op, int a, int b, int rows, int cols);
  void check_same_shape(Var a, Var b, const char* who) const;

  std::vector<Node> nodes_;
  size_t live_ = 0;
};

// Bias-corrected ADAM state for one parameter tensor.
struct AdamState {
  Matrix m;
  Matrix v;
  int64_t t = 0;
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One ADAM update in place; increments state.t.
void adam_step(Matrix& param, const Matrix& grad, AdamState& state);

}  // namespace lgc::diff
