#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lgc/datagen.hpp"
#include "lgc/matrix.hpp"
#include "lgc/rng.hpp"
#include "lgc/tape.hpp"

namespace lgc::model {

using diff::Matrix;
using diff::Tape;
using diff::Var;

struct ModelConfig {
  int gru_hidden = 5;       // h^(X), h^(Y), h^(Z) dimension
  int mlp_hidden = 5;       // 10 for the river data
  int latent_dim = 1;       // substitute-confounder dimension (2 for river)
  int n_proxies = 1;
  double dropout_rate = 0.3;
};

// One GRU cell: update gate z, reset gate r, candidate n.
//   z = sig(Wz x + Uz h + bz)
//   r = sig(Wr x + Ur h + br)
//   n = tanh(Wn x + r.(Un h) + bn)
//   h' = (1 - z).n + z.h
struct GruWeights {
  Matrix wz, uz, bz;
  Matrix wr, ur, br;
  Matrix wn, un, bn;
};

struct MlpWeights {
  Matrix w1, b1;  // input -> hidden (ReLU, dropout)
  Matrix w2, b2;  // hidden -> output
};

// All trainable tensors: four GRU encoders plus the three heads
// (confounder head emits latent mu/pre-sigma, the restricted and full heads
// emit predictive mu/pre-sigma for the next y).
struct ModelParams {
  ModelConfig cfg;
  GruWeights proxy_gru, target_gru, latent_gru, cause_gru;
  MlpWeights confounder_head, restricted_head, full_head;

  static ModelParams init(const ModelConfig& cfg, Rng& rng);

  template <class F>
  void for_each_tensor(F&& f);
  template <class F>
  void for_each_tensor(F&& f) const;

  int tensor_count() const;
};

// Tape-bound leaf handles, in the same canonical order as for_each_tensor.
struct GruVars {
  Var wz, uz, bz, wr, ur, br, wn, un, bn;
};
struct MlpVars {
  Var w1, b1, w2, b2;
};
struct ModelVars {
  GruVars proxy_gru, target_gru, latent_gru, cause_gru;
  MlpVars confounder_head, restricted_head, full_head;

  template <class F>
  void for_each_var(F&& f) const;
};

ModelVars bind(Tape& tape, const ModelParams& p);

enum class SampleMode {
  stochastic,     // reparameterised draws for zhat / yres / yfull
  deterministic,  // pass means through every sampling site
};

struct ForwardOpts {
  SampleMode mode = SampleMode::stochastic;
  bool train_dropout = false;       // enable dropout in MLP hidden layers
  bool stop_yres_gradient = true;   // block full-head gradients at the yres input
  bool want_prediction_samples = false;  // also draw yfull for error sampling
  int mc_samples = 1;               // draws for the latent expectation
};

Var gru_step(Tape& tape, const GruVars& g, Var h, Var x_in);

// Unrolls a GRU from h0 = 0 over a sequence; returns every hidden state.
std::vector<Var> gru_unroll(Tape& tape, const GruVars& g, const Matrix& seq);
std::vector<Var> gru_unroll(Tape& tape, const GruVars& g, const std::vector<Var>& steps);

struct EncoderStep {
  Var mu, sigma, sample;
};

// Filtering distribution over the substitute confounder: runs the proxy GRU
// over u and emits (mu_t, sigma_t, zhat_t) per step; outputs at step t depend
// on u up to t only.
std::vector<EncoderStep> encode_confounder(Tape& tape, const ModelVars& v, const ModelConfig& cfg,
                                           const Matrix& u_window, const ForwardOpts& opts,
                                           Rng& rng);

struct HeadOutput {
  Var mu, sigma;
};

// P(Y_{t+1} | Y_{1:t}, Z_{1:t}): target GRU over y, latent GRU over zhat,
// Gaussian head on the concatenated final states.
HeadOutput restricted_forward(Tape& tape, const ModelVars& v, const ModelConfig& cfg,
                              const std::vector<double>& y_window, const std::vector<Var>& zhat,
                              const ForwardOpts& opts, Rng& rng);

// P(Y_{t+1} | Y_{1:t}, X_{1:t}, Z_{1:t}): Gaussian head on the restricted
// prediction sample and the cause GRU state.
HeadOutput full_forward(Tape& tape, const ModelVars& v, const ModelConfig& cfg, Var yres_sample,
                        Var h_x, const ForwardOpts& opts, Rng& rng);

struct WindowForward {
  HeadOutput restricted;
  HeadOutput full;
  Var yres;   // restricted prediction sample (full-head input)
  Var yfull;  // full prediction sample; only when want_prediction_samples
};

WindowForward forward_window(Tape& tape, const ModelVars& v, const ModelConfig& cfg,
                             const datagen::Window& w, const ForwardOpts& opts, Rng& rng);

// Negative joint log-likelihood of both predictive heads, averaged over the
// batch; the latent expectation uses opts.mc_samples pathwise draws.
Var objective(Tape& tape, const ModelVars& v, const ModelConfig& cfg,
              const std::vector<datagen::Window>& batch, const ForwardOpts& opts, Rng& rng);

// --- template bodies ---

template <class F>
void visit_gru(GruWeights& g, const std::string& prefix, F&& f) {
  f(prefix + ".wz", g.wz);
  f(prefix + ".uz", g.uz);
  f(prefix + ".bz", g.bz);
  f(prefix + ".wr", g.wr);
  f(prefix + ".ur", g.ur);
  f(prefix + ".br", g.br);
  f(prefix + ".wn", g.wn);
  f(prefix + ".un", g.un);
  f(prefix + ".bn", g.bn);
}

template <class F>
void visit_mlp(MlpWeights& m, const std::string& prefix, F&& f) {
  f(prefix + ".w1", m.w1);
  f(prefix + ".b1", m.b1);
  f(prefix + ".w2", m.w2);
  f(prefix + ".b2", m.b2);
}

template <class F>
void ModelParams::for_each_tensor(F&& f) {
  visit_gru(proxy_gru, "proxy_gru", f);
  visit_gru(target_gru, "target_gru", f);
  visit_gru(latent_gru, "latent_gru", f);
  visit_gru(cause_gru, "cause_gru", f);
  visit_mlp(confounder_head, "confounder_head", f);
  visit_mlp(restricted_head, "restricted_head", f);
  visit_mlp(full_head, "full_head", f);
}

template <class F>
void ModelParams::for_each_tensor(F&& f) const {
  const_cast<ModelParams*>(this)->for_each_tensor(
      [&](const std::string& name, Matrix& m) { f(name, static_cast<const Matrix&>(m)); });
}

template <class F>
void ModelVars::for_each_var(F&& f) const {
  auto gru = [&](const GruVars& g) {
    f(g.wz); f(g.uz); f(g.bz);
    f(g.wr); f(g.ur); f(g.br);
    f(g.wn); f(g.un); f(g.bn);
  };
  auto mlp = [&](const MlpVars& m) {
    f(m.w1); f(m.b1); f(m.w2); f(m.b2);
  };
  gru(proxy_gru);
  gru(target_gru);
  gru(latent_gru);
  gru(cause_gru);
  mlp(confounder_head);
  mlp(restricted_head);
  mlp(full_head);
}

}  // namespace lgc::model
