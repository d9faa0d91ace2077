#include "lgc/model.hpp"

#include <cmath>
#include <string>

#include "lgc/errors.hpp"

namespace lgc::model {

namespace {

Matrix xavier_uniform(int rows, int cols, Rng& rng) {
  Matrix m(rows, cols);
  const double bound = std::sqrt(6.0 / (rows + cols));
  for (double& v : m.data) v = rng.uniform(-bound, bound);
  return m;
}

GruWeights init_gru(int hidden, int input, Rng& rng) {
  GruWeights g;
  g.wz = xavier_uniform(hidden, input, rng);
  g.uz = xavier_uniform(hidden, hidden, rng);
  g.bz = Matrix(hidden, 1);
  g.wr = xavier_uniform(hidden, input, rng);
  g.ur = xavier_uniform(hidden, hidden, rng);
  g.br = Matrix(hidden, 1);
  g.wn = xavier_uniform(hidden, input, rng);
  g.un = xavier_uniform(hidden, hidden, rng);
  g.bn = Matrix(hidden, 1);
  return g;
}

MlpWeights init_mlp(int input, int hidden, int output, Rng& rng) {
  MlpWeights m;
  m.w1 = xavier_uniform(hidden, input, rng);
  m.b1 = Matrix(hidden, 1);
  m.w2 = xavier_uniform(output, hidden, rng);
  m.b2 = Matrix(output, 1);
  return m;
}

GruVars bind_gru(Tape& t, const GruWeights& g) {
  return {t.leaf(g.wz), t.leaf(g.uz), t.leaf(g.bz), t.leaf(g.wr), t.leaf(g.ur),
          t.leaf(g.br), t.leaf(g.wn), t.leaf(g.un), t.leaf(g.bn)};
}

MlpVars bind_mlp(Tape& t, const MlpWeights& m) {
  return {t.leaf(m.w1), t.leaf(m.b1), t.leaf(m.w2), t.leaf(m.b2)};
}

Var mlp_forward(Tape& t, const MlpVars& m, Var input, const ModelConfig& cfg,
                const ForwardOpts& opts, Rng& rng) {
  Var hidden = t.relu(t.add(t.matmul(m.w1, input), m.b1));
  hidden = t.dropout(hidden, cfg.dropout_rate, opts.train_dropout, rng);
  return t.add(t.matmul(m.w2, hidden), m.b2);
}

// Splits a stacked (mu, pre-sigma) head output; sigma via softplus.
HeadOutput gaussian_head(Tape& t, Var out, int dim) {
  Var mu = t.slice_rows(out, 0, dim);
  Var sigma = t.softplus(t.slice_rows(out, dim, 2 * dim));
  return {mu, sigma};
}

}  // namespace

ModelParams ModelParams::init(const ModelConfig& cfg, Rng& rng) {
  if (cfg.gru_hidden < 1 || cfg.mlp_hidden < 1 || cfg.latent_dim < 1 || cfg.n_proxies < 1)
    throw ConfigError("model dimensions must be positive");
  if (!(cfg.dropout_rate >= 0.0 && cfg.dropout_rate < 1.0))
    throw DomainError("dropout_rate must be in [0,1)");
  ModelParams p;
  p.cfg = cfg;
  p.proxy_gru = init_gru(cfg.gru_hidden, cfg.n_proxies, rng);
  p.target_gru = init_gru(cfg.gru_hidden, 1, rng);
  p.latent_gru = init_gru(cfg.gru_hidden, cfg.latent_dim, rng);
  p.cause_gru = init_gru(cfg.gru_hidden, 1, rng);
  p.confounder_head = init_mlp(cfg.gru_hidden, cfg.mlp_hidden, 2 * cfg.latent_dim, rng);
  p.restricted_head = init_mlp(2 * cfg.gru_hidden, cfg.mlp_hidden, 2, rng);
  p.full_head = init_mlp(1 + cfg.gru_hidden, cfg.mlp_hidden, 2, rng);
  return p;
}

int ModelParams::tensor_count() const {
  int n = 0;
  for_each_tensor([&](const std::string&, const Matrix&) { ++n; });
  return n;
}

ModelVars bind(Tape& tape, const ModelParams& p) {
  ModelVars v;
  v.proxy_gru = bind_gru(tape, p.proxy_gru);
  v.target_gru = bind_gru(tape, p.target_gru);
  v.latent_gru = bind_gru(tape, p.latent_gru);
  v.cause_gru = bind_gru(tape, p.cause_gru);
  v.confounder_head = bind_mlp(tape, p.confounder_head);
  v.restricted_head = bind_mlp(tape, p.restricted_head);
  v.full_head = bind_mlp(tape, p.full_head);
  return v;
}

Var gru_step(Tape& t, const GruVars& g, Var h, Var x_in) {
  Var z = t.sigmoid(t.add(t.add(t.matmul(g.wz, x_in), t.matmul(g.uz, h)), g.bz));
  Var r = t.sigmoid(t.add(t.add(t.matmul(g.wr, x_in), t.matmul(g.ur, h)), g.br));
  Var n = t.tanh(t.add(t.add(t.matmul(g.wn, x_in), t.mul(r, t.matmul(g.un, h))), g.bn));
  return t.add(t.mul(t.affine(z, -1.0, 1.0), n), t.mul(z, h));
}

std::vector<Var> gru_unroll(Tape& t, const GruVars& g, const Matrix& seq) {
  const int hidden = t.value(g.uz).rows;
  Var h = t.leaf(Matrix(hidden, 1));
  std::vector<Var> states;
  states.reserve(seq.cols);
  Matrix col(seq.rows, 1);
  for (int j = 0; j < seq.cols; ++j) {
    for (int i = 0; i < seq.rows; ++i) col(i, 0) = seq(i, j);
    h = gru_step(t, g, h, t.leaf(col));
    states.push_back(h);
  }
  return states;
}

std::vector<Var> gru_unroll(Tape& t, const GruVars& g, const std::vector<Var>& steps) {
  const int hidden = t.value(g.uz).rows;
  Var h = t.leaf(Matrix(hidden, 1));
  std::vector<Var> states;
  states.reserve(steps.size());
  for (Var s : steps) {
    h = gru_step(t, g, h, s);
    states.push_back(h);
  }
  return states;
}

std::vector<EncoderStep> encode_confounder(Tape& t, const ModelVars& v, const ModelConfig& cfg,
                                           const Matrix& u_window, const ForwardOpts& opts,
                                           Rng& rng) {
  if (u_window.rows != cfg.n_proxies)
    throw ShapeError("encode_confounder: expected " + std::to_string(cfg.n_proxies) +
                     " proxy rows, got " + std::to_string(u_window.rows));
  if (u_window.cols < 1) throw ShapeError("encode_confounder: empty window");

  const int hidden = cfg.gru_hidden;
  Var h = t.leaf(Matrix(hidden, 1));
  std::vector<EncoderStep> steps;
  steps.reserve(u_window.cols);
  Matrix col(cfg.n_proxies, 1);
  for (int j = 0; j < u_window.cols; ++j) {
    for (int i = 0; i < cfg.n_proxies; ++i) col(i, 0) = u_window(i, j);
    h = gru_step(t, v.proxy_gru, h, t.leaf(col));
    Var out = mlp_forward(t, v.confounder_head, h, cfg, opts, rng);
    HeadOutput head = gaussian_head(t, out, cfg.latent_dim);
    Var sample = opts.mode == SampleMode::deterministic
                     ? head.mu
                     : t.reparam_sample(head.mu, head.sigma, rng);
    steps.push_back({head.mu, head.sigma, sample});
  }
  return steps;
}

HeadOutput restricted_forward(Tape& t, const ModelVars& v, const ModelConfig& cfg,
                              const std::vector<double>& y_window, const std::vector<Var>& zhat,
                              const ForwardOpts& opts, Rng& rng) {
  if (y_window.size() != zhat.size())
    throw ShapeError("restricted_forward: y window and zhat lengths disagree");
  Matrix y_seq(1, static_cast<int>(y_window.size()));
  y_seq.data = y_window;
  const Var h_y = gru_unroll(t, v.target_gru, y_seq).back();
  const Var h_z = gru_unroll(t, v.latent_gru, zhat).back();
  Var out = mlp_forward(t, v.restricted_head, t.concat_rows(h_y, h_z), cfg, opts, rng);
  return gaussian_head(t, out, 1);
}

HeadOutput full_forward(Tape& t, const ModelVars& v, const ModelConfig& cfg, Var yres_sample,
                        Var h_x, const ForwardOpts& opts, Rng& rng) {
  Var out = mlp_forward(t, v.full_head, t.concat_rows(yres_sample, h_x), cfg, opts, rng);
  return gaussian_head(t, out, 1);
}

WindowForward forward_window(Tape& t, const ModelVars& v, const ModelConfig& cfg,
                             const datagen::Window& w, const ForwardOpts& opts, Rng& rng) {
  const auto encoder = encode_confounder(t, v, cfg, w.u, opts, rng);
  std::vector<Var> zhat;
  zhat.reserve(encoder.size());
  for (const auto& e : encoder) zhat.push_back(e.sample);

  WindowForward f;
  f.restricted = restricted_forward(t, v, cfg, w.y, zhat, opts, rng);

  Var yres = opts.mode == SampleMode::deterministic
                 ? f.restricted.mu
                 : t.reparam_sample(f.restricted.mu, f.restricted.sigma, rng);
  f.yres = yres;
  if (opts.stop_yres_gradient) yres = t.stop_gradient(yres);

  Matrix x_seq(1, static_cast<int>(w.x.size()));
  x_seq.data = w.x;
  const Var h_x = gru_unroll(t, v.cause_gru, x_seq).back();
  f.full = full_forward(t, v, cfg, yres, h_x, opts, rng);

  if (opts.want_prediction_samples) {
    f.yfull = opts.mode == SampleMode::deterministic
                  ? f.full.mu
                  : t.reparam_sample(f.full.mu, f.full.sigma, rng);
  }
  return f;
}

Var objective(Tape& t, const ModelVars& v, const ModelConfig& cfg,
              const std::vector<datagen::Window>& batch, const ForwardOpts& opts, Rng& rng) {
  if (batch.empty()) throw ConfigError("objective: empty batch");
  if (opts.mc_samples < 1) throw ConfigError("objective: mc_samples must be >= 1");

  Var total = t.leaf(0.0);
  for (size_t i = 0; i < batch.size(); ++i) {
    Var window_ll = t.leaf(0.0);
    for (int s = 0; s < opts.mc_samples; ++s) {
      const WindowForward f = forward_window(t, v, cfg, batch[i], opts, rng);
      Var ll = t.add(t.gaussian_logpdf(batch[i].target, f.full.mu, f.full.sigma),
                     t.gaussian_logpdf(batch[i].target, f.restricted.mu, f.restricted.sigma));
      window_ll = t.add(window_ll, ll);
    }
    if (opts.mc_samples > 1)
      window_ll = t.affine(window_ll, 1.0 / opts.mc_samples, 0.0);
    if (!std::isfinite(t.scalar(window_ll)))
      throw NumericError("objective: non-finite loss at batch window " + std::to_string(i));
    total = t.add(total, window_ll);
  }
  return t.affine(total, -1.0 / static_cast<double>(batch.size()), 0.0);
}

}  // namespace lgc::model
