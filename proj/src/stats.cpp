#include "lgc/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "lgc/errors.hpp"
#include "lgc/training.hpp"

namespace lgc::stats {

double mse(const std::vector<double>& pred, const std::vector<double>& actual) {
  if (pred.size() != actual.size())
    throw ShapeError("mse: length mismatch, " + std::to_string(pred.size()) + " vs " +
                     std::to_string(actual.size()));
  if (pred.empty()) throw ShapeError("mse: empty sequences");
  double acc = 0.0;
  for (size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - actual[i];
    acc += d * d;
  }
  return acc / static_cast<double>(pred.size());
}

namespace {

constexpr double kBetaTol = 1e-12;
constexpr int kBetaMaxIter = 200;

double log_beta(double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); }

// Lentz evaluation of the standard continued fraction for I_x(a,b).
double beta_cont_fraction(double x, double a, double b) {
  const double tiny = 1e-300;
  double c = 1.0;
  double d = 1.0 - (a + b) * x / (a + 1.0);
  if (std::fabs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kBetaMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double num = m * (b - m) * x / ((a + m2 - 1.0) * (a + m2));
    d = 1.0 + num * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + num / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    num = -(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + 1.0));
    d = 1.0 + num * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + num / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < kBetaTol) return h;
  }
  return h;  // converged to working precision for all supported (a, b, x)
}

}  // namespace

double regularized_incomplete_beta(double x, double a, double b) {
  if (!(a > 0.0) || !(b > 0.0))
    throw DomainError("incomplete beta: a and b must be > 0");
  if (!(x >= 0.0 && x <= 1.0)) throw DomainError("incomplete beta: x must be in [0,1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double front = std::exp(a * std::log(x) + b * std::log1p(-x) - log_beta(a, b));
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cont_fraction(x, a, b) / a;
  return 1.0 - std::exp(b * std::log1p(-x) + a * std::log(x) - log_beta(a, b)) *
                   beta_cont_fraction(1.0 - x, b, a) / b;
}

double student_t_cdf(double t, double df) {
  if (!(df > 0.0)) throw DomainError("student_t_cdf: df must be > 0");
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  if (t == 0.0) return 0.5;
  const double x = df / (t * t + df);
  const double half_tail = 0.5 * regularized_incomplete_beta(x, 0.5 * df, 0.5);
  return t > 0.0 ? 1.0 - half_tail : half_tail;
}

double f_cdf(double f, double d1, double d2) {
  if (!(d1 > 0.0) || !(d2 > 0.0)) throw DomainError("f_cdf: degrees of freedom must be > 0");
  if (f <= 0.0) return 0.0;
  if (std::isinf(f)) return 1.0;
  return regularized_incomplete_beta(d1 * f / (d1 * f + d2), 0.5 * d1, 0.5 * d2);
}

namespace {

struct SampleMoments {
  double mean, var;  // unbiased variance
};

SampleMoments moments(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= n;
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= (n - 1.0);
  return {mean, var};
}

}  // namespace

TTestResult welch_ttest(const std::vector<double>& a, const std::vector<double>& b, Tail tail) {
  if (a.size() < 2 || b.size() < 2)
    throw DomainError("welch_ttest: both samples need at least 2 values");
  const SampleMoments ma = moments(a);
  const SampleMoments mb = moments(b);
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double se2 = ma.var / na + mb.var / nb;

  TTestResult r;
  r.tail = tail;
  if (se2 <= 0.0) {
    if (ma.mean == mb.mean)
      throw DegenerateError("welch_ttest: both samples constant and equal");
    r.t = ma.mean < mb.mean ? -std::numeric_limits<double>::infinity()
                            : std::numeric_limits<double>::infinity();
    r.df = na + nb - 2.0;
  } else {
    r.t = (ma.mean - mb.mean) / std::sqrt(se2);
    const double va_n = ma.var / na;
    const double vb_n = mb.var / nb;
    r.df = se2 * se2 / (va_n * va_n / (na - 1.0) + vb_n * vb_n / (nb - 1.0));
  }
  const double cdf = student_t_cdf(r.t, r.df);
  r.p = tail == Tail::lower ? cdf : 1.0 - cdf;
  return r;
}

void ErrorSamples::validate() const {
  if (restricted.size() != full.size())
    throw ShapeError("error samples: restricted and full counts disagree");
  if (restricted.size() < 2) throw DomainError("error samples: need at least 2 replicates");
  auto ok = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x) && x >= 0.0; });
  };
  if (!ok(restricted) || !ok(full))
    throw NumericError("error samples: values must be finite and non-negative");
}

ErrorSamples sample_prediction_errors(const model::ModelParams& params,
                                      const datagen::WindowSet& windows, int n, Rng& rng,
                                      bool deterministic) {
  if (windows.test.empty()) throw ConfigError("sample_prediction_errors: empty test split");
  if (n < 2) throw ConfigError("sample_prediction_errors: need n >= 2 passes");

  std::vector<double> targets;
  targets.reserve(windows.test.size());
  for (const auto& w : windows.test) targets.push_back(w.target);

  model::ForwardOpts opts;
  opts.mode = deterministic ? model::SampleMode::deterministic : model::SampleMode::stochastic;
  opts.train_dropout = false;
  opts.want_prediction_samples = true;

  ErrorSamples out;
  out.seed = rng.seed();
  out.checkpoint_id = training::checkpoint_id(params);
  out.restricted.reserve(n);
  out.full.reserve(n);

  diff::Tape tape;
  std::vector<double> pred_r(windows.test.size()), pred_f(windows.test.size());
  for (int pass = 0; pass < n; ++pass) {
    Rng pass_rng = rng.split(static_cast<uint64_t>(pass));
    tape.reset();
    const model::ModelVars vars = model::bind(tape, params);
    for (size_t i = 0; i < windows.test.size(); ++i) {
      const model::WindowForward f =
          model::forward_window(tape, vars, params.cfg, windows.test[i], opts, pass_rng);
      pred_r[i] = tape.scalar(f.yres);
      pred_f[i] = tape.scalar(f.yfull);
    }
    out.restricted.push_back(mse(pred_r, targets));
    out.full.push_back(mse(pred_f, targets));
  }
  out.validate();
  return out;
}

GrangerReport decide_granger(const ErrorSamples& errors, double alpha) {
  errors.validate();
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("decide_granger: alpha must be in (0,1)");

  const SampleMoments mr = moments(errors.restricted);
  const SampleMoments mf = moments(errors.full);

  GrangerReport rep;
  rep.alpha = alpha;
  rep.seed = errors.seed;
  rep.checkpoint_id = errors.checkpoint_id;
  rep.mean_restricted = mr.mean;
  rep.std_restricted = std::sqrt(mr.var);
  rep.mean_full = mf.mean;
  rep.std_full = std::sqrt(mf.var);

  // Ties take the full_greater branch: no evidence, no causality claim.
  if (mf.mean < mr.mean) {
    rep.alternative = Alternative::full_less;
    rep.ttest = welch_ttest(errors.full, errors.restricted, Tail::lower);
    rep.verdict = rep.ttest.p < alpha ? Verdict::granger : Verdict::not_granger;
  } else {
    rep.alternative = Alternative::full_greater;
    rep.ttest = welch_ttest(errors.full, errors.restricted, Tail::upper);
    rep.verdict = Verdict::not_granger;
  }
  return rep;
}

std::string to_string(Verdict v) { return v == Verdict::granger ? "granger" : "not_granger"; }

std::string to_string(Alternative a) {
  return a == Alternative::full_less ? "full_less" : "full_greater";
}

std::string report_to_json(const GrangerReport& r) {
  char buf[64];
  auto num = [&buf](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  std::ostringstream os;
  os << "{\n"
     << "  \"dataset\": \"" << r.dataset << "\",\n"
     << "  \"verdict\": \"" << to_string(r.verdict) << "\",\n"
     << "  \"alternative\": \"" << to_string(r.alternative) << "\",\n"
     << "  \"t\": " << num(r.ttest.t) << ",\n"
     << "  \"df\": " << num(r.ttest.df) << ",\n"
     << "  \"p\": " << num(r.ttest.p) << ",\n"
     << "  \"mean_restricted\": " << num(r.mean_restricted) << ",\n"
     << "  \"std_restricted\": " << num(r.std_restricted) << ",\n"
     << "  \"mean_full\": " << num(r.mean_full) << ",\n"
     << "  \"std_full\": " << num(r.std_full) << ",\n"
     << "  \"alpha\": " << num(r.alpha) << ",\n"
     << "  \"seed\": " << r.seed << ",\n"
     << "  \"checkpoint\": \"" << r.checkpoint_id << "\",\n"
     << "  \"test\": \"welch_one_sided\"\n"
     << "}\n";
  return os.str();
}

namespace {

// Solves the normal equations G beta = rhs in place; G must be symmetric
// positive definite. Partial-pivot Gaussian elimination; near-zero pivots
// signal a rank-deficient design.
std::vector<double> solve_normal_equations(std::vector<std::vector<double>> g,
                                           std::vector<double> rhs) {
  const int n = static_cast<int>(rhs.size());
  double scale = 0.0;
  for (int i = 0; i < n; ++i) scale = std::max(scale, std::fabs(g[i][i]));
  const double tol = 1e-10 * std::max(scale, 1.0);

  for (int col = 0; col < n; ++col) {
    int pivot = col;
    for (int row = col + 1; row < n; ++row)
      if (std::fabs(g[row][col]) > std::fabs(g[pivot][col])) pivot = row;
    if (std::fabs(g[pivot][col]) < tol)
      throw SingularError("var baseline: singular design matrix (rank-deficient regressors)");
    std::swap(g[pivot], g[col]);
    std::swap(rhs[pivot], rhs[col]);
    for (int row = col + 1; row < n; ++row) {
      const double f = g[row][col] / g[col][col];
      if (f == 0.0) continue;
      for (int k = col; k < n; ++k) g[row][k] -= f * g[col][k];
      rhs[row] -= f * rhs[col];
    }
  }
  std::vector<double> beta(n);
  for (int i = n - 1; i >= 0; --i) {
    double acc = rhs[i];
    for (int k = i + 1; k < n; ++k) acc -= g[i][k] * beta[k];
    beta[i] = acc / g[i][i];
  }
  return beta;
}

struct OlsFit {
  std::vector<double> beta;
  double rss;
};

OlsFit ols(const std::vector<std::vector<double>>& rows, const std::vector<double>& y) {
  const int n = static_cast<int>(rows.size());
  const int p = static_cast<int>(rows[0].size());
  std::vector<std::vector<double>> g(p, std::vector<double>(p, 0.0));
  std::vector<double> rhs(p, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int a = 0; a < p; ++a) {
      rhs[a] += rows[i][a] * y[i];
      for (int b = a; b < p; ++b) g[a][b] += rows[i][a] * rows[i][b];
    }
  }
  for (int a = 0; a < p; ++a)
    for (int b = 0; b < a; ++b) g[a][b] = g[b][a];

  OlsFit fit;
  fit.beta = solve_normal_equations(std::move(g), std::move(rhs));
  fit.rss = 0.0;
  for (int i = 0; i < n; ++i) {
    double pred = 0.0;
    for (int a = 0; a < p; ++a) pred += rows[i][a] * fit.beta[a];
    const double resid = y[i] - pred;
    fit.rss += resid * resid;
  }
  return fit;
}

}  // namespace

VarBaselineFit var_granger_baseline(const std::vector<double>& x, const std::vector<double>& y,
                                    int lag, double alpha) {
  if (lag < 1) throw ConfigError("var baseline: lag must be >= 1");
  if (x.size() != y.size()) throw ShapeError("var baseline: x and y lengths disagree");
  const int T = static_cast<int>(y.size());
  if (T <= 2 * lag + 2)
    throw ConfigError("var baseline: need T > 2L + 2, got T = " + std::to_string(T) +
                      " for L = " + std::to_string(lag));

  const int n = T - lag;  // usable rows
  std::vector<std::vector<double>> rows_r(n), rows_f(n);
  std::vector<double> target(n);
  for (int i = 0; i < n; ++i) {
    const int t = lag + i;
    target[i] = y[t];
    rows_r[i].reserve(1 + lag);
    rows_r[i].push_back(1.0);
    for (int l = 1; l <= lag; ++l) rows_r[i].push_back(y[t - l]);
    rows_f[i] = rows_r[i];
    for (int l = 1; l <= lag; ++l) rows_f[i].push_back(x[t - l]);
  }

  const OlsFit fit_r = ols(rows_r, target);
  const OlsFit fit_f = ols(rows_f, target);

  VarBaselineFit out;
  out.lag = lag;
  out.n_obs = n;
  out.coef_restricted = fit_r.beta;
  out.coef_full = fit_f.beta;
  out.rss_restricted = fit_r.rss;
  out.rss_full = fit_f.rss;

  const double d2 = static_cast<double>(n - 2 * lag - 1);
  if (d2 < 1.0) throw ConfigError("var baseline: not enough observations for the F test");
  const double num = std::max(0.0, fit_r.rss - fit_f.rss) / static_cast<double>(lag);
  const double den = fit_f.rss / d2;
  if (!(den > 0.0))
    throw DegenerateError("var baseline: zero residual variance in the full model");
  out.f_stat = num / den;
  out.p = 1.0 - f_cdf(out.f_stat, static_cast<double>(lag), d2);
  out.granger = out.p < alpha;
  return out;
}

}  // namespace lgc::stats
