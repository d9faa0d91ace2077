#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lgc/datagen.hpp"
#include "lgc/model.hpp"
#include "lgc/rng.hpp"

namespace lgc::stats {

using diff::Matrix;

// (1/n) sum (pred_i - actual_i)^2
double mse(const std::vector<double>& pred, const std::vector<double>& actual);

// Regularized incomplete beta I_x(a,b) by Lentz continued fraction.
double regularized_incomplete_beta(double x, double a, double b);

// Exact Student-t CDF via the incomplete beta; df > 0.
double student_t_cdf(double t, double df);

// F distribution CDF; d1, d2 > 0.
double f_cdf(double f, double d1, double d2);

enum class Tail {
  lower,  // H1: mean(a) < mean(b)
  upper,  // H1: mean(a) > mean(b)
};

struct TTestResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;  // one-sided, for the requested tail
  Tail tail = Tail::lower;
};

// Welch two-sample t-test (unequal variances, Welch-Satterthwaite df).
TTestResult welch_ttest(const std::vector<double>& a, const std::vector<double>& b, Tail tail);

// Paired per-pass test-set MSE replicates of the two decoders.
struct ErrorSamples {
  std::vector<double> restricted;
  std::vector<double> full;
  uint64_t seed = 0;
  std::string checkpoint_id;

  void validate() const;
};

// n independent stochastic passes over the test split (dropout off; latent,
// restricted and full predictions sampled). Pass i uses rng substream i, so
// results are order-stable regardless of scheduling.
ErrorSamples sample_prediction_errors(const model::ModelParams& params,
                                      const datagen::WindowSet& windows, int n, Rng& rng,
                                      bool deterministic = false);

enum class Verdict { granger, not_granger };
enum class Alternative { full_less, full_greater };

struct GrangerReport {
  Verdict verdict = Verdict::not_granger;
  Alternative alternative = Alternative::full_greater;
  TTestResult ttest;
  double mean_restricted = 0, std_restricted = 0;
  double mean_full = 0, std_full = 0;
  double alpha = 0.05;
  uint64_t seed = 0;
  std::string checkpoint_id;
  std::string dataset;
};

// Chooses the alternative by comparing sample means (ties favour
// non-causality), runs the one-sided Welch test, and declares Granger
// causality only when the full model is significantly more accurate.
GrangerReport decide_granger(const ErrorSamples& errors, double alpha = 0.05);

std::string to_string(Verdict v);
std::string to_string(Alternative a);

// Serialized structured-text (JSON) record.
std::string report_to_json(const GrangerReport& r);

// Linear VAR Granger baseline: OLS of y on its own lags (restricted) and on
// y and x lags (full), F-test on the cross coefficients.
struct VarBaselineFit {
  int lag = 0;
  std::vector<double> coef_restricted;  // [intercept, y lags 1..L]
  std::vector<double> coef_full;        // [intercept, y lags 1..L, x lags 1..L]
  double rss_restricted = 0;
  double rss_full = 0;
  double f_stat = 0;
  double p = 1.0;
  bool granger = false;
  int n_obs = 0;
};

VarBaselineFit var_granger_baseline(const std::vector<double>& x, const std::vector<double>& y,
                                    int lag = 5, double alpha = 0.05);

}  // namespace lgc::stats
