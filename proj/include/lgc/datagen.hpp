#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lgc/matrix.hpp"
#include "lgc/rng.hpp"

namespace lgc::datagen {

using diff::Matrix;

// Aligned multichannel series: cause x, effect y, proxies u, and (for
// synthetic data) the true confounder path.
struct SeriesBundle {
  std::vector<double> x;
  std::vector<double> y;
  Matrix u;  // n_proxies x T
  std::vector<double> z_true;  // empty when unknown
  struct Meta {
    std::string name;
    uint64_t seed = 0;
    bool granger = false;
    double noise_std_y = 0.0;
  } meta;

  int length() const { return static_cast<int>(y.size()); }
  int n_proxies() const { return u.rows; }
  void validate() const;  // channel lengths agree, no NaNs
};

struct GenConfig {
  int dataset_id = 1;       // 1 or 2
  bool granger = true;
  int T = 1000;
  double noise_std_y = -1.0;  // <0 -> dataset default (0.01 / 0.5)
  uint64_t seed = 0;
  int burn_in = 50;
  // Process noise levels; zeroing all of them makes the recursions exact.
  double noise_std_z = 0.01;
  double noise_std_u = 0.05;
  double noise_std_x = 0.01;

  double resolved_noise_std_y() const;
};

// Confounded synthetic processes. Both share
//   Z_t = tanh(Z_{t-1}) + N(0, 0.01^2)
//   U_t = Z_t^2       + N(0, 0.05^2)
//   X_t = sig(Z_{t-2}) + N(0, 0.01^2)
// and differ in how Y is produced:
//   dataset 1: Y_t = sig(Z_{t-4}) [+ sig(X_{t-2})]      + N(0, sd^2), sd = 0.01
//   dataset 2: Y_t = Z_{t-3} Z_{t-4} [+ X_{t-1} X_{t-2}] + N(0, sd^2), sd = 0.5
// Burn-in plus lag history is generated and discarded so every kept step has
// a full lag window.
SeriesBundle gen_dataset1(const GenConfig& cfg, Rng& rng);
SeriesBundle gen_dataset2(const GenConfig& cfg, Rng& rng);
SeriesBundle generate(const GenConfig& cfg);  // dispatches on dataset_id, seeds from cfg

// Same simulation with the Y noise term removed; used for SNR targeting.
std::vector<double> noiseless_y_signal(const GenConfig& cfg);

// gamma = mean |s_t| / sigma.
double compute_snr(const std::vector<double>& signal, double sigma);

// sigma such that the zero-Y-noise simulation under cfg's seed has SNR
// gamma_target.
double sigma_for_target_snr(const GenConfig& cfg, double gamma_target);

// CSV I/O. Header row required; default columns t,x,y,u1[,u2,...][,z].
struct ColumnMap {
  std::string x = "x";
  std::string y = "y";
  std::vector<std::string> proxies = {"u1"};
  std::string z;  // optional ground-truth column
};

SeriesBundle load_csv_bundle(const std::string& path, const ColumnMap& map = ColumnMap{});
void save_csv_bundle(const SeriesBundle& bundle, const std::string& path);

// Per-channel affine transform fitted on the training range only.
struct ChannelStats {
  double x_mean = 0, x_std = 1;
  double y_mean = 0, y_std = 1;
  std::vector<double> u_mean, u_std;
};

struct SplitFractions {
  double train = 0.8, val = 0.1, test = 0.1;
};

std::pair<SeriesBundle, ChannelStats> standardize(const SeriesBundle& b,
                                                  const SplitFractions& f = SplitFractions{});
SeriesBundle destandardize(const SeriesBundle& b, const ChannelStats& s);

// One training example: tau steps of context and the next-step target.
struct Window {
  Matrix u;               // n_proxies x tau
  std::vector<double> x;  // tau
  std::vector<double> y;  // tau
  double target = 0.0;    // y at the step after the window
};

struct WindowSet {
  std::vector<Window> train, val, test;
  int tau = 0;
};

// Chronological split, then overlapping windows that never cross a split
// boundary. Throws ConfigError when any split yields no usable window.
WindowSet window_split(const SeriesBundle& b, int tau,
                       const SplitFractions& f = SplitFractions{});

}  // namespace lgc::datagen
