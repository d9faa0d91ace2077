#include "lgc/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "lgc/errors.hpp"

namespace lgc::datagen {

namespace {

constexpr int kMaxLag = 4;
constexpr double kZInit = 0.5;

void check_gen_config(const GenConfig& cfg) {
  if (cfg.dataset_id != 1 && cfg.dataset_id != 2)
    throw ConfigError("dataset_id must be 1 or 2, got " + std::to_string(cfg.dataset_id));
  if (cfg.T < 50) throw ConfigError("T must be >= 50, got " + std::to_string(cfg.T));
  if (cfg.burn_in < 10)
    throw ConfigError("burn_in must be >= 10, got " + std::to_string(cfg.burn_in));
  if (cfg.noise_std_y >= 0.0 && !std::isfinite(cfg.noise_std_y))
    throw ConfigError("noise_std_y must be finite");
  if (cfg.noise_std_z < 0.0 || cfg.noise_std_u < 0.0 || cfg.noise_std_x < 0.0)
    throw ConfigError("process noise stds must be >= 0");
}

}  // namespace

double GenConfig::resolved_noise_std_y() const {
  if (noise_std_y >= 0.0) return noise_std_y;
  return dataset_id == 1 ? 0.01 : 0.5;
}

void SeriesBundle::validate() const {
  const size_t T = y.size();
  if (x.size() != T || static_cast<size_t>(u.cols) != T)
    throw ShapeError("series bundle channels disagree on length");
  if (!z_true.empty() && z_true.size() != T)
    throw ShapeError("z channel length disagrees with series length");
  auto finite = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };
  if (!finite(x) || !finite(y) || !u.all_finite() || !finite(z_true))
    throw NumericError("series bundle contains non-finite entries");
}

SeriesBundle gen_dataset1(const GenConfig& cfg, Rng& rng) {
  if (cfg.dataset_id != 1) throw ConfigError("gen_dataset1 requires dataset_id = 1");
  check_gen_config(cfg);
  const double sd_y = cfg.resolved_noise_std_y();
  const int n_raw = cfg.burn_in + cfg.T + kMaxLag;
  const int first = n_raw - cfg.T;

  std::vector<double> z(n_raw), x(n_raw);
  z[0] = kZInit;
  for (int t = 1; t < n_raw; ++t) z[t] = std::tanh(z[t - 1]) + cfg.noise_std_z * rng.gauss();
  for (int t = 2; t < n_raw; ++t) x[t] = diff::sigmoid(z[t - 2]) + cfg.noise_std_x * rng.gauss();

  SeriesBundle b;
  b.x.assign(x.begin() + first, x.end());
  b.y.resize(cfg.T);
  b.u.resize(1, cfg.T);
  b.z_true.assign(z.begin() + first, z.end());
  for (int t = first; t < n_raw; ++t) {
    const int k = t - first;
    b.u(0, k) = z[t] * z[t] + cfg.noise_std_u * rng.gauss();
    double y = diff::sigmoid(z[t - 4]);
    if (cfg.granger) y += diff::sigmoid(x[t - 2]);
    b.y[k] = y + sd_y * rng.gauss();
  }
  b.meta = {cfg.granger ? "synth1_granger" : "synth1_nogranger", cfg.seed, cfg.granger, sd_y};
  b.validate();
  return b;
}

SeriesBundle gen_dataset2(const GenConfig& cfg, Rng& rng) {
  if (cfg.dataset_id != 2) throw ConfigError("gen_dataset2 requires dataset_id = 2");
  check_gen_config(cfg);
  const double sd_y = cfg.resolved_noise_std_y();
  const int n_raw = cfg.burn_in + cfg.T + kMaxLag;
  const int first = n_raw - cfg.T;

  std::vector<double> z(n_raw), x(n_raw);
  z[0] = kZInit;
  for (int t = 1; t < n_raw; ++t) z[t] = std::tanh(z[t - 1]) + cfg.noise_std_z * rng.gauss();
  for (int t = 2; t < n_raw; ++t) x[t] = diff::sigmoid(z[t - 2]) + cfg.noise_std_x * rng.gauss();

  SeriesBundle b;
  b.x.assign(x.begin() + first, x.end());
  b.y.resize(cfg.T);
  b.u.resize(1, cfg.T);
  b.z_true.assign(z.begin() + first, z.end());
  for (int t = first; t < n_raw; ++t) {
    const int k = t - first;
    b.u(0, k) = z[t] * z[t] + cfg.noise_std_u * rng.gauss();
    double y = z[t - 3] * z[t - 4];
    if (cfg.granger) y += x[t - 1] * x[t - 2];
    b.y[k] = y + sd_y * rng.gauss();
  }
  b.meta = {cfg.granger ? "synth2_granger" : "synth2_nogranger", cfg.seed, cfg.granger, sd_y};
  b.validate();
  return b;
}

SeriesBundle generate(const GenConfig& cfg) {
  Rng rng = Rng(cfg.seed).split(kStreamGen);
  return cfg.dataset_id == 1 ? gen_dataset1(cfg, rng) : gen_dataset2(cfg, rng);
}

std::vector<double> noiseless_y_signal(const GenConfig& cfg) {
  GenConfig c = cfg;
  c.noise_std_y = 0.0;
  Rng rng = Rng(cfg.seed).split(kStreamGen);
  SeriesBundle b = c.dataset_id == 1 ? gen_dataset1(c, rng) : gen_dataset2(c, rng);
  return b.y;
}

double compute_snr(const std::vector<double>& signal, double sigma) {
  if (!(sigma > 0.0)) throw DomainError("compute_snr: sigma must be > 0");
  if (signal.empty()) throw ConfigError("compute_snr: empty signal");
  double acc = 0.0;
  for (double s : signal) acc += std::fabs(s);
  return acc / static_cast<double>(signal.size()) / sigma;
}

double sigma_for_target_snr(const GenConfig& cfg, double gamma_target) {
  if (!(gamma_target > 0.0)) throw DomainError("sigma_for_target_snr: gamma must be > 0");
  const std::vector<double> s = noiseless_y_signal(cfg);
  double acc = 0.0;
  for (double v : s) acc += std::fabs(v);
  const double mean_abs = acc / static_cast<double>(s.size());
  return mean_abs / gamma_target;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_cell(const std::string& cell, size_t row, const std::string& col) {
  try {
    size_t pos = 0;
    const double v = std::stod(cell, &pos);
    while (pos < cell.size() && std::isspace(static_cast<unsigned char>(cell[pos]))) ++pos;
    if (pos != cell.size() || !std::isfinite(v)) throw std::invalid_argument(cell);
    return v;
  } catch (const std::exception&) {
    throw ParseError("csv: non-numeric value '" + cell + "' in column '" + col + "' at data row " +
                     std::to_string(row));
  }
}

}  // namespace

SeriesBundle load_csv_bundle(const std::string& path, const ColumnMap& map) {
  std::ifstream in(path);
  if (!in) throw IoError("csv: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ParseError("csv: empty file '" + path + "'");
  const std::vector<std::string> header = split_csv_line(line);

  auto col_index = [&](const std::string& name, bool required) -> int {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      if (required) throw SchemaError("csv: missing required column '" + name + "'");
      return -1;
    }
    return static_cast<int>(it - header.begin());
  };

  const int ix = col_index(map.x, true);
  const int iy = col_index(map.y, true);
  if (map.proxies.empty()) throw ConfigError("csv: at least one proxy column is required");
  std::vector<int> iu;
  for (const auto& name : map.proxies) iu.push_back(col_index(name, true));
  const int iz = map.z.empty() ? -1 : col_index(map.z, true);

  std::vector<double> xs, ys, zs;
  std::vector<std::vector<double>> us(iu.size());
  size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++row;
    const std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw ParseError("csv: row " + std::to_string(row) + " has " +
                       std::to_string(cells.size()) + " cells, expected " +
                       std::to_string(header.size()));
    xs.push_back(parse_cell(cells[ix], row, map.x));
    ys.push_back(parse_cell(cells[iy], row, map.y));
    for (size_t k = 0; k < iu.size(); ++k)
      us[k].push_back(parse_cell(cells[iu[k]], row, map.proxies[k]));
    if (iz >= 0) zs.push_back(parse_cell(cells[iz], row, map.z));
  }
  if (xs.empty()) throw ParseError("csv: no data rows in '" + path + "'");

  SeriesBundle b;
  b.x = std::move(xs);
  b.y = std::move(ys);
  b.u.resize(static_cast<int>(us.size()), static_cast<int>(b.y.size()));
  for (size_t k = 0; k < us.size(); ++k)
    for (size_t t = 0; t < us[k].size(); ++t) b.u(static_cast<int>(k), static_cast<int>(t)) = us[k][t];
  b.z_true = std::move(zs);
  b.meta.name = path;
  b.validate();
  return b;
}

void save_csv_bundle(const SeriesBundle& b, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("csv: cannot write '" + path + "'");
  out << "t,x,y";
  for (int k = 0; k < b.n_proxies(); ++k) out << ",u" << (k + 1);
  if (!b.z_true.empty()) out << ",z";
  out << "\n";
  char buf[32];
  auto emit = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << ',' << buf;
  };
  for (int t = 0; t < b.length(); ++t) {
    out << t;
    emit(b.x[t]);
    emit(b.y[t]);
    for (int k = 0; k < b.n_proxies(); ++k) emit(b.u(k, t));
    if (!b.z_true.empty()) emit(b.z_true[t]);
    out << "\n";
  }
  if (!out) throw IoError("csv: write failed for '" + path + "'");
}

namespace {

struct MeanStd {
  double mean, std;
};

MeanStd train_stats(const std::vector<double>& v, int n_train, const char* channel) {
  double mean = 0.0;
  for (int i = 0; i < n_train; ++i) mean += v[i];
  mean /= n_train;
  double var = 0.0;
  for (int i = 0; i < n_train; ++i) var += (v[i] - mean) * (v[i] - mean);
  var /= n_train;
  const double sd = std::sqrt(var);
  if (!(sd > 1e-12))
    throw DegenerateError(std::string("standardize: channel '") + channel +
                          "' has zero variance on the training split");
  return {mean, sd};
}

}  // namespace

std::pair<SeriesBundle, ChannelStats> standardize(const SeriesBundle& b, const SplitFractions& f) {
  const int T = b.length();
  const int n_train = static_cast<int>(std::floor(f.train * T));
  if (n_train < 2) throw ConfigError("standardize: training split too small");

  ChannelStats st;
  SeriesBundle out = b;
  const MeanStd sx = train_stats(b.x, n_train, "x");
  const MeanStd sy = train_stats(b.y, n_train, "y");
  st.x_mean = sx.mean;
  st.x_std = sx.std;
  st.y_mean = sy.mean;
  st.y_std = sy.std;
  for (int t = 0; t < T; ++t) {
    out.x[t] = (b.x[t] - sx.mean) / sx.std;
    out.y[t] = (b.y[t] - sy.mean) / sy.std;
  }
  st.u_mean.resize(b.n_proxies());
  st.u_std.resize(b.n_proxies());
  for (int k = 0; k < b.n_proxies(); ++k) {
    std::vector<double> row(T);
    for (int t = 0; t < T; ++t) row[t] = b.u(k, t);
    const MeanStd su = train_stats(row, n_train, ("u" + std::to_string(k + 1)).c_str());
    st.u_mean[k] = su.mean;
    st.u_std[k] = su.std;
    for (int t = 0; t < T; ++t) out.u(k, t) = (b.u(k, t) - su.mean) / su.std;
  }
  return {out, st};
}

SeriesBundle destandardize(const SeriesBundle& b, const ChannelStats& s) {
  SeriesBundle out = b;
  const int T = b.length();
  for (int t = 0; t < T; ++t) {
    out.x[t] = b.x[t] * s.x_std + s.x_mean;
    out.y[t] = b.y[t] * s.y_std + s.y_mean;
  }
  for (int k = 0; k < b.n_proxies(); ++k)
    for (int t = 0; t < T; ++t) out.u(k, t) = b.u(k, t) * s.u_std[k] + s.u_mean[k];
  return out;
}

WindowSet window_split(const SeriesBundle& b, int tau, const SplitFractions& f) {
  if (tau < 2) throw ConfigError("window_split: tau must be >= 2, got " + std::to_string(tau));
  const int T = b.length();
  const int n_train = static_cast<int>(std::floor(f.train * T));
  const int n_val = static_cast<int>(std::floor(f.val * T));
  const int n_test = T - n_train - n_val;

  struct Range {
    const char* name;
    int begin, end;
  };
  const Range ranges[3] = {{"train", 0, n_train},
                           {"val", n_train, n_train + n_val},
                           {"test", n_train + n_val, T}};

  WindowSet ws;
  ws.tau = tau;
  std::vector<Window>* dests[3] = {&ws.train, &ws.val, &ws.test};
  for (int r = 0; r < 3; ++r) {
    const Range& rg = ranges[r];
    const int count = (rg.end - rg.begin) - tau;
    if (count <= 0)
      throw ConfigError(std::string("window_split: ") + rg.name + " split of length " +
                        std::to_string(rg.end - rg.begin) + " yields no window of length " +
                        std::to_string(tau));
    dests[r]->reserve(count);
    for (int s = rg.begin; s + tau < rg.end; ++s) {
      Window w;
      w.x.assign(b.x.begin() + s, b.x.begin() + s + tau);
      w.y.assign(b.y.begin() + s, b.y.begin() + s + tau);
      w.u.resize(b.n_proxies(), tau);
      for (int k = 0; k < b.n_proxies(); ++k)
        for (int j = 0; j < tau; ++j) w.u(k, j) = b.u(k, s + j);
      w.target = b.y[s + tau];
      dests[r]->push_back(std::move(w));
    }
  }
  (void)n_test;
  return ws;
}

}  // namespace lgc::datagen
