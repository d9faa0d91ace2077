#include "lgc/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "lgc/errors.hpp"

namespace lgc::experiments {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Rethrows library errors with the pipeline stage prepended, preserving the
// error type so exit-code mapping still works.
template <class Fn>
auto with_stage(const char* stage, Fn&& fn) -> decltype(fn()) {
  auto tag = [stage](const std::exception& e) {
    return std::string("[") + stage + "] " + e.what();
  };
  try {
    return fn();
  } catch (const ShapeError& e) {
    throw ShapeError(tag(e));
  } catch (const DomainError& e) {
    throw DomainError(tag(e));
  } catch (const ContractError& e) {
    throw ContractError(tag(e));
  } catch (const ConfigError& e) {
    throw ConfigError(tag(e));
  } catch (const NumericError& e) {
    throw NumericError(tag(e));
  } catch (const SchemaError& e) {
    throw SchemaError(tag(e));
  } catch (const ParseError& e) {
    throw ParseError(tag(e));
  } catch (const FormatError& e) {
    throw FormatError(tag(e));
  } catch (const IoError& e) {
    throw IoError(tag(e));
  } catch (const BracketError& e) {
    throw BracketError(tag(e));
  } catch (const SingularError& e) {
    throw SingularError(tag(e));
  } catch (const DegenerateError& e) {
    throw DegenerateError(tag(e));
  }
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + tmp + "'");
    out << content;
    if (!out) throw IoError("write failed for '" + tmp + "'");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw IoError("cannot move '" + tmp + "' to '" + path + "'");
}

}  // namespace

std::string DatasetSpec::name() const {
  switch (kind) {
    case Kind::synth1: return granger ? "synth1_granger" : "synth1_nogranger";
    case Kind::synth2: return granger ? "synth2_granger" : "synth2_nogranger";
    case Kind::csv: {
      std::string stem = fs::path(csv_path).stem().string();
      return stem.empty() ? "csv" : "csv_" + stem;
    }
  }
  return "unknown";
}

datagen::GenConfig DatasetSpec::gen_config(uint64_t seed) const {
  if (kind == Kind::csv) throw ConfigError("csv dataset has no generator config");
  datagen::GenConfig g;
  g.dataset_id = kind == Kind::synth1 ? 1 : 2;
  g.granger = granger;
  g.T = T;
  g.noise_std_y = noise_std_y;
  g.seed = seed;
  g.burn_in = burn_in;
  return g;
}

void ExperimentConfig::validate() const {
  train.validate();
  if (seeds.empty()) throw ConfigError("config: seeds must be nonempty");
  if (!(stats.alpha > 0.0 && stats.alpha < 1.0)) throw ConfigError("config: alpha must be in (0,1)");
  if (stats.n_samples < 2) throw ConfigError("config: n_samples must be >= 2");
  if (!(sweep.gamma_lo < sweep.gamma_hi))
    throw ConfigError("config: gamma bracket must satisfy lo < hi");
  if (!(sweep.gamma_tol > 0.0)) throw ConfigError("config: gamma_tol must be > 0");
  if (sweep.k_seeds < 1) throw ConfigError("config: k_seeds must be >= 1");
  if (dataset.kind == DatasetSpec::Kind::csv && dataset.csv_path.empty())
    throw ConfigError("config: csv dataset requires a csv path");
}

ExperimentConfig ExperimentConfig::defaults_for(DatasetSpec::Kind kind) {
  ExperimentConfig cfg;
  cfg.dataset.kind = kind;
  if (kind == DatasetSpec::Kind::csv) {
    cfg.dataset.standardize = true;
    cfg.model.latent_dim = 2;
    cfg.model.mlp_hidden = 10;
  }
  return cfg;
}

namespace {

DatasetSpec::Kind kind_from_string(const std::string& s) {
  if (s == "synth1") return DatasetSpec::Kind::synth1;
  if (s == "synth2") return DatasetSpec::Kind::synth2;
  if (s == "csv") return DatasetSpec::Kind::csv;
  throw ConfigError("config: unknown dataset kind '" + s + "'");
}

std::string kind_to_string(DatasetSpec::Kind k) {
  switch (k) {
    case DatasetSpec::Kind::synth1: return "synth1";
    case DatasetSpec::Kind::synth2: return "synth2";
    case DatasetSpec::Kind::csv: return "csv";
  }
  return "synth1";
}

}  // namespace

std::string config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["dataset"] = {{"kind", kind_to_string(cfg.dataset.kind)},
                  {"granger", cfg.dataset.granger},
                  {"T", cfg.dataset.T},
                  {"noise_std_y", cfg.dataset.noise_std_y},
                  {"burn_in", cfg.dataset.burn_in},
                  {"csv_path", cfg.dataset.csv_path},
                  {"standardize", cfg.dataset.standardize}};
  j["model"] = {{"gru_hidden", cfg.model.gru_hidden},
                {"mlp_hidden", cfg.model.mlp_hidden},
                {"latent_dim", cfg.model.latent_dim},
                {"dropout", cfg.model.dropout_rate}};
  j["train"] = {{"lr", cfg.train.lr},
                {"batch_size", cfg.train.batch_size},
                {"seq_len", cfg.train.seq_len},
                {"max_epochs", cfg.train.max_epochs},
                {"patience", cfg.train.patience},
                {"mc_samples", cfg.train.mc_samples}};
  j["stats"] = {{"n_samples", cfg.stats.n_samples}, {"alpha", cfg.stats.alpha}};
  j["sweep"] = {{"gamma_lo", cfg.sweep.gamma_lo},
                {"gamma_hi", cfg.sweep.gamma_hi},
                {"gamma_tol", cfg.sweep.gamma_tol},
                {"k_seeds", cfg.sweep.k_seeds},
                {"taus", cfg.sweep.taus}};
  j["seeds"] = cfg.seeds;
  j["out_dir"] = cfg.out_dir;
  return j.dump(2) + "\n";
}

ExperimentConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("config: invalid JSON: ") + e.what());
  }
  try {
    ExperimentConfig cfg;
    if (j.contains("dataset")) {
      const json& d = j["dataset"];
      if (d.contains("kind")) cfg.dataset.kind = kind_from_string(d["kind"].get<std::string>());
      cfg = ExperimentConfig::defaults_for(cfg.dataset.kind);
      if (d.contains("granger")) cfg.dataset.granger = d["granger"].get<bool>();
      if (d.contains("T")) cfg.dataset.T = d["T"].get<int>();
      if (d.contains("noise_std_y")) cfg.dataset.noise_std_y = d["noise_std_y"].get<double>();
      if (d.contains("burn_in")) cfg.dataset.burn_in = d["burn_in"].get<int>();
      if (d.contains("csv_path")) cfg.dataset.csv_path = d["csv_path"].get<std::string>();
      if (d.contains("standardize")) cfg.dataset.standardize = d["standardize"].get<bool>();
    }
    if (j.contains("model")) {
      const json& m = j["model"];
      if (m.contains("gru_hidden")) cfg.model.gru_hidden = m["gru_hidden"].get<int>();
      if (m.contains("mlp_hidden")) cfg.model.mlp_hidden = m["mlp_hidden"].get<int>();
      if (m.contains("latent_dim")) cfg.model.latent_dim = m["latent_dim"].get<int>();
      if (m.contains("dropout")) cfg.model.dropout_rate = m["dropout"].get<double>();
    }
    if (j.contains("train")) {
      const json& t = j["train"];
      if (t.contains("lr")) cfg.train.lr = t["lr"].get<double>();
      if (t.contains("batch_size")) cfg.train.batch_size = t["batch_size"].get<int>();
      if (t.contains("seq_len")) cfg.train.seq_len = t["seq_len"].get<int>();
      if (t.contains("max_epochs")) cfg.train.max_epochs = t["max_epochs"].get<int>();
      if (t.contains("patience")) cfg.train.patience = t["patience"].get<int>();
      if (t.contains("mc_samples")) cfg.train.mc_samples = t["mc_samples"].get<int>();
    }
    if (j.contains("stats")) {
      const json& s = j["stats"];
      if (s.contains("n_samples")) cfg.stats.n_samples = s["n_samples"].get<int>();
      if (s.contains("alpha")) cfg.stats.alpha = s["alpha"].get<double>();
    }
    if (j.contains("sweep")) {
      const json& s = j["sweep"];
      if (s.contains("gamma_lo")) cfg.sweep.gamma_lo = s["gamma_lo"].get<double>();
      if (s.contains("gamma_hi")) cfg.sweep.gamma_hi = s["gamma_hi"].get<double>();
      if (s.contains("gamma_tol")) cfg.sweep.gamma_tol = s["gamma_tol"].get<double>();
      if (s.contains("k_seeds")) cfg.sweep.k_seeds = s["k_seeds"].get<int>();
      if (s.contains("taus")) cfg.sweep.taus = s["taus"].get<std::vector<int>>();
    }
    if (j.contains("seeds")) cfg.seeds = j["seeds"].get<std::vector<uint64_t>>();
    if (j.contains("out_dir")) cfg.out_dir = j["out_dir"].get<std::string>();
    return cfg;
  } catch (const json::exception& e) {
    throw ParseError(std::string("config: bad field type: ") + e.what());
  }
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("config: cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

namespace {

datagen::SeriesBundle make_bundle(const ExperimentConfig& cfg, uint64_t run_seed) {
  if (cfg.dataset.kind == DatasetSpec::Kind::csv) {
    datagen::SeriesBundle b = datagen::load_csv_bundle(cfg.dataset.csv_path);
    if (cfg.dataset.standardize) b = datagen::standardize(b).first;
    b.meta.seed = run_seed;
    return b;
  }
  return datagen::generate(cfg.dataset.gen_config(run_seed));
}

void persist_run(const ExperimentConfig& cfg, uint64_t run_seed, const training::TrainResult& tr,
                 const stats::ErrorSamples& errors, const stats::GrangerReport& report,
                 RunOutcome& out) {
  if (cfg.out_dir.empty()) return;
  const fs::path dir = fs::path(cfg.out_dir) / (cfg.dataset.name() + "_seed" + std::to_string(run_seed));
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir.string() + "'");

  ExperimentConfig snapshot = cfg;
  snapshot.seeds = {run_seed};
  write_file_atomic((dir / "config.json").string(), config_to_json(snapshot));

  training::Checkpoint ck;
  ck.model_cfg = tr.params.cfg;
  ck.train_cfg = cfg.train;
  ck.train_cfg.seed = run_seed;
  ck.params = tr.params;
  ck.opt = tr.opt;
  ck.history = tr.history;
  training::save_checkpoint(ck, (dir / "checkpoint.bin").string());

  std::ostringstream es;
  es << "pass,restricted_mse,full_mse\n";
  for (size_t i = 0; i < errors.restricted.size(); ++i)
    es << i << ',' << fmt_double(errors.restricted[i]) << ',' << fmt_double(errors.full[i])
       << '\n';
  write_file_atomic((dir / "error_samples.csv").string(), es.str());

  write_file_atomic((dir / "report.json").string(), stats::report_to_json(report));
  out.artifact_dir = dir.string();
}

}  // namespace

RunOutcome run_verdict(const ExperimentConfig& cfg, uint64_t run_seed) {
  with_stage("config", [&] { cfg.validate(); return 0; });

  RunOutcome out;
  const datagen::SeriesBundle bundle =
      with_stage("data", [&] { return make_bundle(cfg, run_seed); });
  out.sigma_y = bundle.meta.noise_std_y;

  training::TrainConfig tc = cfg.train;
  tc.seed = run_seed;
  const training::TrainResult tr =
      with_stage("train", [&] { return training::train(bundle, tc, cfg.model); });
  out.history = tr.history;

  const datagen::WindowSet ws =
      with_stage("window", [&] { return datagen::window_split(bundle, tc.seq_len); });

  Rng stats_rng = Rng(run_seed).split(kStreamStats);
  const stats::ErrorSamples errors = with_stage("stats", [&] {
    return stats::sample_prediction_errors(tr.params, ws, cfg.stats.n_samples, stats_rng);
  });

  out.report = with_stage("stats", [&] { return stats::decide_granger(errors, cfg.stats.alpha); });
  out.report.dataset = cfg.dataset.name();
  out.report.seed = run_seed;

  with_stage("persist", [&] {
    persist_run(cfg, run_seed, tr, errors, out.report, out);
    return 0;
  });
  return out;
}

BisectionResult bisect_detection(double lo, double hi, double tol,
                                 const std::function<SweepRecord(double)>& eval) {
  if (!(lo < hi)) throw ConfigError("bisection: bracket must satisfy lo < hi");
  if (!(tol > 0.0)) throw ConfigError("bisection: tolerance must be > 0");

  BisectionResult res;
  SweepRecord rec_lo = eval(lo);
  SweepRecord rec_hi = eval(hi);
  res.records.push_back(rec_lo);
  res.records.push_back(rec_hi);
  if (rec_lo.detected || !rec_hi.detected) {
    std::ostringstream os;
    os << "bisection: bracket does not straddle the threshold: detect(" << lo
       << ") = " << (rec_lo.detected ? "true" : "false") << ", detect(" << hi
       << ") = " << (rec_hi.detected ? "true" : "false");
    auto append_ps = [&os](const SweepRecord& r) {
      os << " [";
      for (size_t i = 0; i < r.p_values.size(); ++i) os << (i ? "," : "") << r.p_values[i];
      os << "]";
    };
    append_ps(rec_lo);
    append_ps(rec_hi);
    throw BracketError(os.str());
  }

  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    SweepRecord rec = eval(mid);
    res.records.push_back(rec);
    if (rec.detected)
      hi = mid;
    else
      lo = mid;
  }
  res.lo = lo;
  res.hi = hi;
  res.gamma_star = 0.5 * (lo + hi);
  std::sort(res.records.begin(), res.records.end(),
            [](const SweepRecord& a, const SweepRecord& b) { return a.knob < b.knob; });
  return res;
}

BisectionResult snr_bisection(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.dataset.kind == DatasetSpec::Kind::csv)
    throw ConfigError("snr bisection requires a synthetic dataset");
  if (static_cast<int>(cfg.seeds.size()) < cfg.sweep.k_seeds)
    throw ConfigError("snr bisection: need at least k_seeds seeds, got " +
                      std::to_string(cfg.seeds.size()));

  auto eval = [&cfg](double gamma) {
    SweepRecord rec;
    rec.knob_name = "gamma";
    rec.knob = gamma;
    int detections = 0;
    for (int i = 0; i < cfg.sweep.k_seeds; ++i) {
      const uint64_t seed = cfg.seeds[i];
      ExperimentConfig point = cfg;
      point.out_dir.clear();  // sweep evaluations are not persisted individually
      point.dataset.noise_std_y =
          datagen::sigma_for_target_snr(cfg.dataset.gen_config(seed), gamma);
      const RunOutcome run = run_verdict(point, seed);
      // Table-2 style p-value: always the lower-tail test for Eq.-11 detection.
      const double p = run.report.alternative == stats::Alternative::full_less
                           ? run.report.ttest.p
                           : 1.0 - run.report.ttest.p;
      rec.seeds.push_back(seed);
      rec.p_values.push_back(p);
      if (p < cfg.stats.alpha) ++detections;
    }
    rec.detected = 2 * detections > cfg.sweep.k_seeds;
    return rec;
  };

  BisectionResult res =
      bisect_detection(cfg.sweep.gamma_lo, cfg.sweep.gamma_hi, cfg.sweep.gamma_tol, eval);
  if (!cfg.out_dir.empty()) {
    std::error_code ec;
    fs::create_directories(cfg.out_dir, ec);
    if (ec) throw IoError("cannot create output directory '" + cfg.out_dir + "'");
    emit_results(res.records,
                 (fs::path(cfg.out_dir) / (cfg.dataset.name() + "_snr_sweep.csv")).string(),
                 EmitFormat::csv);
  }
  return res;
}

std::vector<SweepRecord> seqlen_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.sweep.taus.empty()) throw ConfigError("seqlen sweep: tau list is empty");

  std::vector<SweepRecord> records;
  for (int tau : cfg.sweep.taus) {
    SweepRecord rec;
    rec.knob_name = "tau";
    rec.knob = tau;
    try {
      int detections = 0;
      for (uint64_t seed : cfg.seeds) {
        ExperimentConfig point = cfg;
        point.out_dir.clear();
        point.train.seq_len = tau;
        const RunOutcome run = run_verdict(point, seed);
        const double p = run.report.alternative == stats::Alternative::full_less
                             ? run.report.ttest.p
                             : 1.0 - run.report.ttest.p;
        rec.seeds.push_back(seed);
        rec.p_values.push_back(p);
        if (p < cfg.stats.alpha) ++detections;
      }
      rec.detected = 2 * detections > static_cast<int>(cfg.seeds.size());
    } catch (const Error& e) {
      rec.error = e.what();
      rec.seeds.clear();
      rec.p_values.clear();
      rec.detected = false;
    }
    records.push_back(std::move(rec));
  }
  if (!cfg.out_dir.empty()) {
    std::error_code ec;
    fs::create_directories(cfg.out_dir, ec);
    if (ec) throw IoError("cannot create output directory '" + cfg.out_dir + "'");
    emit_results(records,
                 (fs::path(cfg.out_dir) / (cfg.dataset.name() + "_seqlen_sweep.csv")).string(),
                 EmitFormat::csv);
  }
  return records;
}

void emit_results(const std::vector<SweepRecord>& records, const std::string& path,
                  EmitFormat format) {
  if (records.empty()) throw ConfigError("emit_results: no records");
  const std::string& knob_name = records.front().knob_name;
  size_t max_seeds = 0;
  for (const auto& r : records) {
    if (r.knob_name != knob_name)
      throw ConfigError("emit_results: mixed sweep knobs '" + knob_name + "' and '" +
                        r.knob_name + "'");
    max_seeds = std::max(max_seeds, r.seeds.size());
  }

  std::ostringstream os;
  if (format == EmitFormat::csv) {
    os << knob_name;
    for (size_t i = 0; i < max_seeds; ++i) os << ",p_seed" << i;
    os << ",detected,error\n";
    for (const auto& r : records) {
      os << fmt_double(r.knob);
      for (size_t i = 0; i < max_seeds; ++i) {
        os << ',';
        if (i < r.p_values.size()) os << fmt_double(r.p_values[i]);
      }
      os << ',' << (r.detected ? 1 : 0) << ',' << r.error << '\n';
    }
  } else {
    json arr = json::array();
    for (const auto& r : records) {
      json j;
      j["knob_name"] = r.knob_name;
      j["knob"] = r.knob;
      j["seeds"] = r.seeds;
      j["p_values"] = r.p_values;
      j["detected"] = r.detected;
      if (!r.error.empty()) j["error"] = r.error;
      arr.push_back(j);
    }
    os << arr.dump(2) << "\n";
  }
  write_file_atomic(path, os.str());
}

}  // namespace lgc::experiments
