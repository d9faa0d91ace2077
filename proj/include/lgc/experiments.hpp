#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lgc/datagen.hpp"
#include "lgc/model.hpp"
#include "lgc/stats.hpp"
#include "lgc/training.hpp"

namespace lgc::experiments {

struct DatasetSpec {
  enum class Kind { synth1, synth2, csv };
  Kind kind = Kind::synth1;
  bool granger = true;
  int T = 1000;
  double noise_std_y = -1.0;  // <0 -> dataset default
  int burn_in = 50;
  std::string csv_path;
  bool standardize = false;  // fitted on the train split; default on for csv

  std::string name() const;
  datagen::GenConfig gen_config(uint64_t seed) const;
};

struct StatsParams {
  int n_samples = 50;
  double alpha = 0.05;
};

struct SweepParams {
  double gamma_lo = 10.0;
  double gamma_hi = 100.0;
  double gamma_tol = 2.0;
  int k_seeds = 3;
  std::vector<int> taus = {4, 6, 8, 10, 12, 14, 16};
};

struct ExperimentConfig {
  DatasetSpec dataset;
  model::ModelConfig model;
  training::TrainConfig train;
  StatsParams stats;
  SweepParams sweep;
  std::vector<uint64_t> seeds = {0, 1, 2, 3, 4};
  std::string out_dir;  // empty -> nothing persisted

  void validate() const;
  static ExperimentConfig defaults_for(DatasetSpec::Kind kind);
};

std::string config_to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const std::string& text);
ExperimentConfig load_config(const std::string& path);

struct RunOutcome {
  stats::GrangerReport report;
  std::vector<training::EpochStats> history;
  double sigma_y = 0.0;        // realised Y noise std (synthetic runs)
  std::string artifact_dir;    // empty when nothing was persisted
};

// Full pipeline for one seed: generate/load -> split -> train -> sample
// errors -> decide. Persists config snapshot, checkpoint, error samples and
// report under out_dir when set.
RunOutcome run_verdict(const ExperimentConfig& cfg, uint64_t run_seed);

// One sweep evaluation point: knob value, the per-seed detection p-values
// (one-sided, H1: full error < restricted error) and the majority decision.
struct SweepRecord {
  std::string knob_name;  // "gamma" or "tau"
  double knob = 0.0;
  std::vector<uint64_t> seeds;
  std::vector<double> p_values;
  bool detected = false;
  std::string error;  // non-empty when this cell failed
};

struct BisectionResult {
  double gamma_star = 0.0;
  double lo = 0.0, hi = 0.0;  // final bracket
  std::vector<SweepRecord> records;
};

// Generic bisection over a noisy boolean predicate. Requires
// eval(lo).detected == false and eval(hi).detected == true; maintains that
// bracket invariant and halts once hi - lo <= tol.
BisectionResult bisect_detection(double lo, double hi, double tol,
                                 const std::function<SweepRecord(double)>& eval);

// SNR threshold search for a synthetic Granger dataset: at each gamma the Y
// noise std is retargeted per seed and the detection predicate is a majority
// vote over k_seeds trained models.
BisectionResult snr_bisection(const ExperimentConfig& cfg);

// Trains and tests once per sequence length; cell failures are recorded and
// never abort the remaining cells.
std::vector<SweepRecord> seqlen_sweep(const ExperimentConfig& cfg);

enum class EmitFormat { csv, json };

// Writes sweep records (one row per record, deterministic column order) to
// `path`; atomic overwrite. All records must share one knob kind.
void emit_results(const std::vector<SweepRecord>& records, const std::string& path,
                  EmitFormat format);

}  // namespace lgc::experiments
