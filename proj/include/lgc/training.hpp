#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lgc/datagen.hpp"
#include "lgc/model.hpp"
#include "lgc/tape.hpp"

namespace lgc::training {

struct TrainConfig {
  double lr = 0.001;
  int batch_size = 10;
  int seq_len = 20;
  int max_epochs = 300;
  int patience = 20;
  uint64_t seed = 0;
  int mc_samples = 1;
  bool deterministic_latent = false;  // test-only: means through all sampling sites

  void validate() const;
};

struct EpochStats {
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainResult {
  model::ModelParams params;            // best-validation parameters
  std::vector<diff::AdamState> opt;     // optimizer state at stop, canonical tensor order
  std::vector<EpochStats> history;
  int best_epoch = -1;                  // -1 when no epoch ran
  double best_val = 0.0;
};

// Mini-batch ADAM on the joint objective with early stopping on validation
// loss (validation runs with deterministic sampling so the stopping signal
// is noise-free). Returns the parameters of the best validation epoch.
TrainResult train(const datagen::SeriesBundle& bundle, const TrainConfig& cfg,
                  const model::ModelConfig& mcfg);

// Mean per-window objective of a window list; no parameter updates.
double evaluate(const model::ModelParams& params, const std::vector<datagen::Window>& windows,
                model::SampleMode mode, int mc_samples, Rng& rng);

struct Checkpoint {
  uint32_t version = 1;
  model::ModelConfig model_cfg;
  TrainConfig train_cfg;
  model::ModelParams params;
  std::vector<diff::AdamState> opt;
  std::vector<EpochStats> history;
};

// Binary container, little-endian, layout documented in docs/checkpoint.md.
// Round trip is bit-exact for every tensor.
void save_checkpoint(const Checkpoint& c, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Throws ShapeError naming the first tensor whose shape disagrees with what
// `expected` would allocate.
void require_compatible(const Checkpoint& c, const model::ModelConfig& expected);

// FNV-1a hash of the parameter payload; stable provenance id.
std::string checkpoint_id(const model::ModelParams& params);

}  // namespace lgc::training
