#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "lgc/datagen.hpp"
#include "lgc/errors.hpp"
#include "lgc/training.hpp"

using namespace lgc;
using diff::Matrix;
using training::Checkpoint;
using training::TrainConfig;
using training::TrainResult;

namespace {

datagen::SeriesBundle small_bundle(uint64_t seed = 0) {
  datagen::GenConfig cfg;
  cfg.dataset_id = 1;
  cfg.granger = true;
  cfg.T = 120;
  cfg.seed = seed;
  return datagen::generate(cfg);
}

TrainConfig quick_config() {
  TrainConfig tc;
  tc.seq_len = 6;
  tc.batch_size = 8;
  tc.max_epochs = 8;
  tc.patience = 4;
  tc.seed = 42;
  return tc;
}

model::ModelConfig tiny_model() {
  model::ModelConfig mc;
  mc.gru_hidden = 3;
  mc.mlp_hidden = 3;
  return mc;
}

bool params_equal(const model::ModelParams& a, const model::ModelParams& b) {
  bool same = true;
  std::vector<const Matrix*> lhs;
  a.for_each_tensor([&](const std::string&, const Matrix& m) { lhs.push_back(&m); });
  size_t i = 0;
  b.for_each_tensor([&](const std::string&, const Matrix& m) {
    if (!(*lhs[i++] == m)) same = false;
  });
  return same;
}

std::string temp_file(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("train config validation") {
  TrainConfig tc = quick_config();
  tc.patience = tc.max_epochs;
  CHECK_THROWS_AS(training::train(small_bundle(), tc, tiny_model()), ConfigError);
  tc = quick_config();
  tc.batch_size = 0;
  CHECK_THROWS_AS(training::train(small_bundle(), tc, tiny_model()), ConfigError);
  tc = quick_config();
  tc.seq_len = 200;  // no split can hold a window this long
  CHECK_THROWS_AS(training::train(small_bundle(), tc, tiny_model()), ConfigError);
}

TEST_CASE("max_epochs = 0 returns initialized params and empty history") {
  TrainConfig tc = quick_config();
  tc.max_epochs = 0;
  tc.patience = 0;
  const TrainResult res = training::train(small_bundle(), tc, tiny_model());
  CHECK(res.history.empty());
  CHECK(res.best_epoch == -1);

  Rng init = Rng(tc.seed).split(kStreamInit);
  model::ModelConfig mc = tiny_model();
  mc.n_proxies = 1;
  const model::ModelParams fresh = model::ModelParams::init(mc, init);
  CHECK(params_equal(res.params, fresh));
}

TEST_CASE("training is reproducible under a fixed seed") {
  const datagen::SeriesBundle b = small_bundle(3);
  const TrainConfig tc = quick_config();
  const TrainResult r1 = training::train(b, tc, tiny_model());
  const TrainResult r2 = training::train(b, tc, tiny_model());
  REQUIRE(r1.history.size() == r2.history.size());
  for (size_t i = 0; i < r1.history.size(); ++i) {
    CHECK(r1.history[i].train_loss == r2.history[i].train_loss);
    CHECK(r1.history[i].val_loss == r2.history[i].val_loss);
  }
  CHECK(params_equal(r1.params, r2.params));
}

TEST_CASE("training reduces validation loss on dataset 1") {
  datagen::GenConfig g;
  g.dataset_id = 1;
  g.granger = true;
  g.T = 300;
  g.seed = 11;
  const datagen::SeriesBundle b = datagen::generate(g);
  TrainConfig tc;
  tc.seq_len = 10;
  tc.max_epochs = 15;
  tc.patience = 14;
  tc.seed = 0;
  const TrainResult res = training::train(b, tc, tiny_model());
  REQUIRE(!res.history.empty());
  CHECK(res.history.back().val_loss < res.history.front().val_loss);
  CHECK(res.best_val <= res.history.front().val_loss);
}

TEST_CASE("early stopping returns the best-validation parameters") {
  const datagen::SeriesBundle b = small_bundle(5);
  TrainConfig tc = quick_config();
  tc.max_epochs = 10;
  tc.patience = 3;
  const TrainResult res = training::train(b, tc, tiny_model());
  REQUIRE(res.best_epoch >= 0);

  double min_val = res.history.front().val_loss;
  for (const auto& e : res.history) min_val = std::min(min_val, e.val_loss);
  CHECK(res.best_val == min_val);
  CHECK(res.history[res.best_epoch].val_loss == min_val);

  // the returned parameters really achieve the recorded best loss
  const datagen::WindowSet ws = datagen::window_split(b, tc.seq_len);
  Rng r(0);
  const double replayed =
      training::evaluate(res.params, ws.val, model::SampleMode::deterministic, 1, r);
  CHECK(replayed == doctest::Approx(min_val).epsilon(1e-12));
}

TEST_CASE("checkpoint round trip is bit-exact") {
  const datagen::SeriesBundle b = small_bundle(7);
  TrainConfig tc = quick_config();
  tc.max_epochs = 2;
  tc.patience = 1;
  const TrainResult res = training::train(b, tc, tiny_model());

  Checkpoint ck;
  ck.model_cfg = res.params.cfg;
  ck.train_cfg = tc;
  ck.params = res.params;
  ck.opt = res.opt;
  ck.history = res.history;

  const std::string path = temp_file("lgc_test_ckpt.bin");
  training::save_checkpoint(ck, path);
  const Checkpoint back = training::load_checkpoint(path);

  CHECK(params_equal(back.params, ck.params));
  REQUIRE(back.opt.size() == ck.opt.size());
  for (size_t i = 0; i < ck.opt.size(); ++i) {
    CHECK(back.opt[i].t == ck.opt[i].t);
    CHECK(back.opt[i].m == ck.opt[i].m);
    CHECK(back.opt[i].v == ck.opt[i].v);
  }
  REQUIRE(back.history.size() == ck.history.size());
  for (size_t i = 0; i < ck.history.size(); ++i) {
    CHECK(back.history[i].train_loss == ck.history[i].train_loss);
    CHECK(back.history[i].val_loss == ck.history[i].val_loss);
  }
  CHECK(back.train_cfg.seed == tc.seed);
  CHECK(back.train_cfg.lr == tc.lr);
  CHECK(training::checkpoint_id(back.params) == training::checkpoint_id(ck.params));
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint corruption and version errors") {
  const datagen::SeriesBundle b = small_bundle(9);
  TrainConfig tc = quick_config();
  tc.max_epochs = 2;
  tc.patience = 1;
  const TrainResult res = training::train(b, tc, tiny_model());
  Checkpoint ck{1, res.params.cfg, tc, res.params, res.opt, res.history};

  const std::string path = temp_file("lgc_test_ckpt2.bin");
  training::save_checkpoint(ck, path);

  // truncation
  {
    std::ifstream in(path, std::ios::binary);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::ofstream out(path + ".trunc", std::ios::binary);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size() / 2));
  }
  CHECK_THROWS_AS(training::load_checkpoint(path + ".trunc"), ParseError);

  // flipped payload byte -> checksum failure
  {
    std::ifstream in(path, std::ios::binary);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    buf[buf.size() / 2] = static_cast<char>(buf[buf.size() / 2] ^ 0x5A);
    std::ofstream out(path + ".corrupt", std::ios::binary);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  }
  CHECK_THROWS_AS(training::load_checkpoint(path + ".corrupt"), ParseError);

  // wrong magic
  {
    std::ofstream out(path + ".magic", std::ios::binary);
    out << "NOTACKPTxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx";
  }
  CHECK_THROWS_AS(training::load_checkpoint(path + ".magic"), ParseError);

  CHECK_THROWS_AS(training::load_checkpoint(temp_file("lgc_ckpt_missing.bin")), IoError);

  // shape mismatch against a different expected architecture
  model::ModelConfig other = res.params.cfg;
  other.gru_hidden = res.params.cfg.gru_hidden + 2;
  try {
    training::require_compatible(ck, other);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("proxy_gru.wz") != std::string::npos);
  }

  for (const char* suffix : {".trunc", ".corrupt", ".magic"})
    std::filesystem::remove(path + suffix);
  std::filesystem::remove(path);
}
