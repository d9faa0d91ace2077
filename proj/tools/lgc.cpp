// Command-line driver: synthetic data generation, training, Granger tests,
// sensitivity sweeps and the linear VAR baseline.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "lgc/datagen.hpp"
#include "lgc/errors.hpp"
#include "lgc/experiments.hpp"
#include "lgc/stats.hpp"
#include "lgc/training.hpp"

namespace fs = std::filesystem;
using namespace lgc;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string dataset = "synth1";
  std::string granger = "on";
  std::string csv_path;
  std::string out_dir;
  uint64_t seed = 0;
  CLI::Option* dataset_opt = nullptr;
  CLI::Option* granger_opt = nullptr;
  CLI::Option* seed_opt = nullptr;
};

void add_common(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("--config", a.config_path, "JSON experiment config (flags override it)");
  a.dataset_opt = cmd->add_option("--dataset", a.dataset, "synth1|synth2|csv")
                      ->check(CLI::IsMember({"synth1", "synth2", "csv"}));
  a.granger_opt = cmd->add_option("--granger", a.granger,
                                  "on|off: generate with/without the causal link")
                      ->check(CLI::IsMember({"on", "off"}));
  cmd->add_option("--csv", a.csv_path, "input CSV for --dataset csv");
  cmd->add_option("--out", a.out_dir, "output directory");
  a.seed_opt = cmd->add_option("--seed", a.seed, "run seed");
}

experiments::ExperimentConfig resolve_config(const CommonArgs& a) {
  experiments::DatasetSpec::Kind kind = experiments::DatasetSpec::Kind::synth1;
  if (a.dataset == "synth2") kind = experiments::DatasetSpec::Kind::synth2;
  if (a.dataset == "csv") kind = experiments::DatasetSpec::Kind::csv;

  experiments::ExperimentConfig cfg;
  if (!a.config_path.empty()) {
    cfg = experiments::load_config(a.config_path);
  } else {
    cfg = experiments::ExperimentConfig::defaults_for(kind);
  }
  if (a.dataset_opt->count() > 0) cfg.dataset.kind = kind;
  if (a.granger_opt->count() > 0 || a.config_path.empty())
    cfg.dataset.granger = a.granger == "on";
  if (!a.csv_path.empty()) cfg.dataset.csv_path = a.csv_path;
  if (!a.out_dir.empty()) cfg.out_dir = a.out_dir;
  if (a.seed_opt->count() > 0) cfg.seeds = {a.seed};
  return cfg;
}

void print_report(const stats::GrangerReport& r) {
  std::cout << stats::report_to_json(r);
}

int run(int argc, char** argv) {
  CLI::App app{"Granger-causality testing under latent confounding"};
  app.require_subcommand(1);

  CommonArgs gen_args, train_args, test_args, snr_args, tau_args, var_args;
  std::string gen_out = "bundle.csv";
  int gen_T = 1000;
  double gen_noise = -1.0;
  std::string test_checkpoint;
  int var_lag = 5;
  double var_alpha = 0.05;

  CLI::App* gen = app.add_subcommand("gen", "write a synthetic series bundle as CSV");
  add_common(gen, gen_args);
  gen->add_option("--T", gen_T, "series length");
  gen->add_option("--noise-std", gen_noise, "Y noise std (<0: dataset default)");
  gen->add_option("--file", gen_out, "output CSV path");

  CLI::App* tr = app.add_subcommand("train", "train the dual-decoder model, write a checkpoint");
  add_common(tr, train_args);

  CLI::App* gt = app.add_subcommand("granger-test",
                                    "end-to-end Granger verdict (or test an existing checkpoint)");
  add_common(gt, test_args);
  gt->add_option("--checkpoint", test_checkpoint, "skip training, test this checkpoint");

  CLI::App* snr = app.add_subcommand("sweep-snr", "bisection search for the detection SNR");
  add_common(snr, snr_args);

  CLI::App* tau = app.add_subcommand("sweep-seqlen", "p-values across training sequence lengths");
  add_common(tau, tau_args);

  CLI::App* var = app.add_subcommand("baseline-var", "linear VAR Granger baseline with F-test");
  add_common(var, var_args);
  var->add_option("--lag", var_lag, "maximum lag L");
  var->add_option("--alpha", var_alpha, "significance level");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (gen->parsed()) {
    experiments::ExperimentConfig cfg = resolve_config(gen_args);
    if (cfg.dataset.kind == experiments::DatasetSpec::Kind::csv)
      throw ConfigError("gen: only synthetic datasets can be generated");
    cfg.dataset.T = gen_T;
    cfg.dataset.noise_std_y = gen_noise;
    const datagen::SeriesBundle b =
        datagen::generate(cfg.dataset.gen_config(cfg.seeds.front()));
    datagen::save_csv_bundle(b, gen_out);
    std::cout << "wrote " << gen_out << " (" << b.length() << " rows)\n";
  } else if (tr->parsed()) {
    experiments::ExperimentConfig cfg = resolve_config(train_args);
    cfg.validate();
    const uint64_t seed = cfg.seeds.front();
    datagen::SeriesBundle b;
    if (cfg.dataset.kind == experiments::DatasetSpec::Kind::csv) {
      b = datagen::load_csv_bundle(cfg.dataset.csv_path);
      if (cfg.dataset.standardize) b = datagen::standardize(b).first;
    } else {
      b = datagen::generate(cfg.dataset.gen_config(seed));
    }
    training::TrainConfig tc = cfg.train;
    tc.seed = seed;
    const training::TrainResult res = training::train(b, tc, cfg.model);
    const std::string dir = cfg.out_dir.empty() ? "." : cfg.out_dir;
    fs::create_directories(dir);
    training::Checkpoint ck{1, res.params.cfg, tc, res.params, res.opt, res.history};
    const std::string path = (fs::path(dir) / "checkpoint.bin").string();
    training::save_checkpoint(ck, path);
    std::cout << "trained " << res.history.size() << " epochs (best epoch " << res.best_epoch
              << ", val loss " << res.best_val << "), checkpoint: " << path << "\n";
  } else if (gt->parsed()) {
    experiments::ExperimentConfig cfg = resolve_config(test_args);
    if (test_checkpoint.empty()) {
      const experiments::RunOutcome out = experiments::run_verdict(cfg, cfg.seeds.front());
      print_report(out.report);
      if (!out.artifact_dir.empty())
        std::cout << "artifacts: " << out.artifact_dir << "\n";
    } else {
      cfg.validate();
      const uint64_t seed = cfg.seeds.front();
      const training::Checkpoint ck = training::load_checkpoint(test_checkpoint);
      training::require_compatible(ck, ck.model_cfg);
      datagen::SeriesBundle b;
      if (cfg.dataset.kind == experiments::DatasetSpec::Kind::csv) {
        b = datagen::load_csv_bundle(cfg.dataset.csv_path);
        if (cfg.dataset.standardize) b = datagen::standardize(b).first;
      } else {
        b = datagen::generate(cfg.dataset.gen_config(seed));
      }
      const datagen::WindowSet ws = datagen::window_split(b, ck.train_cfg.seq_len);
      Rng stats_rng = Rng(seed).split(kStreamStats);
      const stats::ErrorSamples errors =
          stats::sample_prediction_errors(ck.params, ws, cfg.stats.n_samples, stats_rng);
      stats::GrangerReport rep = stats::decide_granger(errors, cfg.stats.alpha);
      rep.dataset = cfg.dataset.name();
      rep.seed = seed;
      print_report(rep);
    }
  } else if (snr->parsed()) {
    experiments::ExperimentConfig cfg = resolve_config(snr_args);
    const experiments::BisectionResult res = experiments::snr_bisection(cfg);
    std::printf("gamma* = %.4f (final bracket [%.4f, %.4f])\n", res.gamma_star, res.lo, res.hi);
    for (const auto& rec : res.records) {
      std::printf("  gamma %8.3f  detected %d  p:", rec.knob, rec.detected ? 1 : 0);
      for (double p : rec.p_values) std::printf(" %.4g", p);
      std::printf("\n");
    }
  } else if (tau->parsed()) {
    experiments::ExperimentConfig cfg = resolve_config(tau_args);
    const auto records = experiments::seqlen_sweep(cfg);
    for (const auto& rec : records) {
      if (!rec.error.empty()) {
        std::printf("  tau %3.0f  FAILED: %s\n", rec.knob, rec.error.c_str());
        continue;
      }
      std::printf("  tau %3.0f  detected %d  p:", rec.knob, rec.detected ? 1 : 0);
      for (double p : rec.p_values) std::printf(" %.4g", p);
      std::printf("\n");
    }
  } else if (var->parsed()) {
    experiments::ExperimentConfig cfg = resolve_config(var_args);
    datagen::SeriesBundle b;
    if (cfg.dataset.kind == experiments::DatasetSpec::Kind::csv) {
      b = datagen::load_csv_bundle(cfg.dataset.csv_path);
    } else {
      b = datagen::generate(cfg.dataset.gen_config(cfg.seeds.front()));
    }
    const stats::VarBaselineFit fit = stats::var_granger_baseline(b.x, b.y, var_lag, var_alpha);
    std::printf("VAR baseline: L=%d, F=%.4f, p=%.6g, RSS %.6g -> %.6g, verdict: %s\n", fit.lag,
                fit.f_stat, fit.p, fit.rss_restricted, fit.rss_full,
                fit.granger ? "granger" : "not_granger");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const SchemaError& e) {
    std::cerr << "schema error: " << e.what() << "\n";
    return 2;
  } catch (const DomainError& e) {
    std::cerr << "domain error: " << e.what() << "\n";
    return 2;
  } catch (const ShapeError& e) {
    std::cerr << "shape error: " << e.what() << "\n";
    return 2;
  } catch (const ContractError& e) {
    std::cerr << "contract error: " << e.what() << "\n";
    return 2;
  } catch (const BracketError& e) {
    std::cerr << "bracket error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const SingularError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const DegenerateError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 4;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 4;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
