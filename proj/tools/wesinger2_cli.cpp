// Command-line front end: data preparation, training, synthesis, evaluation
// and benchmarking.

#include "wesinger2/audio_io.hpp"
#include "wesinger2/error.hpp"
#include "wesinger2/experiment_config.hpp"
#include "wesinger2/feature_cache.hpp"
#include "wesinger2/metrics.hpp"
#include "wesinger2/nn_util.hpp"
#include "wesinger2/synthesis.hpp"
#include "wesinger2/toy_corpus.hpp"
#include "wesinger2/trainer.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace wesinger2;

namespace {

ExperimentConfig config_or_default(const std::string& path) {
  return path.empty() ? ExperimentConfig::preset("full") : load_experiment_config(path);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
  out << text;
}

struct TrainArgs {
  std::string config;
  std::string cache;
  std::string out;
  std::string resume;
  long steps = 0;
  bool verbose = false;
};

void add_train_options(CLI::App* cmd, TrainArgs& a) {
  cmd->add_option("--config", a.config, "TOML experiment config")->required()->check(CLI::ExistingFile);
  cmd->add_option("--cache", a.cache, "feature cache (overrides train.cache_dir)");
  cmd->add_option("--out", a.out, "run directory (overrides train.out_dir)");
  cmd->add_option("--resume", a.resume, "checkpoint to resume from");
  cmd->add_option("--steps", a.steps, "stop after this many steps");
  cmd->add_flag("-v,--verbose", a.verbose, "print every logged row");
}

int run_training(const TrainArgs& a, bool vocoder) {
  auto cfg = load_experiment_config(a.config);
  if (!a.cache.empty()) cfg.train.cache_dir = a.cache;
  if (!a.out.empty()) cfg.train.out_dir = a.out;
  if (!a.resume.empty()) cfg.train.resume = a.resume;
  if (cfg.train.cache_dir.empty()) fail(ErrorCode::InvalidConfig, "no feature cache given (train.cache_dir or --cache)");
  const auto data = load_training_set(cfg.train.cache_dir, vocoder);
  TrainHooks hooks;
  hooks.stop_after = a.steps;
  hooks.quiet = !a.verbose;
  const auto summary = vocoder ? train_vocoder(cfg, data, hooks) : train_acoustic(cfg, data, hooks);
  std::cout << "trained to step " << summary.last_step << "\ncheckpoint " << summary.checkpoint.string()
            << "\nmetrics " << summary.metrics_csv.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"wesinger2: singing voice synthesis toolkit"};
  app.require_subcommand(1);

  std::string manifest, out_dir, config_path;
  auto* prepare = app.add_subcommand("prepare", "extract features for every clip of a manifest");
  prepare->add_option("--manifest", manifest, "JSONL manifest")->required()->check(CLI::ExistingFile);
  prepare->add_option("--out", out_dir, "cache directory")->required();
  prepare->add_option("--config", config_path, "TOML config ([features] is used)");

  TrainArgs am_args, voc_args;
  add_train_options(app.add_subcommand("train-am", "train the acoustic model with MRAD critics"), am_args);
  add_train_options(app.add_subcommand("train-voc", "train the vocoder with waveform critics"), voc_args);

  std::string am_ckpt, voc_ckpt, score_path, singer, wav_out;
  bool predicted = false;
  auto* synth = app.add_subcommand("synth", "synthesize a score");
  synth->add_option("--am", am_ckpt, "acoustic checkpoint")->required()->check(CLI::ExistingFile);
  synth->add_option("--voc", voc_ckpt, "vocoder checkpoint")->required()->check(CLI::ExistingFile);
  synth->add_option("--score", score_path, "score text file")->required()->check(CLI::ExistingFile);
  synth->add_option("--singer", singer, "singer name")->required();
  synth->add_option("--out", wav_out, "output wav")->required();
  synth->add_flag("--predicted-durations", predicted, "use the duration predictor instead of score durations");

  std::string ref_dir, hyp_dir, json_out, csv_out;
  auto* eval = app.add_subcommand("eval", "F0 RMSE and mel distortion between two directories of wavs");
  eval->add_option("--ref", ref_dir, "reference wavs")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--hyp", hyp_dir, "generated wavs")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--json", json_out, "write the JSON report here (default: stdout)");
  eval->add_option("--csv", csv_out, "write the per-clip CSV table here");
  eval->add_option("--config", config_path, "TOML config ([features] is used)");

  double bench_seconds = 10.0;
  int bench_repeats = 3;
  std::string bench_am;
  auto* bench = app.add_subcommand("bench", "single-thread vocoder throughput");
  bench->add_option("--voc", voc_ckpt, "vocoder checkpoint")->required()->check(CLI::ExistingFile);
  bench->add_option("--am", bench_am, "acoustic checkpoint (adds its parameter count)")->check(CLI::ExistingFile);
  bench->add_option("--seconds", bench_seconds, "audio seconds per run");
  bench->add_option("--repeats", bench_repeats, "timed runs");

  int demo_singers = 2, demo_clips = 3;
  double demo_seconds = 4.0;
  std::uint64_t demo_seed = 7;
  auto* demo = app.add_subcommand("make-demo", "render a small synthetic corpus with a manifest");
  demo->add_option("--out", out_dir, "output directory")->required();
  demo->add_option("--singers", demo_singers, "number of singers");
  demo->add_option("--clips", demo_clips, "clips per singer");
  demo->add_option("--seconds", demo_seconds, "clip length");
  demo->add_option("--seed", demo_seed, "random seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*prepare) {
      const auto cfg = config_or_default(config_path);
      const auto index = prepare_cache(read_manifest(manifest), out_dir, cfg.features);
      std::cout << "prepared " << index.clip_ids.size() << " clips for " << index.singers.size() << " singers";
      if (!index.skipped.empty()) std::cout << " (" << index.skipped.size() << " skipped, no voiced frames)";
      std::cout << '\n';
    } else if (app.got_subcommand("train-am")) {
      return run_training(am_args, false);
    } else if (app.got_subcommand("train-voc")) {
      return run_training(voc_args, true);
    } else if (*synth) {
      auto am = load_acoustic(am_ckpt);
      auto voc = load_vocoder(voc_ckpt);
      SynthesisOptions opts;
      opts.use_gt_duration = !predicted;
      const auto result = synthesize(am, voc, parse_score(score_path), singer, opts);
      write_wav(wav_out, result.audio);
      std::cout << "wrote " << wav_out << " (" << result.audio.duration_s() << " s)\n";
    } else if (*eval) {
      const auto cfg = config_or_default(config_path);
      const auto report = evaluate_directories(ref_dir, hyp_dir, cfg.features);
      if (!csv_out.empty()) write_text(csv_out, report_to_csv(report));
      if (json_out.empty())
        std::cout << report_to_json(report) << '\n';
      else
        write_text(json_out, report_to_json(report));
    } else if (*bench) {
      auto voc = load_vocoder(voc_ckpt);
      auto report = bench_vocoder(voc.generator, bench_seconds, voc.config.features.sample_rate, bench_repeats);
      if (!bench_am.empty()) report.am_params = count_parameters(*load_acoustic(bench_am).model);
      std::cout << bench_to_json(report).dump() << '\n';
    } else if (*demo) {
      const auto records = make_toy_corpus(out_dir, demo_singers, demo_clips, demo_seconds, demo_seed);
      std::cout << "wrote " << records.size() << " clips and " << (fs::path(out_dir) / "manifest.jsonl").string()
                << '\n';
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
