#include "wesinger2/trainer.hpp"

#include "wesinger2/checkpoint.hpp"
#include "wesinger2/critics.hpp"
#include "wesinger2/error.hpp"
#include "wesinger2/feature_config_json.hpp"
#include "wesinger2/mrad.hpp"
#include "wesinger2/vocoder.hpp"

#include <cmath>
#include <cstdio>
#include <iostream>
#include <memory>
#include <optional>

namespace wesinger2 {

namespace fs = std::filesystem;
using nlohmann::json;

double metric(const MetricRow& row, const std::string& name) {
  for (const auto& [k, v] : row)
    if (k == name) return v;
  fail(ErrorCode::InvalidConfig, "no metric named " + name);
}

MetricsCsv::MetricsCsv(const fs::path& path, std::string tag, bool append)
    : tag_(std::move(tag)), header_written_(append && fs::exists(path) && fs::file_size(path) > 0) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  out_.open(path, append ? std::ios::app : std::ios::trunc);
  if (!out_) fail(ErrorCode::Io, "cannot open metrics file " + path.string());
}

void MetricsCsv::write(const MetricRow& row) {
  if (!header_written_) {
    out_ << "tag";
    for (const auto& [k, v] : row) out_ << ',' << k;
    out_ << '\n';
    header_written_ = true;
  }
  out_ << tag_;
  char buf[32];
  for (const auto& [k, v] : row) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out_ << ',' << buf;
  }
  out_ << '\n';
  out_.flush();
}

fs::path checkpoint_path(const fs::path& out_dir, const std::string& kind, long step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "_%08ld.pt", step);
  return out_dir / (kind + buf);
}

ExperimentConfig bind_to_data(const ExperimentConfig& cfg, const TrainingSet& data) {
  ExperimentConfig c = cfg;
  if (feature_config_to_json(c.features) != feature_config_to_json(data.features)) c.features = data.features;
  const int n_singers = static_cast<int>(data.singers.size());
  c.acoustic.n_phonemes = data.inventory.size();
  c.acoustic.n_singers = n_singers;
  c.mrad.n_singers = n_singers;
  c.mrad.n_bands = c.features.n_mels;
  c.critics.n_singers = n_singers;
  c.critics.sample_rate = c.features.sample_rate;
  c.stft.sample_rate = c.features.sample_rate;
  c.stft.mel_fmax = c.features.mel_fmax;
  c.vocoder.n_mels = c.features.n_mels;
  c.validate();
  c.acoustic.validate();
  if (c.train.phase == Phase::Finetune) data.singer_index(c.train.target_singer);
  return c;
}

namespace {

/// Uniform clip draws while pre-training, the adaptation sampler while fine-tuning.
class ClipPicker {
 public:
  ClipPicker(const ExperimentConfig& cfg, const TrainingSet& data) : n_(data.clips.size()) {
    if (cfg.train.phase == Phase::Finetune)
      sampler_.emplace(data.clip_singers(), cfg.train.target_singer, cfg.train.p_target);
  }

  std::vector<std::size_t> draw(int batch, std::mt19937_64& rng) const {
    if (sampler_) return sampler_->draw_many(static_cast<std::size_t>(batch), rng);
    std::uniform_int_distribution<std::size_t> pick(0, n_ - 1);
    std::vector<std::size_t> out(static_cast<std::size_t>(batch));
    for (auto& i : out) i = pick(rng);
    return out;
  }

 private:
  std::size_t n_;
  std::optional<AdaptationSampler> sampler_;
};

void set_lr(torch::optim::Optimizer& opt, double lr) {
  for (auto& group : opt.param_groups()) static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);
}

[[noreturn]] void abort_non_finite(const fs::path& out_dir, long step, const std::string& what, const MetricRow& row) {
  json dump = {{"step", step}, {"where", what}};
  for (const auto& [k, v] : row) dump["metrics"][k] = std::isfinite(v) ? json(v) : json(std::to_string(v));
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::ofstream(out_dir / "nonfinite.json") << dump.dump(2) << '\n';
  }
  fail(ErrorCode::NonFiniteLoss, "non-finite " + what + " at step " + std::to_string(step) + ": " + dump.dump());
}

/// Aborts before an optimizer step that would apply a non-finite gradient.
void guard_gradients(const std::vector<torch::Tensor>& params, const fs::path& out_dir, long step,
                     const std::string& what, const MetricRow& row) {
  for (const auto& p : params) {
    const auto& g = p.grad();
    if (g.defined() && !torch::isfinite(g).all().item<bool>()) abort_non_finite(out_dir, step, what + " gradient", row);
  }
}

void guard_value(double v, const fs::path& out_dir, long step, const std::string& what, const MetricRow& row) {
  if (!std::isfinite(v)) abort_non_finite(out_dir, step, what, row);
}

CheckpointMeta base_meta(const ExperimentConfig& cfg, const TrainingSet& data, const char* format,
                         const char* critic_format) {
  CheckpointMeta m;
  m.format = format;
  m.critic_format = critic_format ? critic_format : "";
  m.phase = cfg.train.phase;
  m.tag = cfg.train.tag;
  m.config = to_json(cfg);
  m.config_hash = hash_hex(config_hash(m.config));
  m.features_hash = hash_hex(config_hash(feature_config_to_json(cfg.features)));
  m.singers = data.singers;
  m.phonemes = data.inventory.symbols();
  m.stats = singer_stats_to_json(data.stats);
  return m;
}

json row_json(const MetricRow& row) {
  json j = json::object();
  for (const auto& [k, v] : row) j[k] = v;
  return j;
}

bool wants_checkpoint(const ExperimentConfig& cfg, const TrainHooks& hooks, long step, long last) {
  if (step == last || step % cfg.train.checkpoint_every == 0) return true;
  return std::find(hooks.checkpoint_steps.begin(), hooks.checkpoint_steps.end(), step) != hooks.checkpoint_steps.end();
}

void print_row(const std::string& kind, const MetricRow& row) {
  std::cout << kind;
  for (const auto& [k, v] : row) std::cout << ' ' << k << '=' << v;
  std::cout << std::endl;
}

/// Region/crop randomness is kept apart from data order so that disabling
/// the critics leaves the batches untouched.
constexpr std::uint64_t kAuxStream = 0x9E3779B97F4A7C15ULL;

/// Reject warm-start weights built on different features.
void check_features(const CheckpointMeta& meta, const ExperimentConfig& cfg, const fs::path& path) {
  const auto expected = hash_hex(config_hash(feature_config_to_json(cfg.features)));
  if (meta.features_hash != expected)
    fail(ErrorCode::IncompatibleCheckpoints, path.string() + " was trained on different features");
}

}  // namespace

TrainSummary train_acoustic(const ExperimentConfig& cfg_in, const TrainingSet& data, const TrainHooks& hooks) {
  const ExperimentConfig cfg = bind_to_data(cfg_in, data);
  const auto& tc = cfg.train;
  const fs::path out_dir = tc.out_dir.empty() ? fs::path("runs") / tc.tag : fs::path(tc.out_dir);
  torch::set_num_threads(tc.threads);
  torch::manual_seed(tc.seed);

  AcousticModel model(cfg.acoustic);
  std::optional<MradEnsemble> critic;
  if (tc.adversarial) critic.emplace(cfg.mrad);
  torch::optim::Adam opt_g(model->parameters(), torch::optim::AdamOptions(tc.lr_init).betas({0.9, 0.98}));
  std::unique_ptr<torch::optim::Adam> opt_d;
  if (critic)
    opt_d = std::make_unique<torch::optim::Adam>((*critic)->parameters(),
                                                 torch::optim::AdamOptions(tc.lr_init).betas({0.9, 0.98}));

  std::mt19937_64 data_rng(tc.seed);
  std::mt19937_64 region_rng(tc.seed ^ kAuxStream);
  const ClipPicker picker(cfg, data);
  const auto schedule = tc.schedule();
  const double lambda_adv = cfg.lambda_adv();
  const double lambda_l1 = cfg.mrad.lambda_l1;

  CheckpointParts parts{model.ptr().get(), critic ? critic->ptr().get() : nullptr, &opt_g, opt_d.get()};
  long step0 = 0;
  if (!tc.resume.empty()) {
    const auto meta = load_checkpoint(tc.resume, kAcousticFormat, parts);
    check_features(meta, cfg, tc.resume);
    step0 = meta.step;
    restore_rng(data_rng, meta.data_rng);
    restore_rng(region_rng, meta.aux_rng);
  } else if (!tc.init_checkpoint.empty()) {
    const auto meta = load_checkpoint(tc.init_checkpoint, kAcousticFormat,
                                      {model.ptr().get(), critic ? critic->ptr().get() : nullptr, nullptr, nullptr});
    check_features(meta, cfg, tc.init_checkpoint);
  }

  TrainSummary summary;
  summary.metrics_csv = out_dir / "metrics_am.csv";
  MetricsCsv csv(summary.metrics_csv, tc.tag, !tc.resume.empty());
  const long last = hooks.stop_after > 0 ? std::min(hooks.stop_after, tc.total_steps) : tc.total_steps;
  const auto g_params = model->parameters();
  const auto d_params = critic ? (*critic)->parameters() : std::vector<torch::Tensor>{};

  for (long step = step0 + 1; step <= last; ++step) {
    torch::manual_seed(tc.seed + static_cast<std::uint64_t>(step));
    const double lr = lr_at(step, schedule);
    set_lr(opt_g, lr);
    if (opt_d) set_lr(*opt_d, lr);

    const auto batch = make_acoustic_batch(data, picker.draw(tc.batch_size, data_rng), tc.max_frames, data_rng);
    const auto& singer = batch.tokens.singer;
    model->train();
    auto out = model->forward(batch.tokens, batch.tokens.durations);

    MetricRow row{{"step", static_cast<double>(step)}, {"lr", lr}};
    std::array<double, kNumRegionCritics> real_sum{}, fake_sum{};
    std::array<int, kNumRegionCritics> seen{};
    double d_total = 0.0;
    if (critic) {
      auto d = progressive_loss_d(**critic, out.blocks, batch.target, singer, batch.min_frames, region_rng);
      d_total = d.d_total.item<double>();
      guard_value(d_total, out_dir, step, "critic loss", row);
      opt_d->zero_grad();
      d.d_total.backward();
      guard_gradients(d_params, out_dir, step, "critic", row);
      opt_d->step();
      for (const auto& s : d.scores)
        for (int i = 0; i < kNumRegionCritics; ++i)
          if (s.active[i]) {
            real_sum[i] += s.real_mean[i];
            fake_sum[i] += s.fake_mean[i];
            ++seen[i];
          }
    }

    torch::Tensor g_total, l1_total, adv_total;
    if (critic) {
      auto g = progressive_loss_g(**critic, out.blocks, batch.target, batch.frame_mask, singer, lambda_adv, lambda_l1,
                                  batch.min_frames, region_rng);
      g_total = g.g_total;
      l1_total = g.l1_total;
      adv_total = g.adv_total;
    } else {
      g_total = torch::zeros({}, batch.target.options());
      l1_total = torch::zeros({}, batch.target.options());
      for (const auto& block : out.blocks) {
        auto l1 = masked_l1(block, batch.target, batch.frame_mask);
        g_total = g_total + lambda_l1 * l1;
        l1_total = l1_total + l1;
      }
      adv_total = torch::zeros({}, batch.target.options());
    }
    auto dur = duration_loss(out.log_durations, batch.tokens.durations, batch.tokens.mask);
    auto grl = model->singer_adversarial_loss(out.encoder_hidden, batch.tokens.mask, singer);
    auto total = g_total + tc.lambda_dur * dur + tc.lambda_grl * grl;

    double mel_l1 = 0.0;
    {
      torch::NoGradGuard ng;
      mel_l1 = masked_l1(out.blocks.back().narrow(2, 0, kMelBands), batch.target.narrow(2, 0, kMelBands),
                         batch.frame_mask)
                   .item<double>();
    }
    double real_mean = 0.0, fake_mean = 0.0;
    int active = 0;
    for (int i = 0; i < kNumRegionCritics; ++i)
      if (seen[i] > 0) {
        real_mean += real_sum[i] / seen[i];
        fake_mean += fake_sum[i] / seen[i];
        ++active;
      }
    if (active > 0) {
      real_mean /= active;
      fake_mean /= active;
    }
    row.insert(row.end(), {{"g_total", total.item<double>()},
                           {"d_total", d_total},
                           {"l1_total", l1_total.item<double>()},
                           {"mel_l1", mel_l1},
                           {"adv_total", adv_total.item<double>()},
                           {"dur_loss", dur.item<double>()},
                           {"grl_loss", grl.item<double>()},
                           {"real_mean", real_mean},
                           {"fake_mean", fake_mean},
                           {"score_gap", real_mean - fake_mean}});
    for (int i = 0; i < kNumRegionCritics; ++i) {
      row.emplace_back("real_" + std::to_string(i), seen[i] ? real_sum[i] / seen[i] : 0.0);
      row.emplace_back("fake_" + std::to_string(i), seen[i] ? fake_sum[i] / seen[i] : 0.0);
    }
    guard_value(metric(row, "g_total"), out_dir, step, "generator loss", row);

    opt_g.zero_grad();
    total.backward();
    guard_gradients(g_params, out_dir, step, "generator", row);
    opt_g.step();

    summary.history.push_back(row);
    if (step % tc.log_every == 0 || step == last) {
      csv.write(row);
      if (!hooks.quiet) print_row("am", row);
    }
    if (hooks.on_step) hooks.on_step(row);
    if (wants_checkpoint(cfg, hooks, step, last)) {
      auto meta = base_meta(cfg, data, kAcousticFormat, critic ? kMradFormat : nullptr);
      meta.step = step;
      meta.metrics = row_json(row);
      meta.data_rng = rng_state(data_rng);
      meta.aux_rng = rng_state(region_rng);
      summary.checkpoint = checkpoint_path(out_dir, "am", step);
      save_checkpoint(summary.checkpoint, meta, parts);
    }
    summary.last_step = step;
  }
  return summary;
}

namespace {

/// Critic stand-in for reconstruction-only vocoder training.
class NoCritic : public WaveCritic {
 public:
  std::vector<torch::Tensor> scores(const torch::Tensor&, const torch::Tensor&, const CropPlan&) override {
    return {};
  }
};

}  // namespace

TrainSummary train_vocoder(const ExperimentConfig& cfg_in, const TrainingSet& data, const TrainHooks& hooks) {
  const ExperimentConfig cfg = bind_to_data(cfg_in, data);
  const auto& tc = cfg.train;
  const fs::path out_dir = tc.out_dir.empty() ? fs::path("runs") / tc.tag : fs::path(tc.out_dir);
  torch::set_num_threads(tc.threads);
  torch::manual_seed(tc.seed);

  const int hop = cfg.features.hop_size;
  const int segment_frames =
      static_cast<int>(std::lround(tc.segment_seconds * cfg.features.sample_rate / static_cast<double>(hop)));
  if (static_cast<std::int64_t>(segment_frames) * hop < cfg.critics.min_samples())
    fail(ErrorCode::TooShort, "training segment shorter than the critics' minimum input");

  VocoderGenerator gen(cfg.vocoder);
  std::optional<CriticEnsemble> critic;
  if (tc.adversarial) critic.emplace(cfg.critics);
  NoCritic no_critic;
  WaveCritic& scorer = critic ? static_cast<WaveCritic&>(**critic) : static_cast<WaveCritic&>(no_critic);

  torch::optim::Adam opt_g(gen->parameters(), torch::optim::AdamOptions(tc.lr_init).betas({0.8, 0.99}));
  std::unique_ptr<torch::optim::Adam> opt_d;
  if (critic)
    opt_d = std::make_unique<torch::optim::Adam>((*critic)->parameters(),
                                                 torch::optim::AdamOptions(tc.lr_init).betas({0.8, 0.99}));

  std::mt19937_64 data_rng(tc.seed);
  std::mt19937_64 crop_rng(tc.seed ^ kAuxStream);
  const ClipPicker picker(cfg, data);
  const auto schedule = tc.schedule();

  CheckpointParts parts{gen.ptr().get(), critic ? critic->ptr().get() : nullptr, &opt_g, opt_d.get()};
  long step0 = 0;
  if (!tc.resume.empty()) {
    const auto meta = load_checkpoint(tc.resume, kVocoderFormat, parts);
    check_features(meta, cfg, tc.resume);
    step0 = meta.step;
    restore_rng(data_rng, meta.data_rng);
    restore_rng(crop_rng, meta.aux_rng);
  } else if (!tc.init_checkpoint.empty()) {
    const auto meta = load_checkpoint(tc.init_checkpoint, kVocoderFormat,
                                      {gen.ptr().get(), critic ? critic->ptr().get() : nullptr, nullptr, nullptr});
    check_features(meta, cfg, tc.init_checkpoint);
  }

  TrainSummary summary;
  summary.metrics_csv = out_dir / "metrics_voc.csv";
  MetricsCsv csv(summary.metrics_csv, tc.tag, !tc.resume.empty());
  const long last = hooks.stop_after > 0 ? std::min(hooks.stop_after, tc.total_steps) : tc.total_steps;
  const auto g_params = gen->parameters();
  const auto d_params = critic ? (*critic)->parameters() : std::vector<torch::Tensor>{};
  const int n_sub = critic ? cfg.critics.n_subcritics() : 0;

  for (long step = step0 + 1; step <= last; ++step) {
    torch::manual_seed(tc.seed + static_cast<std::uint64_t>(step));
    const double lr = lr_at(step, schedule);
    set_lr(opt_g, lr);
    if (opt_d) set_lr(*opt_d, lr);

    const auto batch = make_vocoder_batch(data, picker.draw(tc.batch_size, data_rng), segment_frames, data_rng);
    gen->train();
    auto fake = gen->forward(batch.mel, batch.keys);
    const auto plan = plan_crops(cfg.critics, batch.audio.size(1), crop_rng);

    MetricRow row{{"step", static_cast<double>(step)}, {"lr", lr}};
    WaveCriticScores d_scores;
    double d_total = 0.0;
    if (critic) {
      auto d = voc_loss_d(scorer, batch.audio, fake, batch.singer, plan, &d_scores);
      d_total = d.item<double>();
      guard_value(d_total, out_dir, step, "critic loss", row);
      opt_d->zero_grad();
      d.backward();
      guard_gradients(d_params, out_dir, step, "critic", row);
      opt_d->step();
    }

    auto g = voc_loss_g(scorer, fake, batch.audio, batch.singer, plan, cfg.stft);
    row.insert(row.end(), {{"g_total", g.total.item<double>()},
                           {"d_total", d_total},
                           {"adv", g.adversarial.item<double>()},
                           {"stft", g.stft.item<double>()},
                           {"mel", g.mel.item<double>()}});
    for (int i = 0; i < n_sub; ++i) {
      row.emplace_back("real_" + std::to_string(i), d_scores.real_mean[static_cast<std::size_t>(i)]);
      row.emplace_back("fake_" + std::to_string(i), d_scores.fake_mean[static_cast<std::size_t>(i)]);
    }
    guard_value(metric(row, "g_total"), out_dir, step, "generator loss", row);

    opt_g.zero_grad();
    g.total.backward();
    guard_gradients(g_params, out_dir, step, "generator", row);
    opt_g.step();

    summary.history.push_back(row);
    if (step % tc.log_every == 0 || step == last) {
      csv.write(row);
      if (!hooks.quiet) print_row("voc", row);
    }
    if (hooks.on_step) hooks.on_step(row);
    if (wants_checkpoint(cfg, hooks, step, last)) {
      auto meta = base_meta(cfg, data, kVocoderFormat, critic ? kCriticFormat : nullptr);
      meta.step = step;
      meta.metrics = row_json(row);
      meta.data_rng = rng_state(data_rng);
      meta.aux_rng = rng_state(crop_rng);
      summary.checkpoint = checkpoint_path(out_dir, "voc", step);
      save_checkpoint(summary.checkpoint, meta, parts);
    }
    summary.last_step = step;
  }
  return summary;
}

}  // namespace wesinger2
