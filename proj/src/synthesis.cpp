#include "wesinger2/synthesis.hpp"

#include "wesinger2/error.hpp"
#include "wesinger2/nn_util.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

namespace wesinger2 {

namespace fs = std::filesystem;

int AcousticBundle::singer_index(const std::string& name) const {
  for (std::size_t i = 0; i < meta.singers.size(); ++i)
    if (meta.singers[i] == name) return static_cast<int>(i);
  fail(ErrorCode::UnknownSinger, "singer '" + name + "' is unknown to the acoustic model");
}

AcousticBundle load_acoustic(const fs::path& path) {
  AcousticBundle b;
  b.meta = read_checkpoint_meta(path);
  b.config = experiment_from_json(b.meta.config);
  b.inventory = PhonemeInventory(b.meta.phonemes);
  b.stats = b.meta.singer_stats();
  b.model = AcousticModel(b.config.acoustic);
  load_checkpoint(path, kAcousticFormat, {b.model.ptr().get(), nullptr, nullptr, nullptr});
  b.model->eval();
  return b;
}

VocoderBundle load_vocoder(const fs::path& path) {
  VocoderBundle b;
  b.meta = read_checkpoint_meta(path);
  b.config = experiment_from_json(b.meta.config);
  b.generator = VocoderGenerator(b.config.vocoder);
  load_checkpoint(path, kVocoderFormat, {b.generator.ptr().get(), nullptr, nullptr, nullptr});
  b.generator->eval();
  return b;
}

void check_compatible(const AcousticBundle& am, const VocoderBundle& voc, const std::string& singer) {
  if (am.meta.features_hash != voc.meta.features_hash)
    fail(ErrorCode::IncompatibleCheckpoints, "acoustic model and vocoder were trained on different features");
  if (voc.config.vocoder.hop_size() != am.config.features.hop_size)
    fail(ErrorCode::IncompatibleCheckpoints, "vocoder hop differs from the acoustic frame hop");
  am.singer_index(singer);
  const auto it = voc.meta.stats.find(singer);
  if (it == voc.meta.stats.end())
    fail(ErrorCode::IncompatibleCheckpoints, "vocoder was not trained with singer '" + singer + "'");
  if (*it != am.meta.stats.at(singer))
    fail(ErrorCode::IncompatibleCheckpoints, "acoustic model and vocoder disagree on the statistics of " + singer);
}

std::vector<std::vector<ScoreToken>> split_at_rests(const std::vector<ScoreToken>& tokens, int rest_phoneme) {
  std::vector<std::vector<ScoreToken>> segments;
  std::vector<ScoreToken> current;
  bool voiced_seen = false;
  for (const auto& t : tokens) {
    const bool rest = t.phoneme_id == rest_phoneme;
    if (!rest && voiced_seen && !current.empty() && current.back().phoneme_id == rest_phoneme) {
      segments.push_back(std::move(current));
      current.clear();
    }
    if (!rest) voiced_seen = true;
    current.push_back(t);
  }
  if (!current.empty()) segments.push_back(std::move(current));
  return segments;
}

SynthesisResult synthesize(AcousticBundle& am, VocoderBundle& voc, const std::vector<ScoreNote>& notes,
                           const std::string& singer, const SynthesisOptions& options) {
  check_compatible(am, voc, singer);
  const int singer_id = am.singer_index(singer);
  const auto& stats = am.stats.at(singer);
  const auto& fc = am.config.features;
  const auto tokens = tokenize(notes, fc.hop_ms(), singer_id, am.inventory);
  if (tokens.empty()) fail(ErrorCode::EmptyInput, "score has no notes");

  torch::NoGradGuard no_grad;
  am.model->eval();
  voc.generator->eval();

  SynthesisResult result;
  result.audio.sample_rate = fc.sample_rate;
  std::vector<RowMatrix> mel_parts;
  for (const auto& seg : split_at_rests(tokens, am.inventory.rest_id())) {
    auto batch = make_token_batch({seg});
    torch::Tensor durations = batch.durations;
    if (!options.use_gt_duration) {
      auto hidden = am.model->encode(batch);
      durations = durations_from_log(am.model->predict_durations(hidden, batch.mask), batch.mask);
      if (options.duration_hook) options.duration_hook(durations);
    }
    auto out = am.model->forward(batch, durations);
    auto pred = out.blocks.back().squeeze(0).to(torch::kFloat64);  // [F, 81]
    const auto frames = pred.size(0);
    result.segment_frames.push_back(static_cast<int>(frames));
    auto d = durations.squeeze(0).contiguous();
    for (std::int64_t i = 0; i < d.size(0); ++i) result.durations.push_back(static_cast<int>(d[i].item<std::int64_t>()));

    MelSpectrogram norm;
    norm.values = to_matrix(pred.narrow(1, 0, kMelBands));
    norm.hop_size = fc.hop_size;
    norm.normalized = true;
    norm.singer_id = singer;
    mel_parts.push_back(denormalize_mel(norm, stats).values);

    auto log_f0 = pred.select(1, kMelBands) * stats.log_f0_std + stats.log_f0_mean;
    auto f0 = torch::exp(log_f0).contiguous();
    LIF0 seg_f0;
    seg_f0.f0_hz.assign(f0.data_ptr<double>(), f0.data_ptr<double>() + frames);
    const auto seg_keys = quantize_to_piano_keys(seg_f0);
    result.f0.f0_hz.insert(result.f0.f0_hz.end(), seg_f0.f0_hz.begin(), seg_f0.f0_hz.end());
    result.keys.keys.insert(result.keys.keys.end(), seg_keys.keys.begin(), seg_keys.keys.end());

    auto keys = torch::tensor(std::vector<std::int64_t>(seg_keys.keys.begin(), seg_keys.keys.end()), torch::kLong);
    const auto voc_dtype = voc.generator->parameters().front().scalar_type();
    auto audio = voc.generator->forward(pred.narrow(1, 0, kMelBands).unsqueeze(0).to(voc_dtype), keys.unsqueeze(0))
                     .squeeze(0)
                     .to(torch::kFloat64)
                     .contiguous();
    result.audio.samples.insert(result.audio.samples.end(), audio.data_ptr<double>(),
                                audio.data_ptr<double>() + audio.numel());
  }

  std::int64_t total = 0;
  for (const auto& m : mel_parts) total += m.rows();
  result.mel.resize(total, kMelBands);
  std::int64_t row = 0;
  for (const auto& m : mel_parts) {
    result.mel.middleRows(row, m.rows()) = m;
    row += m.rows();
  }
  return result;
}

double khz_per_second(std::int64_t samples, double elapsed_seconds) {
  if (elapsed_seconds <= 0.0) fail(ErrorCode::InvalidConfig, "elapsed time must be positive");
  return static_cast<double>(samples) / 1000.0 / elapsed_seconds;
}

std::string host_description() {
  std::ifstream in("/proc/cpuinfo");
  std::string line;
  while (std::getline(in, line))
    if (line.rfind("model name", 0) == 0) {
      const auto colon = line.find(':');
      if (colon != std::string::npos) return line.substr(colon + 2);
    }
  return "unknown";
}

BenchReport bench_vocoder(VocoderGenerator& generator, double seconds, int sample_rate, int repeats) {
  if (seconds <= 0.0 || repeats < 1) fail(ErrorCode::InvalidConfig, "bench needs positive duration and repeats");
  const int prev_threads = torch::get_num_threads();
  torch::set_num_threads(1);
  torch::NoGradGuard no_grad;
  generator->eval();
  const int hop = generator->config().hop_size();
  const auto frames = static_cast<std::int64_t>(std::ceil(seconds * sample_rate / hop));
  const auto dtype = generator->parameters().front().scalar_type();
  torch::manual_seed(0);
  auto mel = torch::randn({1, frames, kMelBands}, torch::TensorOptions().dtype(dtype));
  auto keys = torch::full({1, frames}, 49, torch::kLong);

  generator->forward(mel.narrow(1, 0, std::min<std::int64_t>(frames, 20)), keys.narrow(1, 0, std::min<std::int64_t>(frames, 20)));
  BenchReport r;
  std::int64_t samples = 0;
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < repeats; ++i) samples += generator->forward(mel, keys).numel();
  r.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  torch::set_num_threads(prev_threads);

  r.audio_seconds = static_cast<double>(samples) / sample_rate;
  r.khz_per_s = khz_per_second(samples, r.elapsed_seconds);
  r.voc_params = count_parameters(*generator);
  r.threads = 1;
  r.host = host_description();
  return r;
}

nlohmann::json bench_to_json(const BenchReport& r) {
  return {{"khz_per_s", r.khz_per_s},
          {"audio_seconds", r.audio_seconds},
          {"elapsed_seconds", r.elapsed_seconds},
          {"voc_params", r.voc_params},
          {"am_params", r.am_params},
          {"host_info", {{"cpu", r.host}, {"threads", r.threads}}}};
}

ParamReport full_scale_param_report(int n_phonemes, int n_singers) {
  ParamReport r;
  AcousticModel am(AcousticConfig::full(n_phonemes, n_singers));
  VocoderGenerator voc(VocoderConfig::full());
  r.am_params = count_parameters(*am);
  r.voc_params = count_parameters(*voc);
  auto within = [](double v, double ref) { return v >= ref / 2.0 && v <= ref * 2.0; };
  r.am_within_2x = within(static_cast<double>(r.am_params), r.am_reference);
  r.voc_within_2x = within(static_cast<double>(r.voc_params), r.voc_reference);
  return r;
}

}  // namespace wesinger2
