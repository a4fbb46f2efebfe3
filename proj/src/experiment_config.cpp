#include "wesinger2/experiment_config.hpp"

#include "wesinger2/error.hpp"
#include "wesinger2/feature_config_json.hpp"

#include <toml.hpp>

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace wesinger2 {

using nlohmann::json;

void TrainConfig::validate() const {
  schedule().validate();
  if (batch_size < 1) fail(ErrorCode::InvalidConfig, "batch_size must be positive");
  if (p_target < 0.0 || p_target > 1.0) fail(ErrorCode::InvalidConfig, "p_target must lie in [0, 1]");
  if (phase == Phase::Finetune && target_singer.empty())
    fail(ErrorCode::InvalidConfig, "fine-tuning needs train.target_singer");
  if (lambda_adv && *lambda_adv < 0.0) fail(ErrorCode::InvalidConfig, "lambda_adv must be non-negative");
  if (lambda_dur < 0.0 || lambda_grl < 0.0) fail(ErrorCode::InvalidConfig, "loss weights must be non-negative");
  if (log_every < 1 || checkpoint_every < 1) fail(ErrorCode::InvalidConfig, "logging intervals must be positive");
  if (segment_seconds <= 0.0) fail(ErrorCode::InvalidConfig, "segment_seconds must be positive");
  if (max_frames < 0 || threads < 1) fail(ErrorCode::InvalidConfig, "bad max_frames / threads");
}

LrSchedule TrainConfig::schedule() const {
  LrSchedule s;
  s.phase = phase;
  s.total_steps = total_steps;
  s.warmup_steps = warmup_steps;
  s.lr_init = lr_init;
  s.lr_final = lr_final;
  s.decay = decay;
  return s;
}

void ExperimentConfig::validate() const {
  features.validate();
  mrad.validate();
  vocoder.validate(features.hop_size);
  critics.validate();
  stft.validate();
  train.validate();
  if (vocoder.n_mels != features.n_mels || mrad.n_bands != features.n_mels)
    fail(ErrorCode::InvalidConfig, "mel band count differs between sections");
  if (critics.sample_rate != features.sample_rate || stft.sample_rate != features.sample_rate)
    fail(ErrorCode::InvalidConfig, "sample rate differs between sections");
}

double ExperimentConfig::lambda_adv() const {
  if (train.lambda_adv) return *train.lambda_adv;
  return train.phase == Phase::Pretrain ? mrad.lambda_adv : mrad.lambda_adv_finetune;
}

ExperimentConfig ExperimentConfig::preset(const std::string& name) {
  ExperimentConfig c;
  if (name == "full") {
    c.acoustic = AcousticConfig::full(0, 1);
    c.vocoder = VocoderConfig::full();
    c.critics = CriticConfig::full(1);
  } else if (name == "desk") {
    c.acoustic = AcousticConfig::desk(0, 1);
    c.vocoder = VocoderConfig::desk();
    c.critics = CriticConfig::desk(1);
    c.mrad.channels = {16, 32, 64, 64, 64, 1};
    c.mrad.singer_embed = 32;
    c.train.batch_size = 4;
    c.train.total_steps = 10'000;
    c.train.warmup_steps = 500;
  } else {
    fail(ErrorCode::InvalidConfig, "unknown preset '" + name + "'");
  }
  c.train.preset = name;
  return c;
}

json to_json(const AcousticConfig& c) {
  return {{"hidden", c.hidden},
          {"n_encoder_blocks", c.n_encoder_blocks},
          {"n_decoder_blocks", c.n_decoder_blocks},
          {"n_heads", c.n_heads},
          {"conv_kernel", c.conv_kernel},
          {"ffn_hidden", c.ffn_hidden},
          {"dropout", c.dropout},
          {"duration_filter", c.duration_filter},
          {"grl_scale", c.grl_scale},
          {"postnet_kind", c.postnet.kind},
          {"postnet_kernels", c.postnet.kernel_sizes},
          {"postnet_dilations", c.postnet.dilations},
          {"postnet_channels", c.postnet.channels},
          {"n_phonemes", c.n_phonemes},
          {"n_singers", c.n_singers}};
}

json to_json(const MradConfig& c) {
  return {{"channels", c.channels},           {"kernel", c.kernel},
          {"strided_layers", c.strided_layers}, {"singer_embed", c.singer_embed},
          {"conditional", c.conditional},     {"lambda_adv", c.lambda_adv},
          {"lambda_adv_finetune", c.lambda_adv_finetune}, {"lambda_l1", c.lambda_l1},
          {"n_singers", c.n_singers}};
}

json to_json(const VocoderConfig& c) {
  return {{"key_embed", c.key_embed},
          {"hidden", c.hidden},
          {"upsample_factors", c.upsample_factors},
          {"resblock_kernels", c.resblock_kernels},
          {"resblock_dilations", c.resblock_dilations},
          {"use_pitch", c.use_pitch}};
}

json to_json(const CriticConfig& c, const StftLossConfig& s) {
  json res = json::array();
  for (const auto& r : s.resolutions) res.push_back({r.n_fft, r.hop, r.win});
  return {{"singer_embed", c.singer_embed},
          {"conditional", c.conditional},
          {"injection_layer", c.injection_layer},
          {"min_seconds", c.min_seconds},
          {"use_msd", c.use_msd},
          {"use_mpd", c.use_mpd},
          {"use_mld", c.use_mld},
          {"msd_scales", c.msd_scales},
          {"msd_channels", c.msd_channels},
          {"mpd_periods", c.mpd_periods},
          {"mpd_channels", c.mpd_channels},
          {"mld_crop_seconds", c.mld_crop_seconds},
          {"mld_channels", c.mld_channels},
          {"stft_resolutions", res},
          {"mel_bands", s.mel_bands},
          {"lambda_stft", s.lambda_stft},
          {"lambda_mel", s.lambda_mel},
          {"n_singers", c.n_singers}};
}

json to_json(const TrainConfig& c) {
  json j = {{"tag", c.tag},
            {"preset", c.preset},
            {"cache_dir", c.cache_dir},
            {"out_dir", c.out_dir},
            {"init_checkpoint", c.init_checkpoint},
            {"resume", c.resume},
            {"phase", to_string(c.phase)},
            {"batch_size", c.batch_size},
            {"total_steps", c.total_steps},
            {"warmup_steps", c.warmup_steps},
            {"lr_init", c.lr_init},
            {"lr_final", c.lr_final},
            {"decay", c.decay == DecayShape::Linear ? "linear" : "exponential"},
            {"adversarial", c.adversarial},
            {"lambda_dur", c.lambda_dur},
            {"lambda_grl", c.lambda_grl},
            {"target_singer", c.target_singer},
            {"p_target", c.p_target},
            {"seed", c.seed},
            {"log_every", c.log_every},
            {"checkpoint_every", c.checkpoint_every},
            {"segment_seconds", c.segment_seconds},
            {"max_frames", c.max_frames},
            {"threads", c.threads}};
  if (c.lambda_adv) j["lambda_adv"] = *c.lambda_adv;
  return j;
}

json to_json(const ExperimentConfig& c) {
  return {{"features", feature_config_to_json(c.features)},
          {"acoustic", to_json(c.acoustic)},
          {"mrad", to_json(c.mrad)},
          {"vocoder", to_json(c.vocoder)},
          {"critics", to_json(c.critics, c.stft)},
          {"train", to_json(c.train)}};
}

namespace {

/// Reads keys out of one config section and rejects anything it did not consume.
class Section {
 public:
  Section(const json& root, std::string name) : name_(std::move(name)) {
    if (root.contains(name_)) {
      j_ = root.at(name_);
      if (!j_.is_object()) fail(ErrorCode::InvalidConfig, "[" + name_ + "] must be a table");
    }
  }

  template <class T>
  void get(const std::string& key, T& out) {
    used_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      fail(ErrorCode::InvalidConfig, name_ + "." + key + ": " + e.what());
    }
  }

  /// Keys that are recognised but set elsewhere (e.g. derived from data).
  void ignore(const std::string& key) { used_.insert(key); }

  void finish() const {
    if (j_.is_null()) return;
    for (const auto& item : j_.items())
      if (!used_.count(item.key())) fail(ErrorCode::InvalidConfig, "unknown key " + name_ + "." + item.key());
  }

  const json& raw() const { return j_; }

 private:
  std::string name_;
  json j_;
  std::set<std::string> used_;
};

}  // namespace

ExperimentConfig experiment_from_json(const json& root) {
  if (!root.is_object()) fail(ErrorCode::InvalidConfig, "config root must be a table");
  for (const auto& item : root.items()) {
    static const std::set<std::string> known{"features", "acoustic", "mrad", "vocoder", "critics", "train"};
    if (!known.count(item.key())) fail(ErrorCode::InvalidConfig, "unknown section [" + item.key() + "]");
  }
  std::string preset = "full";
  if (root.contains("train") && root["train"].contains("preset")) preset = root["train"]["preset"].get<std::string>();
  ExperimentConfig c = ExperimentConfig::preset(preset);

  if (root.contains("features")) c.features = feature_config_from_json(root["features"]);
  c.stft.sample_rate = c.features.sample_rate;
  c.stft.mel_fmax = c.features.mel_fmax;
  c.critics.sample_rate = c.features.sample_rate;
  c.mrad.n_bands = c.features.n_mels;
  c.vocoder.n_mels = c.features.n_mels;

  {
    Section s(root, "acoustic");
    s.get("hidden", c.acoustic.hidden);
    s.get("n_encoder_blocks", c.acoustic.n_encoder_blocks);
    s.get("n_decoder_blocks", c.acoustic.n_decoder_blocks);
    s.get("n_heads", c.acoustic.n_heads);
    s.get("conv_kernel", c.acoustic.conv_kernel);
    s.get("ffn_hidden", c.acoustic.ffn_hidden);
    s.get("dropout", c.acoustic.dropout);
    s.get("duration_filter", c.acoustic.duration_filter);
    s.get("grl_scale", c.acoustic.grl_scale);
    s.get("postnet_kind", c.acoustic.postnet.kind);
    s.get("postnet_kernels", c.acoustic.postnet.kernel_sizes);
    s.get("postnet_dilations", c.acoustic.postnet.dilations);
    s.get("postnet_channels", c.acoustic.postnet.channels);
    s.get("n_phonemes", c.acoustic.n_phonemes);
    s.get("n_singers", c.acoustic.n_singers);
    s.finish();
  }
  {
    Section s(root, "mrad");
    s.get("channels", c.mrad.channels);
    s.get("kernel", c.mrad.kernel);
    s.get("strided_layers", c.mrad.strided_layers);
    s.get("singer_embed", c.mrad.singer_embed);
    s.get("conditional", c.mrad.conditional);
    s.get("lambda_adv", c.mrad.lambda_adv);
    s.get("lambda_adv_finetune", c.mrad.lambda_adv_finetune);
    s.get("lambda_l1", c.mrad.lambda_l1);
    s.get("n_singers", c.mrad.n_singers);
    s.finish();
  }
  {
    Section s(root, "vocoder");
    s.get("key_embed", c.vocoder.key_embed);
    s.get("hidden", c.vocoder.hidden);
    s.get("upsample_factors", c.vocoder.upsample_factors);
    s.get("resblock_kernels", c.vocoder.resblock_kernels);
    s.get("resblock_dilations", c.vocoder.resblock_dilations);
    s.get("use_pitch", c.vocoder.use_pitch);
    s.finish();
  }
  {
    Section s(root, "critics");
    s.get("singer_embed", c.critics.singer_embed);
    s.get("conditional", c.critics.conditional);
    s.get("injection_layer", c.critics.injection_layer);
    s.get("min_seconds", c.critics.min_seconds);
    s.get("use_msd", c.critics.use_msd);
    s.get("use_mpd", c.critics.use_mpd);
    s.get("use_mld", c.critics.use_mld);
    s.get("msd_scales", c.critics.msd_scales);
    s.get("msd_channels", c.critics.msd_channels);
    s.get("mpd_periods", c.critics.mpd_periods);
    s.get("mpd_channels", c.critics.mpd_channels);
    s.get("mld_crop_seconds", c.critics.mld_crop_seconds);
    s.get("mld_channels", c.critics.mld_channels);
    std::vector<std::array<int, 3>> res;
    s.get("stft_resolutions", res);
    if (!res.empty()) {
      c.stft.resolutions.clear();
      for (const auto& r : res) c.stft.resolutions.push_back({r[0], r[1], r[2]});
    }
    s.get("mel_bands", c.stft.mel_bands);
    s.get("lambda_stft", c.stft.lambda_stft);
    s.get("lambda_mel", c.stft.lambda_mel);
    s.get("n_singers", c.critics.n_singers);
    s.finish();
  }
  {
    Section s(root, "train");
    auto& t = c.train;
    s.get("tag", t.tag);
    s.get("preset", t.preset);
    s.get("cache_dir", t.cache_dir);
    s.get("out_dir", t.out_dir);
    s.get("init_checkpoint", t.init_checkpoint);
    s.get("resume", t.resume);
    std::string phase = to_string(t.phase);
    s.get("phase", phase);
    t.phase = phase_from_string(phase);
    s.get("batch_size", t.batch_size);
    s.get("total_steps", t.total_steps);
    s.get("warmup_steps", t.warmup_steps);
    s.get("lr_init", t.lr_init);
    s.get("lr_final", t.lr_final);
    std::string decay = t.decay == DecayShape::Linear ? "linear" : "exponential";
    s.get("decay", decay);
    if (decay == "linear")
      t.decay = DecayShape::Linear;
    else if (decay == "exponential")
      t.decay = DecayShape::Exponential;
    else
      fail(ErrorCode::InvalidConfig, "train.decay must be linear or exponential");
    if (s.raw().contains("lambda_adv")) {
      double v = 0.0;
      s.get("lambda_adv", v);
      t.lambda_adv = v;
    }
    s.ignore("lambda_adv");
    s.get("adversarial", t.adversarial);
    s.get("lambda_dur", t.lambda_dur);
    s.get("lambda_grl", t.lambda_grl);
    s.get("target_singer", t.target_singer);
    s.get("p_target", t.p_target);
    s.get("seed", t.seed);
    s.get("log_every", t.log_every);
    s.get("checkpoint_every", t.checkpoint_every);
    s.get("segment_seconds", t.segment_seconds);
    s.get("max_frames", t.max_frames);
    s.get("threads", t.threads);
    s.finish();
  }
  c.features.validate();
  c.train.validate();
  return c;
}

ExperimentConfig parse_experiment_toml(const std::string& text) {
  toml::table tbl;
  try {
    tbl = toml::parse(text);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << e.description() << " at line " << e.source().begin.line;
    fail(ErrorCode::InvalidConfig, msg.str());
  }
  std::ostringstream out;
  out << toml::json_formatter{tbl};
  return experiment_from_json(json::parse(out.str()));
}

ExperimentConfig load_experiment_config(const std::filesystem::path& toml_path) {
  std::ifstream in(toml_path);
  if (!in) fail(ErrorCode::Io, "cannot open config " + toml_path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_experiment_toml(buf.str());
}

std::uint64_t config_hash(const json& j) {
  const std::string s = j.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace wesinger2
