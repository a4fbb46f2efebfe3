#pragma once

#include "wesinger2/acoustic_model.hpp"
#include "wesinger2/critics.hpp"
#include "wesinger2/dsp_features.hpp"
#include "wesinger2/mrad.hpp"
#include "wesinger2/schedule.hpp"
#include "wesinger2/spectral_loss.hpp"
#include "wesinger2/vocoder.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace wesinger2 {

struct TrainConfig {
  /// Free-form experiment tag written into every metrics row.
  std::string tag = "default";
  /// "full" or "desk"; picks the architecture defaults the other sections override.
  std::string preset = "full";
  std::string cache_dir;
  std::string out_dir;
  /// Weights to start from (fine-tuning); empty for a fresh run.
  std::string init_checkpoint;
  /// Resume an interrupted run from this checkpoint.
  std::string resume;

  Phase phase = Phase::Pretrain;
  int batch_size = 24;
  long total_steps = 1'200'000;
  long warmup_steps = 150'000;
  double lr_init = 8e-4;
  double lr_final = 1e-4;
  DecayShape decay = DecayShape::Linear;

  /// Overrides the phase default of the MRAD adversarial weight.
  std::optional<double> lambda_adv;
  /// When false no critic is built and only reconstruction terms train the generator.
  bool adversarial = true;
  double lambda_dur = 1.0;
  double lambda_grl = 1.0;

  std::string target_singer;
  double p_target = 0.7;
  std::uint64_t seed = 1234;

  int log_every = 10;
  int checkpoint_every = 1000;
  /// Vocoder training crop.
  double segment_seconds = 0.8;
  /// Cap on acoustic-model training frames per clip (random window); 0 keeps whole clips.
  int max_frames = 0;
  int threads = 1;

  void validate() const;
  LrSchedule schedule() const;
};

struct ExperimentConfig {
  FeatureConfig features;
  AcousticConfig acoustic;
  MradConfig mrad;
  VocoderConfig vocoder;
  CriticConfig critics;
  StftLossConfig stft;
  TrainConfig train;

  void validate() const;
  /// Effective MRAD adversarial weight for the configured phase.
  double lambda_adv() const;

  static ExperimentConfig preset(const std::string& name);
};

nlohmann::json to_json(const AcousticConfig& c);
nlohmann::json to_json(const MradConfig& c);
nlohmann::json to_json(const VocoderConfig& c);
nlohmann::json to_json(const CriticConfig& c, const StftLossConfig& s);
nlohmann::json to_json(const TrainConfig& c);
nlohmann::json to_json(const ExperimentConfig& c);

/// Sections are applied over the preset named in train.preset. Unknown keys
/// raise InvalidConfig.
ExperimentConfig experiment_from_json(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::filesystem::path& toml_path);
ExperimentConfig parse_experiment_toml(const std::string& text);

/// FNV-1a over the canonical JSON dump.
std::uint64_t config_hash(const nlohmann::json& j);
std::string hash_hex(std::uint64_t h);

}  // namespace wesinger2
