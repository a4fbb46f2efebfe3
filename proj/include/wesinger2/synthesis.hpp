#pragma once

#include "wesinger2/acoustic_model.hpp"
#include "wesinger2/checkpoint.hpp"
#include "wesinger2/experiment_config.hpp"
#include "wesinger2/score.hpp"
#include "wesinger2/vocoder.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace wesinger2 {

struct AcousticBundle {
  AcousticModel model{nullptr};
  CheckpointMeta meta;
  ExperimentConfig config;
  PhonemeInventory inventory{{"SP"}};
  std::map<std::string, SingerStats> stats;

  int singer_index(const std::string& name) const;
};

struct VocoderBundle {
  VocoderGenerator generator{nullptr};
  CheckpointMeta meta;
  ExperimentConfig config;
};

AcousticBundle load_acoustic(const std::filesystem::path& path);
VocoderBundle load_vocoder(const std::filesystem::path& path);

/// Throws IncompatibleCheckpoints unless both were trained on the same
/// features and agree on the statistics of `singer`.
void check_compatible(const AcousticBundle& am, const VocoderBundle& voc, const std::string& singer);

struct SynthesisOptions {
  bool use_gt_duration = true;
  /// Sees (and may rewrite) predicted durations [1, T] before length regulation.
  std::function<void(torch::Tensor&)> duration_hook;
};

struct SynthesisResult {
  Waveform audio;
  RowMatrix mel;                    // frames x 80, denormalized log-mel
  LIF0 f0;
  KeySequence keys;
  std::vector<int> durations;       // frames per token actually used
  std::vector<int> segment_frames;  // frames of every synthesized segment
};

/// Splits the token sequence into segments that each end with their trailing
/// rests, synthesizes every segment and concatenates the audio.
std::vector<std::vector<ScoreToken>> split_at_rests(const std::vector<ScoreToken>& tokens, int rest_phoneme);

SynthesisResult synthesize(AcousticBundle& am, VocoderBundle& voc, const std::vector<ScoreNote>& notes,
                           const std::string& singer, const SynthesisOptions& options = {});

/// Output kHz produced per wall-clock second.
double khz_per_second(std::int64_t samples, double elapsed_seconds);

struct BenchReport {
  double khz_per_s = 0.0;
  double audio_seconds = 0.0;
  double elapsed_seconds = 0.0;
  std::int64_t voc_params = 0;
  std::int64_t am_params = -1;
  int threads = 1;
  std::string host;
};

/// Times single-threaded vocoding of `seconds` of audio from random features.
BenchReport bench_vocoder(VocoderGenerator& generator, double seconds, int sample_rate, int repeats = 3);

nlohmann::json bench_to_json(const BenchReport& report);

struct ParamReport {
  std::int64_t am_params = 0;
  std::int64_t voc_params = 0;
  double am_reference = 49e6;
  double voc_reference = 5.89e6;
  bool am_within_2x = false;
  bool voc_within_2x = false;
};

/// Generator-side parameter counts of the full-scale configuration.
ParamReport full_scale_param_report(int n_phonemes, int n_singers);

std::string host_description();

}  // namespace wesinger2
