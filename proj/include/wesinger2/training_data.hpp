#pragma once

#include "wesinger2/acoustic_model.hpp"
#include "wesinger2/feature_cache.hpp"
#include "wesinger2/score.hpp"

#include <torch/torch.h>

#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace wesinger2 {

/// One prepared clip in training layout.
struct TrainingClip {
  std::string clip_id;
  std::string singer;
  int singer_index = 0;
  std::vector<ScoreToken> tokens;  // durations aligned to the feature frames
  torch::Tensor target;            // [F, 81] float: normalized mel + normalized log-F0
  torch::Tensor keys;              // [F] long piano keys
  torch::Tensor audio;             // [F * hop] float, undefined unless audio was loaded

  int frames() const { return static_cast<int>(target.size(0)); }
};

struct TrainingSet {
  FeatureConfig features;
  std::vector<std::string> singers;
  std::map<std::string, SingerStats> stats;
  PhonemeInventory inventory = PhonemeInventory::mandarin();
  std::vector<TrainingClip> clips;

  int singer_index(const std::string& name) const;
  std::vector<std::string> clip_singers() const;
};

/// [F, 81] acoustic target of a clip: per-singer normalized mel followed by
/// the normalized natural log of the LI-F0 contour.
torch::Tensor acoustic_target(const ClipFeatures& clip, const SingerStats& stats);

/// Loads a `prepare` cache. Missing or inconsistent clip files raise
/// DataIncomplete. Audio is read (and padded/trimmed to frames * hop) only
/// when `with_audio` is set.
TrainingSet load_training_set(const std::filesystem::path& cache_dir, bool with_audio,
                              const PhonemeInventory& inventory = PhonemeInventory::mandarin());

struct AcousticBatch {
  TokenBatch tokens;
  torch::Tensor target;      // [B, F, 81]
  torch::Tensor frame_mask;  // [B, F]
  int min_frames = 0;        // shortest valid length in the batch
};

/// Pads the selected clips into one batch. With max_frames > 0, clips longer
/// than that are cut to a random run of whole tokens fitting the budget.
AcousticBatch make_acoustic_batch(const TrainingSet& data, const std::vector<std::size_t>& indices, int max_frames,
                                  std::mt19937_64& rng);

struct VocoderBatch {
  torch::Tensor mel;     // [B, f, 80] normalized
  torch::Tensor keys;    // [B, f] long
  torch::Tensor audio;   // [B, f * hop]
  torch::Tensor singer;  // [B] long
};

/// Random aligned crops of `segment_frames` frames (and frames * hop samples).
VocoderBatch make_vocoder_batch(const TrainingSet& data, const std::vector<std::size_t>& indices, int segment_frames,
                                std::mt19937_64& rng);

}  // namespace wesinger2
