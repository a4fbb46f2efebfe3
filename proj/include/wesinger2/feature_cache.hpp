#pragma once

#include "wesinger2/dsp_features.hpp"
#include "wesinger2/score.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace wesinger2 {

/// Everything `prepare` extracts for one clip.
///
/// On disk a clip is two files in the cache directory:
///   <clip_id>.feat  little-endian binary record
///       char[8]  magic "WS2FEAT1"
///       u32      frames
///       u32      n_mels
///       f32      mel[frames * n_mels]   row-major, unnormalized log-mel
///       f32      f0[frames]             Hz, 0 where unvoiced
///       u8       voiced[frames]
///       f32      lif0[frames]           Hz
///       i32      keys[frames]           piano keys 1..88
///   <clip_id>.json  {clip_id, singer, frames, hop, sample_rate, wav_path, score_path}
struct ClipFeatures {
  std::string clip_id;
  std::string singer;
  std::string wav_path;
  std::string score_path;
  int hop_size = 240;
  int sample_rate = 24000;
  MelSpectrogram mel;
  F0Contour f0;
  LIF0 lif0;
  KeySequence keys;

  int frames() const { return mel.frames(); }
};

ClipFeatures extract_clip_features(const ManifestRecord& record, const Waveform& wave, const FeatureConfig& cfg);

void write_clip_features(const std::filesystem::path& dir, const ClipFeatures& clip);
ClipFeatures read_clip_features(const std::filesystem::path& dir, const std::string& clip_id);

nlohmann::json singer_stats_to_json(const std::map<std::string, SingerStats>& stats);
std::map<std::string, SingerStats> singer_stats_from_json(const nlohmann::json& j);

/// Per-singer statistics file (stats.json) keyed by singer name.
void write_singer_stats(const std::filesystem::path& path, const std::map<std::string, SingerStats>& stats);
std::map<std::string, SingerStats> read_singer_stats(const std::filesystem::path& path);

struct CacheIndex {
  FeatureConfig features;
  std::vector<std::string> clip_ids;
  std::vector<std::string> singers;  // sorted; position is the singer index
  std::vector<std::string> skipped;
};

void write_cache_index(const std::filesystem::path& dir, const CacheIndex& index);
CacheIndex read_cache_index(const std::filesystem::path& dir);

/// Featurizes every manifest clip into `out_dir` and writes stats.json and
/// index.json. Clips without a voiced frame are skipped and listed in the index.
CacheIndex prepare_cache(const std::vector<ManifestRecord>& manifest, const std::filesystem::path& out_dir,
                         const FeatureConfig& cfg);

}  // namespace wesinger2
