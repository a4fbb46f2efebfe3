#pragma once

#include "wesinger2/dsp_features.hpp"
#include "wesinger2/score.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace wesinger2 {

/// Deterministic additive "singer": harmonic source with vibrato, a
/// phoneme-dependent formant envelope and a singer-dependent spectral tilt.
/// Used for demos and smoke tests where no recorded corpus is available.
Waveform render_toy_singing(const std::vector<ScoreNote>& notes, const std::string& singer, int sample_rate,
                            std::uint64_t seed);

/// Random contiguous phone-level score of roughly `seconds` seconds.
std::vector<ScoreNote> random_toy_score(double seconds, std::uint64_t seed);

/// Writes wav + score files for every clip and a manifest.jsonl into `dir`.
std::vector<ManifestRecord> make_toy_corpus(const std::filesystem::path& dir, int n_singers, int clips_per_singer,
                                            double clip_seconds, std::uint64_t seed);

}  // namespace wesinger2
