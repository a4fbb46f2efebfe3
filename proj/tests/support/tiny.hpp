#pragma once

// Small model configurations and inputs shared by unit and acceptance tests.

#include "wesinger2/acoustic_model.hpp"
#include "wesinger2/mrad.hpp"
#include "wesinger2/vocoder.hpp"

#include <random>
#include <vector>

namespace tiny {

inline wesinger2::AcousticConfig acoustic(int n_phonemes = 12, int n_singers = 3) {
  wesinger2::AcousticConfig c;
  c.n_phonemes = n_phonemes;
  c.n_singers = n_singers;
  c.hidden = 8;
  c.n_encoder_blocks = 1;
  c.n_decoder_blocks = 2;
  c.n_heads = 2;
  c.conv_kernel = 3;
  c.ffn_hidden = 16;
  c.dropout = 0.0;
  c.duration_filter = 8;
  c.postnet.channels = 8;
  return c;
}

inline wesinger2::MradConfig mrad(int n_singers = 3) {
  wesinger2::MradConfig c;
  c.channels = {4, 4, 4, 4, 4, 1};
  c.singer_embed = 4;
  c.n_singers = n_singers;
  return c;
}

inline wesinger2::VocoderConfig vocoder(int hidden = 8) {
  wesinger2::VocoderConfig c;
  c.hidden = hidden;
  c.key_embed = 4;
  c.resblock_kernels = {3};
  c.resblock_dilations = {1, 3};
  return c;
}

/// Random token sequence with the given durations.
inline std::vector<wesinger2::ScoreToken> tokens(const std::vector<int>& durations, int singer, int n_phonemes,
                                                 std::mt19937_64& rng) {
  std::uniform_int_distribution<int> ph(0, n_phonemes - 1), pitch(40, 80);
  std::vector<wesinger2::ScoreToken> out;
  for (int d : durations) out.push_back({ph(rng), pitch(rng), d, singer});
  return out;
}

}  // namespace tiny
