#pragma once

#include "wesinger2/dsp_features.hpp"

#include <filesystem>

namespace wesinger2 {

/// Reads a RIFF/WAVE file holding mono PCM16 (or float32) samples.
Waveform read_wav(const std::filesystem::path& path);

/// Writes mono PCM16; samples are clipped to [-1, 1].
void write_wav(const std::filesystem::path& path, const Waveform& wave);

}  // namespace wesinger2
