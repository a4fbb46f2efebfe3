#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace wesinger2 {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Frame and analysis parameters shared by every featurizer. Defaults are
/// the canonical 24 kHz / 10 ms setup.
struct FeatureConfig {
  int sample_rate = 24000;
  int hop_size = 240;
  int win_size = 1024;
  int n_fft = 1024;
  int n_mels = 80;
  double mel_fmin = 0.0;
  double mel_fmax = 12000.0;
  double log_floor = 1e-5;
  // YIN
  double f0_min = 40.0;
  double f0_max = 1100.0;
  double yin_threshold = 0.1;
  int yin_window = 1024;

  void validate() const;
  double hop_ms() const { return 1000.0 * hop_size / sample_rate; }
};

struct Waveform {
  std::vector<double> samples;
  int sample_rate = 24000;

  double duration_s() const { return static_cast<double>(samples.size()) / sample_rate; }
};

/// frames x n_mels natural-log magnitudes.
struct MelSpectrogram {
  RowMatrix values;
  int hop_size = 240;
  bool normalized = false;
  std::optional<std::string> singer_id;

  int frames() const { return static_cast<int>(values.rows()); }
  int n_mels() const { return static_cast<int>(values.cols()); }
};

struct F0Contour {
  std::vector<double> f0_hz;
  std::vector<std::uint8_t> voiced;

  std::size_t size() const { return f0_hz.size(); }
};

/// F0 with unvoiced gaps filled; every value strictly positive.
struct LIF0 {
  std::vector<double> f0_hz;
};

/// Piano keys in [1, 88]; key 49 is A4 = 440 Hz.
struct KeySequence {
  std::vector<int> keys;
};

inline constexpr int kMelBands = 80;
inline constexpr int kNumPianoKeys = 88;
inline constexpr double kStdFloor = 1e-4;

struct SingerStats {
  std::string singer_id;
  std::vector<double> mean;
  std::vector<double> std;
  // Statistics of log(LI-F0) used for the pitch channel of the acoustic model.
  double log_f0_mean = 0.0;
  double log_f0_std = 1.0;
};

/// Number of centered frames for `num_samples` samples: ceil(num_samples / hop).
int frame_count(std::size_t num_samples, int hop_size);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Triangular HTK-scale filterbank, n_mels x (n_fft/2 + 1), peak weight 1.
RowMatrix mel_filterbank(int sample_rate, int n_fft, int n_mels, double fmin, double fmax);

/// Center frequency in Hz of every mel band.
std::vector<double> mel_band_centers(const FeatureConfig& cfg);

/// Periodic Hann window of length n.
std::vector<double> hann_window(int n);

MelSpectrogram compute_mel(const Waveform& wave, const FeatureConfig& cfg);

F0Contour estimate_f0_yin(const Waveform& wave, const FeatureConfig& cfg);

LIF0 linear_interpolate_f0(const F0Contour& contour);

int hz_to_piano_key(double hz);
double piano_key_to_hz(int key);
KeySequence quantize_to_piano_keys(const LIF0& f0);

SingerStats compute_singer_stats(std::span<const MelSpectrogram> mels, const std::string& singer_id);

/// Fills log_f0_mean / log_f0_std of `stats` from a set of LI-F0 contours.
void accumulate_log_f0_stats(SingerStats& stats, std::span<const LIF0> contours);

MelSpectrogram normalize_mel(const MelSpectrogram& mel, const SingerStats& stats);
MelSpectrogram denormalize_mel(const MelSpectrogram& mel, const SingerStats& stats);

}  // namespace wesinger2
