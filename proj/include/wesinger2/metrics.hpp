#pragma once

#include "wesinger2/dsp_features.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace wesinger2 {

struct F0Comparison {
  double rmse_hz = 0.0;
  double rmse_cents = 0.0;
  /// Fraction of compared frames where exactly one side is voiced.
  double voicing_error_rate = 0.0;
  int voiced_overlap = 0;
  int frames = 0;
};

/// RMSE over frames voiced in both contours; contours are trimmed to the
/// shorter one. Throws NoVoicedOverlap if no frame is voiced in both.
F0Comparison compare_f0(const F0Contour& gen, const F0Contour& ref);
F0Comparison compare_f0(const Waveform& gen, const Waveform& ref, const FeatureConfig& cfg);
double f0_rmse(const Waveform& gen, const Waveform& ref, const FeatureConfig& cfg);

/// Mean over frames of the per-frame RMS difference across mel bands.
double mel_distortion(const MelSpectrogram& gen, const MelSpectrogram& ref);
double mel_distortion(const Waveform& gen, const Waveform& ref, const FeatureConfig& cfg);

struct ClipReport {
  std::string clip_id;
  double f0_rmse = 0.0;
  double f0_rmse_cents = 0.0;
  double voicing_error_rate = 0.0;
  double msd = 0.0;
  double duration_s = 0.0;
};

struct EvalReport {
  std::vector<ClipReport> clips;
  double mean_f0_rmse = 0.0;
  double mean_f0_rmse_cents = 0.0;
  double mean_msd = 0.0;
  double std_f0_rmse = 0.0;
  double std_msd = 0.0;
};

/// Aggregates per-clip values into means / population standard deviations.
void finalize_report(EvalReport& report);

/// Pairs files by name: every *.wav in `hyp_dir` with the same name in `ref_dir`.
EvalReport evaluate_directories(const std::filesystem::path& ref_dir, const std::filesystem::path& hyp_dir,
                                const FeatureConfig& cfg);

std::string report_to_json(const EvalReport& report);
std::string report_to_csv(const EvalReport& report);

}  // namespace wesinger2
