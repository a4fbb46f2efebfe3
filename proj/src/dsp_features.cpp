#include "wesinger2/dsp_features.hpp"

#include "wesinger2/error.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

namespace wesinger2 {

void FeatureConfig::validate() const {
  if (sample_rate <= 0 || hop_size <= 0 || win_size <= 0 || n_fft < win_size || n_mels <= 0)
    fail(ErrorCode::InvalidConfig, "feature frame parameters must be positive and n_fft >= win_size");
  if (!(mel_fmin >= 0.0 && mel_fmax > mel_fmin && mel_fmax <= sample_rate / 2.0))
    fail(ErrorCode::InvalidConfig, "mel range must satisfy 0 <= fmin < fmax <= nyquist");
  if (f0_min < 40.0 || f0_max > 1100.0 || f0_min >= f0_max)
    fail(ErrorCode::InvalidConfig, "f0 search range must lie within [40, 1100] Hz");
  if (yin_window <= 0 || log_floor <= 0.0) fail(ErrorCode::InvalidConfig, "yin window and log floor must be positive");
}

int frame_count(std::size_t num_samples, int hop_size) {
  return static_cast<int>((num_samples + static_cast<std::size_t>(hop_size) - 1) / static_cast<std::size_t>(hop_size));
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

namespace {

std::vector<double> mel_points(int n_mels, double fmin, double fmax) {
  const double lo = hz_to_mel(fmin);
  const double hi = hz_to_mel(fmax);
  std::vector<double> hz(static_cast<std::size_t>(n_mels) + 2);
  for (int i = 0; i < n_mels + 2; ++i) hz[i] = mel_to_hz(lo + (hi - lo) * i / (n_mels + 1));
  return hz;
}

void check_wave(const Waveform& wave, const FeatureConfig& cfg) {
  if (wave.samples.empty()) fail(ErrorCode::EmptyAudio, "waveform has no samples");
  if (wave.sample_rate != cfg.sample_rate)
    fail(ErrorCode::RateMismatch,
         "waveform is " + std::to_string(wave.sample_rate) + " Hz, config expects " + std::to_string(cfg.sample_rate));
}

double sample_at(const std::vector<double>& x, long i) {
  return (i < 0 || i >= static_cast<long>(x.size())) ? 0.0 : x[static_cast<std::size_t>(i)];
}

}  // namespace

RowMatrix mel_filterbank(int sample_rate, int n_fft, int n_mels, double fmin, double fmax) {
  const int n_bins = n_fft / 2 + 1;
  const auto pts = mel_points(n_mels, fmin, fmax);
  RowMatrix fb = RowMatrix::Zero(n_mels, n_bins);
  for (int m = 0; m < n_mels; ++m) {
    const double left = pts[m], center = pts[m + 1], right = pts[m + 2];
    for (int k = 0; k < n_bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / n_fft;
      double w = 0.0;
      if (f > left && f <= center) w = (f - left) / (center - left);
      else if (f > center && f < right) w = (right - f) / (right - center);
      fb(m, k) = w;
    }
  }
  return fb;
}

std::vector<double> mel_band_centers(const FeatureConfig& cfg) {
  const auto pts = mel_points(cfg.n_mels, cfg.mel_fmin, cfg.mel_fmax);
  return {pts.begin() + 1, pts.end() - 1};
}

std::vector<double> hann_window(int n) {
  std::vector<double> w(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
  return w;
}

MelSpectrogram compute_mel(const Waveform& wave, const FeatureConfig& cfg) {
  cfg.validate();
  check_wave(wave, cfg);

  const int frames = frame_count(wave.samples.size(), cfg.hop_size);
  const int n_bins = cfg.n_fft / 2 + 1;
  const RowMatrix fb = mel_filterbank(cfg.sample_rate, cfg.n_fft, cfg.n_mels, cfg.mel_fmin, cfg.mel_fmax);
  const auto window = hann_window(cfg.win_size);
  const int win_offset = (cfg.n_fft - cfg.win_size) / 2;

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<double> frame(static_cast<std::size_t>(cfg.n_fft));
  std::vector<std::complex<double>> spec;
  Eigen::VectorXd magnitude(n_bins);

  MelSpectrogram mel;
  mel.hop_size = cfg.hop_size;
  mel.values.resize(frames, cfg.n_mels);
  const double log_floor = std::log(cfg.log_floor);

  for (int t = 0; t < frames; ++t) {
    const long start = static_cast<long>(t) * cfg.hop_size - cfg.n_fft / 2;
    std::fill(frame.begin(), frame.end(), 0.0);
    for (int i = 0; i < cfg.win_size; ++i)
      frame[win_offset + i] = sample_at(wave.samples, start + win_offset + i) * window[i];
    fft.fwd(spec, frame);
    for (int k = 0; k < n_bins; ++k) magnitude[k] = std::abs(spec[k]);
    const Eigen::VectorXd energies = fb * magnitude;
    for (int m = 0; m < cfg.n_mels; ++m)
      mel.values(t, m) = energies[m] > cfg.log_floor ? std::log(energies[m]) : log_floor;
  }
  return mel;
}

F0Contour estimate_f0_yin(const Waveform& wave, const FeatureConfig& cfg) {
  cfg.validate();
  check_wave(wave, cfg);

  const int frames = frame_count(wave.samples.size(), cfg.hop_size);
  const int window = cfg.yin_window;
  const int tau_min = std::max(2, static_cast<int>(std::floor(cfg.sample_rate / cfg.f0_max)));
  const int tau_max = static_cast<int>(std::ceil(cfg.sample_rate / cfg.f0_min));
  const int span = window + tau_max + 1;

  F0Contour out;
  out.f0_hz.assign(static_cast<std::size_t>(frames), 0.0);
  out.voiced.assign(static_cast<std::size_t>(frames), 0);

  std::vector<double> buf(static_cast<std::size_t>(span));
  std::vector<double> diff(static_cast<std::size_t>(tau_max) + 2);
  std::vector<double> cmnd(static_cast<std::size_t>(tau_max) + 2);

  for (int t = 0; t < frames; ++t) {
    const long start = static_cast<long>(t) * cfg.hop_size - window / 2;
    double energy = 0.0;
    for (int i = 0; i < span; ++i) buf[i] = sample_at(wave.samples, start + i);
    for (int i = 0; i < window; ++i) energy += buf[i] * buf[i];
    if (energy < 1e-10 * window) continue;

    // Difference function and its cumulative-mean normalisation.
    diff[0] = 0.0;
    cmnd[0] = 1.0;
    double running = 0.0;
    for (int tau = 1; tau <= tau_max + 1; ++tau) {
      double acc = 0.0;
      for (int j = 0; j < window; ++j) {
        const double d = buf[j] - buf[j + tau];
        acc += d * d;
      }
      diff[tau] = acc;
      running += acc;
      cmnd[tau] = running > 0.0 ? acc * tau / running : 1.0;
    }

    int best = -1;
    for (int tau = tau_min; tau <= tau_max; ++tau) {
      if (cmnd[tau] < cfg.yin_threshold) {
        while (tau + 1 <= tau_max && cmnd[tau + 1] < cmnd[tau]) ++tau;
        best = tau;
        break;
      }
    }
    if (best < 0) continue;

    double refined = best;
    const double a = cmnd[best - 1], b = cmnd[best], c = cmnd[best + 1];
    const double denom = a - 2.0 * b + c;
    if (denom > 0.0) refined = best + 0.5 * (a - c) / denom;

    const double f0 = std::clamp(cfg.sample_rate / refined, cfg.f0_min, cfg.f0_max);
    out.f0_hz[t] = f0;
    out.voiced[t] = 1;
  }
  return out;
}

LIF0 linear_interpolate_f0(const F0Contour& contour) {
  if (contour.f0_hz.size() != contour.voiced.size())
    fail(ErrorCode::LengthMismatch, "f0 and voiced mask differ in length");
  const std::size_t n = contour.f0_hz.size();
  std::vector<std::size_t> voiced_idx;
  for (std::size_t i = 0; i < n; ++i)
    if (contour.voiced[i]) {
      if (!(contour.f0_hz[i] > 0.0)) fail(ErrorCode::NonPositiveF0, "voiced frame with non-positive f0");
      voiced_idx.push_back(i);
    }
  if (voiced_idx.empty()) fail(ErrorCode::AllUnvoiced, "contour has no voiced frame");

  LIF0 out;
  out.f0_hz.resize(n);
  const double first = contour.f0_hz[voiced_idx.front()];
  const double last = contour.f0_hz[voiced_idx.back()];
  for (std::size_t i = 0; i < voiced_idx.front(); ++i) out.f0_hz[i] = first;
  for (std::size_t i = voiced_idx.back(); i < n; ++i) out.f0_hz[i] = last;
  for (std::size_t k = 0; k + 1 < voiced_idx.size(); ++k) {
    const std::size_t a = voiced_idx[k], b = voiced_idx[k + 1];
    const double fa = contour.f0_hz[a], fb = contour.f0_hz[b];
    for (std::size_t i = a; i < b; ++i)
      out.f0_hz[i] = fa + (fb - fa) * static_cast<double>(i - a) / static_cast<double>(b - a);
  }
  out.f0_hz[voiced_idx.back()] = last;
  return out;
}

int hz_to_piano_key(double hz) {
  if (!(hz > 0.0) || !std::isfinite(hz)) fail(ErrorCode::NonPositiveF0, "f0 must be positive and finite");
  const long key = std::lround(12.0 * std::log2(hz / 440.0)) + 49;
  return static_cast<int>(std::clamp<long>(key, 1, kNumPianoKeys));
}

double piano_key_to_hz(int key) { return 440.0 * std::pow(2.0, (key - 49) / 12.0); }

KeySequence quantize_to_piano_keys(const LIF0& f0) {
  KeySequence out;
  out.keys.reserve(f0.f0_hz.size());
  for (double hz : f0.f0_hz) out.keys.push_back(hz_to_piano_key(hz));
  return out;
}

SingerStats compute_singer_stats(std::span<const MelSpectrogram> mels, const std::string& singer_id) {
  if (mels.empty()) fail(ErrorCode::EmptyCollection, "no mel-spectrograms for singer " + singer_id);
  const int n_mels = mels.front().n_mels();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(n_mels);
  Eigen::VectorXd sum_sq = Eigen::VectorXd::Zero(n_mels);
  long total = 0;
  for (const auto& m : mels) {
    if (m.normalized) fail(ErrorCode::DoubleNormalize, "statistics must be computed on unnormalized mels");
    if (m.singer_id && *m.singer_id != singer_id)
      fail(ErrorCode::MixedSingers, "mel of singer " + *m.singer_id + " in stats for " + singer_id);
    if (m.n_mels() != n_mels) fail(ErrorCode::ChannelMismatch, "band count differs across mels");
    sum += m.values.colwise().sum().transpose();
    sum_sq += m.values.array().square().colwise().sum().matrix().transpose();
    total += m.frames();
  }
  if (total == 0) fail(ErrorCode::EmptyCollection, "mel collection has zero frames");

  SingerStats stats;
  stats.singer_id = singer_id;
  stats.mean.resize(n_mels);
  stats.std.resize(n_mels);
  for (int i = 0; i < n_mels; ++i) {
    const double mean = sum[i] / total;
    const double var = std::max(0.0, sum_sq[i] / total - mean * mean);
    stats.mean[i] = mean;
    stats.std[i] = std::max(std::sqrt(var), kStdFloor);
  }
  return stats;
}

void accumulate_log_f0_stats(SingerStats& stats, std::span<const LIF0> contours) {
  double sum = 0.0, sum_sq = 0.0;
  long n = 0;
  for (const auto& c : contours)
    for (double hz : c.f0_hz) {
      const double v = std::log(hz);
      sum += v;
      sum_sq += v * v;
      ++n;
    }
  if (n == 0) fail(ErrorCode::EmptyCollection, "no f0 frames for singer " + stats.singer_id);
  stats.log_f0_mean = sum / n;
  stats.log_f0_std = std::max(std::sqrt(std::max(0.0, sum_sq / n - stats.log_f0_mean * stats.log_f0_mean)), kStdFloor);
}

namespace {

void check_stats_match(const MelSpectrogram& mel, const SingerStats& stats) {
  if (mel.singer_id && *mel.singer_id != stats.singer_id)
    fail(ErrorCode::SingerMismatch, "mel belongs to " + *mel.singer_id + ", stats to " + stats.singer_id);
  if (static_cast<int>(stats.mean.size()) != mel.n_mels() || stats.std.size() != stats.mean.size())
    fail(ErrorCode::ChannelMismatch, "stats band count differs from mel");
}

}  // namespace

MelSpectrogram normalize_mel(const MelSpectrogram& mel, const SingerStats& stats) {
  if (mel.normalized) fail(ErrorCode::DoubleNormalize, "mel is already normalized");
  check_stats_match(mel, stats);
  MelSpectrogram out = mel;
  for (int i = 0; i < mel.n_mels(); ++i)
    out.values.col(i) = (mel.values.col(i).array() - stats.mean[i]) / stats.std[i];
  out.normalized = true;
  out.singer_id = stats.singer_id;
  return out;
}

MelSpectrogram denormalize_mel(const MelSpectrogram& mel, const SingerStats& stats) {
  if (!mel.normalized) fail(ErrorCode::DoubleNormalize, "mel is not normalized");
  check_stats_match(mel, stats);
  MelSpectrogram out = mel;
  for (int i = 0; i < mel.n_mels(); ++i)
    out.values.col(i) = mel.values.col(i).array() * stats.std[i] + stats.mean[i];
  out.normalized = false;
  return out;
}

}  // namespace wesinger2
