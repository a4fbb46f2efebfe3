#pragma once

// Reference implementations used only by the tests. They are written
// independently of the library code paths they check.

#include <torch/torch.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

namespace oracle {

inline std::vector<double> sine(double hz, double seconds, int sample_rate = 24000, double amp = 0.5) {
  const auto n = static_cast<std::size_t>(std::llround(seconds * sample_rate));
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = amp * std::sin(2.0 * std::numbers::pi * hz * i / sample_rate);
  return out;
}

inline double htk_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double htk_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

/// Triangle edges in Hz: n_mels + 2 points evenly spaced on the HTK mel axis.
inline std::vector<double> mel_edges(int n_mels, double fmin, double fmax) {
  std::vector<double> e(static_cast<std::size_t>(n_mels) + 2);
  const double lo = htk_mel(fmin), hi = htk_mel(fmax);
  for (std::size_t i = 0; i < e.size(); ++i) e[i] = htk_hz(lo + (hi - lo) * static_cast<double>(i) / (n_mels + 1));
  return e;
}

/// Triangular weight of frequency f in band m (peak 1 at the center edge).
inline double triangle(const std::vector<double>& edges, int m, double f) {
  const double l = edges[m], c = edges[m + 1], r = edges[m + 2];
  if (f > l && f <= c) return (f - l) / (c - l);
  if (f > c && f < r) return (r - f) / (r - c);
  return 0.0;
}

/// |DFT| of a real frame by direct summation, bins 0..n/2.
inline std::vector<double> dft_magnitude(const std::vector<double>& frame) {
  const auto n = frame.size();
  std::vector<double> mag(n / 2 + 1);
  for (std::size_t k = 0; k <= n / 2; ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t t = 0; t < n; ++t)
      acc += frame[t] * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k * t % n) / n);
    mag[k] = std::abs(acc);
  }
  return mag;
}

/// Zero-padded, centered, periodic-Hann frame of length n_fft around sample `center`.
inline std::vector<double> centered_frame(const std::vector<double>& x, long center, int n_fft) {
  std::vector<double> f(static_cast<std::size_t>(n_fft));
  for (int i = 0; i < n_fft; ++i) {
    const long idx = center - n_fft / 2 + i;
    const double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n_fft);
    f[static_cast<std::size_t>(i)] = (idx >= 0 && idx < static_cast<long>(x.size())) ? x[idx] * w : 0.0;
  }
  return f;
}

/// Natural-log mel energies of one frame, floored at `floor`.
inline std::vector<double> log_mel_frame(const std::vector<double>& frame, int sample_rate, int n_mels, double fmax,
                                         double floor) {
  const auto mag = dft_magnitude(frame);
  const auto edges = mel_edges(n_mels, 0.0, fmax);
  const auto n = static_cast<double>(frame.size());
  std::vector<double> out(static_cast<std::size_t>(n_mels));
  for (int m = 0; m < n_mels; ++m) {
    double e = 0.0;
    for (std::size_t k = 0; k < mag.size(); ++k) e += triangle(edges, m, k * sample_rate / n) * mag[k];
    out[static_cast<std::size_t>(m)] = std::log(std::max(e, floor));
  }
  return out;
}

/// Mean |log-mel(x) - log-mel(y)| with torch.stft framing: 1 + L / hop frames,
/// frame t centered on sample t * hop. Used as the straight-line mel-loss oracle.
inline double mel_l1(const std::vector<double>& x, const std::vector<double>& y, int n_fft, int hop, int n_mels,
                     int sample_rate, double fmax) {
  const long frames = 1 + static_cast<long>(x.size()) / hop;
  double acc = 0.0;
  for (long t = 0; t < frames; ++t) {
    const auto a = log_mel_frame(centered_frame(x, t * hop, n_fft), sample_rate, n_mels, fmax, 1e-5);
    const auto b = log_mel_frame(centered_frame(y, t * hop, n_fft), sample_rate, n_mels, fmax, 1e-5);
    for (int m = 0; m < n_mels; ++m) acc += std::abs(a[m] - b[m]);
  }
  return acc / static_cast<double>(frames * n_mels);
}

/// Central-difference gradient check on a float64 tensor. `loss` must be a
/// pure function of the current parameter values. Returns
/// ||g_auto - g_fd|| / max(||g_auto||, ||g_fd||) over up to `max_entries` entries.
inline double fd_relative_error(torch::Tensor param, const std::function<torch::Tensor()>& loss,
                                int max_entries = 24, double eps = 1e-6, std::uint64_t seed = 3) {
  for (auto& p : std::vector<torch::Tensor>{param})
    if (p.grad().defined()) p.grad().zero_();
  auto l = loss();
  auto g = torch::autograd::grad({l}, {param}, {}, false, false, true)[0];
  if (!g.defined()) g = torch::zeros_like(param);
  g = g.reshape(-1);
  auto flat = param.data().view(-1);
  std::mt19937_64 rng(seed);
  std::vector<std::int64_t> idx(static_cast<std::size_t>(flat.numel()));
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<std::int64_t>(i);
  std::shuffle(idx.begin(), idx.end(), rng);
  if (static_cast<int>(idx.size()) > max_entries) idx.resize(static_cast<std::size_t>(max_entries));
  double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
  torch::NoGradGuard ng;
  for (auto i : idx) {
    const double orig = flat[i].item<double>();
    flat[i] = orig + eps;
    const double up = loss().item<double>();
    flat[i] = orig - eps;
    const double down = loss().item<double>();
    flat[i] = orig;
    const double num = (up - down) / (2.0 * eps);
    const double ana = g[i].item<double>();
    diff2 += (ana - num) * (ana - num);
    a2 += ana * ana;
    n2 += num * num;
  }
  const double denom = std::max(std::sqrt(std::max(a2, n2)), 1e-12);
  return std::sqrt(diff2) / denom;
}

/// Pearson chi-square statistic of integer samples against a uniform law on [lo, hi].
inline double chi_square_uniform(const std::vector<int>& samples, int lo, int hi) {
  const int k = hi - lo + 1;
  std::vector<double> counts(static_cast<std::size_t>(k), 0.0);
  for (int s : samples) counts[static_cast<std::size_t>(s - lo)] += 1.0;
  const double expected = static_cast<double>(samples.size()) / k;
  double chi = 0.0;
  for (double c : counts) chi += (c - expected) * (c - expected) / expected;
  return chi;
}

/// Upper 1% critical value of chi-square with `dof` degrees of freedom
/// (Wilson-Hilferty approximation, z_0.99 = 2.326348).
inline double chi_square_critical_99(int dof) {
  const double k = dof;
  const double z = 2.326347874;
  const double t = 1.0 - 2.0 / (9.0 * k) + z * std::sqrt(2.0 / (9.0 * k));
  return k * t * t * t;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("wesinger2_test_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace oracle
