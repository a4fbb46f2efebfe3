#pragma once

#include <torch/torch.h>

#include <vector>

namespace wesinger2 {

struct StftResolution {
  int n_fft = 1024;
  int hop = 256;
  int win = 1024;
};

struct StftLossConfig {
  std::vector<StftResolution> resolutions{{512, 128, 512}, {1024, 256, 1024}, {2048, 512, 2048}};
  /// Mel band count paired with each resolution for the mel reconstruction term.
  std::vector<int> mel_bands{40, 80, 80};
  double lambda_stft = 15.0;
  double lambda_mel = 15.0;
  int sample_rate = 24000;
  double mel_fmax = 12000.0;

  void validate() const;
};

/// Magnitude STFT [B, frames, bins] with zero center padding and a periodic
/// Hann window; magnitudes are floored at 1e-7.
torch::Tensor stft_magnitude(const torch::Tensor& x, const StftResolution& res);

/// Mean over resolutions of spectral convergence + mean |log|Y| - log|X||.
/// x is the generated signal, y the reference; both [B, L] or [L].
torch::Tensor multires_stft_loss(const torch::Tensor& x, const torch::Tensor& y,
                                 const std::vector<StftResolution>& resolutions);

/// Natural-log mel magnitudes [B, frames, bands], floored at 1e-5.
torch::Tensor log_mel(const torch::Tensor& x, const StftResolution& res, int bands, int sample_rate, double fmax);

/// Mean over mel configurations of the L1 distance between log-mels.
torch::Tensor multires_mel_loss(const torch::Tensor& x, const torch::Tensor& y,
                                const std::vector<StftResolution>& resolutions, const std::vector<int>& bands,
                                int sample_rate, double fmax);

}  // namespace wesinger2
