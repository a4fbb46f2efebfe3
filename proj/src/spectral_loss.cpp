#include "wesinger2/spectral_loss.hpp"

#include "wesinger2/dsp_features.hpp"
#include "wesinger2/error.hpp"
#include "wesinger2/nn_util.hpp"

namespace wesinger2 {

namespace F = torch::nn::functional;

void StftLossConfig::validate() const {
  if (resolutions.size() < 2) fail(ErrorCode::InvalidConfig, "need at least two STFT resolutions");
  if (mel_bands.size() != resolutions.size()) fail(ErrorCode::InvalidConfig, "one mel band count per resolution");
  if (lambda_stft < 0.0 || lambda_mel < 0.0) fail(ErrorCode::InvalidConfig, "reconstruction weights must be >= 0");
  for (const auto& r : resolutions)
    if (r.n_fft < r.win || r.hop < 1 || r.win < 2) fail(ErrorCode::InvalidConfig, "bad STFT resolution");
}

namespace {

torch::Tensor as_batch(const torch::Tensor& x) { return x.dim() == 1 ? x.unsqueeze(0) : x; }

void check_lengths(const torch::Tensor& x, const torch::Tensor& y) {
  if (x.sizes() != y.sizes())
    fail(ErrorCode::LengthMismatch, "signals differ in shape");
}

}  // namespace

torch::Tensor stft_magnitude(const torch::Tensor& x, const StftResolution& res) {
  auto sig = as_batch(x);
  auto window = torch::hann_window(res.win, torch::TensorOptions().dtype(sig.dtype()));
  // Zero padding keeps very short signals valid at every resolution.
  sig = F::pad(sig, F::PadFuncOptions({res.n_fft / 2, res.n_fft / 2}));
  auto spec = torch::stft(sig, res.n_fft, res.hop, res.win, window, /*normalized=*/false, /*onesided=*/true,
                          /*return_complex=*/true);
  auto power = torch::real(spec).pow(2) + torch::imag(spec).pow(2);
  return torch::sqrt(power.clamp_min(1e-14)).transpose(1, 2);
}

torch::Tensor multires_stft_loss(const torch::Tensor& x, const torch::Tensor& y,
                                 const std::vector<StftResolution>& resolutions) {
  check_lengths(x, y);
  if (resolutions.empty()) fail(ErrorCode::InvalidConfig, "no STFT resolutions");
  torch::Tensor total = torch::zeros({}, x.options());
  for (const auto& res : resolutions) {
    auto mx = stft_magnitude(x, res);
    auto my = stft_magnitude(y, res);
    auto sc = torch::linalg_norm(my - mx, "fro", {1, 2}) / torch::linalg_norm(my, "fro", {1, 2});
    auto mag = (torch::log(my) - torch::log(mx)).abs().mean({1, 2});
    total = total + (sc + mag).mean();
  }
  return total / static_cast<double>(resolutions.size());
}

torch::Tensor log_mel(const torch::Tensor& x, const StftResolution& res, int bands, int sample_rate, double fmax) {
  auto mag = stft_magnitude(x, res);
  auto fb = to_tensor(mel_filterbank(sample_rate, res.n_fft, bands, 0.0, fmax)).to(mag.dtype());
  return torch::log(torch::matmul(mag, fb.t()).clamp_min(1e-5));
}

torch::Tensor multires_mel_loss(const torch::Tensor& x, const torch::Tensor& y,
                                const std::vector<StftResolution>& resolutions, const std::vector<int>& bands,
                                int sample_rate, double fmax) {
  check_lengths(x, y);
  if (resolutions.empty() || resolutions.size() != bands.size())
    fail(ErrorCode::InvalidConfig, "one mel band count per resolution");
  torch::Tensor total = torch::zeros({}, x.options());
  for (std::size_t i = 0; i < resolutions.size(); ++i) {
    auto lx = log_mel(x, resolutions[i], bands[i], sample_rate, fmax);
    auto ly = log_mel(y, resolutions[i], bands[i], sample_rate, fmax);
    total = total + (lx - ly).abs().mean();
  }
  return total / static_cast<double>(resolutions.size());
}

}  // namespace wesinger2
