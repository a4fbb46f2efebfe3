#include "support/oracles.hpp"
#include "wesinger2/error.hpp"
#include "wesinger2/spectral_loss.hpp"

#include <doctest.h>

#include <random>

using namespace wesinger2;

namespace {

torch::Tensor to_tensor(const std::vector<double>& v) {
  return torch::tensor(v, torch::kFloat64).unsqueeze(0);
}

std::vector<double> noisy(std::uint64_t seed, std::size_t n, double amp) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, amp);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

}  // namespace

TEST_CASE("stft magnitude framing matches a direct Fourier sum") {
  const auto x = noisy(1, 700, 0.3);
  const StftResolution res{128, 32, 128};
  auto mag = stft_magnitude(to_tensor(x), res);
  REQUIRE(mag.size(1) == 1 + 700 / 32);
  REQUIRE(mag.size(2) == 65);
  double worst = 0.0;
  for (long t = 0; t < mag.size(1); ++t) {
    const auto ref = oracle::dft_magnitude(oracle::centered_frame(x, t * 32, 128));
    for (int k = 0; k < 65; ++k) worst = std::max(worst, std::abs(mag[0][t][k].item<double>() - std::max(ref[k], 1e-7)));
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("multi-resolution STFT loss") {
  const StftLossConfig cfg;
  auto x = to_tensor(oracle::sine(440, 0.25));
  CHECK(multires_stft_loss(x, x, cfg.resolutions).item<double>() == 0.0);
  // y = 2x: spectral convergence 1/2, log-magnitude distance log 2 in every bin.
  // Broadband noise keeps every bin far above the magnitude floor.
  x = to_tensor(noisy(4, 6000, 0.3));
  CHECK(multires_stft_loss(x, 2.0 * x, cfg.resolutions).item<double>() ==
        doctest::Approx(0.5 + std::log(2.0)).epsilon(1e-6));
  for (const auto& r : cfg.resolutions) {
    auto lx = torch::log(stft_magnitude(x, r)), ly = torch::log(stft_magnitude(2.0 * x, r));
    CHECK((ly - lx).abs().mean().item<double>() == doctest::Approx(std::log(2.0)).epsilon(1e-4));
  }
  auto y = to_tensor(noisy(2, 6000, 0.1));
  CHECK(multires_stft_loss(x, y, cfg.resolutions).item<double>() > 0.0);
  CHECK(multires_stft_loss(y, x, cfg.resolutions).item<double>() > 0.0);
  try {
    multires_stft_loss(x, x.narrow(1, 0, 100), cfg.resolutions);
    FAIL("expected LengthMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::LengthMismatch);
  }
}

TEST_CASE("multi-resolution mel loss agrees with a straight-line recomputation") {
  const StftLossConfig cfg;
  auto a = oracle::sine(330, 0.05);
  const auto b = noisy(3, a.size(), 0.05);
  auto c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c[i] += b[i];
  const auto got = multires_mel_loss(to_tensor(a), to_tensor(c), cfg.resolutions, cfg.mel_bands, 24000, 12000.0);
  double ref = 0.0;
  for (std::size_t i = 0; i < cfg.resolutions.size(); ++i)
    ref += oracle::mel_l1(a, c, cfg.resolutions[i].n_fft, cfg.resolutions[i].hop, cfg.mel_bands[i], 24000, 12000.0);
  ref /= static_cast<double>(cfg.resolutions.size());
  CHECK(std::abs(got.item<double>() - ref) < 1e-5);

  auto x = to_tensor(a);
  CHECK(multires_mel_loss(x, x, cfg.resolutions, cfg.mel_bands, 24000, 12000.0).item<double>() == 0.0);
  auto silence = torch::zeros_like(x);
  CHECK(multires_mel_loss(silence, x, cfg.resolutions, cfg.mel_bands, 24000, 12000.0).item<double>() > 0.0);
}

TEST_CASE("finite differences: STFT and mel losses") {
  const StftLossConfig cfg;
  auto y = to_tensor(noisy(4, 512, 0.2));
  auto x = to_tensor(noisy(5, 512, 0.2)).requires_grad_(true);
  CHECK(oracle::fd_relative_error(x, [&] { return multires_stft_loss(x, y, cfg.resolutions); }) <= 1e-3);
  CHECK(oracle::fd_relative_error(
            x, [&] { return multires_mel_loss(x, y, cfg.resolutions, cfg.mel_bands, 24000, 12000.0); }) <= 1e-3);
}
