#include "support/oracles.hpp"
#include "wesinger2/critics.hpp"
#include "wesinger2/error.hpp"

#include <doctest.h>

using namespace wesinger2;

namespace {

/// Eleven sub-critics that all score the mean sample value (optionally 1 - mean).
struct MeanWaveCritic : WaveCritic {
  bool invert = false;
  std::vector<torch::Tensor> scores(const torch::Tensor& wave, const torch::Tensor&, const CropPlan&) override {
    auto m = wave.mean(1);
    return std::vector<torch::Tensor>(11, invert ? 1.0 - m : m);
  }
};

struct ConstWaveCritic : WaveCritic {
  double value;
  explicit ConstWaveCritic(double v) : value(v) {}
  std::vector<torch::Tensor> scores(const torch::Tensor& wave, const torch::Tensor&, const CropPlan&) override {
    return std::vector<torch::Tensor>(11, torch::full({wave.size(0)}, value, wave.options()));
  }
};

const torch::Tensor kSinger = torch::tensor({0L, 1L});

torch::Tensor ones() { return torch::ones({2, 6000}, torch::kFloat64); }
torch::Tensor zeros() { return torch::zeros({2, 6000}, torch::kFloat64); }

}  // namespace

TEST_CASE("critic loss oracles") {
  CropPlan plan;
  MeanWaveCritic right;
  CHECK(voc_loss_d(right, ones(), zeros(), kSinger, plan).item<double>() == doctest::Approx(0.0));
  MeanWaveCritic wrong;
  wrong.invert = true;
  CHECK(std::abs(voc_loss_d(wrong, ones(), zeros(), kSinger, plan).item<double>() - 22.0) < 1e-6);
  ConstWaveCritic half(0.5);
  CHECK(std::abs(voc_loss_d(half, ones(), zeros(), kSinger, plan).item<double>() - 5.5) < 1e-6);
}

TEST_CASE("generator loss oracles") {
  CropPlan plan;
  const StftLossConfig cfg;
  auto tone = torch::tensor(oracle::sine(300, 0.25), torch::kFloat64).unsqueeze(0).repeat({2, 1});
  ConstWaveCritic one(1.0), zero(0.0);
  CHECK(voc_loss_g(one, tone, tone, kSinger, plan, cfg).total.item<double>() == doctest::Approx(0.0));
  CHECK(std::abs(voc_loss_g(zero, tone, tone, kSinger, plan, cfg).total.item<double>() - 11.0) < 1e-6);

  StftLossConfig adv_only = cfg;
  adv_only.lambda_stft = adv_only.lambda_mel = 0.0;
  auto noise = torch::randn_like(tone) * 0.1;
  auto parts = voc_loss_g(zero, noise, tone, kSinger, plan, adv_only);
  CHECK(parts.total.item<double>() == parts.adversarial.item<double>());
  auto full = voc_loss_g(zero, noise, tone, kSinger, plan, cfg);
  CHECK(full.total.item<double>() ==
        doctest::Approx(11.0 + 15.0 * full.stft.item<double>() + 15.0 * full.mel.item<double>()).epsilon(1e-12));
  CHECK_THROWS_AS(voc_loss_g(zero, noise.narrow(1, 0, 100), tone, kSinger, plan, cfg), Error);
}

TEST_CASE("ensemble yields 3 + 5 + 3 scores and is conditional") {
  torch::manual_seed(1);
  auto cfg = CriticConfig::desk(2);
  CHECK(cfg.n_subcritics() == 11);
  CriticEnsemble critics(cfg);
  std::mt19937_64 rng(1);
  auto wave = torch::randn({1, 24000}) * 0.3;
  const auto plan = plan_crops(cfg, 24000, rng);
  auto a = critics->scores(wave, torch::tensor({0L}), plan);
  auto b = critics->scores(wave, torch::tensor({1L}), plan);
  REQUIRE(a.size() == 11);
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].sizes() == torch::IntArrayRef({1}));
    CHECK(std::isfinite(a[i].item<double>()));
    differs = differs || a[i].item<double>() != b[i].item<double>();
  }
  CHECK(differs);

  try {
    critics->scores(torch::randn({1, 5999}), torch::tensor({0L}), plan);
    FAIL("expected TooShort");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TooShort);
  }
  CHECK_THROWS_AS(critics->scores(wave, torch::tensor({2L}), plan), Error);

  auto plain_cfg = cfg;
  plain_cfg.conditional = false;
  CriticEnsemble plain(plain_cfg);
  auto p0 = plain->scores(wave, torch::tensor({0L}), plan);
  auto p1 = plain->scores(wave, torch::tensor({1L}), plan);
  for (std::size_t i = 0; i < p0.size(); ++i) CHECK(p0[i].item<double>() == p1[i].item<double>());

  auto only_mpd = cfg;
  only_mpd.use_msd = only_mpd.use_mld = false;
  CHECK(only_mpd.n_subcritics() == 5);
}

TEST_CASE("crop plans stay inside the signal") {
  const auto cfg = CriticConfig::desk(1);
  std::mt19937_64 rng(2);
  for (std::int64_t len : {6000L, 9000L, 19200L, 30000L}) {
    const auto plan = plan_crops(cfg, len, rng);
    REQUIRE(plan.offsets.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(plan.lengths[i] == std::min<std::int64_t>(len, std::llround(cfg.mld_crop_seconds[i] * 24000)));
      CHECK(plan.offsets[i] + plan.lengths[i] <= len);
    }
  }
}

TEST_CASE("period folding reflect-pads the tail") {
  auto x = torch::arange(24001, torch::kFloat64).unsqueeze(0);
  auto g = period_grid(x, 2);
  CHECK(g.sizes() == torch::IntArrayRef({1, 1, 12001, 2}));
  CHECK(g[0][0][12000][0].item<double>() == 24000.0);
  CHECK(g[0][0][12000][1].item<double>() == 23999.0);
  CHECK(period_grid(torch::arange(30, torch::kFloat64), 5).sizes() == torch::IntArrayRef({1, 1, 6, 5}));
}

TEST_CASE("finite differences: critic objective through the ensemble") {
  torch::manual_seed(3);
  auto cfg = CriticConfig::desk(2);
  cfg.msd_channels = {4, 4, 4, 4, 4, 4};
  cfg.mpd_channels = {4, 4, 4, 4, 4};
  cfg.mld_channels = {4, 4, 4, 4, 4};
  cfg.singer_embed = 4;
  cfg.min_seconds = 0.01;
  cfg.mld_crop_seconds = {0.02, 0.04};
  CriticEnsemble critics(cfg);
  critics->to(torch::kFloat64);
  std::mt19937_64 rng(4);
  const auto plan = plan_crops(cfg, 1200, rng);
  auto real = torch::randn({2, 1200}, torch::kFloat64) * 0.3;
  auto fake = (torch::randn({2, 1200}, torch::kFloat64) * 0.3).requires_grad_(true);
  auto d_loss = [&] { return voc_loss_d(*critics, real, fake, kSinger, plan); };
  for (auto& p : critics->named_parameters())
    if (p.key().find("post.weight") != std::string::npos) CHECK(oracle::fd_relative_error(p.value(), d_loss) <= 1e-3);
  StftLossConfig stft;
  stft.resolutions = {{64, 16, 64}, {128, 32, 128}};
  stft.mel_bands = {20, 40};
  auto g_loss = [&] { return voc_loss_g(*critics, fake, real, kSinger, plan, stft).total; };
  CHECK(oracle::fd_relative_error(fake, g_loss) <= 1e-3);
}
