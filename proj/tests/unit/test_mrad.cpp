#include "support/oracles.hpp"
#include "support/tiny.hpp"
#include "wesinger2/error.hpp"
#include "wesinger2/mrad.hpp"

#include <doctest.h>

using namespace wesinger2;

namespace {

/// D = mean of the patch: scores 1 on an all-ones mel and 0 on an all-zero mel.
struct MeanCritic : PatchCritic {
  bool invert = false;
  torch::Tensor score(int, const torch::Tensor& patch, const torch::Tensor&) override {
    auto m = patch.mean({1, 2});
    return invert ? 1.0 - m : m;
  }
};

struct ConstCritic : PatchCritic {
  double value;
  explicit ConstCritic(double v) : value(v) {}
  torch::Tensor score(int, const torch::Tensor& patch, const torch::Tensor&) override {
    return torch::full({patch.size(0)}, value, patch.options());
  }
};

constexpr int kFrames = 200;

torch::Tensor ones() { return torch::ones({2, kFrames, 81}, torch::kFloat64); }
torch::Tensor zeros() { return torch::zeros({2, kFrames, 81}, torch::kFloat64); }
torch::Tensor all_frames() { return torch::ones({2, kFrames}, torch::kBool); }
torch::Tensor singers() { return torch::tensor({0L, 1L}); }

}  // namespace

TEST_CASE("region sampler bounds") {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 200; ++i) {
    const auto r = sample_region(0, 300, rng);
    CHECK(r.height == 20);
    CHECK(r.width == 190);
    CHECK((r.top >= 0 && r.top <= 60));
    CHECK((r.left >= 0 && r.left <= 110));
    CHECK(sample_region(0, 190, rng).left == 0);
  }
  try {
    sample_region(3, 29, rng);
    FAIL("expected InsufficientFrames");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InsufficientFrames);
  }
}

TEST_CASE("region sampler is uniform") {
  for (int i = 0; i < kNumRegionCritics; ++i) {
    const int frames = kRegionWidths[i] + 37;
    std::mt19937_64 rng(100 + i);
    std::vector<int> tops, lefts;
    for (int n = 0; n < 10000; ++n) {
      const auto r = sample_region(i, frames, rng);
      REQUIRE(r.top + r.height <= 80);
      REQUIRE(r.left + r.width <= frames);
      tops.push_back(r.top);
      lefts.push_back(r.left);
    }
    const int top_max = 80 - kRegionHeights[i], left_max = frames - kRegionWidths[i];
    CHECK(oracle::chi_square_uniform(tops, 0, top_max) < oracle::chi_square_critical_99(top_max));
    CHECK(oracle::chi_square_uniform(lefts, 0, left_max) < oracle::chi_square_critical_99(left_max));
  }
}

TEST_CASE("patch extraction puts bands on the height axis") {
  auto mel = torch::arange(300 * 80, torch::kFloat64).view({1, 300, 80});
  const RegionSpec r{5, 7, 20, 190};
  auto p = extract_patch(mel, r);
  CHECK(p.sizes() == torch::IntArrayRef({1, 20, 190}));
  CHECK(p[0][0][0].item<double>() == 7 * 80 + 5);
  CHECK(p[0][1][2].item<double>() == 9 * 80 + 6);
}

TEST_CASE("critic loss oracles") {
  std::mt19937_64 rng(3);
  MeanCritic right;
  CHECK(mrad_loss_d(right, ones(), zeros(), singers(), kFrames, rng).item<double>() == doctest::Approx(0.0));
  MeanCritic wrong;
  wrong.invert = true;
  CHECK(mrad_loss_d(wrong, ones(), zeros(), singers(), kFrames, rng).item<double>() ==
        doctest::Approx(8.0).epsilon(1e-9));
  ConstCritic half(0.5);
  CHECK(mrad_loss_d(half, ones(), zeros(), singers(), kFrames, rng).item<double>() == doctest::Approx(2.0).epsilon(1e-9));
  CHECK_THROWS_AS(mrad_loss_d(half, ones().narrow(1, 0, 29), zeros().narrow(1, 0, 29), singers(), 29, rng), Error);
}

TEST_CASE("generator loss oracles") {
  std::mt19937_64 rng(4);
  ConstCritic one(1.0), half(0.5);
  auto g0 = mrad_loss_g(one, ones(), ones(), all_frames(), singers(), 1.0, 20.0, kFrames, rng);
  CHECK(g0.total.item<double>() == doctest::Approx(0.0));
  auto g = mrad_loss_g(half, ones() * 2.0, ones(), all_frames(), singers(), 1.0, 20.0, kFrames, rng);
  CHECK(std::abs(g.total.item<double>() - 21.0) < 1e-6);
  CHECK(std::abs(g.adversarial.item<double>() - 1.0) < 1e-6);
  CHECK(std::abs(g.l1.item<double>() - 1.0) < 1e-6);
}

TEST_CASE("progressive sums over blocks") {
  std::mt19937_64 rng(5);
  ConstCritic one(1.0), half(0.5);
  std::vector<torch::Tensor> perfect(7, ones());
  CHECK(progressive_loss_g(one, perfect, ones(), all_frames(), singers(), 1.0, 20.0, kFrames, rng).g_total.item<double>() ==
        doctest::Approx(0.0));
  std::vector<torch::Tensor> off(7, ones() * 2.0);
  auto p = progressive_losses(half, off, ones(), all_frames(), singers(), 1.0, 20.0, kFrames, rng);
  CHECK(std::abs(p.g_total.item<double>() - 147.0) < 1e-6);
  CHECK(std::abs(p.d_total.item<double>() - 14.0) < 1e-6);
  CHECK(p.scores.size() == 7);

  std::mt19937_64 a(6), b(6);
  std::vector<torch::Tensor> single{ones() * 3.0};
  auto prog = progressive_loss_g(half, single, ones(), all_frames(), singers(), 0.7, 20.0, kFrames, a);
  auto plain = mrad_loss_g(half, single[0], ones(), all_frames(), singers(), 0.7, 20.0, kFrames, b);
  CHECK(prog.g_total.item<double>() == plain.total.item<double>());
}

TEST_CASE("critic ensemble scores every patch size and is conditional") {
  torch::manual_seed(2);
  MradEnsemble critics(tiny::mrad(2));
  for (int i = 0; i < kNumRegionCritics; ++i) {
    auto patch = torch::randn({1, kRegionHeights[i], kRegionWidths[i]});
    auto s0 = critics->score(i, patch, torch::tensor({0L}));
    auto s1 = critics->score(i, patch, torch::tensor({1L}));
    CHECK(s0.sizes() == torch::IntArrayRef({1}));
    CHECK(std::isfinite(s0.item<double>()));
    CHECK(s0.item<double>() != s1.item<double>());
  }
  CHECK_THROWS_AS(critics->score(0, torch::randn({1, 30, 190}), torch::tensor({0L})), Error);
  CHECK_THROWS_AS(critics->score(0, torch::randn({1, 20, 190}), torch::tensor({5L})), Error);

  auto uncond = tiny::mrad(2);
  uncond.conditional = false;
  MradEnsemble plain(uncond);
  auto patch = torch::randn({1, 20, 190});
  CHECK(plain->score(0, patch, torch::tensor({0L})).item<double>() ==
        plain->score(0, patch, torch::tensor({1L})).item<double>());
}

TEST_CASE("finite differences: critic objective w.r.t. critic weights") {
  torch::manual_seed(7);
  MradEnsemble critics(tiny::mrad(2));
  critics->to(torch::kFloat64);
  auto real = torch::randn({2, 60, 81}, torch::kFloat64);
  auto fake = torch::randn({2, 60, 81}, torch::kFloat64);
  auto loss = [&] {
    std::mt19937_64 rng(8);
    return mrad_loss_d(*critics, real, fake, singers(), 60, rng);
  };
  for (auto& p : critics->named_parameters())
    if (p.key().find("weight") != std::string::npos && p.key().find("critics.3") != std::string::npos)
      CHECK(oracle::fd_relative_error(p.value(), loss) <= 1e-3);
}
