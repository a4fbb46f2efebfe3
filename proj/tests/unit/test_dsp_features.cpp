#include "support/oracles.hpp"
#include "wesinger2/dsp_features.hpp"
#include "wesinger2/error.hpp"

#include <doctest.h>

#include <algorithm>
#include <random>

using namespace wesinger2;

namespace {

Waveform wave_of(std::vector<double> s) { return Waveform{std::move(s), 24000}; }

MelSpectrogram constant_mel(int frames, double v) {
  MelSpectrogram m;
  m.values = RowMatrix::Constant(frames, kMelBands, v);
  return m;
}

}  // namespace

TEST_CASE("mel frame count is ceil(samples / hop)") {
  FeatureConfig cfg;
  CHECK(compute_mel(wave_of(oracle::sine(440, 1.0)), cfg).frames() == 100);
  CHECK(compute_mel(wave_of(std::vector<double>(24001, 0.1)), cfg).frames() == 101);
  CHECK(compute_mel(wave_of(oracle::sine(440, 1.0)), cfg).n_mels() == 80);
  CHECK(frame_count(1, 240) == 1);
  CHECK(frame_count(240, 240) == 1);
  CHECK(frame_count(241, 240) == 2);
}

TEST_CASE("silent audio sits on the log floor") {
  const auto mel = compute_mel(wave_of(std::vector<double>(4800, 0.0)), FeatureConfig{});
  CHECK((mel.values.array() == std::log(1e-5)).all());
}

TEST_CASE("mel matches a direct Fourier-sum oracle") {
  FeatureConfig cfg;
  std::mt19937_64 rng(11);
  std::normal_distribution<double> noise(0.0, 0.05);
  auto x = oracle::sine(300, 0.1);
  const auto y = oracle::sine(2210, 0.1, 24000, 0.2);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += y[i] + noise(rng);
  const auto mel = compute_mel(wave_of(x), cfg);
  REQUIRE(mel.frames() == 10);
  double worst = 0.0;
  for (int t = 0; t < mel.frames(); ++t) {
    const auto ref = oracle::log_mel_frame(oracle::centered_frame(x, t * 240L, 1024), 24000, 80, 12000.0, 1e-5);
    for (int m = 0; m < 80; ++m) worst = std::max(worst, std::abs(ref[m] - mel.values(t, m)));
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("filterbank triangles peak at one on the HTK grid") {
  const auto fb = mel_filterbank(24000, 1024, 80, 0.0, 12000.0);
  const auto edges = oracle::mel_edges(80, 0.0, 12000.0);
  REQUIRE(fb.rows() == 80);
  REQUIRE(fb.cols() == 513);
  double worst = 0.0;
  for (int m = 0; m < 80; ++m)
    for (int k = 0; k < 513; ++k) worst = std::max(worst, std::abs(fb(m, k) - oracle::triangle(edges, m, k * 24000.0 / 1024)));
  CHECK(worst < 1e-12);
  CHECK(fb.maxCoeff() <= 1.0 + 1e-12);
  CHECK(hz_to_mel(mel_to_hz(1234.5)) == doctest::Approx(1234.5).epsilon(1e-12));
}

TEST_CASE("a 440 Hz tone peaks in the band centered nearest 440 Hz") {
  FeatureConfig cfg;
  const auto x = oracle::sine(440, 1.0);
  const auto mel = compute_mel(wave_of(x), cfg);
  const auto centers = mel_band_centers(cfg);
  int nearest = 0;
  for (int m = 1; m < 80; ++m)
    if (std::abs(centers[m] - 440.0) < std::abs(centers[nearest] - 440.0)) nearest = m;
  // Oracle: direct Fourier magnitude of an interior frame.
  const auto ref = oracle::log_mel_frame(oracle::centered_frame(x, 50 * 240L, 1024), 24000, 80, 12000.0, 1e-5);
  const int ref_arg = static_cast<int>(std::max_element(ref.begin(), ref.end()) - ref.begin());
  CHECK(ref_arg == nearest);
  for (int t = 5; t < 95; ++t) {
    Eigen::Index arg;
    mel.values.row(t).maxCoeff(&arg);
    CHECK(arg == nearest);
  }
}

TEST_CASE("hann window is periodic") {
  const auto w = hann_window(8);
  CHECK(w[0] == doctest::Approx(0.0));
  CHECK(w[4] == doctest::Approx(1.0));
  CHECK(w[2] == doctest::Approx(0.5));
}

TEST_CASE("YIN tracks a sine, rejects silence and noise") {
  FeatureConfig cfg;
  SUBCASE("220 Hz sine") {
    const auto f0 = estimate_f0_yin(wave_of(oracle::sine(220, 1.0)), cfg);
    int ok = 0, interior = 0;
    for (std::size_t t = 5; t + 5 < f0.size(); ++t) {
      ++interior;
      if (f0.voiced[t] && std::abs(f0.f0_hz[t] - 220.0) <= 1.0) ++ok;
    }
    CHECK(static_cast<double>(ok) / interior >= 0.95);
  }
  SUBCASE("digital silence") {
    const auto f0 = estimate_f0_yin(wave_of(std::vector<double>(24000, 0.0)), cfg);
    for (std::size_t t = 0; t < f0.size(); ++t) {
      CHECK(f0.voiced[t] == 0);
      CHECK(f0.f0_hz[t] == 0.0);
    }
  }
  SUBCASE("white noise") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n(0.0, 0.3);
    std::vector<double> x(24000);
    for (auto& v : x) v = n(rng);
    const auto f0 = estimate_f0_yin(wave_of(x), cfg);
    const auto unvoiced = std::count(f0.voiced.begin(), f0.voiced.end(), 0);
    CHECK(static_cast<double>(unvoiced) / f0.size() >= 0.8);
  }
  CHECK_THROWS_AS(estimate_f0_yin(Waveform{{}, 24000}, cfg), Error);
  CHECK_THROWS_AS(estimate_f0_yin(Waveform{{0.1, 0.2}, 16000}, cfg), Error);
}

TEST_CASE("linear interpolation of F0 gaps") {
  const auto a = linear_interpolate_f0({{100, 0, 0, 200}, {1, 0, 0, 1}});
  REQUIRE(a.f0_hz.size() == 4);
  CHECK(a.f0_hz[0] == doctest::Approx(100.0));
  CHECK(a.f0_hz[1] == doctest::Approx(400.0 / 3.0).epsilon(1e-9));
  CHECK(a.f0_hz[2] == doctest::Approx(500.0 / 3.0).epsilon(1e-9));
  CHECK(a.f0_hz[3] == doctest::Approx(200.0));

  const auto held = linear_interpolate_f0({{0, 0, 150}, {0, 0, 1}});
  CHECK(held.f0_hz == std::vector<double>{150, 150, 150});

  const F0Contour all{{110, 120, 130}, {1, 1, 1}};
  CHECK(linear_interpolate_f0(all).f0_hz == all.f0_hz);

  try {
    linear_interpolate_f0({{0, 0}, {0, 0}});
    FAIL("expected AllUnvoiced");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::AllUnvoiced);
  }
  try {
    linear_interpolate_f0({{-5, 100}, {1, 1}});
    FAIL("expected NonPositiveF0");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonPositiveF0);
  }
}

TEST_CASE("piano key quantization") {
  CHECK(hz_to_piano_key(440.0) == 49);
  CHECK(hz_to_piano_key(27.5) == 1);
  CHECK(hz_to_piano_key(20000.0) == 88);
  CHECK(hz_to_piano_key(5.0) == 1);
  for (int k = 0; k < 8; ++k) CHECK(hz_to_piano_key(27.5 * std::pow(2.0, k)) == 1 + 12 * k);
  int prev = 0;
  for (int hz = 30; hz <= 2000; ++hz) {
    const int key = hz_to_piano_key(hz);
    CHECK(key >= prev);
    prev = key;
  }
  for (int key = 1; key <= 88; ++key) CHECK(hz_to_piano_key(piano_key_to_hz(key)) == key);
  const auto seq = quantize_to_piano_keys({{440.0, 27.5, 20000.0}});
  CHECK(seq.keys == std::vector<int>{49, 1, 88});
}

TEST_CASE("singer statistics") {
  SUBCASE("constant mel hits the std floor") {
    std::vector<MelSpectrogram> mels{constant_mel(5, 3.0)};
    const auto s = compute_singer_stats(mels, "a");
    for (int i = 0; i < 80; ++i) {
      CHECK(s.mean[i] == doctest::Approx(3.0));
      CHECK(s.std[i] == doctest::Approx(kStdFloor));
    }
  }
  SUBCASE("population std over two frames") {
    std::vector<MelSpectrogram> mels{constant_mel(1, 0.0), constant_mel(1, 2.0)};
    const auto s = compute_singer_stats(mels, "a");
    for (int i = 0; i < 80; ++i) {
      CHECK(s.mean[i] == doctest::Approx(1.0));
      CHECK(s.std[i] == doctest::Approx(1.0));
    }
  }
  SUBCASE("normalize, re-estimate, round trip") {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> n(-3.0, 2.0);
    MelSpectrogram m;
    m.values.resize(200, 80);
    for (Eigen::Index i = 0; i < m.values.size(); ++i) m.values.data()[i] = n(rng);
    std::vector<MelSpectrogram> mels{m};
    const auto s = compute_singer_stats(mels, "a");
    auto norm = normalize_mel(m, s);
    CHECK(norm.normalized);
    auto plain = norm;
    plain.normalized = false;
    std::vector<MelSpectrogram> again{plain};
    const auto s2 = compute_singer_stats(again, "a");
    for (int i = 0; i < 80; ++i) {
      CHECK(std::abs(s2.mean[i]) < 1e-9);
      CHECK(s2.std[i] == doctest::Approx(1.0).epsilon(1e-9));
    }
    const auto back = denormalize_mel(norm, s);
    CHECK((back.values - m.values).cwiseAbs().maxCoeff() < 1e-6);

    MelSpectrogram at_mean;
    at_mean.values = Eigen::Map<const Eigen::RowVectorXd>(s.mean.data(), 80).replicate(3, 1);
    CHECK(normalize_mel(at_mean, s).values.cwiseAbs().maxCoeff() < 1e-12);
    MelSpectrogram two_std = at_mean;
    for (int i = 0; i < 80; ++i) two_std.values(0, i) += 2.0 * s.std[i];
    CHECK(normalize_mel(two_std, s).values(0, 7) == doctest::Approx(2.0));
    CHECK_THROWS_AS(normalize_mel(norm, s), Error);
  }
  SUBCASE("errors") {
    std::vector<MelSpectrogram> none;
    CHECK_THROWS_AS(compute_singer_stats(none, "a"), Error);
    auto other = constant_mel(2, 1.0);
    other.singer_id = "b";
    std::vector<MelSpectrogram> mixed{other};
    CHECK_THROWS_AS(compute_singer_stats(mixed, "a"), Error);
  }
}
