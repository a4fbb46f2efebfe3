#include "wesinger2/toy_corpus.hpp"

#include "wesinger2/audio_io.hpp"
#include "wesinger2/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>

namespace wesinger2 {

namespace fs = std::filesystem;

namespace {

struct Formants {
  double f1, f2, f3;
};

Formants formants_for(const std::string& phoneme) {
  const auto h = std::hash<std::string>{}(phoneme);
  return {300.0 + static_cast<double>(h % 600), 900.0 + static_cast<double>((h / 600) % 1500),
          2300.0 + static_cast<double>((h / 900000) % 900)};
}

double resonance(double f, double center, double bandwidth) {
  const double x = (f - center) / bandwidth;
  return 1.0 / (1.0 + x * x);
}

}  // namespace

Waveform render_toy_singing(const std::vector<ScoreNote>& notes, const std::string& singer, int sample_rate,
                            std::uint64_t seed) {
  if (notes.empty()) fail(ErrorCode::EmptyInput, "no notes to render");
  const auto total = static_cast<std::size_t>(std::llround(notes.back().offset_ms * sample_rate / 1000.0));
  Waveform wave;
  wave.sample_rate = sample_rate;
  wave.samples.assign(total, 0.0);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  const double tilt = 0.6 + 0.15 * static_cast<double>(std::hash<std::string>{}(singer) % 5);
  const double nyquist_guard = 0.45 * sample_rate;
  double phase = 0.0;

  for (const auto& note : notes) {
    const auto begin = static_cast<std::size_t>(std::llround(note.onset_ms * sample_rate / 1000.0));
    const auto end = std::min(total, static_cast<std::size_t>(std::llround(note.offset_ms * sample_rate / 1000.0)));
    if (note.is_rest()) {
      for (auto i = begin; i < end; ++i) wave.samples[i] = 0.002 * noise(rng);
      continue;
    }
    const double base = 440.0 * std::pow(2.0, (*note.midi_pitch - 69) / 12.0);
    const auto fm = formants_for(note.phoneme);
    const int n_harm = std::max(1, static_cast<int>(nyquist_guard / base));
    std::vector<double> amp(static_cast<std::size_t>(n_harm));
    for (int k = 1; k <= n_harm; ++k) {
      const double f = k * base;
      const double env = resonance(f, fm.f1, 90.0) + 0.6 * resonance(f, fm.f2, 120.0) + 0.3 * resonance(f, fm.f3, 200.0);
      amp[k - 1] = (0.02 + env) / std::pow(static_cast<double>(k), tilt);
    }
    double norm = 0.0;
    for (double a : amp) norm += a;
    const double attack = 0.01 * sample_rate;
    for (auto i = begin; i < end; ++i) {
      const double t = static_cast<double>(i) / sample_rate;
      const double f0 = base * std::pow(2.0, 0.25 / 12.0 * std::sin(2.0 * std::numbers::pi * 5.5 * t));
      phase += 2.0 * std::numbers::pi * f0 / sample_rate;
      double s = 0.0;
      for (int k = 1; k <= n_harm; ++k) {
        if (k * f0 >= nyquist_guard) break;
        s += amp[k - 1] * std::sin(k * phase);
      }
      const double pos = static_cast<double>(i - begin);
      const double rem = static_cast<double>(end - i);
      const double gain = std::min({1.0, pos / attack, rem / attack});
      wave.samples[i] = 0.5 * gain * s / norm + 0.002 * noise(rng);
    }
  }
  return wave;
}

std::vector<ScoreNote> random_toy_score(double seconds, std::uint64_t seed) {
  static const std::vector<std::string> kVowels = {"a", "o", "e", "i", "u", "ai", "ao", "ou", "an", "ang"};
  static const std::vector<std::string> kConsonants = {"b", "d", "g", "m", "n", "l", "sh", "x"};
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pitch(55, 74);
  std::uniform_int_distribution<int> vowel_ms(180, 420);
  std::uniform_int_distribution<int> cons_ms(40, 80);
  std::uniform_int_distribution<std::size_t> pick_v(0, kVowels.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_c(0, kConsonants.size() - 1);
  std::bernoulli_distribution rest(0.12);

  std::vector<ScoreNote> notes;
  double t = 0.0;
  const double limit = seconds * 1000.0;
  notes.push_back({"SP", std::nullopt, 0.0, 60.0});
  t = 60.0;
  while (t < limit - 120.0) {
    if (rest(rng)) {
      notes.push_back({"SP", std::nullopt, t, t + 100.0});
      t += 100.0;
      continue;
    }
    const int p = pitch(rng);
    const double c = cons_ms(rng);
    notes.push_back({kConsonants[pick_c(rng)], p, t, t + c});
    t += c;
    const double v = std::min<double>(vowel_ms(rng), std::max(60.0, limit - t - 60.0));
    notes.push_back({kVowels[pick_v(rng)], p, t, t + v});
    t += v;
  }
  notes.push_back({"SP", std::nullopt, t, std::max(t + 60.0, limit)});
  return notes;
}

std::vector<ManifestRecord> make_toy_corpus(const fs::path& dir, int n_singers, int clips_per_singer,
                                            double clip_seconds, std::uint64_t seed) {
  if (n_singers < 1 || clips_per_singer < 1) fail(ErrorCode::InvalidConfig, "toy corpus needs singers and clips");
  fs::create_directories(dir);
  std::vector<ManifestRecord> records;
  for (int s = 0; s < n_singers; ++s) {
    const std::string singer = "singer" + std::to_string(s);
    for (int c = 0; c < clips_per_singer; ++c) {
      const std::string clip_id = singer + "_" + std::to_string(c);
      const std::uint64_t clip_seed = seed * 1000003ULL + static_cast<std::uint64_t>(s * 1000 + c);
      auto notes = random_toy_score(clip_seconds, clip_seed);
      // Shift each singer into its own register.
      for (auto& n : notes)
        if (n.midi_pitch) n.midi_pitch = *n.midi_pitch + 3 * (s % 4) - 4;
      const auto wave = render_toy_singing(notes, singer, 24000, clip_seed + 17);
      const auto wav_path = dir / (clip_id + ".wav");
      const auto score_path = dir / (clip_id + ".txt");
      write_wav(wav_path, wave);
      std::ofstream(score_path) << "# toy score for " << clip_id << '\n' << serialize_score(notes);
      records.push_back({clip_id, wav_path.filename().string(), score_path.filename().string(), singer});
    }
  }
  write_manifest(dir / "manifest.jsonl", records);
  for (auto& r : records) {
    r.wav_path = (dir / r.wav_path).string();
    r.score_path = (dir / r.score_path).string();
  }
  return records;
}

}  // namespace wesinger2
