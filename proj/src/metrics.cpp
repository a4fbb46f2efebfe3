#include "wesinger2/metrics.hpp"

#include "wesinger2/audio_io.hpp"
#include "wesinger2/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace wesinger2 {

namespace fs = std::filesystem;

F0Comparison compare_f0(const F0Contour& gen, const F0Contour& ref) {
  const std::size_t n = std::min(gen.size(), ref.size());
  F0Comparison out;
  out.frames = static_cast<int>(n);
  double sq_hz = 0.0, sq_cents = 0.0;
  int mismatched = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const bool a = gen.voiced[t] != 0, b = ref.voiced[t] != 0;
    if (a != b) ++mismatched;
    if (!(a && b)) continue;
    const double d = gen.f0_hz[t] - ref.f0_hz[t];
    const double c = 1200.0 * std::log2(gen.f0_hz[t] / ref.f0_hz[t]);
    sq_hz += d * d;
    sq_cents += c * c;
    ++out.voiced_overlap;
  }
  if (out.voiced_overlap == 0) fail(ErrorCode::NoVoicedOverlap, "no frame is voiced in both signals");
  out.rmse_hz = std::sqrt(sq_hz / out.voiced_overlap);
  out.rmse_cents = std::sqrt(sq_cents / out.voiced_overlap);
  out.voicing_error_rate = n ? static_cast<double>(mismatched) / static_cast<double>(n) : 0.0;
  return out;
}

F0Comparison compare_f0(const Waveform& gen, const Waveform& ref, const FeatureConfig& cfg) {
  return compare_f0(estimate_f0_yin(gen, cfg), estimate_f0_yin(ref, cfg));
}

double f0_rmse(const Waveform& gen, const Waveform& ref, const FeatureConfig& cfg) {
  return compare_f0(gen, ref, cfg).rmse_hz;
}

double mel_distortion(const MelSpectrogram& gen, const MelSpectrogram& ref) {
  if (gen.n_mels() != ref.n_mels()) fail(ErrorCode::ChannelMismatch, "mel band counts differ");
  const int frames = std::min(gen.frames(), ref.frames());
  if (frames < 1) fail(ErrorCode::TooShort, "mel distortion needs at least one frame");
  double total = 0.0;
  for (int t = 0; t < frames; ++t) {
    const double ms = (gen.values.row(t) - ref.values.row(t)).squaredNorm() / gen.n_mels();
    total += std::sqrt(ms);
  }
  return total / frames;
}

double mel_distortion(const Waveform& gen, const Waveform& ref, const FeatureConfig& cfg) {
  if (gen.samples.empty() || ref.samples.empty()) fail(ErrorCode::TooShort, "empty waveform");
  return mel_distortion(compute_mel(gen, cfg), compute_mel(ref, cfg));
}

void finalize_report(EvalReport& r) {
  const double n = static_cast<double>(r.clips.size());
  if (r.clips.empty()) return;
  double f0 = 0.0, cents = 0.0, msd = 0.0;
  for (const auto& c : r.clips) {
    f0 += c.f0_rmse;
    cents += c.f0_rmse_cents;
    msd += c.msd;
  }
  r.mean_f0_rmse = f0 / n;
  r.mean_f0_rmse_cents = cents / n;
  r.mean_msd = msd / n;
  double vf = 0.0, vm = 0.0;
  for (const auto& c : r.clips) {
    vf += (c.f0_rmse - r.mean_f0_rmse) * (c.f0_rmse - r.mean_f0_rmse);
    vm += (c.msd - r.mean_msd) * (c.msd - r.mean_msd);
  }
  r.std_f0_rmse = std::sqrt(vf / n);
  r.std_msd = std::sqrt(vm / n);
}

EvalReport evaluate_directories(const fs::path& ref_dir, const fs::path& hyp_dir, const FeatureConfig& cfg) {
  std::vector<fs::path> hyps;
  for (const auto& e : fs::directory_iterator(hyp_dir))
    if (e.path().extension() == ".wav") hyps.push_back(e.path());
  std::sort(hyps.begin(), hyps.end());
  if (hyps.empty()) fail(ErrorCode::EmptyCollection, "no .wav files in " + hyp_dir.string());

  EvalReport report;
  for (const auto& hyp : hyps) {
    const auto ref_path = ref_dir / hyp.filename();
    if (!fs::exists(ref_path)) fail(ErrorCode::Io, "no reference for " + hyp.filename().string());
    const auto gen = read_wav(hyp);
    const auto ref = read_wav(ref_path);
    const auto f0 = compare_f0(gen, ref, cfg);
    report.clips.push_back({hyp.stem().string(), f0.rmse_hz, f0.rmse_cents, f0.voicing_error_rate,
                            mel_distortion(gen, ref, cfg), gen.duration_s()});
  }
  finalize_report(report);
  return report;
}

std::string report_to_json(const EvalReport& r) {
  nlohmann::json clips = nlohmann::json::array();
  for (const auto& c : r.clips)
    clips.push_back({{"clip_id", c.clip_id},
                     {"f0_rmse", c.f0_rmse},
                     {"f0_rmse_cents", c.f0_rmse_cents},
                     {"voicing_error_rate", c.voicing_error_rate},
                     {"msd", c.msd},
                     {"duration_s", c.duration_s}});
  nlohmann::json j{{"clips", clips},
                   {"mean", {{"f0_rmse", r.mean_f0_rmse}, {"f0_rmse_cents", r.mean_f0_rmse_cents}, {"msd", r.mean_msd}}},
                   {"std", {{"f0_rmse", r.std_f0_rmse}, {"msd", r.std_msd}}}};
  return j.dump(2);
}

std::string report_to_csv(const EvalReport& r) {
  std::ostringstream out;
  out.precision(8);
  out << "clip_id,f0_rmse,f0_rmse_cents,voicing_error_rate,msd,duration_s\n";
  for (const auto& c : r.clips)
    out << c.clip_id << ',' << c.f0_rmse << ',' << c.f0_rmse_cents << ',' << c.voicing_error_rate << ',' << c.msd
        << ',' << c.duration_s << '\n';
  return out.str();
}

}  // namespace wesinger2
