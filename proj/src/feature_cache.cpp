#include "wesinger2/feature_cache.hpp"

#include "wesinger2/audio_io.hpp"
#include "wesinger2/error.hpp"
#include "wesinger2/feature_config_json.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iostream>
#include <set>

namespace wesinger2 {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'W', 'S', '2', 'F', 'E', 'A', 'T', '1'};

template <typename T>
void write_array(std::ostream& out, const std::vector<T>& v) {
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(T)));
}

template <typename T>
std::vector<T> read_array(std::istream& in, std::size_t n) {
  std::vector<T> v(n);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(T)));
  return v;
}

void write_json_atomic(const fs::path& path, const json& j) {
  const auto tmp = fs::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp);
    if (!out) fail(ErrorCode::Io, "cannot write " + tmp.string());
    out << j.dump(2) << '\n';
  }
  fs::rename(tmp, path);
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
}

}  // namespace

ClipFeatures extract_clip_features(const ManifestRecord& record, const Waveform& wave, const FeatureConfig& cfg) {
  ClipFeatures clip;
  clip.clip_id = record.clip_id;
  clip.singer = record.singer;
  clip.wav_path = record.wav_path;
  clip.score_path = record.score_path;
  clip.hop_size = cfg.hop_size;
  clip.sample_rate = cfg.sample_rate;
  clip.mel = compute_mel(wave, cfg);
  clip.mel.singer_id = record.singer;
  clip.f0 = estimate_f0_yin(wave, cfg);
  clip.lif0 = linear_interpolate_f0(clip.f0);
  clip.keys = quantize_to_piano_keys(clip.lif0);
  return clip;
}

void write_clip_features(const fs::path& dir, const ClipFeatures& clip) {
  const auto frames = static_cast<std::uint32_t>(clip.frames());
  const auto n_mels = static_cast<std::uint32_t>(clip.mel.n_mels());
  if (clip.f0.size() != frames || clip.lif0.f0_hz.size() != frames || clip.keys.keys.size() != frames)
    fail(ErrorCode::FrameMismatch, "clip " + clip.clip_id + " has misaligned feature streams");

  const auto bin_path = dir / (clip.clip_id + ".feat");
  const auto tmp = fs::path(bin_path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) fail(ErrorCode::Io, "cannot write " + tmp.string());
    out.write(kMagic, sizeof(kMagic));
    out.write(reinterpret_cast<const char*>(&frames), 4);
    out.write(reinterpret_cast<const char*>(&n_mels), 4);
    std::vector<float> mel(static_cast<std::size_t>(frames) * n_mels);
    for (std::uint32_t t = 0; t < frames; ++t)
      for (std::uint32_t m = 0; m < n_mels; ++m) mel[t * n_mels + m] = static_cast<float>(clip.mel.values(t, m));
    write_array(out, mel);
    write_array(out, std::vector<float>(clip.f0.f0_hz.begin(), clip.f0.f0_hz.end()));
    write_array(out, clip.f0.voiced);
    write_array(out, std::vector<float>(clip.lif0.f0_hz.begin(), clip.lif0.f0_hz.end()));
    write_array(out, std::vector<std::int32_t>(clip.keys.keys.begin(), clip.keys.keys.end()));
    if (!out) fail(ErrorCode::Io, "short write to " + tmp.string());
  }
  fs::rename(tmp, bin_path);

  write_json_atomic(dir / (clip.clip_id + ".json"), json{{"clip_id", clip.clip_id},
                                                          {"singer", clip.singer},
                                                          {"frames", frames},
                                                          {"hop", clip.hop_size},
                                                          {"sample_rate", clip.sample_rate},
                                                          {"wav_path", clip.wav_path},
                                                          {"score_path", clip.score_path}});
}

ClipFeatures read_clip_features(const fs::path& dir, const std::string& clip_id) {
  const auto header = read_json(dir / (clip_id + ".json"));
  ClipFeatures clip;
  clip.clip_id = header.at("clip_id").get<std::string>();
  clip.singer = header.at("singer").get<std::string>();
  clip.hop_size = header.at("hop").get<int>();
  clip.sample_rate = header.at("sample_rate").get<int>();
  clip.wav_path = header.value("wav_path", "");
  clip.score_path = header.value("score_path", "");

  const auto bin_path = dir / (clip_id + ".feat");
  std::ifstream in(bin_path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + bin_path.string());
  char magic[8];
  std::uint32_t frames = 0, n_mels = 0;
  in.read(magic, 8);
  in.read(reinterpret_cast<char*>(&frames), 4);
  in.read(reinterpret_cast<char*>(&n_mels), 4);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) fail(ErrorCode::Io, bin_path.string() + " is not a feature record");
  if (frames != header.at("frames").get<std::uint32_t>())
    fail(ErrorCode::FrameMismatch, bin_path.string() + ": frame count differs from its JSON header");

  const auto mel = read_array<float>(in, static_cast<std::size_t>(frames) * n_mels);
  const auto f0 = read_array<float>(in, frames);
  clip.f0.voiced = read_array<std::uint8_t>(in, frames);
  const auto lif0 = read_array<float>(in, frames);
  const auto keys = read_array<std::int32_t>(in, frames);
  if (!in) fail(ErrorCode::Io, bin_path.string() + " is truncated");

  clip.mel.hop_size = clip.hop_size;
  clip.mel.singer_id = clip.singer;
  clip.mel.values.resize(frames, n_mels);
  for (std::uint32_t t = 0; t < frames; ++t)
    for (std::uint32_t m = 0; m < n_mels; ++m) clip.mel.values(t, m) = mel[t * n_mels + m];
  clip.f0.f0_hz.assign(f0.begin(), f0.end());
  clip.lif0.f0_hz.assign(lif0.begin(), lif0.end());
  clip.keys.keys.assign(keys.begin(), keys.end());
  return clip;
}

json singer_stats_to_json(const std::map<std::string, SingerStats>& stats) {
  json j = json::object();
  for (const auto& [name, s] : stats)
    j[name] = {{"mean", s.mean}, {"std", s.std}, {"log_f0_mean", s.log_f0_mean}, {"log_f0_std", s.log_f0_std}};
  return j;
}

std::map<std::string, SingerStats> singer_stats_from_json(const json& j) {
  std::map<std::string, SingerStats> out;
  try {
    for (const auto& [name, v] : j.items()) {
      SingerStats s;
      s.singer_id = name;
      s.mean = v.at("mean").get<std::vector<double>>();
      s.std = v.at("std").get<std::vector<double>>();
      s.log_f0_mean = v.at("log_f0_mean").get<double>();
      s.log_f0_std = v.at("log_f0_std").get<double>();
      out.emplace(name, std::move(s));
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::ParseError, std::string("malformed singer statistics: ") + e.what());
  }
  return out;
}

void write_singer_stats(const fs::path& path, const std::map<std::string, SingerStats>& stats) {
  write_json_atomic(path, singer_stats_to_json(stats));
}

std::map<std::string, SingerStats> read_singer_stats(const fs::path& path) {
  return singer_stats_from_json(read_json(path));
}

void write_cache_index(const fs::path& dir, const CacheIndex& index) {
  write_json_atomic(dir / "index.json", json{{"features", feature_config_to_json(index.features)},
                                             {"clips", index.clip_ids},
                                             {"singers", index.singers},
                                             {"skipped", index.skipped}});
}

CacheIndex read_cache_index(const fs::path& dir) {
  const auto j = read_json(dir / "index.json");
  CacheIndex index;
  index.features = feature_config_from_json(j.at("features"));
  index.clip_ids = j.at("clips").get<std::vector<std::string>>();
  index.singers = j.at("singers").get<std::vector<std::string>>();
  index.skipped = j.value("skipped", std::vector<std::string>{});
  return index;
}

CacheIndex prepare_cache(const std::vector<ManifestRecord>& manifest, const fs::path& out_dir,
                         const FeatureConfig& cfg) {
  cfg.validate();
  if (manifest.empty()) fail(ErrorCode::EmptyCollection, "manifest has no records");
  fs::create_directories(out_dir);

  CacheIndex index;
  index.features = cfg;
  std::map<std::string, std::vector<MelSpectrogram>> mels;
  std::map<std::string, std::vector<LIF0>> f0s;
  std::set<std::string> seen;
  for (const auto& rec : manifest) {
    if (!seen.insert(rec.clip_id).second) fail(ErrorCode::InvalidConfig, "duplicate clip id " + rec.clip_id);
    const auto wave = read_wav(rec.wav_path);
    ClipFeatures clip;
    try {
      clip = extract_clip_features(rec, wave, cfg);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::AllUnvoiced) throw;
      std::cerr << "prepare: skipping " << rec.clip_id << " (no voiced frame)\n";
      index.skipped.push_back(rec.clip_id);
      continue;
    }
    write_clip_features(out_dir, clip);
    mels[rec.singer].push_back(clip.mel);
    f0s[rec.singer].push_back(clip.lif0);
    index.clip_ids.push_back(rec.clip_id);
  }
  if (index.clip_ids.empty()) fail(ErrorCode::DataIncomplete, "no usable clips in manifest");

  std::map<std::string, SingerStats> stats;
  for (auto& [singer, list] : mels) {
    auto s = compute_singer_stats(list, singer);
    accumulate_log_f0_stats(s, f0s[singer]);
    stats.emplace(singer, std::move(s));
    index.singers.push_back(singer);
  }
  write_singer_stats(out_dir / "stats.json", stats);
  write_cache_index(out_dir, index);
  return index;
}

}  // namespace wesinger2
