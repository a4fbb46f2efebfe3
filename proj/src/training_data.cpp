#include "wesinger2/training_data.hpp"

#include "wesinger2/audio_io.hpp"
#include "wesinger2/error.hpp"
#include "wesinger2/nn_util.hpp"

#include <algorithm>
#include <cmath>

namespace wesinger2 {

int TrainingSet::singer_index(const std::string& name) const {
  const auto it = std::find(singers.begin(), singers.end(), name);
  if (it == singers.end()) fail(ErrorCode::UnknownSinger, "singer '" + name + "' is not in the training set");
  return static_cast<int>(it - singers.begin());
}

std::vector<std::string> TrainingSet::clip_singers() const {
  std::vector<std::string> out;
  out.reserve(clips.size());
  for (const auto& c : clips) out.push_back(c.singer);
  return out;
}

torch::Tensor acoustic_target(const ClipFeatures& clip, const SingerStats& stats) {
  const auto norm = normalize_mel(clip.mel, stats);
  const auto frames = norm.frames();
  if (static_cast<int>(clip.lif0.f0_hz.size()) != frames)
    fail(ErrorCode::FrameMismatch, "LI-F0 and mel differ in length for " + clip.clip_id);
  RowMatrix out(frames, kAcousticChannels);
  out.leftCols(norm.n_mels()) = norm.values;
  for (int t = 0; t < frames; ++t)
    out(t, kMelBands) = (std::log(clip.lif0.f0_hz[static_cast<std::size_t>(t)]) - stats.log_f0_mean) / stats.log_f0_std;
  return to_tensor(out).to(torch::kFloat32);
}

TrainingSet load_training_set(const std::filesystem::path& cache_dir, bool with_audio,
                              const PhonemeInventory& inventory) {
  TrainingSet set;
  set.inventory = inventory;
  CacheIndex index;
  try {
    index = read_cache_index(cache_dir);
    set.stats = read_singer_stats(cache_dir / "stats.json");
  } catch (const Error& e) {
    fail(ErrorCode::DataIncomplete, std::string("feature cache unusable: ") + e.what());
  }
  set.features = index.features;
  set.singers = index.singers;
  if (index.clip_ids.empty()) fail(ErrorCode::DataIncomplete, "feature cache holds no clips");
  const int hop = set.features.hop_size;

  for (const auto& id : index.clip_ids) {
    ClipFeatures feat;
    try {
      feat = read_clip_features(cache_dir, id);
    } catch (const Error& e) {
      fail(ErrorCode::DataIncomplete, "clip " + id + ": " + e.what());
    }
    const auto st = set.stats.find(feat.singer);
    if (st == set.stats.end()) fail(ErrorCode::DataIncomplete, "no statistics for singer " + feat.singer);

    TrainingClip clip;
    clip.clip_id = id;
    clip.singer = feat.singer;
    clip.singer_index = set.singer_index(feat.singer);
    clip.tokens = tokenize(parse_score(feat.score_path), set.features.hop_ms(), clip.singer_index, inventory);
    align_durations(clip.tokens, feat.frames());
    clip.target = acoustic_target(feat, st->second);
    clip.keys = torch::tensor(std::vector<std::int64_t>(feat.keys.keys.begin(), feat.keys.keys.end()), torch::kLong);
    if (with_audio) {
      const auto wave = read_wav(feat.wav_path);
      if (wave.sample_rate != set.features.sample_rate)
        fail(ErrorCode::RateMismatch, "clip " + id + " sample rate differs from the cache");
      std::vector<float> samples(static_cast<std::size_t>(feat.frames()) * hop, 0.0f);
      const auto n = std::min(samples.size(), wave.samples.size());
      std::transform(wave.samples.begin(), wave.samples.begin() + static_cast<std::ptrdiff_t>(n), samples.begin(),
                     [](double v) { return static_cast<float>(v); });
      clip.audio = torch::tensor(samples);
    }
    set.clips.push_back(std::move(clip));
  }
  return set;
}

namespace {

/// Token range [first, last) and its frame offset for a window of at most `budget` frames.
struct TokenWindow {
  std::size_t first = 0, last = 0;
  int frame_offset = 0, frames = 0;
};

TokenWindow pick_window(const std::vector<ScoreToken>& tokens, int budget, std::mt19937_64& rng) {
  TokenWindow w;
  int total = 0;
  for (const auto& t : tokens) total += t.duration_frames;
  if (budget <= 0 || total <= budget) {
    w.last = tokens.size();
    w.frames = total;
    return w;
  }
  // Candidate starts are tokens from which the rest of the clip still fills the budget.
  std::vector<int> starts(tokens.size());
  int acc = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    starts[i] = acc;
    acc += tokens[i].duration_frames;
  }
  std::size_t n_candidates = 1;
  while (n_candidates < tokens.size() && total - starts[n_candidates] >= budget) ++n_candidates;
  std::uniform_int_distribution<std::size_t> pick(0, n_candidates - 1);
  w.first = pick(rng);
  w.frame_offset = starts[w.first];
  w.last = w.first;
  while (w.last < tokens.size() && (w.frames + tokens[w.last].duration_frames <= budget || w.last == w.first)) {
    w.frames += tokens[w.last].duration_frames;
    ++w.last;
  }
  return w;
}

}  // namespace

AcousticBatch make_acoustic_batch(const TrainingSet& data, const std::vector<std::size_t>& indices, int max_frames,
                                  std::mt19937_64& rng) {
  if (indices.empty()) fail(ErrorCode::EmptyInput, "empty batch");
  std::vector<std::vector<ScoreToken>> seqs;
  std::vector<torch::Tensor> targets;
  for (auto i : indices) {
    const auto& clip = data.clips.at(i);
    const auto w = pick_window(clip.tokens, max_frames, rng);
    seqs.emplace_back(clip.tokens.begin() + static_cast<std::ptrdiff_t>(w.first),
                      clip.tokens.begin() + static_cast<std::ptrdiff_t>(w.last));
    targets.push_back(clip.target.narrow(0, w.frame_offset, w.frames));
  }
  AcousticBatch batch;
  batch.tokens = make_token_batch(seqs);
  std::int64_t max_len = 0;
  int min_len = targets.front().size(0);
  for (const auto& t : targets) {
    max_len = std::max(max_len, t.size(0));
    min_len = std::min<int>(min_len, static_cast<int>(t.size(0)));
  }
  const auto b = static_cast<std::int64_t>(targets.size());
  batch.target = torch::zeros({b, max_len, kAcousticChannels}, torch::kFloat32);
  batch.frame_mask = torch::zeros({b, max_len}, torch::kBool);
  for (std::int64_t k = 0; k < b; ++k) {
    const auto n = targets[static_cast<std::size_t>(k)].size(0);
    batch.target[k].narrow(0, 0, n).copy_(targets[static_cast<std::size_t>(k)]);
    batch.frame_mask[k].narrow(0, 0, n).fill_(true);
  }
  batch.min_frames = min_len;
  return batch;
}

VocoderBatch make_vocoder_batch(const TrainingSet& data, const std::vector<std::size_t>& indices, int segment_frames,
                                std::mt19937_64& rng) {
  if (indices.empty()) fail(ErrorCode::EmptyInput, "empty batch");
  const int hop = data.features.hop_size;
  std::vector<torch::Tensor> mels, keys, audio;
  std::vector<std::int64_t> singers;
  for (auto i : indices) {
    const auto& clip = data.clips.at(i);
    if (!clip.audio.defined()) fail(ErrorCode::DataIncomplete, "clip " + clip.clip_id + " was loaded without audio");
    if (clip.frames() < segment_frames)
      fail(ErrorCode::DataIncomplete, "clip " + clip.clip_id + " is shorter than the training segment");
    std::uniform_int_distribution<int> pick(0, clip.frames() - segment_frames);
    const int start = pick(rng);
    mels.push_back(clip.target.narrow(0, start, segment_frames).narrow(1, 0, kMelBands));
    keys.push_back(clip.keys.narrow(0, start, segment_frames));
    audio.push_back(clip.audio.narrow(0, static_cast<std::int64_t>(start) * hop,
                                      static_cast<std::int64_t>(segment_frames) * hop));
    singers.push_back(clip.singer_index);
  }
  VocoderBatch batch;
  batch.mel = torch::stack(mels);
  batch.keys = torch::stack(keys);
  batch.audio = torch::stack(audio);
  batch.singer = torch::tensor(singers, torch::kLong);
  return batch;
}

}  // namespace wesinger2
