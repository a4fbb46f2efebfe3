#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace wesinger2 {

inline constexpr int kNumMidiPitches = 128;
/// Pitch id reserved for rests; real pitches use their MIDI number.
inline constexpr int kRestPitchId = kNumMidiPitches;
inline constexpr int kNumPitchIds = kNumMidiPitches + 1;
inline constexpr int kNumDurationBuckets = 32;
inline constexpr int kMaxBucketFrames = 512;

struct ScoreNote {
  std::string phoneme;
  std::optional<int> midi_pitch;  // empty for a rest
  double onset_ms = 0.0;
  double offset_ms = 0.0;

  bool is_rest() const { return !midi_pitch.has_value(); }
  double length_ms() const { return offset_ms - onset_ms; }
  bool operator==(const ScoreNote&) const = default;
};

struct ScoreToken {
  int phoneme_id = 0;
  int pitch_id = 0;
  int duration_frames = 1;
  int singer_id = 0;

  bool operator==(const ScoreToken&) const = default;
};

/// Closed phoneme set. "SP" (silence) is always present and is the rest phoneme.
class PhonemeInventory {
 public:
  explicit PhonemeInventory(std::vector<std::string> symbols);

  /// Mandarin initials and finals plus SP/AP.
  static PhonemeInventory mandarin();

  int id(const std::string& symbol) const;
  bool contains(const std::string& symbol) const { return index_.count(symbol) != 0; }
  int rest_id() const { return id("SP"); }
  int size() const { return static_cast<int>(symbols_.size()); }
  const std::vector<std::string>& symbols() const { return symbols_; }

 private:
  std::vector<std::string> symbols_;
  std::unordered_map<std::string, int> index_;
};

std::vector<ScoreNote> parse_score_text(std::string_view text);
std::vector<ScoreNote> parse_score(const std::filesystem::path& path);
std::string serialize_score(const std::vector<ScoreNote>& notes);

/// Round-half-up frame count of a note, never below one frame.
int note_frames(double length_ms, double hop_ms);

std::vector<ScoreToken> tokenize(const std::vector<ScoreNote>& notes, double hop_ms, int singer_id,
                                 const PhonemeInventory& inventory);

/// Log-spaced bucket in [0, kNumDurationBuckets) over [1, kMaxBucketFrames] frames.
int duration_bucket(int frames);

/// Stretches or shrinks the trailing tokens so that the durations sum to
/// `frames`. Throws DataIncomplete when the mismatch exceeds one frame per token.
void align_durations(std::vector<ScoreToken>& tokens, int frames);

struct ManifestRecord {
  std::string clip_id;
  std::string wav_path;
  std::string score_path;
  std::string singer;
};

/// JSON-lines manifest; relative paths are resolved against the manifest's directory.
std::vector<ManifestRecord> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRecord>& records);

}  // namespace wesinger2
