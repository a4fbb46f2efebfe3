#include "wesinger2/score.hpp"

#include "wesinger2/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace wesinger2 {

PhonemeInventory::PhonemeInventory(std::vector<std::string> symbols) : symbols_(std::move(symbols)) {
  if (std::find(symbols_.begin(), symbols_.end(), "SP") == symbols_.end()) symbols_.insert(symbols_.begin(), "SP");
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    if (!index_.emplace(symbols_[i], static_cast<int>(i)).second)
      fail(ErrorCode::InvalidConfig, "duplicate phoneme symbol " + symbols_[i]);
  }
}

PhonemeInventory PhonemeInventory::mandarin() {
  return PhonemeInventory({
      "SP", "AP",
      // initials
      "b", "p", "m", "f", "d", "t", "n", "l", "g", "k", "h", "j", "q", "x", "zh", "ch", "sh", "r", "z", "c", "s", "y",
      "w",
      // finals
      "a", "o", "e", "i", "u", "v", "ai", "ei", "ao", "ou", "an", "en", "ang", "eng", "ong", "er", "ia", "ie", "iao",
      "iu", "ian", "in", "iang", "ing", "iong", "ua", "uo", "uai", "ui", "uan", "un", "uang", "ueng", "ve", "van", "vn",
      "ir", "i0",
  });
}

int PhonemeInventory::id(const std::string& symbol) const {
  const auto it = index_.find(symbol);
  if (it == index_.end()) fail(ErrorCode::UnknownPhoneme, "phoneme '" + symbol + "' is not in the inventory");
  return it->second;
}

std::vector<ScoreNote> parse_score_text(std::string_view text) {
  std::vector<ScoreNote> notes;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::string phoneme, pitch, onset, offset, extra;
    if (!(fields >> phoneme)) continue;
    const auto where = "line " + std::to_string(line_no);
    if (!(fields >> pitch >> onset >> offset) || (fields >> extra))
      fail(ErrorCode::ParseError, where + ": expected '<phoneme> <midi_pitch|R> <onset_ms> <offset_ms>'");

    ScoreNote note;
    note.phoneme = phoneme;
    try {
      if (pitch != "R") {
        std::size_t used = 0;
        const int midi = std::stoi(pitch, &used);
        if (used != pitch.size() || midi < 0 || midi >= kNumMidiPitches)
          fail(ErrorCode::ParseError, where + ": midi pitch must be an integer in [0, 127] or R");
        note.midi_pitch = midi;
      }
      std::size_t used_on = 0, used_off = 0;
      note.onset_ms = std::stod(onset, &used_on);
      note.offset_ms = std::stod(offset, &used_off);
      if (used_on != onset.size() || used_off != offset.size()) throw std::invalid_argument("trailing characters");
    } catch (const std::logic_error&) {
      fail(ErrorCode::ParseError, where + ": malformed number");
    }
    if (!std::isfinite(note.onset_ms) || !std::isfinite(note.offset_ms) || note.onset_ms < 0.0)
      fail(ErrorCode::ParseError, where + ": times must be finite and non-negative");
    if (!(note.offset_ms > note.onset_ms)) fail(ErrorCode::ParseError, where + ": offset must exceed onset");
    notes.push_back(std::move(note));
  }
  if (notes.empty()) fail(ErrorCode::ParseError, "score contains no notes");

  std::stable_sort(notes.begin(), notes.end(),
                   [](const ScoreNote& a, const ScoreNote& b) { return a.onset_ms < b.onset_ms; });
  for (std::size_t i = 1; i < notes.size(); ++i)
    if (notes[i].onset_ms < notes[i - 1].offset_ms)
      fail(ErrorCode::OverlapError, "note '" + notes[i].phoneme + "' at " + std::to_string(notes[i].onset_ms) +
                                        " ms overlaps the previous note");
  return notes;
}

std::vector<ScoreNote> parse_score(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open score " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_score_text(buf.str());
}

std::string serialize_score(const std::vector<ScoreNote>& notes) {
  std::ostringstream out;
  out.precision(17);
  for (const auto& n : notes) {
    out << n.phoneme << ' ';
    if (n.midi_pitch) out << *n.midi_pitch;
    else out << 'R';
    out << ' ' << n.onset_ms << ' ' << n.offset_ms << '\n';
  }
  return out.str();
}

int note_frames(double length_ms, double hop_ms) {
  return std::max(1, static_cast<int>(std::floor(length_ms / hop_ms + 0.5)));
}

std::vector<ScoreToken> tokenize(const std::vector<ScoreNote>& notes, double hop_ms, int singer_id,
                                 const PhonemeInventory& inventory) {
  if (notes.empty()) fail(ErrorCode::EmptyInput, "cannot tokenize an empty score");
  if (!(hop_ms > 0.0)) fail(ErrorCode::InvalidConfig, "hop must be positive");
  std::vector<ScoreToken> tokens;
  tokens.reserve(notes.size());
  for (const auto& n : notes) {
    ScoreToken tok;
    tok.phoneme_id = inventory.id(n.phoneme);
    tok.pitch_id = n.midi_pitch ? *n.midi_pitch : kRestPitchId;
    tok.duration_frames = note_frames(n.length_ms(), hop_ms);
    tok.singer_id = singer_id;
    tokens.push_back(tok);
  }
  return tokens;
}

int duration_bucket(int frames) {
  if (frames <= 1) return 0;
  const double pos = std::log(static_cast<double>(frames)) / std::log(static_cast<double>(kMaxBucketFrames));
  return std::clamp(static_cast<int>(pos * (kNumDurationBuckets - 1) + 0.5), 0, kNumDurationBuckets - 1);
}

void align_durations(std::vector<ScoreToken>& tokens, int frames) {
  if (tokens.empty()) fail(ErrorCode::EmptyInput, "no tokens to align");
  long total = 0;
  for (const auto& t : tokens) total += t.duration_frames;
  long diff = frames - total;
  if (std::labs(diff) > static_cast<long>(tokens.size()))
    fail(ErrorCode::DataIncomplete, "score covers " + std::to_string(total) + " frames but audio has " +
                                        std::to_string(frames));
  for (auto it = tokens.rbegin(); it != tokens.rend() && diff != 0; ++it) {
    if (diff > 0) {
      it->duration_frames += static_cast<int>(diff);
      diff = 0;
    } else {
      const int take = std::min<long>(-diff, it->duration_frames - 1);
      it->duration_frames -= take;
      diff += take;
    }
  }
  if (diff != 0) fail(ErrorCode::DataIncomplete, "cannot shrink durations to " + std::to_string(frames) + " frames");
}

std::vector<ManifestRecord> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open manifest " + path.string());
  const auto base = path.parent_path();
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path fp(p);
    return (fp.is_absolute() ? fp : base / fp).lexically_normal().string();
  };
  std::vector<ManifestRecord> records;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      records.push_back({j.at("clip_id").get<std::string>(), resolve(j.at("wav_path").get<std::string>()),
                         resolve(j.at("score_path").get<std::string>()), j.at("singer").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::ParseError, path.string() + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRecord>& records) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::Io, "cannot write manifest " + path.string());
  for (const auto& r : records) {
    nlohmann::json j{{"clip_id", r.clip_id}, {"wav_path", r.wav_path}, {"score_path", r.score_path}, {"singer", r.singer}};
    out << j.dump() << '\n';
  }
}

}  // namespace wesinger2
