#include "wesinger2/audio_io.hpp"

#include "wesinger2/error.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace wesinger2 {

static_assert(std::endian::native == std::endian::little, "WAV I/O assumes a little-endian host");

namespace {

template <typename T>
T read_pod(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  return value;
}

template <typename T>
void write_pod(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

}  // namespace

Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());

  char tag[4];
  in.read(tag, 4);
  read_pod<std::uint32_t>(in);
  char wave_tag[4];
  in.read(wave_tag, 4);
  if (!in || std::memcmp(tag, "RIFF", 4) != 0 || std::memcmp(wave_tag, "WAVE", 4) != 0)
    fail(ErrorCode::Io, path.string() + " is not a RIFF/WAVE file");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  while (in) {
    char id[4];
    in.read(id, 4);
    const auto size = read_pod<std::uint32_t>(in);
    if (!in) break;
    if (std::memcmp(id, "fmt ", 4) == 0) {
      format = read_pod<std::uint16_t>(in);
      channels = read_pod<std::uint16_t>(in);
      rate = read_pod<std::uint32_t>(in);
      read_pod<std::uint32_t>(in);
      read_pod<std::uint16_t>(in);
      bits = read_pod<std::uint16_t>(in);
      in.seekg(size - 16 + (size & 1), std::ios::cur);
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      if (!have_fmt) fail(ErrorCode::Io, path.string() + ": data chunk before fmt chunk");
      if (channels != 1) fail(ErrorCode::Io, path.string() + ": only mono audio is supported");
      Waveform wave;
      wave.sample_rate = static_cast<int>(rate);
      if (format == 1 && bits == 16) {
        std::vector<std::int16_t> pcm(size / 2);
        in.read(reinterpret_cast<char*>(pcm.data()), static_cast<std::streamsize>(pcm.size() * 2));
        wave.samples.reserve(pcm.size());
        for (auto s : pcm) wave.samples.push_back(s / 32768.0);
      } else if (format == 3 && bits == 32) {
        std::vector<float> pcm(size / 4);
        in.read(reinterpret_cast<char*>(pcm.data()), static_cast<std::streamsize>(pcm.size() * 4));
        wave.samples.assign(pcm.begin(), pcm.end());
      } else {
        fail(ErrorCode::Io, path.string() + ": unsupported sample format");
      }
      if (!in) fail(ErrorCode::Io, path.string() + ": truncated data chunk");
      return wave;
    } else {
      in.seekg(size + (size & 1), std::ios::cur);
    }
  }
  fail(ErrorCode::Io, path.string() + ": no data chunk");
}

void write_wav(const std::filesystem::path& path, const Waveform& wave) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
  const auto data_bytes = static_cast<std::uint32_t>(wave.samples.size() * 2);
  out.write("RIFF", 4);
  write_pod<std::uint32_t>(out, 36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  write_pod<std::uint32_t>(out, 16);
  write_pod<std::uint16_t>(out, 1);
  write_pod<std::uint16_t>(out, 1);
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(wave.sample_rate));
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(wave.sample_rate) * 2);
  write_pod<std::uint16_t>(out, 2);
  write_pod<std::uint16_t>(out, 16);
  out.write("data", 4);
  write_pod<std::uint32_t>(out, data_bytes);
  for (double s : wave.samples) {
    const double clipped = std::clamp(s, -1.0, 1.0);
    write_pod<std::int16_t>(out, static_cast<std::int16_t>(std::lround(clipped * 32767.0)));
  }
  if (!out) fail(ErrorCode::Io, "short write to " + path.string());
}

}  // namespace wesinger2
