#include "wesinger2/checkpoint.hpp"

#include "wesinger2/error.hpp"
#include "wesinger2/feature_cache.hpp"

#include <sstream>

namespace wesinger2 {

namespace fs = std::filesystem;
using nlohmann::json;

std::map<std::string, SingerStats> CheckpointMeta::singer_stats() const { return singer_stats_from_json(stats); }

json CheckpointMeta::to_json() const {
  return {{"format", format},
          {"critic_format", critic_format},
          {"step", step},
          {"phase", to_string(phase)},
          {"tag", tag},
          {"config_hash", config_hash},
          {"features_hash", features_hash},
          {"config", config},
          {"metrics", metrics},
          {"singers", singers},
          {"phonemes", phonemes},
          {"stats", stats},
          {"data_rng", data_rng},
          {"aux_rng", aux_rng}};
}

CheckpointMeta CheckpointMeta::from_json(const json& j) {
  CheckpointMeta m;
  try {
    m.format = j.at("format").get<std::string>();
    m.critic_format = j.value("critic_format", "");
    m.step = j.at("step").get<long>();
    m.phase = phase_from_string(j.at("phase").get<std::string>());
    m.tag = j.value("tag", "");
    m.config_hash = j.at("config_hash").get<std::string>();
    m.features_hash = j.at("features_hash").get<std::string>();
    m.config = j.at("config");
    m.metrics = j.value("metrics", json::object());
    m.singers = j.at("singers").get<std::vector<std::string>>();
    m.phonemes = j.value("phonemes", std::vector<std::string>{});
    m.stats = j.at("stats");
    m.data_rng = j.value("data_rng", "");
    m.aux_rng = j.value("aux_rng", "");
  } catch (const json::exception& e) {
    fail(ErrorCode::ParseError, std::string("malformed checkpoint header: ") + e.what());
  }
  return m;
}

void save_checkpoint(const fs::path& path, const CheckpointMeta& meta, const CheckpointParts& parts) {
  if (!parts.generator) fail(ErrorCode::InvalidConfig, "checkpoint needs a generator");
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  torch::serialize::OutputArchive archive;
  archive.write("format", c10::IValue(meta.format));
  archive.write("meta", c10::IValue(meta.to_json().dump()));
  auto put = [&archive](const std::string& key, auto&& save) {
    torch::serialize::OutputArchive sub;
    save(sub);
    archive.write(key, sub);
  };
  put("generator", [&](auto& a) { parts.generator->save(a); });
  if (parts.critic) {
    put("critic", [&](auto& a) {
      a.write("format", c10::IValue(meta.critic_format));
      parts.critic->save(a);
    });
  }
  if (parts.generator_opt) put("generator_opt", [&](auto& a) { parts.generator_opt->save(a); });
  if (parts.critic_opt) put("critic_opt", [&](auto& a) { parts.critic_opt->save(a); });

  const auto tmp = fs::path(path.string() + ".tmp");
  try {
    archive.save_to(tmp.string());
  } catch (const c10::Error& e) {
    fail(ErrorCode::Io, "cannot write checkpoint " + path.string() + ": " + e.what_without_backtrace());
  }
  fs::rename(tmp, path);
}

namespace {

torch::serialize::InputArchive open_archive(const fs::path& path) {
  if (!fs::exists(path)) fail(ErrorCode::Io, "no checkpoint at " + path.string());
  torch::serialize::InputArchive archive;
  try {
    archive.load_from(path.string());
  } catch (const c10::Error& e) {
    fail(ErrorCode::IncompatibleCheckpoints, path.string() + " is not a checkpoint: " + e.what_without_backtrace());
  }
  return archive;
}

std::string read_string(torch::serialize::InputArchive& archive, const std::string& key) {
  c10::IValue v;
  if (!archive.try_read(key, v) || !v.isString())
    fail(ErrorCode::IncompatibleCheckpoints, "checkpoint lacks '" + key + "'");
  return v.toStringRef();
}

}  // namespace

CheckpointMeta read_checkpoint_meta(const fs::path& path) {
  auto archive = open_archive(path);
  return CheckpointMeta::from_json(json::parse(read_string(archive, "meta")));
}

CheckpointMeta load_checkpoint(const fs::path& path, const std::string& expected_format, const CheckpointParts& parts) {
  auto archive = open_archive(path);
  const auto format = read_string(archive, "format");
  if (format != expected_format)
    fail(ErrorCode::IncompatibleCheckpoints,
         path.string() + " holds '" + format + "', expected '" + expected_format + "'");
  auto meta = CheckpointMeta::from_json(json::parse(read_string(archive, "meta")));

  auto get = [&](const std::string& key, auto&& load) {
    torch::serialize::InputArchive sub;
    if (!archive.try_read(key, sub)) fail(ErrorCode::IncompatibleCheckpoints, path.string() + " has no " + key);
    try {
      load(sub);
    } catch (const c10::Error& e) {
      fail(ErrorCode::IncompatibleCheckpoints, key + " in " + path.string() + " does not match the model: " +
                                                   e.what_without_backtrace());
    }
  };
  if (parts.generator) get("generator", [&](auto& a) { parts.generator->load(a); });
  if (parts.critic) {
    get("critic", [&](auto& a) {
      c10::IValue v;
      if (!a.try_read("format", v) || v.toStringRef() != meta.critic_format)
        fail(ErrorCode::IncompatibleCheckpoints, "critic format mismatch in " + path.string());
      parts.critic->load(a);
    });
  }
  if (parts.generator_opt) get("generator_opt", [&](auto& a) { parts.generator_opt->load(a); });
  if (parts.critic_opt) get("critic_opt", [&](auto& a) { parts.critic_opt->load(a); });
  return meta;
}

std::string rng_state(const std::mt19937_64& rng) {
  std::ostringstream out;
  out << rng;
  return out.str();
}

void restore_rng(std::mt19937_64& rng, const std::string& state) {
  std::istringstream in(state);
  in >> rng;
  if (!in) fail(ErrorCode::ParseError, "malformed rng state");
}

}  // namespace wesinger2
