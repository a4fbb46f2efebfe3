#pragma once

#include "wesinger2/dsp_features.hpp"
#include "wesinger2/schedule.hpp"

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace wesinger2 {

inline constexpr const char* kAcousticFormat = "wesinger2-am-v1";
inline constexpr const char* kMradFormat = "wesinger2-mrad-v1";
inline constexpr const char* kVocoderFormat = "wesinger2-voc-v1";
inline constexpr const char* kCriticFormat = "wesinger2-crit-v1";

struct CheckpointMeta {
  std::string format;         // kAcousticFormat or kVocoderFormat
  std::string critic_format;  // empty when no critic is stored
  long step = 0;
  Phase phase = Phase::Pretrain;
  std::string tag;
  std::string config_hash;    // whole experiment config
  std::string features_hash;  // [features] section only; must agree across checkpoints
  nlohmann::json config;
  nlohmann::json metrics;     // last logged row
  std::vector<std::string> singers;
  std::vector<std::string> phonemes;
  nlohmann::json stats;
  std::string data_rng;
  std::string aux_rng;

  std::map<std::string, SingerStats> singer_stats() const;
  nlohmann::json to_json() const;
  static CheckpointMeta from_json(const nlohmann::json& j);
};

/// What goes into / comes out of one checkpoint file. Null pointers are skipped.
struct CheckpointParts {
  torch::nn::Module* generator = nullptr;
  torch::nn::Module* critic = nullptr;
  torch::optim::Optimizer* generator_opt = nullptr;
  torch::optim::Optimizer* critic_opt = nullptr;
};

/// Writes to a temporary sibling and renames it into place.
void save_checkpoint(const std::filesystem::path& path, const CheckpointMeta& meta, const CheckpointParts& parts);

CheckpointMeta read_checkpoint_meta(const std::filesystem::path& path);

/// Restores the requested parts. Throws IncompatibleCheckpoints when the
/// file format differs from `expected_format` or a requested part is absent.
CheckpointMeta load_checkpoint(const std::filesystem::path& path, const std::string& expected_format,
                               const CheckpointParts& parts);

std::string rng_state(const std::mt19937_64& rng);
void restore_rng(std::mt19937_64& rng, const std::string& state);

}  // namespace wesinger2
