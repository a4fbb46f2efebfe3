#pragma once

// A prepared toy corpus and micro-scale experiment configs for training tests.

#include "support/oracles.hpp"
#include "support/tiny.hpp"
#include "wesinger2/experiment_config.hpp"
#include "wesinger2/feature_cache.hpp"
#include "wesinger2/toy_corpus.hpp"
#include "wesinger2/training_data.hpp"

#include <filesystem>
#include <string>

namespace toy {

/// Renders and featurizes a corpus once per (name, shape) and returns the cache directory.
inline std::filesystem::path prepared_cache(const std::string& name, int singers, int clips, double seconds,
                                            std::uint64_t seed = 7) {
  const auto root = oracle::temp_dir(name);
  const auto records = wesinger2::make_toy_corpus(root / "corpus", singers, clips, seconds, seed);
  wesinger2::prepare_cache(records, root / "cache", wesinger2::FeatureConfig{});
  return root / "cache";
}

/// Micro configuration: trains in well under a second per step on one core.
inline wesinger2::ExperimentConfig micro_config(const std::filesystem::path& out_dir, const std::string& tag) {
  auto c = wesinger2::ExperimentConfig::preset("desk");
  c.acoustic = tiny::acoustic(0, 1);
  c.acoustic.hidden = 16;
  c.mrad = tiny::mrad();
  c.vocoder = tiny::vocoder(16);
  c.critics.singer_embed = 4;
  c.critics.msd_channels = {4, 4, 4, 4, 4, 4};
  c.critics.mpd_channels = {4, 4, 4, 4, 4};
  c.critics.mld_channels = {4, 4, 4, 4, 4};
  c.train.tag = tag;
  c.train.out_dir = out_dir.string();
  c.train.batch_size = 2;
  c.train.total_steps = 100;
  c.train.warmup_steps = 10;
  c.train.max_frames = 120;
  c.train.segment_seconds = 0.3;
  c.train.log_every = 1;
  c.train.checkpoint_every = 1000;
  c.train.seed = 42;
  return c;
}

}  // namespace toy
