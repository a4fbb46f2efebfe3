#pragma once

#include "wesinger2/experiment_config.hpp"
#include "wesinger2/training_data.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace wesinger2 {

/// One metrics row: ordered (column, value) pairs. Column 0 is always "step".
using MetricRow = std::vector<std::pair<std::string, double>>;

double metric(const MetricRow& row, const std::string& name);

/// CSV writer: header on first row, one line per call, values printed with
/// full double precision so identical runs give identical files.
class MetricsCsv {
 public:
  MetricsCsv(const std::filesystem::path& path, std::string tag, bool append);
  void write(const MetricRow& row);

 private:
  std::ofstream out_;
  std::string tag_;
  bool header_written_;
};

struct TrainHooks {
  /// Stop after this step (0 runs to total_steps); a final checkpoint is still written.
  long stop_after = 0;
  /// Extra steps at which a checkpoint is written regardless of checkpoint_every.
  std::vector<long> checkpoint_steps;
  std::function<void(const MetricRow&)> on_step;
  bool quiet = true;
};

struct TrainSummary {
  long last_step = 0;
  std::filesystem::path checkpoint;
  std::filesystem::path metrics_csv;
  std::vector<MetricRow> history;  // every step, whether or not it was logged
};

/// Adjusts the data-dependent parts of a config (vocabulary, singer count,
/// features) to a loaded training set and validates the result.
ExperimentConfig bind_to_data(const ExperimentConfig& cfg, const TrainingSet& data);

/// Acoustic model + MRAD training: one critic step then one generator step per batch.
TrainSummary train_acoustic(const ExperimentConfig& cfg, const TrainingSet& data, const TrainHooks& hooks = {});

/// Vocoder + waveform critics training on random aligned crops.
TrainSummary train_vocoder(const ExperimentConfig& cfg, const TrainingSet& data, const TrainHooks& hooks = {});

/// Checkpoint file name for a step inside a run directory.
std::filesystem::path checkpoint_path(const std::filesystem::path& out_dir, const std::string& kind, long step);

}  // namespace wesinger2
