#include "wesinger2/feature_config_json.hpp"

namespace wesinger2 {

nlohmann::json feature_config_to_json(const FeatureConfig& c) {
  return {{"sample_rate", c.sample_rate}, {"hop_size", c.hop_size},   {"win_size", c.win_size},
          {"n_fft", c.n_fft},             {"n_mels", c.n_mels},       {"mel_fmin", c.mel_fmin},
          {"mel_fmax", c.mel_fmax},       {"log_floor", c.log_floor}, {"f0_min", c.f0_min},
          {"f0_max", c.f0_max},           {"yin_threshold", c.yin_threshold}, {"yin_window", c.yin_window}};
}

FeatureConfig feature_config_from_json(const nlohmann::json& j) {
  FeatureConfig c;
  c.sample_rate = j.value("sample_rate", c.sample_rate);
  c.hop_size = j.value("hop_size", c.hop_size);
  c.win_size = j.value("win_size", c.win_size);
  c.n_fft = j.value("n_fft", c.n_fft);
  c.n_mels = j.value("n_mels", c.n_mels);
  c.mel_fmin = j.value("mel_fmin", c.mel_fmin);
  c.mel_fmax = j.value("mel_fmax", c.mel_fmax);
  c.log_floor = j.value("log_floor", c.log_floor);
  c.f0_min = j.value("f0_min", c.f0_min);
  c.f0_max = j.value("f0_max", c.f0_max);
  c.yin_threshold = j.value("yin_threshold", c.yin_threshold);
  c.yin_window = j.value("yin_window", c.yin_window);
  c.validate();
  return c;
}

}  // namespace wesinger2
