#pragma once

#include "wesinger2/dsp_features.hpp"

#include <nlohmann/json.hpp>

namespace wesinger2 {

nlohmann::json feature_config_to_json(const FeatureConfig& cfg);
/// Missing keys keep their defaults.
FeatureConfig feature_config_from_json(const nlohmann::json& j);

}  // namespace wesinger2
