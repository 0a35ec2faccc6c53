#pragma once

#include <nlohmann/json.hpp>

#include "cpmamba/channel/dataset.hpp"

namespace cpmamba::channel {

nlohmann::json to_json(const ChannelConfig& cfg);
nlohmann::json to_json(const DatasetConfig& cfg);

// With base == nullptr every field is required and a missing one raises a
// ConfigError naming it. With a base, fields present in `j` override it.
// Unknown fields are rejected either way.
ChannelConfig channel_config_from_json(const nlohmann::json& j, const ChannelConfig* base = nullptr,
                                       const std::string& prefix = "channel");
DatasetConfig dataset_config_from_json(const nlohmann::json& j, const DatasetConfig* base = nullptr);

}  // namespace cpmamba::channel
