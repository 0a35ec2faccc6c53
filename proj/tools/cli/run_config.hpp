#pragma once

#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "cpmamba/channel/dataset.hpp"
#include "cpmamba/model/config.hpp"
#include "cpmamba/train/trainer.hpp"

namespace cpmamba::cli {

enum class Preset { desk, paper };

Preset preset_from_string(std::string_view name);
std::string to_string(Preset p);

struct RunConfig {
  channel::DatasetConfig dataset;
  model::ModelConfig model;
  train::TrainConfig train;
};

RunConfig preset_config(Preset p);

// Which top-level sections a command reads from a config file.
struct Sections {
  bool dataset = false;
  bool model = false;
  bool train = false;
};

// Layering: preset < JSON file < command-line overrides (applied by the
// caller). Without --preset a config file must spell out every field of the
// sections the command needs; with --preset it only overlays. With neither,
// the desk preset is used.
RunConfig resolve_config(const std::optional<std::string>& config_path, const std::optional<Preset>& preset,
                         Sections needed);

nlohmann::json to_json(const RunConfig& cfg, Sections sections);

}  // namespace cpmamba::cli
