#include "run_config.hpp"

#include "cpmamba/binary_io.hpp"
#include "cpmamba/channel/config_json.hpp"
#include "cpmamba/errors.hpp"
#include "cpmamba/json_fields.hpp"

namespace cpmamba::cli {

using nlohmann::json;

Preset preset_from_string(std::string_view name) {
  if (name == "desk") return Preset::desk;
  if (name == "paper") return Preset::paper;
  throw ConfigError("unknown preset '" + std::string(name) + "' (expected desk or paper)");
}

std::string to_string(Preset p) { return p == Preset::desk ? "desk" : "paper"; }

RunConfig preset_config(Preset p) {
  if (p == Preset::paper) {
    return {channel::paper_dataset_preset(), model::paper_model_preset(), train::paper_train_preset()};
  }
  return {channel::desk_dataset_preset(), model::desk_model_preset(), train::desk_train_preset()};
}

RunConfig resolve_config(const std::optional<std::string>& config_path, const std::optional<Preset>& preset,
                         Sections needed) {
  RunConfig cfg = preset_config(preset.value_or(Preset::desk));
  if (!config_path) return cfg;

  json j;
  try {
    j = json::parse(io::read_file(*config_path));
  } catch (const json::exception& e) {
    throw ConfigError(*config_path + ": invalid JSON: " + e.what());
  }
  json_fields::reject_unknown(j, "", {"dataset", "model", "train"});
  const bool overlay = preset.has_value();
  auto section = [&](const char* name, bool required) -> const json* {
    auto it = j.find(name);
    if (it == j.end()) {
      if (required && !overlay) throw ConfigError(*config_path + ": missing config field '" + name + "'");
      return nullptr;
    }
    return &*it;
  };
  try {
    if (const json* s = section("dataset", needed.dataset)) {
      cfg.dataset = channel::dataset_config_from_json(*s, overlay ? &cfg.dataset : nullptr);
    }
    if (const json* s = section("model", needed.model)) {
      cfg.model = model::model_config_from_json(*s, overlay ? &cfg.model : nullptr, "model");
    }
    if (const json* s = section("train", needed.train)) {
      cfg.train = train::train_config_from_json(*s, overlay ? &cfg.train : nullptr, "train");
    }
  } catch (const ConfigError& e) {
    throw ConfigError(*config_path + ": " + e.what());
  }
  return cfg;
}

json to_json(const RunConfig& cfg, Sections sections) {
  json j = json::object();
  if (sections.dataset) j["dataset"] = channel::to_json(cfg.dataset);
  if (sections.model) j["model"] = model::to_json(cfg.model);
  if (sections.train) j["train"] = train::to_json(cfg.train);
  return j;
}

}  // namespace cpmamba::cli
