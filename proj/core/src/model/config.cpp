#include "cpmamba/model/config.hpp"

#include "cpmamba/errors.hpp"
#include "cpmamba/json_fields.hpp"

namespace cpmamba::model {

using nlohmann::json;

Ablation ablation_from_string(std::string_view name) {
  if (name == "none") return Ablation::none;
  if (name == "no_se") return Ablation::no_se;
  if (name == "no_patch") return Ablation::no_patch;
  if (name == "attention" || name == "attention_backbone") return Ablation::attention_backbone;
  throw ConfigError("unknown ablation '" + std::string(name) + "' (expected none, no_se, no_patch, attention)");
}

std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::none: return "none";
    case Ablation::no_se: return "no_se";
    case Ablation::no_patch: return "no_patch";
    case Ablation::attention_backbone: return "attention";
  }
  return "none";
}

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ConfigError(std::string("model.") + name + " must be positive");
  };
  positive(history, "history");
  positive(horizon, "horizon");
  positive(subcarriers, "subcarriers");
  positive(patch_size, "patch_size");
  positive(conv_channels, "conv_channels");
  positive(res_blocks, "res_blocks");
  positive(se_reduction, "se_reduction");
  positive(d_model, "d_model");
  positive(mamba_layers, "mamba_layers");
  positive(d_state, "d_state");
  positive(d_conv, "d_conv");
  positive(expand, "expand");
  positive(attention_heads, "attention_heads");
  if (conv_channels % se_reduction != 0) {
    throw ConfigError("model.conv_channels (" + std::to_string(conv_channels) + ") must be divisible by model.se_reduction (" +
                      std::to_string(se_reduction) + ")");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("model.dropout must lie in [0, 1)");
  if (ablation == Ablation::attention_backbone && d_model % attention_heads != 0) {
    throw ConfigError("model.d_model (" + std::to_string(d_model) + ") must be divisible by model.attention_heads (" +
                      std::to_string(attention_heads) + ")");
  }
}

ModelConfig desk_model_preset() { return ModelConfig{}; }

ModelConfig paper_model_preset() {
  ModelConfig c;
  c.subcarriers = 48;
  c.conv_channels = 64;
  c.res_blocks = 4;
  c.se_reduction = 16;
  c.d_model = 768;
  c.mamba_layers = 6;
  return c;
}

json to_json(const ModelConfig& c) {
  return json{{"history", c.history},
              {"horizon", c.horizon},
              {"subcarriers", c.subcarriers},
              {"patch_size", c.patch_size},
              {"conv_channels", c.conv_channels},
              {"res_blocks", c.res_blocks},
              {"se_reduction", c.se_reduction},
              {"d_model", c.d_model},
              {"mamba_layers", c.mamba_layers},
              {"d_state", c.d_state},
              {"d_conv", c.d_conv},
              {"expand", c.expand},
              {"dropout", c.dropout},
              {"attention_heads", c.attention_heads},
              {"use_d_skip", c.use_d_skip},
              {"exact_zoh", c.exact_zoh},
              {"ablation", to_string(c.ablation)}};
}

ModelConfig model_config_from_json(const json& j, const ModelConfig* base, const std::string& prefix) {
  json_fields::reject_unknown(j, prefix,
                              {"history", "horizon", "subcarriers", "patch_size", "conv_channels", "res_blocks",
                               "se_reduction", "d_model", "mamba_layers", "d_state", "d_conv", "expand", "dropout",
                               "attention_heads", "use_d_skip", "exact_zoh", "ablation"});
  ModelConfig c = base ? *base : ModelConfig{};
  const bool req = base == nullptr;
  using json_fields::read;
  read(j, prefix, "history", c.history, req);
  read(j, prefix, "horizon", c.horizon, req);
  read(j, prefix, "subcarriers", c.subcarriers, req);
  read(j, prefix, "patch_size", c.patch_size, req);
  read(j, prefix, "conv_channels", c.conv_channels, req);
  read(j, prefix, "res_blocks", c.res_blocks, req);
  read(j, prefix, "se_reduction", c.se_reduction, req);
  read(j, prefix, "d_model", c.d_model, req);
  read(j, prefix, "mamba_layers", c.mamba_layers, req);
  read(j, prefix, "d_state", c.d_state, req);
  read(j, prefix, "d_conv", c.d_conv, req);
  read(j, prefix, "expand", c.expand, req);
  read(j, prefix, "dropout", c.dropout, req);
  read(j, prefix, "attention_heads", c.attention_heads, req);
  read(j, prefix, "use_d_skip", c.use_d_skip, req);
  read(j, prefix, "exact_zoh", c.exact_zoh, req);
  std::string ablation = to_string(c.ablation);
  read(j, prefix, "ablation", ablation, req);
  c.ablation = ablation_from_string(ablation);
  c.validate();
  return c;
}

}  // namespace cpmamba::model
