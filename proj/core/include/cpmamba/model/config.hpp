#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace cpmamba::model {

enum class Ablation { none, no_se, no_patch, attention_backbone };

// Accepts "none", "no_se", "no_patch", and "attention" (or "attention_backbone").
Ablation ablation_from_string(std::string_view name);
std::string to_string(Ablation a);

struct ModelConfig {
  std::size_t history = 16;        // L
  std::size_t horizon = 4;         // P
  std::size_t subcarriers = 8;     // K per direction; D = 2K
  std::size_t patch_size = 4;      // N_p
  std::size_t conv_channels = 16;  // C
  std::size_t res_blocks = 2;      // N_res
  std::size_t se_reduction = 4;    // r
  std::size_t d_model = 64;
  std::size_t mamba_layers = 2;    // N_mamba; also the attention depth
  std::size_t d_state = 4;
  std::size_t d_conv = 4;
  std::size_t expand = 2;
  double dropout = 0.1;
  std::size_t attention_heads = 4;
  bool use_d_skip = true;
  bool exact_zoh = true;
  Ablation ablation = Ablation::none;

  std::size_t features() const { return 2 * subcarriers; }
  std::size_t patches() const { return (history + patch_size - 1) / patch_size; }
  std::size_t inner() const { return expand * d_model; }
  // Throws ConfigError naming the offending field.
  void validate() const;
};

ModelConfig desk_model_preset();
ModelConfig paper_model_preset();

nlohmann::json to_json(const ModelConfig& cfg);
// With base == nullptr every field must be present; otherwise present fields
// overlay *base. Unknown fields are rejected.
ModelConfig model_config_from_json(const nlohmann::json& j, const ModelConfig* base = nullptr,
                                   const std::string& prefix = "model");

}  // namespace cpmamba::model
