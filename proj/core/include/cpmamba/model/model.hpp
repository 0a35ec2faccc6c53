#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "cpmamba/model/config.hpp"
#include "cpmamba/model/layers.hpp"

namespace cpmamba::model {

// Learnable tensors keyed by path, e.g. "se_resnet/block0/conv1/w".
using ParamMap = std::map<std::string, Tensor>;

struct ModelState {
  ModelConfig config;
  ParamMap params;
  std::uint64_t step = 0;
  // Free-form run metadata stored alongside the weights (mode, dataset id, ...).
  nlohmann::json meta = nlohmann::json::object();

  // Throws ConfigError for an unknown key.
  const Tensor& at(const std::string& key) const;
  // Parameters in key order.
  std::vector<Tensor> parameters() const;
  std::size_t parameter_count() const;
};

// Keys and shapes of every learnable tensor for cfg, a pure function of cfg.
std::map<std::string, num::Shape> parameter_shapes(const ModelConfig& cfg);

// Fresh weights. Each tensor is drawn from its own stream keyed by (seed,
// key), so adding a tensor does not perturb the others.
ModelState init_model(const ModelConfig& cfg, std::uint64_t seed);

struct StageShape {
  std::string stage;
  num::Shape shape;
};

// x[B, L, D] -> [B, P, D]. training enables dropout, which needs rng. When
// trace is given it receives the output shape of every stage in order.
Tensor forward(const Tensor& x, const ModelState& state, bool training = false, num::Rng* rng = nullptr,
               std::vector<StageShape>* trace = nullptr);

// Structured views over the flat parameter map.
Affine patch_weights(const ModelState& s);
SeResNetWeights se_resnet_weights(const ModelState& s);
std::vector<MambaLayer> mamba_layers(const ModelState& s);
std::vector<AttentionLayer> attention_layers(const ModelState& s);
HeadWeights head_weights(const ModelState& s);
Affine embed_weights(const ModelState& s);

// Checkpoint "CPMB": magic, u32 version, u64 length + JSON header (config,
// step, meta), u32 array count, then per array u32 name length, name, u32
// rank, u64 dims, f64 values; trailing u64 FNV-1a of everything before it.
inline constexpr std::uint32_t kCheckpointVersion = 1;
std::string encode_checkpoint(const ModelState& state);
// When expected is given, the stored config must equal it (ConfigError names
// the first differing field).
ModelState decode_checkpoint(std::string_view bytes, const std::string& context,
                             const ModelConfig* expected = nullptr);
void save_checkpoint(const ModelState& state, const std::string& path);
ModelState load_checkpoint(const std::string& path, const ModelConfig* expected = nullptr);

}  // namespace cpmamba::model
