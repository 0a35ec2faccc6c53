#include "cpmamba/model/model.hpp"

#include "cpmamba/binary_io.hpp"
#include "cpmamba/errors.hpp"
#include "cpmamba/numerics/init.hpp"
#include "cpmamba/numerics/ops.hpp"

namespace cpmamba::model {

using num::Shape;

const Tensor& ModelState::at(const std::string& key) const {
  auto it = params.find(key);
  if (it == params.end()) throw ConfigError("model has no parameter '" + key + "'");
  return it->second;
}

std::vector<Tensor> ModelState::parameters() const {
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const auto& [key, t] : params) out.push_back(t);
  return out;
}

std::size_t ModelState::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [key, t] : params) n += t.size();
  return n;
}

std::map<std::string, Shape> parameter_shapes(const ModelConfig& cfg) {
  cfg.validate();
  std::map<std::string, Shape> s;
  const std::size_t d = cfg.d_model, feat = cfg.features(), c = cfg.conv_channels, e = cfg.inner();
  auto affine = [&](const std::string& p, std::size_t in, std::size_t out) {
    s[p + "/w"] = {in, out};
    s[p + "/b"] = {out};
  };
  auto conv = [&](const std::string& p, std::size_t in, std::size_t out) {
    s[p + "/w"] = {out, in, 3, 3};
    s[p + "/b"] = {out};
  };
  auto norm = [&](const std::string& p) {
    s[p + "/gamma"] = {d};
    s[p + "/beta"] = {d};
  };
  if (cfg.ablation != Ablation::no_patch) affine("patch", cfg.patch_size, cfg.patch_size);
  if (cfg.ablation != Ablation::no_se) {
    conv("se_resnet/conv_in", 2, c);
    for (std::size_t i = 0; i < cfg.res_blocks; ++i) {
      const std::string p = "se_resnet/block" + std::to_string(i);
      conv(p + "/conv1", c, c);
      conv(p + "/conv2", c, c);
      affine(p + "/se/fc1", c, c / cfg.se_reduction);
      affine(p + "/se/fc2", c / cfg.se_reduction, c);
    }
    conv("se_resnet/conv_out", c, 2);
  }
  affine("embed", feat, d);
  for (std::size_t i = 0; i < cfg.mamba_layers; ++i) {
    if (cfg.ablation == Ablation::attention_backbone) {
      const std::string p = "attn/layer" + std::to_string(i);
      norm(p + "/ln1");
      affine(p + "/q", d, d);
      affine(p + "/k", d, d);
      affine(p + "/v", d, d);
      affine(p + "/o", d, d);
      norm(p + "/ln2");
      affine(p + "/ff1", d, e);
      affine(p + "/ff2", e, d);
    } else {
      const std::string p = "mamba/layer" + std::to_string(i);
      norm(p + "/norm");
      s[p + "/in_s/w"] = {d, e};
      s[p + "/in_z/w"] = {d, e};
      s[p + "/conv1d/w"] = {e, cfg.d_conv};
      s[p + "/ssm/b_proj/w"] = {e, cfg.d_state};
      s[p + "/ssm/c_proj/w"] = {e, cfg.d_state};
      s[p + "/ssm/dt_proj/w"] = {e, 1};
      s[p + "/ssm/dt_bias"] = {e};
      s[p + "/ssm/a_log"] = {e, cfg.d_state};
      if (cfg.use_d_skip) s[p + "/ssm/d_skip"] = {e};
      s[p + "/out/w"] = {e, d};
    }
  }
  affine("head/fc_f", d, feat);
  affine("head/fc_t", cfg.history, cfg.horizon);
  return s;
}

namespace {

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

Tensor init_tensor(const std::string& key, const Shape& shape, num::Rng& rng) {
  if (ends_with(key, "/b") || ends_with(key, "/beta") || ends_with(key, "/d_skip")) return num::zeros_parameter(shape);
  if (ends_with(key, "/gamma")) return num::filled_parameter(shape, 1.0);
  if (ends_with(key, "/a_log")) return Tensor::parameter(shape, ssm::s4d_real_a_log(shape[0], shape[1]));
  if (ends_with(key, "/dt_bias")) return Tensor::parameter(shape, ssm::init_dt_bias(shape[0], rng));
  std::size_t fan_in = shape[0];
  if (shape.size() == 4) fan_in = shape[1] * shape[2] * shape[3];
  if (ends_with(key, "/conv1d/w")) fan_in = shape[1];
  return num::uniform_fan_in(shape, fan_in, rng);
}

}  // namespace

ModelState init_model(const ModelConfig& cfg, std::uint64_t seed) {
  ModelState st;
  st.config = cfg;
  for (const auto& [key, shape] : parameter_shapes(cfg)) {
    num::Rng rng = num::Rng::derive(seed, {io::fnv1a64(key)});
    st.params.emplace(key, init_tensor(key, shape, rng));
  }
  return st;
}

namespace {

Affine affine_at(const ModelState& s, const std::string& p) { return {s.at(p + "/w"), s.at(p + "/b")}; }
Conv conv_at(const ModelState& s, const std::string& p) { return {s.at(p + "/w"), s.at(p + "/b")}; }

}  // namespace

Affine patch_weights(const ModelState& s) { return affine_at(s, "patch"); }
Affine embed_weights(const ModelState& s) { return affine_at(s, "embed"); }

SeResNetWeights se_resnet_weights(const ModelState& s) {
  SeResNetWeights w;
  w.conv_in = conv_at(s, "se_resnet/conv_in");
  for (std::size_t i = 0; i < s.config.res_blocks; ++i) {
    const std::string p = "se_resnet/block" + std::to_string(i);
    w.blocks.push_back({conv_at(s, p + "/conv1"), conv_at(s, p + "/conv2"),
                        SeWeights{affine_at(s, p + "/se/fc1"), affine_at(s, p + "/se/fc2")}});
  }
  w.conv_out = conv_at(s, "se_resnet/conv_out");
  return w;
}

std::vector<MambaLayer> mamba_layers(const ModelState& s) {
  std::vector<MambaLayer> layers;
  for (std::size_t i = 0; i < s.config.mamba_layers; ++i) {
    const std::string p = "mamba/layer" + std::to_string(i);
    MambaLayer l;
    l.norm_gamma = s.at(p + "/norm/gamma");
    l.norm_beta = s.at(p + "/norm/beta");
    l.mamba.in_s = s.at(p + "/in_s/w");
    l.mamba.in_z = s.at(p + "/in_z/w");
    l.mamba.conv = s.at(p + "/conv1d/w");
    l.mamba.ssm.b_proj = s.at(p + "/ssm/b_proj/w");
    l.mamba.ssm.c_proj = s.at(p + "/ssm/c_proj/w");
    l.mamba.ssm.dt_proj = s.at(p + "/ssm/dt_proj/w");
    l.mamba.ssm.dt_bias = s.at(p + "/ssm/dt_bias");
    l.mamba.ssm.a_log = s.at(p + "/ssm/a_log");
    if (s.config.use_d_skip) l.mamba.ssm.d_skip = s.at(p + "/ssm/d_skip");
    l.mamba.out = s.at(p + "/out/w");
    layers.push_back(std::move(l));
  }
  return layers;
}

std::vector<AttentionLayer> attention_layers(const ModelState& s) {
  std::vector<AttentionLayer> layers;
  for (std::size_t i = 0; i < s.config.mamba_layers; ++i) {
    const std::string p = "attn/layer" + std::to_string(i);
    AttentionLayer l;
    l.ln1_gamma = s.at(p + "/ln1/gamma");
    l.ln1_beta = s.at(p + "/ln1/beta");
    l.q = affine_at(s, p + "/q");
    l.k = affine_at(s, p + "/k");
    l.v = affine_at(s, p + "/v");
    l.o = affine_at(s, p + "/o");
    l.ln2_gamma = s.at(p + "/ln2/gamma");
    l.ln2_beta = s.at(p + "/ln2/beta");
    l.ff1 = affine_at(s, p + "/ff1");
    l.ff2 = affine_at(s, p + "/ff2");
    layers.push_back(std::move(l));
  }
  return layers;
}

HeadWeights head_weights(const ModelState& s) { return {affine_at(s, "head/fc_f"), affine_at(s, "head/fc_t")}; }

Tensor forward(const Tensor& x, const ModelState& state, bool training, num::Rng* rng, std::vector<StageShape>* trace) {
  const ModelConfig& cfg = state.config;
  const std::size_t len = cfg.history, feat = cfg.features(), k = cfg.subcarriers;
  if (x.rank() != 3 || x.dim(1) != len || x.dim(2) != feat) {
    throw ShapeError("forward: input " + num::to_string(x.shape()) + " does not match [B, " + std::to_string(len) +
                     ", " + std::to_string(feat) + "]");
  }
  const std::size_t b = x.dim(0);
  auto mark = [&](const char* stage, const Tensor& t) {
    if (trace) trace->push_back({stage, t.shape()});
  };

  const Normalized norm = normalize(x);
  Tensor h = norm.values;
  mark("normalize", h);
  if (cfg.ablation != Ablation::no_patch) {
    h = patch_embed(h, patch_weights(state), cfg.patch_size);
    mark("patch_embed", h);
  }
  if (cfg.ablation != Ablation::no_se) {
    Tensor planes = num::permute(num::reshape(h, {b, len, 2, k}), {0, 2, 1, 3});
    mark("to_planes", planes);
    planes = se_resnet(planes, se_resnet_weights(state));
    mark("se_resnet", planes);
    h = num::reshape(num::permute(planes, {0, 2, 1, 3}), {b, len, feat});
    mark("from_planes", h);
  }
  const Affine embed = embed_weights(state);
  h = num::linear(h, embed.w, embed.b);
  mark("embed", h);
  const double p = cfg.dropout;
  if (cfg.ablation == Ablation::attention_backbone) {
    h = num::add(h, sinusoidal_positions(len, cfg.d_model));
    h = attention_backbone(h, attention_layers(state), cfg.attention_heads, p, training, rng);
    mark("attention_backbone", h);
  } else {
    ssm::ScanOptions scan;
    scan.exact_zoh = cfg.exact_zoh;
    h = rmamba_stack(h, mamba_layers(state), p, training, rng, scan);
    mark("rmamba_stack", h);
  }
  h = prediction_head(h, norm.stats, head_weights(state));
  mark("prediction_head", h);
  return h;
}

namespace {

constexpr char kMagic[] = "CPMB";

void check_same_config(const ModelConfig& stored, const ModelConfig& expected, const std::string& context) {
  const nlohmann::json a = to_json(stored), b = to_json(expected);
  for (auto it = b.begin(); it != b.end(); ++it) {
    if (a.at(it.key()) != it.value()) {
      throw ConfigError(context + ": checkpoint " + it.key() + " = " + a.at(it.key()).dump() + " but expected " +
                        it.value().dump());
    }
  }
}

}  // namespace

std::string encode_checkpoint(const ModelState& state) {
  io::ByteWriter w;
  w.bytes(std::string_view(kMagic, 4));
  w.u32(kCheckpointVersion);
  const nlohmann::json header{{"config", to_json(state.config)}, {"step", state.step}, {"meta", state.meta}};
  const std::string text = header.dump();
  w.u64(text.size());
  w.bytes(text);
  w.u32(static_cast<std::uint32_t>(state.params.size()));
  for (const auto& [key, t] : state.params) {
    w.u32(static_cast<std::uint32_t>(key.size()));
    w.bytes(key);
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) w.u64(d);
    w.f64s(t.data());
  }
  w.u64(io::fnv1a64(w.buffer()));
  return std::move(w.buffer());
}

ModelState decode_checkpoint(std::string_view bytes, const std::string& context, const ModelConfig* expected) {
  if (bytes.size() < 16) throw IoError(context + ": too short to be a checkpoint");
  const std::string_view body = bytes.substr(0, bytes.size() - 8);
  io::ByteReader tail(bytes.substr(bytes.size() - 8), context);
  if (bytes.substr(0, 4) != std::string_view(kMagic, 4)) throw IoError(context + ": not a CPMB checkpoint");
  if (tail.u64() != io::fnv1a64(body)) throw IoError(context + ": checksum mismatch (file truncated or corrupted)");

  io::ByteReader r(body, context);
  r.bytes(4);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw IoError(context + ": checkpoint version " + std::to_string(version) + " is not supported (expected " +
                  std::to_string(kCheckpointVersion) + ")");
  }
  const std::uint64_t header_len = r.u64();
  if (header_len > r.remaining()) throw IoError(context + ": header length exceeds file size");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(r.bytes(header_len));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(context + ": malformed checkpoint header: " + e.what());
  }
  ModelState st;
  try {
    st.config = model_config_from_json(header.at("config"), nullptr, "config");
    st.step = header.at("step").get<std::uint64_t>();
    st.meta = header.value("meta", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw IoError(context + ": incomplete checkpoint header: " + e.what());
  }
  if (expected) check_same_config(st.config, *expected, context);

  const auto shapes = parameter_shapes(st.config);
  const std::uint32_t count = r.u32();
  if (count != shapes.size()) {
    throw IoError(context + ": " + std::to_string(count) + " arrays stored but the config defines " +
                  std::to_string(shapes.size()));
  }
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name(r.bytes(r.u32()));
    auto it = shapes.find(name);
    if (it == shapes.end()) throw IoError(context + ": unexpected array '" + name + "'");
    Shape shape(r.u32());
    for (auto& d : shape) d = r.u64();
    if (shape != it->second) {
      throw IoError(context + ": array '" + name + "' has shape " + num::to_string(shape) + ", expected " +
                    num::to_string(it->second));
    }
    std::vector<double> values(num::numel(shape));
    for (auto& v : values) v = r.f64();
    st.params.emplace(name, Tensor::parameter(std::move(shape), std::move(values)));
  }
  if (st.params.size() != shapes.size()) throw IoError(context + ": duplicate array names");
  if (r.remaining() != 0) throw IoError(context + ": trailing bytes after arrays");
  return st;
}

void save_checkpoint(const ModelState& state, const std::string& path) {
  io::write_file_atomic(path, encode_checkpoint(state));
}

ModelState load_checkpoint(const std::string& path, const ModelConfig* expected) {
  return decode_checkpoint(io::read_file(path), path, expected);
}

}  // namespace cpmamba::model
