#include "cpmamba/model/layers.hpp"

#include <algorithm>
#include <cmath>

#include "cpmamba/errors.hpp"
#include "cpmamba/numerics/ops.hpp"

namespace cpmamba::model {

using num::Shape;

Tensor reshape_input(const CsiBlock& block) {
  const std::size_t k = block.subcarriers;
  if (block.values.size() != block.samples * block.frames * block.antennas * k) {
    throw ShapeError("reshape_input: " + std::to_string(block.values.size()) + " values do not fill [" +
                     std::to_string(block.samples) + ", " + std::to_string(block.frames) + ", " +
                     std::to_string(block.antennas) + ", " + std::to_string(k) + "]");
  }
  const std::size_t rows = block.samples * block.antennas;
  const std::size_t d = 2 * k;
  std::vector<double> out(rows * block.frames * d);
  for (std::size_t s = 0; s < block.samples; ++s) {
    for (std::size_t t = 0; t < block.frames; ++t) {
      for (std::size_t a = 0; a < block.antennas; ++a) {
        double* dst = out.data() + ((s * block.antennas + a) * block.frames + t) * d;
        for (std::size_t j = 0; j < k; ++j) {
          const cd v = block.at(s, t, a, j);
          dst[j] = v.real();
          dst[k + j] = v.imag();
        }
      }
    }
  }
  return Tensor(Shape{rows, block.frames, d}, std::move(out));
}

CsiBlock restore_layout(const Tensor& x, std::size_t antennas) {
  if (x.rank() != 3 || x.dim(2) % 2 != 0 || antennas == 0 || x.dim(0) % antennas != 0) {
    throw ShapeError("restore_layout: cannot split " + num::to_string(x.shape()) + " over " + std::to_string(antennas) +
                     " antennas with even feature width");
  }
  const std::size_t k = x.dim(2) / 2, frames = x.dim(1);
  CsiBlock block(x.dim(0) / antennas, frames, antennas, k);
  const auto xd = x.data();
  for (std::size_t s = 0; s < block.samples; ++s) {
    for (std::size_t a = 0; a < antennas; ++a) {
      for (std::size_t t = 0; t < frames; ++t) {
        const double* src = xd.data() + ((s * antennas + a) * frames + t) * 2 * k;
        for (std::size_t j = 0; j < k; ++j) block.at(s, t, a, j) = cd(src[j], src[k + j]);
      }
    }
  }
  return block;
}

Normalized normalize(const Tensor& x) {
  const auto xd = x.data();
  if (xd.empty()) throw ShapeError("normalize: empty tensor");
  NormStats stats;
  const auto [lo, hi] = std::minmax_element(xd.begin(), xd.end());
  if (*lo == *hi) {
    stats.mean = *lo;
    stats.stddev = kNormStdFloor;
  } else {
    double sum = 0.0;
    for (double v : xd) sum += v;
    const double n = static_cast<double>(xd.size());
    stats.mean = sum / n;
    double sq = 0.0;
    for (double v : xd) sq += (v - stats.mean) * (v - stats.mean);
    stats.stddev = std::max(std::sqrt(sq / n), kNormStdFloor);
  }
  std::vector<double> out(xd.size());
  for (std::size_t i = 0; i < xd.size(); ++i) out[i] = (xd[i] - stats.mean) / stats.stddev;
  Tensor result(x.shape(), std::move(out));
  // Exact derivative including the dependence of mean and stddev on x; a
  // floored stddev is constant.
  const bool floored = stats.stddev == kNormStdFloor;
  num::detail::attach({x}, result, [x, y = result.data(), inv = 1.0 / stats.stddev, floored](std::span<const double> g) {
    if (!x.requires_grad()) return;
    auto& gx = x.impl()->ensure_grad();
    const double n = static_cast<double>(g.size());
    double g_mean = 0.0, gy_mean = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      g_mean += g[i];
      gy_mean += g[i] * y[i];
    }
    g_mean /= n;
    gy_mean = floored ? 0.0 : gy_mean / n;
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += (g[i] - g_mean - y[i] * gy_mean) * inv;
  });
  return {result, stats};
}

Tensor denormalize(const Tensor& x, const NormStats& stats) { return num::affine(x, stats.stddev, stats.mean); }

Tensor patch_embed(const Tensor& x, const Affine& patch, std::size_t patch_size) {
  if (patch_size == 0) throw ConfigError("patch_embed: patch size must be positive");
  if (x.rank() != 3) throw ShapeError("patch_embed: expected [B, L, D], got " + num::to_string(x.shape()));
  const std::size_t b = x.dim(0), len = x.dim(1), d = x.dim(2);
  const std::size_t n_patches = (len + patch_size - 1) / patch_size;
  const std::size_t padded = n_patches * patch_size;
  Tensor h = padded == len ? x : num::pad_zeros(x, 1, 0, padded - len);
  h = num::reshape(h, {b, n_patches, patch_size, d});
  h = num::permute(h, {0, 1, 3, 2});  // [B, L', D, N_p]
  h = num::linear(h, patch.w, patch.b);
  h = num::permute(h, {0, 1, 3, 2});
  h = num::reshape(h, {b, padded, d});
  return padded == len ? h : num::slice(h, 1, 0, len);
}

Tensor se_gates(const Tensor& x, const SeWeights& w) {
  if (x.rank() != 4) throw ShapeError("se_block: expected [B, C, L, K], got " + num::to_string(x.shape()));
  const std::size_t b = x.dim(0), c = x.dim(1);
  auto excite = [&](const Tensor& pooled) {
    const Tensor v = num::reshape(pooled, {b, c});
    return num::linear(num::relu(num::linear(v, w.fc1.w, w.fc1.b)), w.fc2.w, w.fc2.b);
  };
  return num::sigmoid(num::add(excite(num::pool_global(x, num::Pool::avg)), excite(num::pool_global(x, num::Pool::max))));
}

Tensor se_block(const Tensor& x, const SeWeights& w) {
  const Tensor gates = se_gates(x, w);
  return num::mul(x, num::reshape(gates, {x.dim(0), x.dim(1), 1, 1}));
}

namespace {

Tensor conv(const Tensor& x, const Conv& c) { return num::conv2d_3x3(x, c.w, c.b); }

}  // namespace

Tensor se_resnet(const Tensor& x, const SeResNetWeights& w) {
  if (x.rank() != 4 || x.dim(1) != 2) {
    throw ShapeError("se_resnet: expected [B, 2, L, K], got " + num::to_string(x.shape()));
  }
  Tensor h = conv(x, w.conv_in);
  for (const ResBlock& blk : w.blocks) {
    Tensor y = conv(num::relu(conv(h, blk.conv1)), blk.conv2);
    h = num::add(h, se_block(y, blk.se));
  }
  return conv(h, w.conv_out);
}

namespace {

Tensor drop(const Tensor& x, double p, bool training, num::Rng* rng) {
  if (!training || p == 0.0) return x;
  if (!rng) throw ConfigError("dropout in training mode needs a random stream");
  return num::dropout(x, p, training, *rng);
}

}  // namespace

Tensor rmamba_stack(const Tensor& x, const std::vector<MambaLayer>& layers, double p, bool training, num::Rng* rng,
                    const ssm::ScanOptions& scan) {
  Tensor h = x;
  for (const MambaLayer& layer : layers) {
    const Tensor y = ssm::mamba_block(num::layer_norm(h, layer.norm_gamma, layer.norm_beta), layer.mamba, scan);
    h = num::add(h, drop(y, p, training, rng));
  }
  return h;
}

Tensor self_attention(const Tensor& x, const AttentionLayer& w, std::size_t heads, Tensor* weights_out) {
  if (x.rank() != 3) throw ShapeError("self_attention: expected [B, L, d_model], got " + num::to_string(x.shape()));
  const std::size_t b = x.dim(0), len = x.dim(1), d = x.dim(2);
  if (heads == 0 || d % heads != 0) {
    throw ConfigError("self_attention: d_model " + std::to_string(d) + " is not divisible by " + std::to_string(heads) +
                      " heads");
  }
  const std::size_t dh = d / heads;
  auto split = [&](const Affine& proj, std::vector<std::size_t> order) {
    return num::permute(num::reshape(num::linear(x, proj.w, proj.b), {b, len, heads, dh}), order);
  };
  const Tensor q = split(w.q, {0, 2, 1, 3});   // [B, H, L, dh]
  const Tensor kt = split(w.k, {0, 2, 3, 1});  // [B, H, dh, L]
  const Tensor v = split(w.v, {0, 2, 1, 3});
  const Tensor scores = num::affine(num::matmul(q, kt), 1.0 / std::sqrt(static_cast<double>(dh)), 0.0);
  const Tensor attn = num::softmax_last(scores);
  if (weights_out) *weights_out = attn;
  Tensor out = num::permute(num::matmul(attn, v), {0, 2, 1, 3});
  out = num::reshape(out, {b, len, d});
  return num::linear(out, w.o.w, w.o.b);
}

Tensor attention_backbone(const Tensor& x, const std::vector<AttentionLayer>& layers, std::size_t heads, double p,
                          bool training, num::Rng* rng) {
  Tensor h = x;
  for (const AttentionLayer& layer : layers) {
    const Tensor a = self_attention(num::layer_norm(h, layer.ln1_gamma, layer.ln1_beta), layer, heads);
    h = num::add(h, drop(a, p, training, rng));
    const Tensor n = num::layer_norm(h, layer.ln2_gamma, layer.ln2_beta);
    const Tensor f = num::linear(num::relu(num::linear(n, layer.ff1.w, layer.ff1.b)), layer.ff2.w, layer.ff2.b);
    h = num::add(h, drop(f, p, training, rng));
  }
  return h;
}

Tensor sinusoidal_positions(std::size_t length, std::size_t d_model) {
  std::vector<double> pe(length * d_model);
  for (std::size_t t = 0; t < length; ++t) {
    for (std::size_t i = 0; i < d_model; ++i) {
      const double freq = std::pow(10000.0, -static_cast<double>(i - i % 2) / static_cast<double>(d_model));
      const double angle = static_cast<double>(t) * freq;
      pe[t * d_model + i] = i % 2 == 0 ? std::sin(angle) : std::cos(angle);
    }
  }
  return Tensor(Shape{length, d_model}, std::move(pe));
}

Tensor prediction_head(const Tensor& x, const NormStats& stats, const HeadWeights& w) {
  if (x.rank() != 3) throw ShapeError("prediction_head: expected [B, L, d_model], got " + num::to_string(x.shape()));
  Tensor h = num::linear(x, w.fc_f.w, w.fc_f.b);  // [B, L, D]
  h = num::permute(h, {0, 2, 1});
  h = num::linear(h, w.fc_t.w, w.fc_t.b);  // [B, D, P]
  h = num::permute(h, {0, 2, 1});
  return denormalize(h, stats);
}

}  // namespace cpmamba::model
