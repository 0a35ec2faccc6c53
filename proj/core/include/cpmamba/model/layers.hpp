#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "cpmamba/numerics/rng.hpp"
#include "cpmamba/numerics/tensor.hpp"
#include "cpmamba/ssm/ssm.hpp"

namespace cpmamba::model {

using num::Tensor;
using cd = std::complex<double>;

// Complex CSI laid out [sample][frame][antenna][subcarrier].
struct CsiBlock {
  std::size_t samples = 0;
  std::size_t frames = 0;
  std::size_t antennas = 0;
  std::size_t subcarriers = 0;
  std::vector<cd> values;

  CsiBlock() = default;
  CsiBlock(std::size_t s, std::size_t t, std::size_t a, std::size_t k)
      : samples(s), frames(t), antennas(a), subcarriers(k), values(s * t * a * k) {}

  cd& at(std::size_t s, std::size_t t, std::size_t a, std::size_t k) {
    return values[((s * frames + t) * antennas + a) * subcarriers + k];
  }
  const cd& at(std::size_t s, std::size_t t, std::size_t a, std::size_t k) const {
    return values[((s * frames + t) * antennas + a) * subcarriers + k];
  }
};

// Antennas fold into the batch (row s * N_t + a); features are
// [re(k = 0..K-1), im(k = 0..K-1)]. Result is [S * N_t, T, 2K].
Tensor reshape_input(const CsiBlock& block);
// Inverse of reshape_input for a [S * N_t, T, 2K] tensor.
CsiBlock restore_layout(const Tensor& x, std::size_t antennas);

struct NormStats {
  double mean = 0.0;
  double stddev = 1.0;
};

inline constexpr double kNormStdFloor = 1e-8;

struct Normalized {
  Tensor values;
  NormStats stats;
};

// One mean and population standard deviation over the whole tensor; the
// statistics are constants with respect to differentiation.
Normalized normalize(const Tensor& x);
Tensor denormalize(const Tensor& x, const NormStats& stats);

struct Affine {
  Tensor w;
  Tensor b;
};

// Non-overlapping time patches of length N_p (tail zero-padded), a shared
// N_p -> N_p map per feature, then back to [B, L, D].
Tensor patch_embed(const Tensor& x, const Affine& patch, std::size_t patch_size);

struct SeWeights {
  Affine fc1;  // [C, C/r]
  Affine fc2;  // [C/r, C]
};

// Channel gates sigmoid(FC2(ReLU(FC1(avg))) + FC2(ReLU(FC1(max)))).
Tensor se_gates(const Tensor& x, const SeWeights& w);
Tensor se_block(const Tensor& x, const SeWeights& w);

struct Conv {
  Tensor w;  // [c_out, c_in, 3, 3]
  Tensor b;  // [c_out]
};

struct ResBlock {
  Conv conv1;
  Conv conv2;
  SeWeights se;
};

struct SeResNetWeights {
  Conv conv_in;
  std::vector<ResBlock> blocks;
  Conv conv_out;
};

// x[B, 2, L, K] -> [B, 2, L, K].
Tensor se_resnet(const Tensor& x, const SeResNetWeights& w);

struct MambaLayer {
  Tensor norm_gamma;
  Tensor norm_beta;
  ssm::MambaWeights mamba;
};

// rng may be null when training is false.
Tensor rmamba_stack(const Tensor& x, const std::vector<MambaLayer>& layers, double p, bool training, num::Rng* rng,
                    const ssm::ScanOptions& scan = {});

struct AttentionLayer {
  Tensor ln1_gamma, ln1_beta;
  Affine q, k, v, o;
  Tensor ln2_gamma, ln2_beta;
  Affine ff1, ff2;
};

// Non-causal multi-head self-attention; returns [B, L, d_model]. When
// weights_out is given it receives the softmax weights [B, H, L, L].
Tensor self_attention(const Tensor& x, const AttentionLayer& w, std::size_t heads, Tensor* weights_out = nullptr);

Tensor attention_backbone(const Tensor& x, const std::vector<AttentionLayer>& layers, std::size_t heads, double p,
                          bool training, num::Rng* rng);

// Sinusoidal position table [L, d_model].
Tensor sinusoidal_positions(std::size_t length, std::size_t d_model);

struct HeadWeights {
  Affine fc_f;  // [d_model, D]
  Affine fc_t;  // [L, P]
};

// x[B, L, d_model] -> [B, P, D], rescaled by stats.
Tensor prediction_head(const Tensor& x, const NormStats& stats, const HeadWeights& w);

}  // namespace cpmamba::model
