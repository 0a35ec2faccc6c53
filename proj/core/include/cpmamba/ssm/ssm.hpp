#pragma once

#include <cstddef>

#include "cpmamba/numerics/rng.hpp"
#include "cpmamba/numerics/tensor.hpp"

namespace cpmamba::ssm {

using num::Tensor;

// Below this |delta * A| the ZOH input factor switches to its series limit.
inline constexpr double kZohSeriesThreshold = 1e-8;

struct Discretized {
  double a_bar = 0.0;
  double b_bar = 0.0;
};

// (exp(z) - 1) / z, the ZOH input gain relative to delta * B.
double zoh_factor(double z);
double zoh_factor_derivative(double z);

// Zero-order hold for one diagonal entry: a_bar = exp(delta a),
// b_bar = (delta a)^-1 (exp(delta a) - 1) delta b. With exact_zoh = false the
// Euler form b_bar = delta b is used instead. Throws DomainError for delta <= 0.
Discretized discretize(double a, double b, double delta, bool exact_zoh = true);

struct ScanOptions {
  bool exact_zoh = true;
  // Drive h_t with x_{t-1} instead of x_t (x_{-1} = 0).
  bool lagged_input = false;
};

// Learnable SSM tensors for one block with E channels and N states.
struct SsmParams {
  Tensor a_log;    // [E, N]; A = -exp(a_log) < 0
  Tensor dt_bias;  // [E]
  Tensor b_proj;   // [E, N]
  Tensor c_proj;   // [E, N]
  Tensor dt_proj;  // [E, 1]
  Tensor d_skip;   // [E], may be undefined

  std::size_t channels() const { return a_log.dim(0); }
  std::size_t states() const { return a_log.dim(1); }
};

struct ScanInputs {
  Tensor x;      // [b, L, E]
  Tensor delta;  // [b, L, E], strictly positive
  Tensor b;      // [b, L, N]
  Tensor c;      // [b, L, N]
};

// A = -exp(a_log).
Tensor state_matrix(const SsmParams& params);

// B = s W_B, C = s W_C, delta = softplus(dt_bias + broadcast(s w_dt)).
ScanInputs selective_project(const Tensor& s, const SsmParams& params);

// h_t = a_bar_t * h_{t-1} + b_bar_t * x_t,  y_t = C_t . h_t + D * x_t, with
// h_{-1} = 0 and per-step ZOH of (A, B_t, delta_t). `a` is [E, N]; d_skip may
// be undefined. Recorded on the active tape as a single primitive.
Tensor selective_scan(const ScanInputs& in, const Tensor& a, const Tensor& d_skip, const ScanOptions& options = {});
Tensor selective_scan(const ScanInputs& in, const SsmParams& params, const ScanOptions& options = {});

struct MambaWeights {
  Tensor in_s;    // [d_model, E]
  Tensor in_z;    // [d_model, E]
  Tensor conv;    // [E, d_conv]
  SsmParams ssm;
  Tensor out;     // [E, d_model]
};

// Dual-branch Mamba block: x[b, L, d_model] -> [b, L, d_model].
Tensor mamba_block(const Tensor& x, const MambaWeights& w, const ScanOptions& options = {});

// S4D-real initialization: a_log[e, n] = log(n + 1), i.e. A_n = -(n + 1).
std::vector<double> s4d_real_a_log(std::size_t channels, std::size_t states);

// dt_bias such that softplus(dt_bias) is log-uniform in [dt_min, dt_max].
std::vector<double> init_dt_bias(std::size_t channels, num::Rng& rng, double dt_min = 1e-3, double dt_max = 1e-1);

// Fresh block weights: projections uniform in +-1/sqrt(fan_in), S4D-real A,
// log-uniform delta, zero D.
MambaWeights init_mamba_weights(std::size_t d_model, std::size_t expand, std::size_t d_state, std::size_t d_conv,
                                num::Rng& rng, bool use_d_skip = true);

}  // namespace cpmamba::ssm
