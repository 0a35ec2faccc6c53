#pragma once

#include <string_view>
#include <vector>

#include "cpmamba/numerics/rng.hpp"
#include "cpmamba/numerics/tensor.hpp"

// Differentiable primitives. Each one computes its forward value eagerly and,
// when a tape is active and an input requires grad, records its backward rule.
namespace cpmamba::num {

enum class Unary { silu, relu, sigmoid, softplus, exp, neg };

// Throws ConfigError for names outside the enum.
Unary unary_from_string(std::string_view name);

Tensor apply_unary(const Tensor& x, Unary kind);
inline Tensor silu(const Tensor& x) { return apply_unary(x, Unary::silu); }
inline Tensor relu(const Tensor& x) { return apply_unary(x, Unary::relu); }
inline Tensor sigmoid(const Tensor& x) { return apply_unary(x, Unary::sigmoid); }
inline Tensor softplus(const Tensor& x) { return apply_unary(x, Unary::softplus); }
inline Tensor exp(const Tensor& x) { return apply_unary(x, Unary::exp); }
inline Tensor neg(const Tensor& x) { return apply_unary(x, Unary::neg); }

// Numerically stable scalar kernels, shared with code that works on raw values.
double sigmoid_value(double x);
double softplus_value(double x);

// scale * x + shift with scalar constants.
Tensor affine(const Tensor& x, double scale, double shift);

// Broadcasting element-wise arithmetic (numpy rules).
Shape broadcast_shapes(const Shape& a, const Shape& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// Batched matrix product over the last two axes; leading axes broadcast.
Tensor matmul(const Tensor& a, const Tensor& b);

// x[.., d_in] * w[d_in, d_out] (+ b[d_out]).
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);
Tensor linear(const Tensor& x, const Tensor& w);

// 3x3 cross-correlation with zero padding 1: x[b,c_in,h,w] -> [b,c_out,h,w].
Tensor conv2d_3x3(const Tensor& x, const Tensor& kernels, const Tensor& bias);

// Depthwise causal convolution: x[b,len,ch], kernels[ch,d_conv]. Output t
// sees inputs t-d_conv+1 .. t; positions before 0 read as zero.
Tensor causal_conv1d(const Tensor& x, const Tensor& kernels);

inline constexpr double kLayerNormEps = 1e-5;
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = kLayerNormEps);

enum class Pool { avg, max };
// x[b,c,h,w] -> [b,c,1,1]. Max ties go to the first index in row-major order.
Tensor pool_global(const Tensor& x, Pool kind);

// Inverted dropout. Evaluation mode and p == 0 return `x` unchanged.
Tensor dropout(const Tensor& x, double p, bool training, Rng& rng);

Tensor softmax_last(const Tensor& x);

Tensor reshape(const Tensor& x, Shape shape);
Tensor permute(const Tensor& x, const std::vector<std::size_t>& axes);
Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length);
Tensor pad_zeros(const Tensor& x, std::size_t axis, std::size_t before, std::size_t after);

}  // namespace cpmamba::num
