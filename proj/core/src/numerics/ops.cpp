#include "cpmamba/numerics/ops.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cpmamba/errors.hpp"
#include "vec_math.hpp"

namespace cpmamba::num {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

// exp() argument ceiling; keeps the exp primitive finite on finite inputs.
constexpr double kExpClamp = 700.0;

std::vector<double>* grad_of(const Tensor& t) {
  if (!t.requires_grad()) return nullptr;
  return &t.impl()->ensure_grad();
}

std::vector<std::size_t> row_major_strides(const Shape& shape) {
  std::vector<std::size_t> strides(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;) strides[i - 1] = strides[i] * shape[i];
  return strides;
}

// Strides of `in` expressed against the broadcast shape `out`; broadcast
// axes get stride 0.
std::vector<std::size_t> broadcast_strides(const Shape& in, const Shape& out) {
  const auto base = row_major_strides(in);
  std::vector<std::size_t> strides(out.size(), 0);
  const std::size_t offset = out.size() - in.size();
  for (std::size_t d = 0; d < in.size(); ++d) {
    strides[d + offset] = (in[d] == 1 && out[d + offset] != 1) ? 0 : base[d];
  }
  return strides;
}

// Calls f(out_index, a_index, b_index) for every element of `out`.
template <class F>
void for_each_broadcast(const Shape& out, const std::vector<std::size_t>& sa, const std::vector<std::size_t>& sb,
                        F&& f) {
  const std::size_t r = out.size();
  if (r == 0) {
    f(std::size_t{0}, std::size_t{0}, std::size_t{0});
    return;
  }
  const std::size_t n = numel(out);
  const std::size_t inner = out[r - 1];
  if (inner == 0) return;
  const std::size_t a_in = sa[r - 1];
  const std::size_t b_in = sb[r - 1];
  std::vector<std::size_t> idx(r, 0);
  std::size_t ia = 0;
  std::size_t ib = 0;
  for (std::size_t o = 0; o < n; o += inner) {
    for (std::size_t j = 0; j < inner; ++j) f(o + j, ia + j * a_in, ib + j * b_in);
    for (std::size_t d = r - 1; d-- > 0;) {
      ++idx[d];
      ia += sa[d];
      ib += sb[d];
      if (idx[d] < out[d]) break;
      ia -= sa[d] * out[d];
      ib -= sb[d] * out[d];
      idx[d] = 0;
    }
  }
}

enum class BinaryKind { add, sub, mul };

Tensor binary(const Tensor& a, const Tensor& b, BinaryKind kind) {
  const Shape out_shape = broadcast_shapes(a.shape(), b.shape());
  const auto sa = broadcast_strides(a.shape(), out_shape);
  const auto sb = broadcast_strides(b.shape(), out_shape);
  const auto ad = a.data();
  const auto bd = b.data();
  std::vector<double> out(numel(out_shape));
  const bool same = a.shape() == b.shape();
  switch (kind) {
    case BinaryKind::add:
      if (same) {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] + bd[i];
      } else {
        for_each_broadcast(out_shape, sa, sb, [&](std::size_t o, std::size_t i, std::size_t j) { out[o] = ad[i] + bd[j]; });
      }
      break;
    case BinaryKind::sub:
      if (same) {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] - bd[i];
      } else {
        for_each_broadcast(out_shape, sa, sb, [&](std::size_t o, std::size_t i, std::size_t j) { out[o] = ad[i] - bd[j]; });
      }
      break;
    case BinaryKind::mul:
      if (same) {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] * bd[i];
      } else {
        for_each_broadcast(out_shape, sa, sb, [&](std::size_t o, std::size_t i, std::size_t j) { out[o] = ad[i] * bd[j]; });
      }
      break;
  }
  Tensor result(out_shape, std::move(out));
  detail::attach({a, b}, result, [a, b, out_shape, sa, sb, kind, same](std::span<const double> g) {
    auto* ga = grad_of(a);
    auto* gb = grad_of(b);
    const auto ad = a.data();
    const auto bd = b.data();
    const double sign_b = kind == BinaryKind::sub ? -1.0 : 1.0;
    if (kind == BinaryKind::mul) {
      if (same) {
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (ga) (*ga)[i] += g[i] * bd[i];
          if (gb) (*gb)[i] += g[i] * ad[i];
        }
      } else {
        for_each_broadcast(out_shape, sa, sb, [&](std::size_t o, std::size_t i, std::size_t j) {
          if (ga) (*ga)[i] += g[o] * bd[j];
          if (gb) (*gb)[j] += g[o] * ad[i];
        });
      }
      return;
    }
    if (same) {
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (ga) (*ga)[i] += g[i];
        if (gb) (*gb)[i] += sign_b * g[i];
      }
    } else {
      for_each_broadcast(out_shape, sa, sb, [&](std::size_t o, std::size_t i, std::size_t j) {
        if (ga) (*ga)[i] += g[o];
        if (gb) (*gb)[j] += sign_b * g[o];
      });
    }
  });
  return result;
}

}  // namespace

double sigmoid_value(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus_value(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

Unary unary_from_string(std::string_view name) {
  if (name == "silu") return Unary::silu;
  if (name == "relu") return Unary::relu;
  if (name == "sigmoid") return Unary::sigmoid;
  if (name == "softplus") return Unary::softplus;
  if (name == "exp") return Unary::exp;
  if (name == "neg") return Unary::neg;
  throw ConfigError("unknown unary kind '" + std::string(name) + "'");
}

namespace {

// Vectorized logistic function; exp(-x) overflowing to inf yields exactly 0.
void sigmoid_into(std::span<const double> x, double* out) { detail::vec_sigmoid(x.data(), out, x.size()); }

}  // namespace

Tensor apply_unary(const Tensor& x, Unary kind) {
  const auto xd = x.data();
  std::vector<double> out(xd.size());
  switch (kind) {
    case Unary::silu:
      sigmoid_into(xd, out.data());
      for (std::size_t i = 0; i < xd.size(); ++i) out[i] *= xd[i];
      break;
    case Unary::relu:
      for (std::size_t i = 0; i < xd.size(); ++i) out[i] = xd[i] > 0.0 ? xd[i] : 0.0;
      break;
    case Unary::sigmoid:
      for (std::size_t i = 0; i < xd.size(); ++i) out[i] = sigmoid_value(xd[i]);
      break;
    case Unary::softplus:
      for (std::size_t i = 0; i < xd.size(); ++i) out[i] = softplus_value(xd[i]);
      break;
    case Unary::exp:
      for (std::size_t i = 0; i < xd.size(); ++i) out[i] = std::exp(std::min(xd[i], kExpClamp));
      break;
    case Unary::neg:
      for (std::size_t i = 0; i < xd.size(); ++i) out[i] = -xd[i];
      break;
    default:
      throw ConfigError("apply_unary: unknown kind " + std::to_string(static_cast<int>(kind)));
  }
  Tensor result(x.shape(), std::move(out));
  auto y = result.impl();
  detail::attach({x}, result, [x, kind, y = y.get()](std::span<const double> g) {
    auto* gx = grad_of(x);
    if (!gx) return;
    const auto xd = x.data();
    const auto& yd = y->data;
    if (kind == Unary::silu) {
      std::vector<double> s(xd.size());
      sigmoid_into(xd, s.data());
      for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i] * s[i] * (1.0 + xd[i] * (1.0 - s[i]));
      return;
    }
    for (std::size_t i = 0; i < g.size(); ++i) {
      double d = 0.0;
      switch (kind) {
        case Unary::silu: break;
        case Unary::relu: d = xd[i] > 0.0 ? 1.0 : 0.0; break;
        case Unary::sigmoid: d = yd[i] * (1.0 - yd[i]); break;
        case Unary::softplus: d = sigmoid_value(xd[i]); break;
        case Unary::exp: d = xd[i] > kExpClamp ? 0.0 : yd[i]; break;
        case Unary::neg: d = -1.0; break;
      }
      (*gx)[i] += g[i] * d;
    }
  });
  return result;
}

Tensor affine(const Tensor& x, double scale, double shift) {
  const auto xd = x.data();
  std::vector<double> out(xd.size());
  for (std::size_t i = 0; i < xd.size(); ++i) out[i] = scale * xd[i] + shift;
  Tensor result(x.shape(), std::move(out));
  detail::attach({x}, result, [x, scale](std::span<const double> g) {
    auto* gx = grad_of(x);
    if (!gx) return;
    for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += scale * g[i];
  });
  return result;
}

Shape broadcast_shapes(const Shape& a, const Shape& b) {
  const std::size_t r = std::max(a.size(), b.size());
  Shape out(r, 1);
  for (std::size_t i = 0; i < r; ++i) {
    const std::size_t da = i < r - a.size() ? 1 : a[i - (r - a.size())];
    const std::size_t db = i < r - b.size() ? 1 : b[i - (r - b.size())];
    if (da != db && da != 1 && db != 1) {
      throw ShapeError("broadcast: incompatible shapes " + to_string(a) + " and " + to_string(b));
    }
    out[i] = da == 1 ? db : da;
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryKind::add); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryKind::sub); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryKind::mul); }

Tensor sum(const Tensor& x) {
  const auto xd = x.data();
  Tensor result = Tensor::scalar(std::accumulate(xd.begin(), xd.end(), 0.0));
  detail::attach({x}, result, [x](std::span<const double> g) {
    auto* gx = grad_of(x);
    if (!gx) return;
    for (double& v : *gx) v += g[0];
  });
  return result;
}

Tensor mean(const Tensor& x) {
  const double n = static_cast<double>(x.size());
  return affine(sum(x), 1.0 / n, 0.0);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  if (as.size() < 2 || bs.size() < 2) {
    throw ShapeError("matmul: operands need rank >= 2, got " + to_string(as) + " and " + to_string(bs));
  }
  const std::size_t m = as[as.size() - 2];
  const std::size_t k = as[as.size() - 1];
  const std::size_t n = bs[bs.size() - 1];
  if (bs[bs.size() - 2] != k) {
    throw ShapeError("matmul: inner dimensions differ: " + to_string(as) + " vs " + to_string(bs));
  }
  const Shape a_batch(as.begin(), as.end() - 2);
  const Shape b_batch(bs.begin(), bs.end() - 2);
  const Shape batch = broadcast_shapes(a_batch, b_batch);
  auto sa = broadcast_strides(a_batch, batch);
  auto sb = broadcast_strides(b_batch, batch);
  std::vector<std::array<std::size_t, 3>> offsets;  // (out, a, b) matrix indices
  for_each_broadcast(batch, sa, sb, [&](std::size_t o, std::size_t i, std::size_t j) { offsets.push_back({o, i, j}); });

  Shape out_shape = batch;
  out_shape.push_back(m);
  out_shape.push_back(n);
  std::vector<double> out(numel(out_shape));
  const double* ad = a.data().data();
  const double* bd = b.data().data();
  for (const auto& [o, i, j] : offsets) {
    MutMap(out.data() + o * m * n, static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n)).noalias() =
        ConstMap(ad + i * m * k, static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k)) *
        ConstMap(bd + j * k * n, static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(n));
  }
  Tensor result(out_shape, std::move(out));
  detail::attach({a, b}, result, [a, b, offsets, m, k, n](std::span<const double> g) {
    auto* ga = grad_of(a);
    auto* gb = grad_of(b);
    const double* ad = a.data().data();
    const double* bd = b.data().data();
    const auto M = static_cast<Eigen::Index>(m);
    const auto K = static_cast<Eigen::Index>(k);
    const auto N = static_cast<Eigen::Index>(n);
    for (const auto& [o, i, j] : offsets) {
      ConstMap dy(g.data() + o * m * n, M, N);
      if (ga) MutMap(ga->data() + i * m * k, M, K).noalias() += dy * ConstMap(bd + j * k * n, K, N).transpose();
      if (gb) MutMap(gb->data() + j * k * n, K, N).noalias() += ConstMap(ad + i * m * k, M, K).transpose() * dy;
    }
  });
  return result;
}

namespace {

Tensor linear_impl(const Tensor& x, const Tensor& w, const Tensor* b) {
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  if (xs.empty() || ws.size() != 2 || xs.back() != ws[0]) {
    throw ShapeError("linear: input " + to_string(xs) + " incompatible with weight " + to_string(ws));
  }
  const std::size_t d_in = ws[0];
  const std::size_t d_out = ws[1];
  if (b != nullptr && (b->shape().size() != 1 || b->shape()[0] != d_out)) {
    throw ShapeError("linear: bias " + to_string(b->shape()) + " does not match weight " + to_string(ws));
  }
  const std::size_t rows = x.size() / d_in;
  Shape out_shape = xs;
  out_shape.back() = d_out;
  std::vector<double> out(rows * d_out);
  const auto R = static_cast<Eigen::Index>(rows);
  const auto I = static_cast<Eigen::Index>(d_in);
  const auto O = static_cast<Eigen::Index>(d_out);
  MutMap y(out.data(), R, O);
  y.noalias() = ConstMap(x.data().data(), R, I) * ConstMap(w.data().data(), I, O);
  if (b != nullptr) {
    const Eigen::Map<const Eigen::RowVectorXd> bias(b->data().data(), O);
    y.rowwise() += bias;
  }
  Tensor result(out_shape, std::move(out));
  std::vector<Tensor> inputs{x, w};
  if (b != nullptr) inputs.push_back(*b);
  Tensor bias = b != nullptr ? *b : Tensor();
  detail::attach(inputs, result, [x, w, bias, R, I, O](std::span<const double> g) {
    ConstMap dy(g.data(), R, O);
    if (auto* gx = grad_of(x)) MutMap(gx->data(), R, I).noalias() += dy * ConstMap(w.data().data(), I, O).transpose();
    if (auto* gw = grad_of(w)) MutMap(gw->data(), I, O).noalias() += ConstMap(x.data().data(), R, I).transpose() * dy;
    if (bias.defined()) {
      if (auto* gb = grad_of(bias)) {
        // Plain loops: Eigen's reductions peel by address, which breaks
        // run-to-run bit equality.
        for (Eigen::Index r = 0; r < R; ++r) {
          for (Eigen::Index o = 0; o < O; ++o) (*gb)[static_cast<std::size_t>(o)] += dy(r, o);
        }
      }
    }
  });
  return result;
}

}  // namespace

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) { return linear_impl(x, w, &b); }
Tensor linear(const Tensor& x, const Tensor& w) { return linear_impl(x, w, nullptr); }

namespace {

// col[(c*9 + ky*3 + kx), (i*w + j)] = x[c, i+ky-1, j+kx-1] (zero outside).
// `ld` is the row stride of col, so several images can share one matrix.
void im2col_3x3(const double* x, std::size_t c_in, std::size_t h, std::size_t w, double* col, std::size_t ld) {
  const std::size_t hw = h * w;
  for (std::size_t c = 0; c < c_in; ++c) {
    for (std::size_t ky = 0; ky < 3; ++ky) {
      for (std::size_t kx = 0; kx < 3; ++kx) {
        double* row = col + (c * 9 + ky * 3 + kx) * ld;
        // Valid output columns j satisfy 0 <= j + kx - 1 < w.
        const std::size_t j0 = kx == 0 ? 1 : 0;
        const std::size_t j1 = kx == 2 ? w - 1 : w;
        for (std::size_t i = 0; i < h; ++i) {
          const long si = static_cast<long>(i) + static_cast<long>(ky) - 1;
          double* dst = row + i * w;
          if (si < 0 || si >= static_cast<long>(h) || j1 <= j0) {
            std::fill(dst, dst + w, 0.0);
            continue;
          }
          const double* src = x + c * hw + static_cast<std::size_t>(si) * w + (j0 + kx - 1);
          if (j0 > 0) dst[0] = 0.0;
          std::copy(src, src + (j1 - j0), dst + j0);
          if (j1 < w) dst[w - 1] = 0.0;
        }
      }
    }
  }
}

void col2im_3x3(const double* col, std::size_t c_in, std::size_t h, std::size_t w, double* dx, std::size_t ld) {
  const std::size_t hw = h * w;
  for (std::size_t c = 0; c < c_in; ++c) {
    for (std::size_t ky = 0; ky < 3; ++ky) {
      for (std::size_t kx = 0; kx < 3; ++kx) {
        const double* row = col + (c * 9 + ky * 3 + kx) * ld;
        const std::size_t j0 = kx == 0 ? 1 : 0;
        const std::size_t j1 = kx == 2 ? w - 1 : w;
        if (j1 <= j0) continue;
        for (std::size_t i = 0; i < h; ++i) {
          const long si = static_cast<long>(i) + static_cast<long>(ky) - 1;
          if (si < 0 || si >= static_cast<long>(h)) continue;
          double* dst = dx + c * hw + static_cast<std::size_t>(si) * w + (j0 + kx - 1);
          const double* src = row + i * w + j0;
          for (std::size_t j = 0; j < j1 - j0; ++j) dst[j] += src[j];
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d_3x3(const Tensor& x, const Tensor& kernels, const Tensor& bias) {
  const Shape& xs = x.shape();
  const Shape& ks = kernels.shape();
  if (xs.size() != 4 || ks.size() != 4 || ks[2] != 3 || ks[3] != 3) {
    throw ShapeError("conv2d_3x3: expected x[b,c,h,w] and kernels[c_out,c_in,3,3], got " + to_string(xs) + " and " +
                     to_string(ks));
  }
  if (ks[1] != xs[1]) {
    throw ShapeError("conv2d_3x3: kernel channels " + to_string(ks) + " do not match input " + to_string(xs));
  }
  if (bias.shape() != Shape{ks[0]}) {
    throw ShapeError("conv2d_3x3: bias " + to_string(bias.shape()) + " does not match kernels " + to_string(ks));
  }
  const std::size_t batch = xs[0], c_in = xs[1], h = xs[2], w = xs[3], c_out = ks[0];
  const std::size_t hw = h * w, ld = batch * hw;
  const auto CO = static_cast<Eigen::Index>(c_out);
  const auto CK = static_cast<Eigen::Index>(c_in * 9);
  const auto LD = static_cast<Eigen::Index>(ld);
  // One GEMM over the whole batch: col is [c_in*9, batch*hw].
  auto build_col = [x, batch, c_in, h, w, hw, ld](std::vector<double>& col) {
    col.resize(c_in * 9 * ld);
    for (std::size_t n = 0; n < batch; ++n) im2col_3x3(x.data().data() + n * c_in * hw, c_in, h, w, col.data() + n * hw, ld);
  };
  std::vector<double> col;
  build_col(col);
  std::vector<double> ybig(c_out * ld);
  MutMap(ybig.data(), CO, LD).noalias() = ConstMap(kernels.data().data(), CO, CK) * ConstMap(col.data(), CK, LD);
  std::vector<double> out(batch * c_out * hw);
  const auto bd = bias.data();
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t o = 0; o < c_out; ++o) {
      const double* src = ybig.data() + o * ld + n * hw;
      double* dst = out.data() + (n * c_out + o) * hw;
      for (std::size_t p = 0; p < hw; ++p) dst[p] = src[p] + bd[o];
    }
  }
  Tensor result(Shape{batch, c_out, h, w}, std::move(out));
  detail::attach({x, kernels, bias}, result,
                 [x, kernels, bias, batch, c_in, h, w, c_out, hw, ld, CO, CK, LD, build_col](std::span<const double> g) {
    auto* gx = grad_of(x);
    auto* gk = grad_of(kernels);
    auto* gb = grad_of(bias);
    // Gather dY into [c_out, batch*hw].
    std::vector<double> dy(c_out * ld);
    for (std::size_t n = 0; n < batch; ++n) {
      for (std::size_t o = 0; o < c_out; ++o) {
        std::copy_n(g.data() + (n * c_out + o) * hw, hw, dy.data() + o * ld + n * hw);
      }
    }
    ConstMap dym(dy.data(), CO, LD);
    if (gb) {
      for (std::size_t o = 0; o < c_out; ++o) {
        double acc = 0.0;
        for (std::size_t i = 0; i < ld; ++i) acc += dy[o * ld + i];
        (*gb)[o] += acc;
      }
    }
    if (gk) {
      std::vector<double> col;
      build_col(col);
      MutMap(gk->data(), CO, CK).noalias() += dym * ConstMap(col.data(), CK, LD).transpose();
    }
    if (gx) {
      std::vector<double> dcol(c_in * 9 * ld);
      MutMap(dcol.data(), CK, LD).noalias() = ConstMap(kernels.data().data(), CO, CK).transpose() * dym;
      for (std::size_t n = 0; n < batch; ++n) col2im_3x3(dcol.data() + n * hw, c_in, h, w, gx->data() + n * c_in * hw, ld);
    }
  });
  return result;
}

Tensor causal_conv1d(const Tensor& x, const Tensor& kernels) {
  const Shape& xs = x.shape();
  const Shape& ks = kernels.shape();
  if (ks.size() != 2 || ks[1] < 1) throw ConfigError("causal_conv1d: kernel width d_conv must be >= 1, got " + to_string(ks));
  if (xs.size() != 3 || xs[2] != ks[0]) {
    throw ShapeError("causal_conv1d: input " + to_string(xs) + " incompatible with kernels " + to_string(ks));
  }
  const std::size_t batch = xs[0], len = xs[1], ch = xs[2], d = ks[1];
  const auto xd = x.data();
  const auto kd = kernels.data();
  std::vector<double> out(xd.size(), 0.0);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < len; ++t) {
      double* y = out.data() + (b * len + t) * ch;
      for (std::size_t j = 0; j < d; ++j) {
        const long src = static_cast<long>(t) - static_cast<long>(d - 1) + static_cast<long>(j);
        if (src < 0) continue;
        const double* xr = xd.data() + (b * len + static_cast<std::size_t>(src)) * ch;
        for (std::size_t c = 0; c < ch; ++c) y[c] += kd[c * d + j] * xr[c];
      }
    }
  }
  Tensor result(xs, std::move(out));
  detail::attach({x, kernels}, result, [x, kernels, batch, len, ch, d](std::span<const double> g) {
    auto* gx = grad_of(x);
    auto* gk = grad_of(kernels);
    const auto xd = x.data();
    const auto kd = kernels.data();
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t t = 0; t < len; ++t) {
        const double* gy = g.data() + (b * len + t) * ch;
        for (std::size_t j = 0; j < d; ++j) {
          const long src = static_cast<long>(t) - static_cast<long>(d - 1) + static_cast<long>(j);
          if (src < 0) continue;
          const std::size_t off = (b * len + static_cast<std::size_t>(src)) * ch;
          for (std::size_t c = 0; c < ch; ++c) {
            if (gx) (*gx)[off + c] += gy[c] * kd[c * d + j];
            if (gk) (*gk)[c * d + j] += gy[c] * xd[off + c];
          }
        }
      }
    }
  });
  return result;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  const Shape& xs = x.shape();
  if (xs.empty() || xs.back() < 1) throw ShapeError("layer_norm: input needs a non-empty last axis, got " + to_string(xs));
  const std::size_t d = xs.back();
  if (gamma.shape() != Shape{d} || beta.shape() != Shape{d}) {
    throw ShapeError("layer_norm: gamma " + to_string(gamma.shape()) + " / beta " + to_string(beta.shape()) +
                     " do not match input " + to_string(xs));
  }
  const std::size_t rows = x.size() / d;
  const auto xd = x.data();
  const auto gd = gamma.data();
  const auto bd = beta.data();
  std::vector<double> out(xd.size());
  std::vector<double> xhat(xd.size());
  std::vector<double> rstd(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = xd.data() + r * d;
    double mu = 0.0;
    for (std::size_t i = 0; i < d; ++i) mu += xr[i];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t i = 0; i < d; ++i) var += (xr[i] - mu) * (xr[i] - mu);
    var /= static_cast<double>(d);
    rstd[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t i = 0; i < d; ++i) {
      xhat[r * d + i] = (xr[i] - mu) * rstd[r];
      out[r * d + i] = gd[i] * xhat[r * d + i] + bd[i];
    }
  }
  Tensor result(xs, std::move(out));
  detail::attach({x, gamma, beta}, result,
                 [x, gamma, beta, xhat = std::move(xhat), rstd = std::move(rstd), rows, d](std::span<const double> g) {
                   auto* gx = grad_of(x);
                   auto* gg = grad_of(gamma);
                   auto* gb = grad_of(beta);
                   const auto gd = gamma.data();
                   for (std::size_t r = 0; r < rows; ++r) {
                     const double* gy = g.data() + r * d;
                     const double* xh = xhat.data() + r * d;
                     double mean_dxh = 0.0;
                     double mean_dxh_xh = 0.0;
                     for (std::size_t i = 0; i < d; ++i) {
                       if (gg) (*gg)[i] += gy[i] * xh[i];
                       if (gb) (*gb)[i] += gy[i];
                       const double dxh = gy[i] * gd[i];
                       mean_dxh += dxh;
                       mean_dxh_xh += dxh * xh[i];
                     }
                     if (!gx) continue;
                     mean_dxh /= static_cast<double>(d);
                     mean_dxh_xh /= static_cast<double>(d);
                     for (std::size_t i = 0; i < d; ++i) {
                       (*gx)[r * d + i] += rstd[r] * (gy[i] * gd[i] - mean_dxh - xh[i] * mean_dxh_xh);
                     }
                   }
                 });
  return result;
}

Tensor pool_global(const Tensor& x, Pool kind) {
  const Shape& xs = x.shape();
  if (xs.size() != 4 || xs[2] < 1 || xs[3] < 1) throw ShapeError("pool_global: expected x[b,c,h,w], got " + to_string(xs));
  const std::size_t planes = xs[0] * xs[1];
  const std::size_t hw = xs[2] * xs[3];
  const auto xd = x.data();
  std::vector<double> out(planes);
  std::vector<std::size_t> argmax;
  if (kind == Pool::max) argmax.resize(planes);
  for (std::size_t p = 0; p < planes; ++p) {
    const double* src = xd.data() + p * hw;
    if (kind == Pool::avg) {
      double s = 0.0;
      for (std::size_t i = 0; i < hw; ++i) s += src[i];
      out[p] = s / static_cast<double>(hw);
    } else {
      std::size_t best = 0;
      for (std::size_t i = 1; i < hw; ++i) {
        if (src[i] > src[best]) best = i;
      }
      argmax[p] = best;
      out[p] = src[best];
    }
  }
  Tensor result(Shape{xs[0], xs[1], 1, 1}, std::move(out));
  detail::attach({x}, result, [x, kind, planes, hw, argmax = std::move(argmax)](std::span<const double> g) {
    auto* gx = grad_of(x);
    if (!gx) return;
    for (std::size_t p = 0; p < planes; ++p) {
      if (kind == Pool::avg) {
        const double share = g[p] / static_cast<double>(hw);
        for (std::size_t i = 0; i < hw; ++i) (*gx)[p * hw + i] += share;
      } else {
        (*gx)[p * hw + argmax[p]] += g[p];
      }
    }
  });
  return result;
}

Tensor dropout(const Tensor& x, double p, bool training, Rng& rng) {
  if (!(p >= 0.0 && p < 1.0)) throw ConfigError("dropout: probability must lie in [0, 1), got " + std::to_string(p));
  if (!training || p == 0.0) return x;
  const auto xd = x.data();
  const double keep_scale = 1.0 / (1.0 - p);
  std::vector<double> mask(xd.size());
  std::vector<double> out(xd.size());
  for (std::size_t i = 0; i < xd.size(); ++i) {
    mask[i] = rng.uniform() < p ? 0.0 : keep_scale;
    out[i] = xd[i] * mask[i];
  }
  Tensor result(x.shape(), std::move(out));
  detail::attach({x}, result, [x, mask = std::move(mask)](std::span<const double> g) {
    auto* gx = grad_of(x);
    if (!gx) return;
    for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i] * mask[i];
  });
  return result;
}

Tensor softmax_last(const Tensor& x) {
  const Shape& xs = x.shape();
  if (xs.empty()) throw ShapeError("softmax_last: scalar input");
  const std::size_t d = xs.back();
  const std::size_t rows = d == 0 ? 0 : x.size() / d;
  const auto xd = x.data();
  std::vector<double> out(xd.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = xd.data() + r * d;
    double* yr = out.data() + r * d;
    const double mx = *std::max_element(xr, xr + d);
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      yr[i] = std::exp(xr[i] - mx);
      s += yr[i];
    }
    for (std::size_t i = 0; i < d; ++i) yr[i] /= s;
  }
  Tensor result(xs, std::move(out));
  auto y = result.impl();
  detail::attach({x}, result, [x, y = y.get(), rows, d](std::span<const double> g) {
    auto* gx = grad_of(x);
    if (!gx) return;
    const auto& yd = y->data;
    for (std::size_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (std::size_t i = 0; i < d; ++i) dot += g[r * d + i] * yd[r * d + i];
      for (std::size_t i = 0; i < d; ++i) (*gx)[r * d + i] += yd[r * d + i] * (g[r * d + i] - dot);
    }
  });
  return result;
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (numel(shape) != x.size()) {
    throw ShapeError("reshape: cannot view " + to_string(x.shape()) + " as " + to_string(shape));
  }
  const auto xd = x.data();
  Tensor result(std::move(shape), std::vector<double>(xd.begin(), xd.end()));
  detail::attach({x}, result, [x](std::span<const double> g) {
    auto* gx = grad_of(x);
    if (!gx) return;
    for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i];
  });
  return result;
}

namespace {

// For each output element (row-major over the permuted shape), the flat
// index of the source element.
std::vector<std::size_t> permutation_gather(const Shape& in, const std::vector<std::size_t>& axes, Shape& out_shape) {
  const std::size_t r = in.size();
  const auto in_strides = row_major_strides(in);
  out_shape.assign(r, 0);
  std::vector<std::size_t> src_strides(r);
  for (std::size_t i = 0; i < r; ++i) {
    out_shape[i] = in[axes[i]];
    src_strides[i] = in_strides[axes[i]];
  }
  const std::size_t n = numel(in);
  std::vector<std::size_t> gather(n);
  std::vector<std::size_t> idx(r, 0);
  std::size_t src = 0;
  for (std::size_t o = 0; o < n; ++o) {
    gather[o] = src;
    for (std::size_t d = r; d-- > 0;) {
      ++idx[d];
      src += src_strides[d];
      if (idx[d] < out_shape[d]) break;
      src -= src_strides[d] * out_shape[d];
      idx[d] = 0;
    }
  }
  return gather;
}

}  // namespace

Tensor permute(const Tensor& x, const std::vector<std::size_t>& axes) {
  const Shape& xs = x.shape();
  std::vector<std::size_t> sorted = axes;
  std::sort(sorted.begin(), sorted.end());
  bool valid = axes.size() == xs.size();
  for (std::size_t i = 0; valid && i < sorted.size(); ++i) valid = sorted[i] == i;
  if (!valid) throw ShapeError("permute: axes are not a permutation of the rank of " + to_string(xs));
  Shape out_shape;
  auto gather = permutation_gather(xs, axes, out_shape);
  const auto xd = x.data();
  std::vector<double> out(xd.size());
  for (std::size_t o = 0; o < out.size(); ++o) out[o] = xd[gather[o]];
  Tensor result(out_shape, std::move(out));
  detail::attach({x}, result, [x, gather = std::move(gather)](std::span<const double> g) {
    auto* gx = grad_of(x);
    if (!gx) return;
    for (std::size_t o = 0; o < g.size(); ++o) (*gx)[gather[o]] += g[o];
  });
  return result;
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length) {
  const Shape& xs = x.shape();
  if (axis >= xs.size() || start + length > xs[axis]) {
    throw ShapeError("slice: range [" + std::to_string(start) + ", " + std::to_string(start + length) + ") on axis " +
                     std::to_string(axis) + " exceeds " + to_string(xs));
  }
  std::size_t outer = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= xs[i];
  std::size_t inner = 1;
  for (std::size_t i = axis + 1; i < xs.size(); ++i) inner *= xs[i];
  const std::size_t full = xs[axis];
  Shape out_shape = xs;
  out_shape[axis] = length;
  const auto xd = x.data();
  std::vector<double> out(outer * length * inner);
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(xd.data() + (o * full + start) * inner, length * inner, out.data() + o * length * inner);
  }
  Tensor result(out_shape, std::move(out));
  detail::attach({x}, result, [x, outer, inner, full, start, length](std::span<const double> g) {
    auto* gx = grad_of(x);
    if (!gx) return;
    for (std::size_t o = 0; o < outer; ++o) {
      const double* src = g.data() + o * length * inner;
      double* dst = gx->data() + (o * full + start) * inner;
      for (std::size_t i = 0; i < length * inner; ++i) dst[i] += src[i];
    }
  });
  return result;
}

Tensor pad_zeros(const Tensor& x, std::size_t axis, std::size_t before, std::size_t after) {
  const Shape& xs = x.shape();
  if (axis >= xs.size()) throw ShapeError("pad_zeros: axis " + std::to_string(axis) + " out of range for " + to_string(xs));
  if (before == 0 && after == 0) return x;
  std::size_t outer = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= xs[i];
  std::size_t inner = 1;
  for (std::size_t i = axis + 1; i < xs.size(); ++i) inner *= xs[i];
  const std::size_t len = xs[axis];
  const std::size_t full = before + len + after;
  Shape out_shape = xs;
  out_shape[axis] = full;
  const auto xd = x.data();
  std::vector<double> out(outer * full * inner, 0.0);
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(xd.data() + o * len * inner, len * inner, out.data() + (o * full + before) * inner);
  }
  Tensor result(out_shape, std::move(out));
  detail::attach({x}, result, [x, outer, inner, len, full, before](std::span<const double> g) {
    auto* gx = grad_of(x);
    if (!gx) return;
    for (std::size_t o = 0; o < outer; ++o) {
      const double* src = g.data() + (o * full + before) * inner;
      double* dst = gx->data() + o * len * inner;
      for (std::size_t i = 0; i < len * inner; ++i) dst[i] += src[i];
    }
  });
  return result;
}

}  // namespace cpmamba::num
