#include "cpmamba/ssm/ssm.hpp"

#include <cmath>

#include <Eigen/Core>

#include "cpmamba/errors.hpp"
#include "cpmamba/numerics/init.hpp"
#include "cpmamba/numerics/ops.hpp"
#include "../numerics/vec_math.hpp"

namespace cpmamba::ssm {

namespace {

// Below this |z| the derivative of zoh_factor uses its Taylor expansion; the
// closed form loses digits to cancellation there.
constexpr double kZohDerivativeSeries = 1e-3;

void require_shape(const Tensor& t, const num::Shape& expected, const char* what) {
  if (t.shape() != expected) {
    throw ShapeError(std::string("selective_scan: ") + what + " has shape " + num::to_string(t.shape()) +
                     ", expected " + num::to_string(expected));
  }
}

}  // namespace

double zoh_factor(double z) {
  if (std::abs(z) < kZohSeriesThreshold) return 1.0 + z / 2.0;
  return std::expm1(z) / z;
}

double zoh_factor_derivative(double z) {
  if (std::abs(z) < kZohDerivativeSeries) {
    return 0.5 + z * (1.0 / 3.0 + z * (1.0 / 8.0 + z * (1.0 / 30.0 + z / 144.0)));
  }
  const double em1 = std::expm1(z);
  return (z * (em1 + 1.0) - em1) / (z * z);
}

Discretized discretize(double a, double b, double delta, bool exact_zoh) {
  if (!(delta > 0.0)) throw DomainError("discretize: step delta must be > 0, got " + std::to_string(delta));
  const double z = delta * a;
  Discretized d;
  d.a_bar = std::exp(z);
  d.b_bar = exact_zoh ? zoh_factor(z) * delta * b : delta * b;
  return d;
}

Tensor state_matrix(const SsmParams& params) { return num::neg(num::exp(params.a_log)); }

ScanInputs selective_project(const Tensor& s, const SsmParams& params) {
  if (s.rank() != 3 || s.dim(2) != params.channels()) {
    throw ShapeError("selective_project: input " + num::to_string(s.shape()) + " does not have " +
                     std::to_string(params.channels()) + " channels");
  }
  ScanInputs in;
  in.x = s;
  in.b = num::linear(s, params.b_proj);
  in.c = num::linear(s, params.c_proj);
  const Tensor dt = num::linear(s, params.dt_proj);  // [b, L, 1]
  in.delta = num::softplus(num::add(dt, params.dt_bias));
  return in;
}

Tensor selective_scan(const ScanInputs& in, const Tensor& a, const Tensor& d_skip, const ScanOptions& options) {
  if (in.x.rank() != 3) throw ShapeError("selective_scan: x must be [b, L, E], got " + num::to_string(in.x.shape()));
  const std::size_t batch = in.x.dim(0), len = in.x.dim(1), chans = in.x.dim(2);
  if (a.rank() != 2 || a.dim(0) != chans) {
    throw ShapeError("selective_scan: A " + num::to_string(a.shape()) + " does not match x " + num::to_string(in.x.shape()));
  }
  const std::size_t states = a.dim(1);
  require_shape(in.delta, {batch, len, chans}, "delta");
  require_shape(in.b, {batch, len, states}, "B");
  require_shape(in.c, {batch, len, states}, "C");
  const bool has_d = d_skip.defined();
  if (has_d) require_shape(d_skip, {chans}, "D");

  const auto xd = in.x.data();
  const auto dd = in.delta.data();
  const auto bd = in.b.data();
  const auto cd = in.c.data();
  const auto ad = a.data();
  const auto skip = has_d ? d_skip.data() : std::span<const double>{};
  const bool exact = options.exact_zoh;
  const bool lagged = options.lagged_input;

  // Per-element caches for the backward sweep, all [b][t][e][n]: state
  // history, a_bar, and (exact ZOH only) f(z) and f'(z). Without a backward
  // pass only the current row and the previous state are kept.
  const bool need_grad = num::detail::needs_record({&in.x, &in.delta, &in.b, &in.c, &a, &d_skip});
  const std::size_t row_elems = chans * states;
  const std::size_t total = need_grad ? batch * len * row_elems : row_elems;
  std::vector<double> hist(need_grad ? total : 2 * row_elems), abar(total);
  std::vector<double> fz(exact ? total : 0), dfz(exact && need_grad ? total : 0);
  std::vector<double> out(batch * len * chans);
  Eigen::ArrayXd zrow(static_cast<Eigen::Index>(row_elems)), urow(zrow.size()), logu(zrow.size());
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < len; ++t) {
      const std::size_t row = (b * len + t);
      const std::size_t base = need_grad ? row * row_elems : 0;
      const std::size_t hbase = need_grad ? base : (row % 2) * row_elems;
      const std::size_t hprev = need_grad ? base - row_elems : ((row + 1) % 2) * row_elems;
      const double* bt = bd.data() + row * states;
      const double* ct = cd.data() + row * states;
      for (std::size_t e = 0; e < chans; ++e) {
        const double delta = dd[row * chans + e];
        if (!(delta > 0.0)) {
          throw NumericError("selective_scan: non-positive delta at step " + std::to_string(t));
        }
        for (std::size_t n = 0; n < states; ++n) zrow[e * states + n] = delta * ad[e * states + n];
      }
      num::detail::vec_exp(zrow.data(), urow.data(), row_elems);
      if (exact) {
        num::detail::vec_log(urow.data(), logu.data(), row_elems);
        for (Eigen::Index i = 0; i < zrow.size(); ++i) {
          const double zi = zrow[i];
          const double u = urow[i];
          // f(z) = (u - 1) / log(u) with u = exp(z) (Kahan's expm1 identity),
          // accurate to a few ulp without a scalar expm1 per entry.
          double f = (u - 1.0) / logu[i];
          if (std::abs(zi) < kZohSeriesThreshold || u == 1.0) f = 1.0 + zi / 2.0;
          if (u == 0.0) f = -1.0 / zi;
          fz[base + static_cast<std::size_t>(i)] = f;
          if (!dfz.empty()) {
            dfz[base + static_cast<std::size_t>(i)] =
                std::abs(zi) < kZohDerivativeSeries ? zoh_factor_derivative(zi) : f + (1.0 - f) / zi;
          }
        }
      }
      std::copy(urow.begin(), urow.end(), abar.begin() + static_cast<std::ptrdiff_t>(base));
      for (std::size_t e = 0; e < chans; ++e) {
        const std::size_t ei = base + e * states;
        const double delta = dd[row * chans + e];
        const double u = lagged ? (t > 0 ? xd[(row - 1) * chans + e] : 0.0) : xd[row * chans + e];
        double* h = hist.data() + hbase + e * states;
        const double* h_prev = t > 0 ? hist.data() + hprev + e * states : nullptr;
        double y = 0.0;
        for (std::size_t n = 0; n < states; ++n) {
          const double b_bar = (exact ? fz[ei + n] * delta : delta) * bt[n];
          h[n] = (h_prev ? abar[ei + n] * h_prev[n] : 0.0) + b_bar * u;
          y += ct[n] * h[n];
        }
        if (has_d) y += skip[e] * xd[row * chans + e];
        if (!std::isfinite(y)) {
          throw NumericError("selective_scan: non-finite output at step " + std::to_string(t) + ", channel " +
                             std::to_string(e));
        }
        out[row * chans + e] = y;
      }
    }
  }

  Tensor result(num::Shape{batch, len, chans}, std::move(out));
  if (!need_grad) return result;
  std::vector<Tensor> inputs{in.x, in.delta, in.b, in.c, a};
  if (has_d) inputs.push_back(d_skip);
  num::detail::attach(
      inputs, result,
      [x = in.x, delta_t = in.delta, b_t = in.b, c_t = in.c, a, d_skip, hist = std::move(hist), abar = std::move(abar),
       fz = std::move(fz), dfz = std::move(dfz), batch, len, chans, states, exact, lagged,
       has_d](std::span<const double> g) {
        auto grad = [](const Tensor& t) -> double* { return t.requires_grad() ? t.impl()->ensure_grad().data() : nullptr; };
        double* gx = grad(x);
        double* gdelta = grad(delta_t);
        double* gb = grad(b_t);
        double* gc = grad(c_t);
        double* ga = grad(a);
        double* gd = has_d ? grad(d_skip) : nullptr;
        const auto xd = x.data();
        const auto dd = delta_t.data();
        const auto bd = b_t.data();
        const auto cd = c_t.data();
        const auto ad = a.data();
        const auto skip = has_d ? d_skip.data() : std::span<const double>{};
        const std::size_t row_elems = chans * states;
        std::vector<double> dh(row_elems);
        std::vector<double> gb_row(states), gc_row(states);
        for (std::size_t b = 0; b < batch; ++b) {
          std::fill(dh.begin(), dh.end(), 0.0);
          for (std::size_t t = len; t-- > 0;) {
            const std::size_t row = b * len + t;
            const double* bt = bd.data() + row * states;
            const double* ct = cd.data() + row * states;
            std::fill(gb_row.begin(), gb_row.end(), 0.0);
            std::fill(gc_row.begin(), gc_row.end(), 0.0);
            for (std::size_t e = 0; e < chans; ++e) {
              const std::size_t ei = row * row_elems + e * states;
              const double gy = g[row * chans + e];
              const double delta = dd[row * chans + e];
              const std::size_t xi = row * chans + e;
              const bool has_u = !lagged || t > 0;
              const std::size_t ui = lagged ? xi - chans : xi;
              const double u = has_u ? xd[ui] : 0.0;
              if (has_d) {
                if (gx) gx[xi] += gy * skip[e];
                if (gd) gd[e] += gy * xd[xi];
              }
              const double* h = hist.data() + ei;
              const double* h_prev = t > 0 ? h - row_elems : nullptr;
              double* dhe = dh.data() + e * states;
              double d_delta = 0.0;
              double du = 0.0;
              for (std::size_t n = 0; n < states; ++n) {
                gc_row[n] += gy * h[n];
                dhe[n] += gy * ct[n];
                const double an = ad[e * states + n];
                const double a_bar = abar[ei + n];
                const double f = exact ? fz[ei + n] : 1.0;
                const double d_abar = h_prev ? dhe[n] * h_prev[n] : 0.0;
                const double d_bbar = dhe[n] * u;
                du += dhe[n] * f * delta * bt[n];
                double dz = d_abar * a_bar;
                if (exact) dz += d_bbar * bt[n] * delta * dfz[ei + n];
                d_delta += dz * an + d_bbar * f * bt[n];
                if (ga) ga[e * states + n] += dz * delta;
                gb_row[n] += d_bbar * f * delta;
                dhe[n] *= a_bar;
              }
              if (gdelta) gdelta[xi] += d_delta;
              if (gx && has_u) gx[ui] += du;
            }
            for (std::size_t n = 0; n < states; ++n) {
              if (gb) gb[row * states + n] += gb_row[n];
              if (gc) gc[row * states + n] += gc_row[n];
            }
          }
        }
      });
  return result;
}

Tensor selective_scan(const ScanInputs& in, const SsmParams& params, const ScanOptions& options) {
  return selective_scan(in, state_matrix(params), params.d_skip, options);
}

Tensor mamba_block(const Tensor& x, const MambaWeights& w, const ScanOptions& options) {
  if (x.rank() != 3 || x.dim(2) != w.in_s.dim(0)) {
    throw ShapeError("mamba_block: input " + num::to_string(x.shape()) + " does not match projection " +
                     num::to_string(w.in_s.shape()));
  }
  const Tensor s = num::linear(x, w.in_s);
  const Tensor z = num::linear(x, w.in_z);
  const Tensor s_conv = num::silu(num::causal_conv1d(s, w.conv));
  const ScanInputs scan_in = selective_project(s_conv, w.ssm);
  const Tensor y_ssm = selective_scan(scan_in, w.ssm, options);
  const Tensor gated = num::mul(num::silu(z), y_ssm);
  return num::linear(gated, w.out);
}

std::vector<double> s4d_real_a_log(std::size_t channels, std::size_t states) {
  std::vector<double> v(channels * states);
  for (std::size_t e = 0; e < channels; ++e) {
    for (std::size_t n = 0; n < states; ++n) v[e * states + n] = std::log(static_cast<double>(n + 1));
  }
  return v;
}

std::vector<double> init_dt_bias(std::size_t channels, num::Rng& rng, double dt_min, double dt_max) {
  std::vector<double> v(channels);
  for (auto& b : v) {
    const double dt = std::exp(rng.uniform(std::log(dt_min), std::log(dt_max)));
    // Inverse softplus.
    b = dt + std::log(-std::expm1(-dt));
  }
  return v;
}

MambaWeights init_mamba_weights(std::size_t d_model, std::size_t expand, std::size_t d_state, std::size_t d_conv,
                                num::Rng& rng, bool use_d_skip) {
  const std::size_t e = d_model * expand;
  MambaWeights w;
  w.in_s = num::uniform_fan_in({d_model, e}, d_model, rng);
  w.in_z = num::uniform_fan_in({d_model, e}, d_model, rng);
  w.conv = num::uniform_fan_in({e, d_conv}, d_conv, rng);
  w.ssm.b_proj = num::uniform_fan_in({e, d_state}, e, rng);
  w.ssm.c_proj = num::uniform_fan_in({e, d_state}, e, rng);
  w.ssm.dt_proj = num::uniform_fan_in({e, 1}, e, rng);
  w.ssm.dt_bias = Tensor::parameter({e}, init_dt_bias(e, rng));
  w.ssm.a_log = Tensor::parameter({e, d_state}, s4d_real_a_log(e, d_state));
  if (use_d_skip) w.ssm.d_skip = num::zeros_parameter({e});
  w.out = num::uniform_fan_in({e, d_model}, e, rng);
  return w;
}

}  // namespace cpmamba::ssm
