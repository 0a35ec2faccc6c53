#pragma once

#include <cmath>
#include <vector>

namespace cpmamba::testutil {

// Independent reference recurrence on flat row-major buffers:
// x, delta [b, L, E], B, C [b, L, N], a [E, N], d [E] (may be empty).
// Discretization evaluated straight from the ZOH formula with expm1.
inline std::vector<double> naive_selective_scan(const std::vector<double>& x, const std::vector<double>& delta,
                                                const std::vector<double>& bm, const std::vector<double>& cm,
                                                const std::vector<double>& a, const std::vector<double>& d,
                                                std::size_t batch, std::size_t len, std::size_t e_dim,
                                                std::size_t n_dim) {
  std::vector<double> y(batch * len * e_dim, 0.0);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t e = 0; e < e_dim; ++e) {
      std::vector<double> h(n_dim, 0.0);
      for (std::size_t t = 0; t < len; ++t) {
        const std::size_t xe = (b * len + t) * e_dim + e;
        const std::size_t bn = (b * len + t) * n_dim;
        double acc = 0.0;
        for (std::size_t n = 0; n < n_dim; ++n) {
          const double an = a[e * n_dim + n];
          const double dt = delta[xe];
          const double z = dt * an;
          const double abar = std::exp(z);
          const double gain = z == 0.0 ? 1.0 : std::expm1(z) / z;
          const double bbar = gain * dt * bm[bn + n];
          h[n] = abar * h[n] + bbar * x[xe];
          acc += cm[bn + n] * h[n];
        }
        if (!d.empty()) acc += d[e] * x[xe];
        y[xe] = acc;
      }
    }
  }
  return y;
}

}  // namespace cpmamba::testutil
