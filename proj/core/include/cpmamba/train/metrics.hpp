#pragma once

#include <complex>
#include <cstddef>
#include <span>

#include "cpmamba/numerics/tensor.hpp"

namespace cpmamba::train {

using num::Tensor;
using cd = std::complex<double>;

// ||pred - truth||^2 / ||truth||^2 over the whole buffer. Throws DomainError
// when truth has zero energy and ShapeError on a size mismatch.
double nmse(std::span<const double> pred, std::span<const double> truth);
double nmse(std::span<const cd> pred, std::span<const cd> truth);

// Differentiable NMSE with truth held constant; returns a scalar tensor.
Tensor nmse_loss(const Tensor& pred, const Tensor& truth);

struct ErrorMetrics {
  double rmse = 0.0;
  double mae = 0.0;
};

// RMSE = sqrt(mean |d|^2), MAE = mean |d| with |.| the complex modulus.
ErrorMetrics error_metrics(std::span<const cd> pred, std::span<const cd> truth);

// Pools NMSE / RMSE / MAE over several buffers.
class MetricAccumulator {
 public:
  void add(std::span<const cd> pred, std::span<const cd> truth);
  double nmse() const;
  double rmse() const;
  double mae() const;
  std::size_t entries() const { return entries_; }

 private:
  double err_energy_ = 0.0;
  double truth_energy_ = 0.0;
  double abs_sum_ = 0.0;
  std::size_t entries_ = 0;
};

}  // namespace cpmamba::train
