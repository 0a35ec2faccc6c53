#pragma once

#include <cstdint>
#include <vector>

#include "cpmamba/numerics/tensor.hpp"

namespace cpmamba::num {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Moment buffers for a fixed, ordered list of parameters.
class AdamState {
 public:
  explicit AdamState(const std::vector<Tensor>& params, AdamOptions options = {});

  // One bias-corrected Adam update using each parameter's accumulated grad.
  // Parameters without a grad buffer are treated as having zero gradient.
  void step(std::vector<Tensor>& params, double lr);

  std::uint64_t steps() const { return step_; }
  const AdamOptions& options() const { return options_; }
  const std::vector<std::vector<double>>& first_moments() const { return m_; }
  const std::vector<std::vector<double>>& second_moments() const { return v_; }

 private:
  AdamOptions options_;
  std::vector<Shape> shapes_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::uint64_t step_ = 0;
};

}  // namespace cpmamba::num
