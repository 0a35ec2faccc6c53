#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "cpmamba/numerics/tensor.hpp"

namespace cpmamba::num {

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-5;
  // Denominator floor for the relative error: |a - n| / max(|a|, |n|, floor).
  // Gradients smaller than the floor are compared absolutely against it.
  double floor = 1e-8;
  // When positive, central differences are taken at step, step/10, ... down
  // to min_step and the one with the smallest error estimate wins: the gap to
  // the next smaller step plus the roundoff bound eps*|f|/h. Guards against
  // kinks inside wide stencils and cancellation in narrow ones.
  double min_step = 0.0;
  // 0 checks every element; otherwise this many (tensor, index) pairs are
  // sampled uniformly over all elements.
  std::size_t max_samples = 0;
  std::uint64_t seed = 0;
};

struct GradCheckEntry {
  std::size_t tensor = 0;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::vector<GradCheckEntry> entries;
  bool passed = false;
};

double relative_error(double analytic, double numeric, double floor);

// Compares reverse-mode gradients of a scalar function against central
// differences. `f` must rebuild its value from the current contents of
// `inputs` on every call; the inputs must be leaves with requires_grad set.
GradCheckReport grad_check(const std::function<Tensor()>& f, std::vector<Tensor> inputs,
                           const GradCheckOptions& options = {});

GradCheckReport grad_check(const std::function<Tensor()>& f, Tensor input, const GradCheckOptions& options = {});

}  // namespace cpmamba::num
