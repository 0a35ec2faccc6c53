#pragma once

#include "cpmamba/numerics/rng.hpp"
#include "cpmamba/numerics/tensor.hpp"

namespace cpmamba::num {

// Parameter with entries uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
Tensor uniform_fan_in(Shape shape, std::size_t fan_in, Rng& rng);

Tensor zeros_parameter(Shape shape);
Tensor filled_parameter(Shape shape, double value);

}  // namespace cpmamba::num
