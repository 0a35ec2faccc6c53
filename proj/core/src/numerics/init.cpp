#include "cpmamba/numerics/init.hpp"

#include <cmath>

namespace cpmamba::num {

Tensor uniform_fan_in(Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::vector<double> values(numel(shape));
  for (auto& v : values) v = rng.uniform(-bound, bound);
  return Tensor::parameter(std::move(shape), std::move(values));
}

Tensor zeros_parameter(Shape shape) { return filled_parameter(std::move(shape), 0.0); }

Tensor filled_parameter(Shape shape, double value) {
  std::vector<double> values(numel(shape), value);
  return Tensor::parameter(std::move(shape), std::move(values));
}

}  // namespace cpmamba::num
