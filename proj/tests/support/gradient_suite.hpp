#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cpmamba::testutil {

struct GradResult {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

// Central-difference check of every differentiable primitive (numerics, the
// scan, normalization, NMSE loss) on random inputs drawn from `seed`.
std::vector<GradResult> primitive_gradient_suite(std::uint64_t seed);

// NMSE loss of a freshly initialized desk-scale model on a random 2-sample
// batch, checked on `samples` randomly chosen parameter entries.
GradResult model_gradient_check(std::uint64_t seed, std::size_t samples);

}  // namespace cpmamba::testutil
