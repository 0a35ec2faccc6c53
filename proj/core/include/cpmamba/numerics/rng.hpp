#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>

namespace cpmamba::num {

// xoshiro256** seeded through splitmix64 from a 64-bit seed and a stream
// index. Distribution sampling is implemented here (not via <random>
// distributions) so that sequences are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0, std::uint64_t stream = 0);

  // Derives a stream from a seed and an arbitrary path of indices, e.g.
  // (seed, {epoch, step}). Equal paths always give equal streams.
  static Rng derive(std::uint64_t seed, std::initializer_list<std::uint64_t> path);

  std::uint64_t next_u64();

  // Uniform in [0, 1) with 53 bits of resolution.
  double uniform();
  double uniform(double lo, double hi);
  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);
  // Standard normal via Box-Muller.
  double normal();

 private:
  std::array<std::uint64_t, 4> s_{};
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

std::uint64_t splitmix64(std::uint64_t& state);

}  // namespace cpmamba::num
