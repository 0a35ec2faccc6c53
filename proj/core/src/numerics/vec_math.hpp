#pragma once

#include <algorithm>
#include <array>
#include <cstddef>

#include <Eigen/Core>

namespace cpmamba::num::detail {

// Element-wise f over n values, evaluated in aligned, fully populated chunks
// so every element takes Eigen's packet path. The result for an element then
// depends only on its value, not on its address or position in the buffer.
template <typename F>
void chunked_map(const double* in, double* out, std::size_t n, F&& f) {
  constexpr std::size_t kChunk = 64;
  alignas(64) std::array<double, kChunk> src{};
  alignas(64) std::array<double, kChunk> dst{};
  using Chunk = Eigen::Map<Eigen::Array<double, kChunk, 1>, Eigen::Aligned64>;
  for (std::size_t i = 0; i < n; i += kChunk) {
    const std::size_t m = std::min(kChunk, n - i);
    std::copy(in + i, in + i + m, src.begin());
    std::fill(src.begin() + static_cast<std::ptrdiff_t>(m), src.end(), 0.0);
    Chunk(dst.data()) = f(Chunk(src.data()));
    std::copy(dst.begin(), dst.begin() + static_cast<std::ptrdiff_t>(m), out + i);
  }
}

inline void vec_exp(const double* in, double* out, std::size_t n) {
  chunked_map(in, out, n, [](const auto& x) { return x.exp(); });
}

// Zero padding is harmless: log(0) = -inf is discarded with the padding.
inline void vec_log(const double* in, double* out, std::size_t n) {
  chunked_map(in, out, n, [](const auto& x) { return x.log(); });
}

inline void vec_sigmoid(const double* in, double* out, std::size_t n) {
  chunked_map(in, out, n, [](const auto& x) { return 1.0 / (1.0 + (-x).exp()); });
}

}  // namespace cpmamba::num::detail
