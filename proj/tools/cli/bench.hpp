#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace cpmamba::cli {

enum class Backbone { mamba, attention };

std::string to_string(Backbone b);

struct BenchConfig {
  std::vector<std::size_t> lengths{128, 256, 512, 1024};
  std::size_t d_model = 64;
  std::size_t layers = 2;
  std::size_t batch = 1;
  std::size_t repeats = 5;
  std::size_t heads = 4;
  std::uint64_t seed = 0;
};

struct BenchRow {
  Backbone backbone = Backbone::mamba;
  std::size_t length = 0;
  // Fastest of the repeats, in seconds.
  double seconds = 0.0;
  double per_token_s = 0.0;
  // per_token_s relative to the shortest length of the same backbone.
  double per_token_ratio = 1.0;
};

// Eval-mode forward timing of the recurrent Mamba stack and the attention
// backbone at every length; rows are grouped by backbone in ascending L.
std::vector<BenchRow> run_scaling_bench(const BenchConfig& cfg);

// Deterministic columns first, measured columns after.
std::string bench_csv(const BenchConfig& cfg, const std::vector<BenchRow>& rows);

}  // namespace cpmamba::cli
