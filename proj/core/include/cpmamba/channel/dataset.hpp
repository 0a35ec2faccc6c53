#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cpmamba/channel/channel.hpp"

namespace cpmamba::channel {

enum class Split { train, val, test };

Split split_from_string(std::string_view name);
std::string to_string(Split split);

struct DatasetConfig {
  ChannelConfig channel;
  std::size_t history = 16;  // L
  std::size_t horizon = 4;   // P
  std::size_t train_samples = 2048;
  std::size_t val_samples = 256;
  std::size_t test_per_speed = 256;
  double speed_min_kmh = 10.0;
  double speed_max_kmh = 100.0;
  std::size_t test_speed_points = 10;

  std::size_t frames() const { return history + horizon; }
  std::size_t samples(Split split) const;
  void validate() const;
};

// N_t = 4, K_total = 16, M = 6; 2048 / 256 / 256-per-speed samples.
DatasetConfig desk_dataset_preset();
// 32-element array, 96 subcarriers; 8000 / 1000 / 1000-per-speed samples.
DatasetConfig paper_dataset_preset();

// `points` equally spaced values from lo to hi inclusive.
std::vector<double> speed_grid(double lo, double hi, std::size_t points);

// In-memory form of a CSID v1 file. Values are [sample][t][antenna][subcarrier].
struct CsiDataset {
  std::uint32_t frames = 0;
  std::uint32_t antennas = 0;
  std::uint32_t subcarriers = 0;
  double carrier_hz = 0.0;
  double sample_interval_s = 0.0;
  std::vector<double> speeds_kmh;
  std::vector<cd> values;

  std::size_t samples() const { return speeds_kmh.size(); }
  std::size_t sample_stride() const { return static_cast<std::size_t>(frames) * antennas * subcarriers; }
  std::span<const cd> sample(std::size_t i) const { return {values.data() + i * sample_stride(), sample_stride()}; }
  CsiSequence sequence(std::size_t i) const;
  // Subset of samples, in the given order.
  CsiDataset select(std::span<const std::size_t> indices) const;
};

// Deterministic per (seed, split, sample index); samples are generated from
// independent streams so the result does not depend on generation order.
CsiDataset build_dataset(const DatasetConfig& cfg, Split split, std::uint64_t seed);

// CSID v1: "CSID", u32 version, u32 {samples, T, N_t, K_total}, f64 f_c,
// f64 dt, f64 speed_kmh[samples], then interleaved (re, im) f64 values, all
// little-endian.
inline constexpr std::uint32_t kCsidVersion = 1;
std::string encode_csid(const CsiDataset& ds);
CsiDataset decode_csid(std::string_view bytes, const std::string& context);
void write_csid(const std::string& path, const CsiDataset& ds);
CsiDataset read_csid(const std::string& path);

}  // namespace cpmamba::channel
