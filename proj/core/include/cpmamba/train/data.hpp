#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>

#include "cpmamba/channel/dataset.hpp"
#include "cpmamba/model/layers.hpp"
#include "cpmamba/numerics/rng.hpp"

namespace cpmamba::train {

using model::CsiBlock;
using cd = std::complex<double>;

enum class Mode { tdd, fdd };

Mode mode_from_string(std::string_view name);
std::string to_string(Mode m);

struct Sliced {
  CsiBlock input;   // [1, L, N_t, K]
  CsiBlock target;  // [1, P, N_t, K]
};

// Splits K_total subcarriers into an uplink (lower) and downlink (upper) half.
// TDD: downlink frames 0..L-1 -> downlink frames L..L+P-1. FDD: uplink
// history -> downlink future. Throws ShapeError for odd K_total or T != L + P.
Sliced slice_mode(const channel::CsiSequence& seq, std::size_t history, std::size_t horizon, Mode mode);

// Subcarrier offsets of the input and target halves.
std::pair<std::size_t, std::size_t> band_offsets(std::size_t subcarriers_total, Mode mode);

struct Batch {
  CsiBlock input;   // [S, L, N_t, K]
  CsiBlock target;  // [S, P, N_t, K]
  std::vector<double> speeds_kmh;
};

Batch make_batch(const channel::CsiDataset& ds, std::span<const std::size_t> indices, std::size_t history,
                 std::size_t horizon, Mode mode);

// Adds AWGN to every sample's input at its own SNR (std::nullopt = no noise);
// the noise power follows that sample's mean input energy.
void add_input_noise(CsiBlock& input, std::span<const std::optional<double>> snr_db, num::Rng& rng);

// Repeat the last history frame for all P horizons.
CsiBlock baseline_np(const CsiBlock& input, std::size_t horizon);
// h_{L+p} = h_L + p (h_L - h_{L-1}) per complex entry. Needs L >= 2.
CsiBlock baseline_linear(const CsiBlock& input, std::size_t horizon);

}  // namespace cpmamba::train
