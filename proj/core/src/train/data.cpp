#include "cpmamba/train/data.hpp"

#include "cpmamba/channel/channel.hpp"
#include "cpmamba/errors.hpp"

namespace cpmamba::train {

Mode mode_from_string(std::string_view name) {
  if (name == "tdd") return Mode::tdd;
  if (name == "fdd") return Mode::fdd;
  throw ConfigError("unknown mode '" + std::string(name) + "' (expected tdd or fdd)");
}

std::string to_string(Mode m) { return m == Mode::tdd ? "tdd" : "fdd"; }

std::pair<std::size_t, std::size_t> band_offsets(std::size_t subcarriers_total, Mode mode) {
  if (subcarriers_total == 0 || subcarriers_total % 2 != 0) {
    throw ShapeError("slice_mode: K_total = " + std::to_string(subcarriers_total) +
                     " cannot be split into uplink and downlink halves");
  }
  const std::size_t k = subcarriers_total / 2;
  return {mode == Mode::tdd ? k : 0, k};
}

namespace {

void check_frames(std::size_t frames, std::size_t history, std::size_t horizon) {
  if (history == 0 || horizon == 0 || frames != history + horizon) {
    throw ShapeError("slice_mode: sequence has " + std::to_string(frames) + " frames, expected L + P = " +
                     std::to_string(history) + " + " + std::to_string(horizon));
  }
}

// Copies sample data laid out [t][a][k_total] into row s of input / target.
void fill_rows(const cd* src, std::size_t antennas, std::size_t k_total, std::size_t s, std::size_t history,
          std::size_t horizon, Mode mode, CsiBlock& input, CsiBlock& target) {
  const auto [in_off, out_off] = band_offsets(k_total, mode);
  const std::size_t k = k_total / 2;
  for (std::size_t t = 0; t < history + horizon; ++t) {
    for (std::size_t a = 0; a < antennas; ++a) {
      const cd* row = src + (t * antennas + a) * k_total;
      for (std::size_t j = 0; j < k; ++j) {
        if (t < history) {
          input.at(s, t, a, j) = row[in_off + j];
        } else {
          target.at(s, t - history, a, j) = row[out_off + j];
        }
      }
    }
  }
}

}  // namespace

Sliced slice_mode(const channel::CsiSequence& seq, std::size_t history, std::size_t horizon, Mode mode) {
  check_frames(seq.frames, history, horizon);
  band_offsets(seq.subcarriers, mode);
  const std::size_t k = seq.subcarriers / 2;
  Sliced out{CsiBlock(1, history, seq.antennas, k), CsiBlock(1, horizon, seq.antennas, k)};
  fill_rows(seq.values.data(), seq.antennas, seq.subcarriers, 0, history, horizon, mode, out.input, out.target);
  return out;
}

Batch make_batch(const channel::CsiDataset& ds, std::span<const std::size_t> indices, std::size_t history,
                 std::size_t horizon, Mode mode) {
  check_frames(ds.frames, history, horizon);
  band_offsets(ds.subcarriers, mode);
  const std::size_t k = ds.subcarriers / 2, s_count = indices.size();
  Batch b{CsiBlock(s_count, history, ds.antennas, k), CsiBlock(s_count, horizon, ds.antennas, k), {}};
  b.speeds_kmh.reserve(s_count);
  for (std::size_t s = 0; s < s_count; ++s) {
    const std::size_t i = indices[s];
    if (i >= ds.samples()) {
      throw ShapeError("make_batch: sample index " + std::to_string(i) + " out of range (" +
                       std::to_string(ds.samples()) + " samples)");
    }
    fill_rows(ds.sample(i).data(), ds.antennas, ds.subcarriers, s, history, horizon, mode, b.input, b.target);
    b.speeds_kmh.push_back(ds.speeds_kmh[i]);
  }
  return b;
}

void add_input_noise(CsiBlock& input, std::span<const std::optional<double>> snr_db, num::Rng& rng) {
  if (snr_db.size() != input.samples) {
    throw ShapeError("add_input_noise: " + std::to_string(snr_db.size()) + " SNR values for " +
                     std::to_string(input.samples) + " samples");
  }
  const std::size_t stride = input.frames * input.antennas * input.subcarriers;
  std::vector<cd> buf(stride);
  for (std::size_t s = 0; s < input.samples; ++s) {
    if (!snr_db[s]) continue;
    auto first = input.values.begin() + static_cast<std::ptrdiff_t>(s * stride);
    std::copy(first, first + static_cast<std::ptrdiff_t>(stride), buf.begin());
    channel::add_awgn_inplace(buf, snr_db[s], rng);
    std::copy(buf.begin(), buf.end(), first);
  }
}

CsiBlock baseline_np(const CsiBlock& input, std::size_t horizon) {
  if (input.frames < 1) throw ShapeError("baseline_np: needs at least one history frame");
  CsiBlock out(input.samples, horizon, input.antennas, input.subcarriers);
  for (std::size_t s = 0; s < input.samples; ++s) {
    for (std::size_t p = 0; p < horizon; ++p) {
      for (std::size_t a = 0; a < input.antennas; ++a) {
        for (std::size_t k = 0; k < input.subcarriers; ++k) out.at(s, p, a, k) = input.at(s, input.frames - 1, a, k);
      }
    }
  }
  return out;
}

CsiBlock baseline_linear(const CsiBlock& input, std::size_t horizon) {
  if (input.frames < 2) throw ShapeError("baseline_linear: needs at least two history frames");
  const std::size_t last = input.frames - 1;
  CsiBlock out(input.samples, horizon, input.antennas, input.subcarriers);
  for (std::size_t s = 0; s < input.samples; ++s) {
    for (std::size_t p = 0; p < horizon; ++p) {
      const double step = static_cast<double>(p + 1);
      for (std::size_t a = 0; a < input.antennas; ++a) {
        for (std::size_t k = 0; k < input.subcarriers; ++k) {
          const cd h = input.at(s, last, a, k);
          out.at(s, p, a, k) = h + step * (h - input.at(s, last - 1, a, k));
        }
      }
    }
  }
  return out;
}

}  // namespace cpmamba::train
