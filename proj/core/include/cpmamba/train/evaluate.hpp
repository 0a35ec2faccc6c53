#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "cpmamba/channel/dataset.hpp"
#include "cpmamba/model/model.hpp"
#include "cpmamba/train/data.hpp"

namespace cpmamba::train {

enum class Axis { speed, snr };

Axis axis_from_string(std::string_view name);
std::string to_string(Axis a);

// "lo:hi:step" -> lo, lo + step, ..., up to hi inclusive (within 1e-9 step).
std::vector<double> parse_grid(std::string_view text);

struct EvalConfig {
  Axis axis = Axis::speed;
  // Empty grid: speed axis uses every distinct test speed, SNR axis 0:25:5.
  std::vector<double> grid;
  Mode mode = Mode::tdd;
  // Noise level for the speed sweep; std::nullopt evaluates noiseless inputs.
  std::optional<double> eval_snr_db = 15.0;
  double snr_sweep_speed_kmh = 60.0;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
};

// Maps a batch (noisy inputs, clean targets) to predicted targets [S, P, N_t, K].
using Predictor = std::function<CsiBlock(const Batch&)>;

Predictor model_predictor(const model::ModelState& state);
Predictor np_predictor(std::size_t horizon);
Predictor linear_predictor(std::size_t horizon);

struct MetricsRow {
  Axis axis = Axis::speed;
  double value = 0.0;
  Mode mode = Mode::tdd;
  double nmse = 0.0;
  double rmse = 0.0;
  double mae = 0.0;
  std::size_t n = 0;  // samples in the condition group
};

struct MetricsReport {
  std::vector<MetricsRow> rows;
  double mean_nmse = 0.0;
  double mean_rmse = 0.0;
  double mean_mae = 0.0;
  nlohmann::json meta = nlohmann::json::object();
};

// One row per grid value. Groups are evaluated in parallel; the noise of a
// group depends only on (seed, axis, grid index, batch), so every predictor
// sees identical inputs and the report does not depend on thread count.
// Throws DomainError for an empty condition group.
MetricsReport evaluate(const Predictor& predict, const channel::CsiDataset& test, std::size_t history,
                       std::size_t horizon, const EvalConfig& cfg);

inline constexpr std::string_view kMetricsHeader = "condition_axis,condition_value,mode,nmse,rmse,mae,n";
std::string metrics_csv(const MetricsReport& report);

}  // namespace cpmamba::train
