#include "cpmamba/train/evaluate.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>

#include "cpmamba/errors.hpp"
#include "cpmamba/parallel.hpp"
#include "cpmamba/train/metrics.hpp"

namespace cpmamba::train {

namespace {

enum : std::uint64_t { kSpeedNoiseStream = 11, kSnrNoiseStream = 12 };

constexpr double kSpeedMatchTol = 1e-6;

double parse_number(std::string_view s, std::string_view whole) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw ConfigError("invalid grid '" + std::string(whole) + "': '" + std::string(s) + "' is not a number");
  }
  return v;
}

}  // namespace

Axis axis_from_string(std::string_view name) {
  if (name == "speed") return Axis::speed;
  if (name == "snr") return Axis::snr;
  throw ConfigError("unknown axis '" + std::string(name) + "' (expected speed or snr)");
}

std::string to_string(Axis a) { return a == Axis::speed ? "speed" : "snr"; }

std::vector<double> parse_grid(std::string_view text) {
  const auto c1 = text.find(':');
  const auto c2 = c1 == std::string_view::npos ? c1 : text.find(':', c1 + 1);
  if (c2 == std::string_view::npos || text.find(':', c2 + 1) != std::string_view::npos) {
    throw ConfigError("invalid grid '" + std::string(text) + "': expected lo:hi:step");
  }
  const double lo = parse_number(text.substr(0, c1), text);
  const double hi = parse_number(text.substr(c1 + 1, c2 - c1 - 1), text);
  const double step = parse_number(text.substr(c2 + 1), text);
  if (!(step > 0.0)) throw ConfigError("invalid grid '" + std::string(text) + "': step must be > 0");
  if (hi < lo) throw ConfigError("invalid grid '" + std::string(text) + "': hi is below lo");
  const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  std::vector<double> grid(count);
  for (std::size_t i = 0; i < count; ++i) grid[i] = lo + static_cast<double>(i) * step;
  return grid;
}

Predictor model_predictor(const model::ModelState& state) {
  return [&state](const Batch& b) {
    num::NoGradGuard no_grad;
    const num::Tensor pred = model::forward(model::reshape_input(b.input), state, false);
    return model::restore_layout(pred, b.input.antennas);
  };
}

Predictor np_predictor(std::size_t horizon) {
  return [horizon](const Batch& b) { return baseline_np(b.input, horizon); };
}

Predictor linear_predictor(std::size_t horizon) {
  return [horizon](const Batch& b) { return baseline_linear(b.input, horizon); };
}

MetricsReport evaluate(const Predictor& predict, const channel::CsiDataset& test, std::size_t history,
                       std::size_t horizon, const EvalConfig& cfg) {
  if (cfg.batch_size == 0) throw ConfigError("eval batch size must be positive");
  std::vector<double> grid = cfg.grid;
  if (grid.empty()) {
    if (cfg.axis == Axis::snr) {
      grid = parse_grid("0:25:5");
    } else {
      for (double v : test.speeds_kmh) {
        bool seen = false;
        for (double g : grid) seen = seen || std::abs(g - v) <= kSpeedMatchTol;
        if (!seen) grid.push_back(v);
      }
      std::sort(grid.begin(), grid.end());
    }
  }

  // Sample indices per condition group.
  std::vector<std::vector<std::size_t>> groups(grid.size());
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const double speed = cfg.axis == Axis::speed ? grid[g] : cfg.snr_sweep_speed_kmh;
    for (std::size_t i = 0; i < test.samples(); ++i) {
      if (std::abs(test.speeds_kmh[i] - speed) <= kSpeedMatchTol) groups[g].push_back(i);
    }
    if (groups[g].empty()) {
      throw DomainError("evaluate: no test samples at " + std::to_string(speed) + " km/h for " + to_string(cfg.axis) +
                        " = " + std::to_string(grid[g]));
    }
  }

  MetricsReport report;
  report.rows.resize(grid.size());
  parallel_for(grid.size(), [&](std::size_t g) {
    const std::vector<std::size_t>& idx = groups[g];
    const std::optional<double> snr = cfg.axis == Axis::speed ? cfg.eval_snr_db : std::optional<double>(grid[g]);
    MetricAccumulator acc;
    for (std::size_t start = 0, b = 0; start < idx.size(); start += cfg.batch_size, ++b) {
      const std::size_t n = std::min(cfg.batch_size, idx.size() - start);
      Batch batch = make_batch(test, std::span(idx).subspan(start, n), history, horizon, cfg.mode);
      num::Rng rng = num::Rng::derive(cfg.seed, {cfg.axis == Axis::speed ? kSpeedNoiseStream : kSnrNoiseStream, g, b});
      const std::vector<std::optional<double>> snrs(n, snr);
      add_input_noise(batch.input, snrs, rng);
      const CsiBlock pred = predict(batch);
      acc.add(pred.values, batch.target.values);
    }
    report.rows[g] = MetricsRow{cfg.axis, grid[g], cfg.mode, acc.nmse(), acc.rmse(), acc.mae(), idx.size()};
  });

  for (const auto& r : report.rows) {
    report.mean_nmse += r.nmse;
    report.mean_rmse += r.rmse;
    report.mean_mae += r.mae;
  }
  const double rows = static_cast<double>(report.rows.size());
  report.mean_nmse /= rows;
  report.mean_rmse /= rows;
  report.mean_mae /= rows;
  report.meta = {{"axis", to_string(cfg.axis)}, {"mode", to_string(cfg.mode)}, {"seed", cfg.seed}};
  return report;
}

std::string metrics_csv(const MetricsReport& report) {
  std::string out(kMetricsHeader);
  out += '\n';
  char line[256];
  for (const auto& r : report.rows) {
    std::snprintf(line, sizeof line, "%s,%.17g,%s,%.17g,%.17g,%.17g,%zu\n", to_string(r.axis).c_str(), r.value,
                  to_string(r.mode).c_str(), r.nmse, r.rmse, r.mae, r.n);
    out += line;
  }
  return out;
}

}  // namespace cpmamba::train
