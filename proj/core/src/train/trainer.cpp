#include "cpmamba/train/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "cpmamba/errors.hpp"
#include "cpmamba/json_fields.hpp"
#include "cpmamba/numerics/adam.hpp"
#include "cpmamba/train/metrics.hpp"

namespace cpmamba::train {

using model::ModelState;
using nlohmann::json;

namespace {

// Stream tags for Rng::derive paths.
enum : std::uint64_t { kShuffleStream = 1, kNoiseStream = 2, kDropoutStream = 3, kEvalNoiseStream = 4 };

}  // namespace

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("train.batch_size must be positive");
  if (epochs == 0) throw ConfigError("train.epochs must be positive");
  if (start_epochs + end_epochs != epochs) {
    throw ConfigError("train.start_epochs + train.end_epochs (" + std::to_string(start_epochs) + " + " +
                      std::to_string(end_epochs) + ") must equal train.epochs (" + std::to_string(epochs) + ")");
  }
  if (!(lr_start > 0.0)) throw ConfigError("train.lr_start must be > 0");
  if (!(lr_end > 0.0)) throw ConfigError("train.lr_end must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("train.beta1 must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("train.beta2 must lie in [0, 1)");
  if (!(adam_eps > 0.0)) throw ConfigError("train.adam_eps must be > 0");
  if (!(snr_min_db <= snr_max_db)) throw ConfigError("train.snr_min_db must not exceed train.snr_max_db");
}

TrainConfig desk_train_preset() { return TrainConfig{}; }

TrainConfig paper_train_preset() {
  TrainConfig c;
  c.batch_size = 256;
  c.epochs = 300;
  c.start_epochs = 200;
  c.end_epochs = 100;
  return c;
}

json to_json(const TrainConfig& c) {
  return json{{"batch_size", c.batch_size},   {"epochs", c.epochs},
              {"lr_start", c.lr_start},       {"start_epochs", c.start_epochs},
              {"lr_end", c.lr_end},           {"end_epochs", c.end_epochs},
              {"beta1", c.beta1},             {"beta2", c.beta2},
              {"adam_eps", c.adam_eps},       {"snr_min_db", c.snr_min_db},
              {"snr_max_db", c.snr_max_db},   {"inject_noise", c.inject_noise},
              {"mode", to_string(c.mode)},    {"seed", c.seed},
              {"ablation", model::to_string(c.ablation)}};
}

TrainConfig train_config_from_json(const json& j, const TrainConfig* base, const std::string& prefix) {
  json_fields::reject_unknown(j, prefix,
                              {"batch_size", "epochs", "lr_start", "start_epochs", "lr_end", "end_epochs", "beta1",
                               "beta2", "adam_eps", "snr_min_db", "snr_max_db", "inject_noise", "mode", "seed",
                               "ablation"});
  TrainConfig c = base ? *base : TrainConfig{};
  const bool req = base == nullptr;
  using json_fields::read;
  read(j, prefix, "batch_size", c.batch_size, req);
  read(j, prefix, "epochs", c.epochs, req);
  read(j, prefix, "lr_start", c.lr_start, req);
  read(j, prefix, "start_epochs", c.start_epochs, req);
  read(j, prefix, "lr_end", c.lr_end, req);
  read(j, prefix, "end_epochs", c.end_epochs, req);
  read(j, prefix, "beta1", c.beta1, req);
  read(j, prefix, "beta2", c.beta2, req);
  read(j, prefix, "adam_eps", c.adam_eps, req);
  read(j, prefix, "snr_min_db", c.snr_min_db, req);
  read(j, prefix, "snr_max_db", c.snr_max_db, req);
  read(j, prefix, "inject_noise", c.inject_noise, req);
  std::string mode = to_string(c.mode);
  read(j, prefix, "mode", mode, req);
  c.mode = mode_from_string(mode);
  // The seed usually comes from the command line.
  read(j, prefix, "seed", c.seed, false);
  std::string ablation = model::to_string(c.ablation);
  read(j, prefix, "ablation", ablation, req);
  c.ablation = model::ablation_from_string(ablation);
  c.validate();
  return c;
}

double lr_schedule(std::size_t epoch, const TrainConfig& cfg) {
  if (epoch >= cfg.epochs) {
    throw DomainError("lr_schedule: epoch " + std::to_string(epoch) + " outside [0, " + std::to_string(cfg.epochs) +
                      ")");
  }
  return epoch < cfg.start_epochs ? cfg.lr_start : cfg.lr_end;
}

ModelState clone_state(const ModelState& s) {
  ModelState out;
  out.config = s.config;
  out.step = s.step;
  out.meta = s.meta;
  for (const auto& [key, t] : s.params) {
    num::Tensor c = t.clone();
    c.set_requires_grad(true);
    out.params.emplace(key, std::move(c));
  }
  return out;
}

double grad_norm(const std::vector<num::Tensor>& params) {
  double sq = 0.0;
  for (const auto& p : params) {
    if (!p.has_grad()) continue;
    for (double g : p.grad()) sq += g * g;
  }
  return std::sqrt(sq);
}

namespace {

void check_compatible(const model::ModelConfig& m, const channel::CsiDataset& ds, const char* which) {
  if (ds.samples() == 0) throw ConfigError(std::string(which) + " dataset is empty");
  if (ds.frames != m.history + m.horizon) {
    throw ConfigError(std::string(which) + " dataset has " + std::to_string(ds.frames) +
                      " frames but the model expects L + P = " + std::to_string(m.history + m.horizon));
  }
  if (ds.subcarriers != 2 * m.subcarriers) {
    throw ConfigError(std::string(which) + " dataset has " + std::to_string(ds.subcarriers) +
                      " subcarriers but the model expects 2K = " + std::to_string(2 * m.subcarriers));
  }
}

std::vector<std::optional<double>> draw_snrs(std::size_t n, const TrainConfig& cfg, num::Rng& rng) {
  std::vector<std::optional<double>> snr(n);
  if (!cfg.inject_noise) return snr;
  for (auto& s : snr) s = rng.uniform(cfg.snr_min_db, cfg.snr_max_db);
  return snr;
}

}  // namespace

double dataset_nmse(const ModelState& state, const channel::CsiDataset& ds, const TrainConfig& cfg,
                    std::uint64_t noise_seed) {
  check_compatible(state.config, ds, "evaluation");
  const std::size_t len = state.config.history, horizon = state.config.horizon;
  MetricAccumulator acc;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0, b = 0; start < ds.samples(); start += cfg.batch_size, ++b) {
    idx.resize(std::min(cfg.batch_size, ds.samples() - start));
    std::iota(idx.begin(), idx.end(), start);
    Batch batch = make_batch(ds, idx, len, horizon, cfg.mode);
    num::Rng rng = num::Rng::derive(noise_seed, {kEvalNoiseStream, b});
    const auto snr = draw_snrs(idx.size(), cfg, rng);
    add_input_noise(batch.input, snr, rng);
    num::NoGradGuard no_grad;
    const num::Tensor pred = model::forward(model::reshape_input(batch.input), state, false);
    const CsiBlock out = model::restore_layout(pred, batch.input.antennas);
    acc.add(out.values, batch.target.values);
  }
  return acc.nmse();
}

TrainResult train(const ModelState& init, const channel::CsiDataset& train_set, const channel::CsiDataset& val_set,
                  const TrainConfig& cfg, const TrainHooks& hooks) {
  cfg.validate();
  init.config.validate();
  if (init.config.ablation != cfg.ablation) {
    throw ConfigError("train.ablation '" + model::to_string(cfg.ablation) + "' does not match the model's '" +
                      model::to_string(init.config.ablation) + "'");
  }
  check_compatible(init.config, train_set, "training");
  check_compatible(init.config, val_set, "validation");

  TrainResult result;
  result.final_state = clone_state(init);
  ModelState& state = result.final_state;
  std::vector<num::Tensor> params = state.parameters();
  num::AdamState adam(params, {cfg.beta1, cfg.beta2, cfg.adam_eps});

  const std::size_t len = init.config.history, horizon = init.config.horizon;
  const std::uint64_t val_seed = cfg.seed ^ 0x76616c6964ULL;
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> order(train_set.samples());
  bool stop = false;

  for (std::size_t epoch = 0; epoch < cfg.epochs && !stop; ++epoch) {
    const double lr = lr_schedule(epoch, cfg);
    std::iota(order.begin(), order.end(), std::size_t{0});
    num::Rng shuffle = num::Rng::derive(cfg.seed, {kShuffleStream, epoch});
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);

    double err = 0.0, energy = 0.0;
    for (std::size_t start = 0, b = 0; start < order.size() && !stop; start += cfg.batch_size, ++b) {
      const std::size_t n = std::min(cfg.batch_size, order.size() - start);
      Batch batch = make_batch(train_set, std::span(order).subspan(start, n), len, horizon, cfg.mode);
      num::Rng noise = num::Rng::derive(cfg.seed, {kNoiseStream, epoch, b});
      const auto snr = draw_snrs(n, cfg, noise);
      add_input_noise(batch.input, snr, noise);
      const num::Tensor x = model::reshape_input(batch.input);
      const num::Tensor y = model::reshape_input(batch.target);

      num::Rng drop = num::Rng::derive(cfg.seed, {kDropoutStream, epoch, b});
      num::Tape tape;
      double loss_value = 0.0, gnorm = 0.0;
      {
        num::TapeScope scope(tape);
        const num::Tensor pred = model::forward(x, state, true, &drop);
        const num::Tensor loss = nmse_loss(pred, y);
        loss_value = loss.item();
        if (std::isfinite(loss_value)) tape.backward(loss);
        const auto p = pred.data();
        const auto t = y.data();
        for (std::size_t i = 0; i < p.size(); ++i) {
          err += (p[i] - t[i]) * (p[i] - t[i]);
          energy += t[i] * t[i];
        }
      }
      tape.clear();
      gnorm = grad_norm(params);
      if (!std::isfinite(loss_value) || !std::isfinite(gnorm)) {
        char msg[256];
        std::snprintf(msg, sizeof msg, "training diverged: non-finite loss at step %llu (epoch %zu, lr %.3g, loss %g, grad-norm %g)",
                      static_cast<unsigned long long>(result.steps + 1), epoch, lr, loss_value, gnorm);
        throw NumericError(msg);
      }
      adam.step(params, lr);
      for (auto& p : params) p.zero_grad();
      ++result.steps;
      ++state.step;
      if (hooks.on_step && !hooks.on_step(StepInfo{result.steps, epoch, lr, loss_value, gnorm}, state)) stop = true;
    }

    EpochRecord rec{epoch, lr, err / energy, dataset_nmse(state, val_set, cfg, val_seed)};
    result.history.push_back(rec);
    if (rec.val_nmse < best_val) {
      best_val = rec.val_nmse;
      result.best_state = clone_state(state);
      result.best_epoch = epoch;
    }
    if (hooks.on_epoch) hooks.on_epoch(rec);
  }
  return result;
}

std::string history_csv(const std::vector<EpochRecord>& history) {
  std::string out = "epoch,lr,train_nmse,val_nmse\n";
  char line[160];
  for (const auto& r : history) {
    std::snprintf(line, sizeof line, "%zu,%.17g,%.17g,%.17g\n", r.epoch, r.lr, r.train_nmse, r.val_nmse);
    out += line;
  }
  return out;
}

}  // namespace cpmamba::train
