#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cpmamba/channel/dataset.hpp"
#include "cpmamba/model/model.hpp"
#include "cpmamba/train/data.hpp"

namespace cpmamba::train {

struct TrainConfig {
  std::size_t batch_size = 32;
  std::size_t epochs = 40;
  double lr_start = 1e-3;
  std::size_t start_epochs = 30;  // N_start
  double lr_end = 1e-4;
  std::size_t end_epochs = 10;    // N_end
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double snr_min_db = 5.0;
  double snr_max_db = 20.0;
  bool inject_noise = true;
  Mode mode = Mode::tdd;
  std::uint64_t seed = 0;
  model::Ablation ablation = model::Ablation::none;

  // Throws ConfigError naming the offending field.
  void validate() const;
};

TrainConfig desk_train_preset();
TrainConfig paper_train_preset();

nlohmann::json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j, const TrainConfig* base = nullptr,
                                   const std::string& prefix = "train");

// lr_start for epoch < N_start, lr_end afterwards. DomainError outside
// [0, epochs).
double lr_schedule(std::size_t epoch, const TrainConfig& cfg);

struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_nmse = 0.0;
  double val_nmse = 0.0;
};

struct StepInfo {
  std::uint64_t step = 0;  // 1-based count of optimizer updates so far
  std::size_t epoch = 0;
  double lr = 0.0;
  double loss = 0.0;
  double grad_norm = 0.0;
};

struct TrainHooks {
  // Called after every optimizer update; returning false ends training early.
  std::function<bool(const StepInfo&, const model::ModelState&)> on_step;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  model::ModelState final_state;
  model::ModelState best_state;  // lowest validation NMSE
  std::size_t best_epoch = 0;
  std::vector<EpochRecord> history;
  std::uint64_t steps = 0;
};

// Mini-batch Adam on the NMSE loss with AWGN injected into the inputs only.
// The initial state is copied, never mutated. Randomness is derived from
// cfg.seed: shuffling from (seed, epoch), noise from (seed, epoch, step),
// dropout from (seed, epoch, step); validation noise is fixed across epochs.
TrainResult train(const model::ModelState& init, const channel::CsiDataset& train_set,
                  const channel::CsiDataset& val_set, const TrainConfig& cfg, const TrainHooks& hooks = {});

// Pooled NMSE of a model over a dataset in eval mode, inputs noised at an SNR
// drawn per sample from [snr_min_db, snr_max_db] with a stream fixed by seed
// (noise off when inject_noise is false).
double dataset_nmse(const model::ModelState& state, const channel::CsiDataset& ds, const TrainConfig& cfg,
                    std::uint64_t noise_seed);

// Deep copy of every parameter tensor.
model::ModelState clone_state(const model::ModelState& s);

double grad_norm(const std::vector<num::Tensor>& params);

std::string history_csv(const std::vector<EpochRecord>& history);

}  // namespace cpmamba::train
