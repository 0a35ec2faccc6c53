#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bench.hpp"
#include "cpmamba/train/evaluate.hpp"
#include "run_config.hpp"

namespace cpmamba::cli {

struct GenDataOptions {
  std::optional<std::string> config;
  std::optional<Preset> preset;
  std::string out;
  std::uint64_t seed = 0;
  channel::Split split = channel::Split::train;
};

struct TrainOptions {
  std::optional<std::string> config;
  std::optional<Preset> preset;
  std::string data;
  std::string val;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<train::Mode> mode;
  std::optional<model::Ablation> ablation;
  std::optional<std::size_t> batch_size;
  std::optional<std::size_t> start_epochs;
  std::optional<std::size_t> end_epochs;
  std::optional<double> lr_start;
  std::optional<double> lr_end;
  bool no_noise = false;
  bool quiet = false;
};

struct EvalOptions {
  std::string model;
  std::string data;
  std::string out;
  train::Axis axis = train::Axis::speed;
  std::optional<std::string> grid;
  std::optional<train::Mode> mode;
  // "none" evaluates the speed sweep without input noise.
  std::string eval_snr = "15";
  double snr_speed_kmh = 60.0;
  std::optional<std::size_t> batch_size;
  std::uint64_t seed = 0;
};

struct BenchOptions {
  BenchConfig bench;
  std::string out;
};

// Each command writes all of its outputs at the end, or none of them.
void cmd_gen_data(const GenDataOptions& opt);
void cmd_train(const TrainOptions& opt);
void cmd_eval(const EvalOptions& opt);
void cmd_bench(const BenchOptions& opt);

}  // namespace cpmamba::cli
