#include <cstdio>
#include <exception>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "commands.hpp"
#include "cpmamba/errors.hpp"
#include "cpmamba/runtime.hpp"

using namespace cpmamba;

namespace {

std::vector<std::size_t> parse_lengths(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const unsigned long v = std::stoul(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw ConfigError("--lengths expects comma-separated integers, got '" + text + "'");
    }
  }
  return out;
}

const std::map<std::string, std::string> kModes{{"tdd", "tdd"}, {"fdd", "fdd"}};
const std::map<std::string, std::string> kAblations{
    {"none", "none"}, {"no_se", "no_se"}, {"no_patch", "no_patch"}, {"attention", "attention"}};

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();

  CLI::App app{"CSI prediction with a patched SE-ResNet + Mamba model"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  std::string preset_name, split_name, mode_name, ablation_name, axis_name = "speed", grid, lengths = "128,256,512,1024";

  // gen-data
  cli::GenDataOptions gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a CSID dataset split");
  gen_cmd->add_option("--config", gen.config, "JSON config (sections: dataset)");
  gen_cmd->add_option("--preset", preset_name, "Built-in preset the config overlays [default: desk when --config is absent]")
      ->check(CLI::IsMember({"desk", "paper"}));
  gen_cmd->add_option("--split", split_name, "Dataset split")->check(CLI::IsMember({"train", "val", "test"}))
      ->default_str("train");
  gen_cmd->add_option("--seed", gen.seed, "Generation seed")->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "Output CSID file")->required();

  // train
  cli::TrainOptions tr;
  auto* train_cmd = app.add_subcommand("train", "Train a model and write a checkpoint plus history CSV");
  train_cmd->add_option("--config", tr.config, "JSON config (sections: model, train)");
  train_cmd->add_option("--preset", preset_name, "Built-in preset the config overlays [default: desk when --config is absent]")
      ->check(CLI::IsMember({"desk", "paper"}));
  train_cmd->add_option("--data", tr.data, "Training CSID file")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--val", tr.val, "Validation CSID file")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--out", tr.out, "Output checkpoint; history goes to <stem>.history.csv")->required();
  train_cmd->add_option("--seed", tr.seed, "Training seed (init, shuffling, noise, dropout) [default: config, 0]");
  train_cmd->add_option("--mode", mode_name, "Duplexing mode [default: config, tdd]")
      ->transform(CLI::CheckedTransformer(kModes));
  train_cmd->add_option("--ablation", ablation_name, "Model variant [default: config, none]")
      ->transform(CLI::CheckedTransformer(kAblations));
  train_cmd->add_option("--batch-size", tr.batch_size, "Mini-batch size [default: config, 32]");
  train_cmd->add_option("--start-epochs", tr.start_epochs, "Epochs at the starting learning rate [default: config, 30]");
  train_cmd->add_option("--end-epochs", tr.end_epochs, "Epochs at the final learning rate [default: config, 10]");
  train_cmd->add_option("--lr-start", tr.lr_start, "Starting learning rate [default: config, 1e-3]");
  train_cmd->add_option("--lr-end", tr.lr_end, "Final learning rate [default: config, 1e-4]");
  train_cmd->add_flag("--no-noise", tr.no_noise, "Disable AWGN injection on training inputs");
  train_cmd->add_flag("--quiet", tr.quiet, "Suppress per-epoch progress on stderr");

  // eval
  cli::EvalOptions ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint and the NP / linear baselines on a test set");
  eval_cmd->add_option("--model", ev.model, "Checkpoint file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--data", ev.data, "Test CSID file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--out", ev.out, "Model metrics CSV; baselines go to <stem>.np.csv and <stem>.linear.csv")
      ->required();
  eval_cmd->add_option("--axis", axis_name, "Condition axis")->check(CLI::IsMember({"speed", "snr"}))
      ->capture_default_str();
  eval_cmd->add_option("--grid", grid, "lo:hi:step [default: test-set speeds, or 0:25:5 for snr]");
  eval_cmd->add_option("--mode", mode_name, "Duplexing mode [default: checkpoint's training mode]")
      ->transform(CLI::CheckedTransformer(kModes));
  eval_cmd->add_option("--eval-snr", ev.eval_snr, "Input SNR in dB for the speed sweep, or 'none'")
      ->capture_default_str();
  eval_cmd->add_option("--snr-speed", ev.snr_speed_kmh, "Speed subset (km/h) for the SNR sweep")
      ->capture_default_str();
  eval_cmd->add_option("--batch-size", ev.batch_size, "Evaluation batch [default: checkpoint's training batch]");
  eval_cmd->add_option("--seed", ev.seed, "Evaluation noise seed")->capture_default_str();

  // bench
  cli::BenchOptions be;
  auto* bench_cmd = app.add_subcommand("bench", "Time Mamba vs attention backbone forward against sequence length");
  bench_cmd->add_option("--lengths", lengths, "Comma-separated sequence lengths")->capture_default_str();
  bench_cmd->add_option("--d-model", be.bench.d_model, "Model width")->capture_default_str();
  bench_cmd->add_option("--layers", be.bench.layers, "Backbone depth")->capture_default_str();
  bench_cmd->add_option("--batch", be.bench.batch, "Sequences per forward")->capture_default_str();
  bench_cmd->add_option("--repeats", be.bench.repeats, "Timed repeats per point (fastest is kept)")
      ->capture_default_str();
  bench_cmd->add_option("--seed", be.bench.seed, "Weight and input seed")->capture_default_str();
  bench_cmd->add_option("--out", be.out, "Output CSV")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    std::optional<cli::Preset> preset;
    if (!preset_name.empty()) preset = cli::preset_from_string(preset_name);
    if (gen_cmd->parsed()) {
      gen.preset = preset;
      if (!split_name.empty()) gen.split = channel::split_from_string(split_name);
      cli::cmd_gen_data(gen);
    } else if (train_cmd->parsed()) {
      tr.preset = preset;
      if (!mode_name.empty()) tr.mode = train::mode_from_string(mode_name);
      if (!ablation_name.empty()) tr.ablation = model::ablation_from_string(ablation_name);
      cli::cmd_train(tr);
    } else if (eval_cmd->parsed()) {
      ev.axis = train::axis_from_string(axis_name);
      if (!grid.empty()) ev.grid = grid;
      if (!mode_name.empty()) ev.mode = train::mode_from_string(mode_name);
      cli::cmd_eval(ev);
    } else if (bench_cmd->parsed()) {
      be.bench.lengths = parse_lengths(lengths);
      cli::cmd_bench(be);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
