#include "commands.hpp"

#include <cstdio>

#include "cpmamba/binary_io.hpp"
#include "cpmamba/errors.hpp"
#include "cpmamba/train/evaluate.hpp"
#include "manifest.hpp"

namespace cpmamba::cli {

using nlohmann::json;

namespace {

struct LoadedDataset {
  std::string bytes;
  channel::CsiDataset data;
};

LoadedDataset load_dataset(const std::string& path) {
  LoadedDataset d;
  d.bytes = io::read_file(path);
  d.data = channel::decode_csid(d.bytes, path);
  return d;
}

void check_dataset_fits(const channel::CsiDataset& ds, const model::ModelConfig& m, const std::string& path) {
  if (ds.frames != m.history + m.horizon) {
    throw ConfigError(path + ": dataset has " + std::to_string(ds.frames) + " frames but the model expects L + P = " +
                      std::to_string(m.history + m.horizon));
  }
  if (ds.subcarriers != 2 * m.subcarriers) {
    throw ConfigError(path + ": dataset has " + std::to_string(ds.subcarriers) +
                      " subcarriers but the model expects 2K = " + std::to_string(2 * m.subcarriers));
  }
}

void add_config_input(Artifacts& art, const std::optional<std::string>& config) {
  if (config) art.add_input("config", *config, io::read_file(*config));
}

}  // namespace

void cmd_gen_data(const GenDataOptions& opt) {
  StageTimer timer;
  timer.start("resolve");
  const RunConfig cfg = resolve_config(opt.config, opt.preset, {.dataset = true});
  cfg.dataset.validate();
  Artifacts art("gen-data", opt.out);
  add_config_input(art, opt.config);
  json resolved = to_json(cfg, {.dataset = true});
  resolved["split"] = channel::to_string(opt.split);
  if (opt.preset) resolved["preset"] = to_string(*opt.preset);
  art.set_config(resolved);
  art.set_seed(opt.seed);

  timer.start("generate");
  const channel::CsiDataset ds = channel::build_dataset(cfg.dataset, opt.split, opt.seed);
  timer.start("write");
  art.add_output(opt.out, channel::encode_csid(ds));
  art.commit(timer);
  timer.stop();
  std::printf("wrote %zu %s samples (T=%u, N_t=%u, K_total=%u) to %s\n", ds.samples(),
              channel::to_string(opt.split).c_str(), ds.frames, ds.antennas, ds.subcarriers, opt.out.c_str());
}

void cmd_train(const TrainOptions& opt) {
  StageTimer timer;
  timer.start("resolve");
  RunConfig cfg = resolve_config(opt.config, opt.preset, {.model = true, .train = true});
  train::TrainConfig& tc = cfg.train;
  if (opt.seed) tc.seed = *opt.seed;
  if (opt.mode) tc.mode = *opt.mode;
  if (opt.ablation) tc.ablation = *opt.ablation;
  cfg.model.ablation = tc.ablation;
  if (opt.batch_size) tc.batch_size = *opt.batch_size;
  if (opt.start_epochs) tc.start_epochs = *opt.start_epochs;
  if (opt.end_epochs) tc.end_epochs = *opt.end_epochs;
  if (opt.start_epochs || opt.end_epochs) tc.epochs = tc.start_epochs + tc.end_epochs;
  if (opt.lr_start) tc.lr_start = *opt.lr_start;
  if (opt.lr_end) tc.lr_end = *opt.lr_end;
  if (opt.no_noise) tc.inject_noise = false;
  cfg.model.validate();
  tc.validate();

  Artifacts art("train", opt.out);
  add_config_input(art, opt.config);
  json resolved = to_json(cfg, {.model = true, .train = true});
  if (opt.preset) resolved["preset"] = to_string(*opt.preset);
  art.set_config(resolved);
  art.set_seed(tc.seed);

  timer.start("load");
  const LoadedDataset train_set = load_dataset(opt.data);
  const LoadedDataset val_set = load_dataset(opt.val);
  check_dataset_fits(train_set.data, cfg.model, opt.data);
  check_dataset_fits(val_set.data, cfg.model, opt.val);
  art.add_input("train_data", opt.data, train_set.bytes);
  art.add_input("val_data", opt.val, val_set.bytes);

  timer.start("train");
  const model::ModelState init = model::init_model(cfg.model, tc.seed);
  train::TrainHooks hooks;
  if (!opt.quiet) {
    hooks.on_epoch = [&](const train::EpochRecord& r) {
      std::fprintf(stderr, "epoch %zu/%zu lr %.3g train_nmse %.6g val_nmse %.6g\n", r.epoch + 1, tc.epochs, r.lr,
                   r.train_nmse, r.val_nmse);
    };
  }
  train::TrainResult result = train::train(init, train_set.data, val_set.data, tc, hooks);

  timer.start("write");
  model::ModelState& best = result.best_state;
  best.meta = json{{"mode", train::to_string(tc.mode)},
                   {"batch_size", tc.batch_size},
                   {"best_epoch", result.best_epoch},
                   {"epochs", tc.epochs},
                   {"train_seed", tc.seed},
                   {"best_val_nmse", result.history.at(result.best_epoch).val_nmse}};
  art.add_output(opt.out, model::encode_checkpoint(best));
  art.add_output(sibling_path(opt.out, ".history.csv"), train::history_csv(result.history));
  art.commit(timer);
  timer.stop();
  std::printf("trained %llu steps, best epoch %zu (val NMSE %.6g), %zu parameters -> %s\n",
              static_cast<unsigned long long>(result.steps), result.best_epoch + 1,
              result.history.at(result.best_epoch).val_nmse, best.parameter_count(), opt.out.c_str());
}

void cmd_eval(const EvalOptions& opt) {
  StageTimer timer;
  timer.start("load");
  const std::string ckpt_bytes = io::read_file(opt.model);
  const model::ModelState state = model::decode_checkpoint(ckpt_bytes, opt.model);
  const LoadedDataset test = load_dataset(opt.data);
  check_dataset_fits(test.data, state.config, opt.data);

  train::EvalConfig ec;
  ec.axis = opt.axis;
  if (opt.grid) ec.grid = train::parse_grid(*opt.grid);
  if (opt.mode) {
    ec.mode = *opt.mode;
  } else if (state.meta.contains("mode")) {
    ec.mode = train::mode_from_string(state.meta.at("mode").get<std::string>());
  }
  if (opt.eval_snr == "none") {
    ec.eval_snr_db.reset();
  } else {
    try {
      std::size_t used = 0;
      ec.eval_snr_db = std::stod(opt.eval_snr, &used);
      if (used != opt.eval_snr.size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw ConfigError("--eval-snr expects a number in dB or 'none', got '" + opt.eval_snr + "'");
    }
  }
  ec.snr_sweep_speed_kmh = opt.snr_speed_kmh;
  if (opt.batch_size) {
    ec.batch_size = *opt.batch_size;
  } else if (state.meta.contains("batch_size")) {
    ec.batch_size = state.meta.at("batch_size").get<std::size_t>();
  }
  if (ec.batch_size == 0) throw ConfigError("--batch-size must be positive");
  ec.seed = opt.seed;

  Artifacts art("eval", opt.out);
  art.add_input("model", opt.model, ckpt_bytes);
  art.add_input("test_data", opt.data, test.bytes);
  json resolved{{"axis", train::to_string(ec.axis)},
                {"grid", ec.grid},
                {"mode", train::to_string(ec.mode)},
                {"eval_snr_db", ec.eval_snr_db ? json(*ec.eval_snr_db) : json(nullptr)},
                {"snr_sweep_speed_kmh", ec.snr_sweep_speed_kmh},
                {"batch_size", ec.batch_size},
                {"model", model::to_json(state.config)}};
  art.set_config(resolved);
  art.set_seed(ec.seed);

  const std::size_t len = state.config.history, horizon = state.config.horizon;
  timer.start("model");
  const train::MetricsReport model_rep = train::evaluate(train::model_predictor(state), test.data, len, horizon, ec);
  timer.start("baselines");
  const train::MetricsReport np_rep = train::evaluate(train::np_predictor(horizon), test.data, len, horizon, ec);
  const train::MetricsReport lin_rep = train::evaluate(train::linear_predictor(horizon), test.data, len, horizon, ec);

  timer.start("write");
  art.add_output(opt.out, train::metrics_csv(model_rep));
  art.add_output(sibling_path(opt.out, ".np.csv"), train::metrics_csv(np_rep));
  art.add_output(sibling_path(opt.out, ".linear.csv"), train::metrics_csv(lin_rep));
  art.commit(timer);
  timer.stop();
  std::printf("%-8s mean NMSE %.6g over %zu conditions\n", "model", model_rep.mean_nmse, model_rep.rows.size());
  std::printf("%-8s mean NMSE %.6g\n", "np", np_rep.mean_nmse);
  std::printf("%-8s mean NMSE %.6g\n", "linear", lin_rep.mean_nmse);
}

void cmd_bench(const BenchOptions& opt) {
  StageTimer timer;
  timer.start("bench");
  const std::vector<BenchRow> rows = run_scaling_bench(opt.bench);
  Artifacts art("bench", opt.out);
  art.set_config(json{{"lengths", opt.bench.lengths},
                      {"d_model", opt.bench.d_model},
                      {"layers", opt.bench.layers},
                      {"batch", opt.bench.batch},
                      {"repeats", opt.bench.repeats},
                      {"heads", opt.bench.heads}});
  art.set_seed(opt.bench.seed);
  timer.start("write");
  art.add_output(opt.out, bench_csv(opt.bench, rows));
  art.commit(timer);
  timer.stop();
  for (const auto& r : rows) {
    std::printf("%-9s L=%-5zu %10.3f us/token  x%.3f\n", to_string(r.backbone).c_str(), r.length, 1e6 * r.per_token_s,
                r.per_token_ratio);
  }
}

}  // namespace cpmamba::cli
