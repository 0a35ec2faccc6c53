#include "bench.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <limits>

#include "cpmamba/errors.hpp"
#include "cpmamba/model/layers.hpp"
#include "cpmamba/model/model.hpp"
#include "cpmamba/numerics/rng.hpp"

namespace cpmamba::cli {

std::string to_string(Backbone b) { return b == Backbone::mamba ? "mamba" : "attention"; }

namespace {

num::Tensor random_input(std::size_t batch, std::size_t len, std::size_t d, std::uint64_t seed) {
  num::Rng rng = num::Rng::derive(seed, {len});
  std::vector<double> v(batch * len * d);
  for (auto& x : v) x = rng.normal();
  return num::Tensor({batch, len, d}, std::move(v));
}

}  // namespace

std::vector<BenchRow> run_scaling_bench(const BenchConfig& cfg) {
  if (cfg.lengths.size() < 2) throw ConfigError("bench needs at least two sequence lengths");
  if (cfg.repeats == 0) throw ConfigError("bench repeats must be positive");
  std::vector<std::size_t> lengths = cfg.lengths;
  std::sort(lengths.begin(), lengths.end());
  lengths.erase(std::unique(lengths.begin(), lengths.end()), lengths.end());
  if (lengths.size() < 2 || lengths.front() == 0) throw ConfigError("bench needs two distinct positive lengths");

  model::ModelConfig mc = model::desk_model_preset();
  mc.d_model = cfg.d_model;
  mc.mamba_layers = cfg.layers;
  mc.attention_heads = cfg.heads;

  num::NoGradGuard no_grad;
  std::vector<BenchRow> rows;
  for (Backbone bb : {Backbone::mamba, Backbone::attention}) {
    mc.ablation = bb == Backbone::mamba ? model::Ablation::none : model::Ablation::attention_backbone;
    mc.validate();
    const model::ModelState state = model::init_model(mc, cfg.seed);
    const auto mamba = bb == Backbone::mamba ? model::mamba_layers(state) : std::vector<model::MambaLayer>{};
    const auto attn = bb == Backbone::attention ? model::attention_layers(state) : std::vector<model::AttentionLayer>{};
    const ssm::ScanOptions scan{.exact_zoh = mc.exact_zoh};

    const std::size_t first = rows.size();
    for (std::size_t len : lengths) {
      const num::Tensor x = random_input(cfg.batch, len, cfg.d_model, cfg.seed);
      auto run = [&] {
        if (bb == Backbone::mamba) return model::rmamba_stack(x, mamba, 0.0, false, nullptr, scan);
        return model::attention_backbone(x, attn, cfg.heads, 0.0, false, nullptr);
      };
      run();  // warm-up: page in buffers of this size
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t r = 0; r < cfg.repeats; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        const num::Tensor y = run();
        best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
      }
      BenchRow row;
      row.backbone = bb;
      row.length = len;
      row.seconds = best;
      row.per_token_s = best / static_cast<double>(cfg.batch * len);
      rows.push_back(row);
    }
    for (std::size_t i = first; i < rows.size(); ++i) rows[i].per_token_ratio = rows[i].per_token_s / rows[first].per_token_s;
  }
  return rows;
}

std::string bench_csv(const BenchConfig& cfg, const std::vector<BenchRow>& rows) {
  std::string out = "backbone,length,d_model,layers,batch,repeats,seconds,per_token_s,per_token_ratio\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%zu,%zu,%zu,%zu,%zu,%.9g,%.9g,%.6g\n", to_string(r.backbone).c_str(), r.length,
                  cfg.d_model, cfg.layers, cfg.batch, cfg.repeats, r.seconds, r.per_token_s, r.per_token_ratio);
    out += buf;
  }
  return out;
}

}  // namespace cpmamba::cli
