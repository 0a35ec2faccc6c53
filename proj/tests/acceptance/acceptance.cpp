// Runs the acceptance criteria and prints one PASS/FAIL line per criterion.
// Per-criterion diagnostics go to stderr.

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>
#include <nlohmann/json.hpp>

#include "bench.hpp"
#include "commands.hpp"
#include "cpmamba/binary_io.hpp"
#include "cpmamba/channel/channel.hpp"
#include "cpmamba/channel/dataset.hpp"
#include "cpmamba/model/model.hpp"
#include "cpmamba/numerics/ops.hpp"
#include "cpmamba/runtime.hpp"
#include "cpmamba/ssm/ssm.hpp"
#include "cpmamba/train/data.hpp"
#include "cpmamba/train/evaluate.hpp"
#include "cpmamba/train/metrics.hpp"
#include "cpmamba/train/trainer.hpp"
#include "gradient_suite.hpp"
#include "naive_scan.hpp"
#include "run_config.hpp"
#include "test_util.hpp"

namespace {

using namespace cpmamba;
namespace fs = std::filesystem;
using num::Tensor;
using cd = std::complex<double>;
using big = boost::multiprecision::cpp_bin_float_50;
constexpr double kPi = std::numbers::pi;

struct Outcome {
  bool pass = true;
  std::string summary;
};

// Collects failures; the first few are echoed to stderr.
class Ledger {
 public:
  explicit Ledger(std::string tag) : tag_(std::move(tag)) {}

  void expect(bool ok, const std::string& what) {
    ++checks_;
    if (ok) return;
    if (++failures_ <= 10) std::cerr << "  [" << tag_ << "] " << what << "\n";
  }
  void worst(double& slot, double v) { slot = std::max(slot, v); }
  bool ok() const { return failures_ == 0; }
  std::size_t checks() const { return checks_; }
  std::size_t failures() const { return failures_; }

 private:
  std::string tag_;
  std::size_t checks_ = 0;
  std::size_t failures_ = 0;
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(3);
  os << v;
  return os.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double cpu_seconds() { return static_cast<double>(std::clock()) / CLOCKS_PER_SEC; }

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

// --- 1 -----------------------------------------------------------------------

Outcome gradient_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  Ledger led("grad");
  double worst_prim = 0.0, worst_model = 0.0;
  std::string worst_name;
  std::size_t prim_checked = 0, model_checked = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    for (const auto& r : testutil::primitive_gradient_suite(seed)) {
      led.expect(r.max_rel_error < 1e-5 && r.checked > 0,
                 r.name + " seed " + std::to_string(seed) + " rel " + fmt(r.max_rel_error));
      if (r.max_rel_error > worst_prim) {
        worst_prim = r.max_rel_error;
        worst_name = r.name;
      }
      prim_checked += r.checked;
    }
    const auto m = testutil::model_gradient_check(seed, 50);
    led.expect(m.max_rel_error < 1e-4 && m.checked >= 50,
               "model seed " + std::to_string(seed) + " rel " + fmt(m.max_rel_error));
    led.worst(worst_model, m.max_rel_error);
    model_checked += m.checked;
  }
  const double secs = seconds_since(t0);
  led.expect(secs < 120.0, "runtime " + fmt(secs) + " s exceeds 120 s");
  return {led.ok(), "primitives worst " + fmt(worst_prim) + " (" + worst_name + ", " + std::to_string(prim_checked) +
                        " entries), model worst " + fmt(worst_model) + " (" + std::to_string(model_checked) +
                        " params), 10 seeds, " + fmt(secs) + " s"};
}

// --- 2 -----------------------------------------------------------------------

Outcome scan_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  Ledger led("scan");
  double worst = 0.0;
  std::size_t cases = 0;
  for (std::size_t e : {1, 2, 4}) {
    for (std::size_t n : {1, 2, 4}) {
      for (std::size_t len : {1, 2, 16}) {
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
          num::Rng rng = num::Rng::derive(1000 + seed, {e, n, len});
          const std::size_t b = 2;
          ssm::ScanInputs in{testutil::random_tensor({b, len, e}, rng),
                             testutil::random_tensor({b, len, e}, rng, 1e-3, 2.0),
                             testutil::random_tensor({b, len, n}, rng), testutil::random_tensor({b, len, n}, rng)};
          const Tensor a = testutil::random_tensor({e, n}, rng, -4.0, -1e-3);
          const Tensor d = testutil::random_tensor({e}, rng);
          const Tensor y = ssm::selective_scan(in, a, d);
          const auto ref = testutil::naive_selective_scan(values(in.x), values(in.delta), values(in.b), values(in.c),
                                                         values(a), values(d), b, len, e, n);
          const double err = testutil::max_abs_diff(y.data(), ref);
          led.worst(worst, err);
          led.expect(err < 1e-12, "E=" + std::to_string(e) + " N=" + std::to_string(n) + " L=" + std::to_string(len) +
                                      " seed " + std::to_string(seed) + " err " + fmt(err));
          ++cases;
        }
      }
    }
  }
  const double secs = seconds_since(t0);
  led.expect(secs < 30.0, "runtime " + fmt(secs) + " s exceeds 30 s");
  return {led.ok(), std::to_string(cases) + " cases, max abs error " + fmt(worst) + ", " + fmt(secs) + " s"};
}

// --- 3 -----------------------------------------------------------------------

Outcome zoh_exactness() {
  Ledger led("zoh");
  num::Rng rng(3);
  double worst_a = 0.0, worst_b = 0.0;
  auto check = [&](double a, double b, double delta) {
    const auto d = ssm::discretize(a, b, delta);
    const big z = big(delta) * big(a);
    const big abar = boost::multiprecision::exp(z);
    const big bbar = boost::multiprecision::expm1(z) / z * big(delta) * big(b);
    const double ea = std::abs(d.a_bar - static_cast<double>(abar));
    const double eb = std::abs(d.b_bar - static_cast<double>(bbar)) / std::max(std::abs(static_cast<double>(bbar)), 1e-300);
    led.worst(worst_a, ea);
    led.worst(worst_b, eb);
    led.expect(ea < 1e-15 && eb < 1e-14, "a=" + fmt(a) + " b=" + fmt(b) + " delta=" + fmt(delta) + " errors " +
                                             fmt(ea) + " / " + fmt(eb));
  };
  // Ordinary range.
  for (int i = 0; i < 5000; ++i) {
    check(-std::exp(rng.uniform(std::log(1e-6), std::log(50.0))), rng.uniform(-2.0, 2.0),
          std::exp(rng.uniform(std::log(1e-4), std::log(2.0))));
  }
  // Around and below the series switchover of delta * a.
  for (int i = 0; i < 5000; ++i) {
    const double z = -std::exp(rng.uniform(std::log(1e-14), std::log(1e-5)));
    const double delta = std::exp(rng.uniform(std::log(1e-3), std::log(1.0)));
    check(z / delta, rng.uniform(-2.0, 2.0), delta);
  }
  double jump = 0.0;
  const double t = ssm::kZohSeriesThreshold;
  for (double sign : {-1.0, 1.0}) {
    for (double eps : {1e-12, 1e-9, 1e-6}) {
      const double below = ssm::zoh_factor(sign * t * (1 - eps));
      const double above = ssm::zoh_factor(sign * t * (1 + eps));
      led.worst(jump, std::abs(below - above));
      led.expect(std::abs(below - above) < 1e-12, "switchover jump " + fmt(std::abs(below - above)));
    }
  }
  led.expect(ssm::zoh_factor(0.0) == 1.0, "zoh_factor(0) != 1");
  const auto half = ssm::discretize(-1.0, 1.0, std::log(2.0));
  led.expect(std::abs(half.a_bar - 0.5) < 1e-15 && std::abs(half.b_bar - 0.5) < 1e-15, "ln 2 example");
  const auto lim = ssm::discretize(-1e-12, 2.0, 0.3);
  led.expect(std::abs(lim.a_bar - 1.0) < 1e-12 && std::abs(lim.b_bar - 0.6) < 1e-12, "small-a limit example");
  return {led.ok(), "a_bar abs error " + fmt(worst_a) + ", b_bar rel error " + fmt(worst_b) + ", switchover jump " +
                        fmt(jump) + " over " + std::to_string(led.checks()) + " checks"};
}

// --- 4 -----------------------------------------------------------------------

channel::MultipathParams single_path(cd gain, double delay, double doppler, double az, double el) {
  channel::Path p;
  p.gain = gain;
  p.mean_power = std::norm(gain);
  p.delay_s = delay;
  p.doppler_hz = doppler;
  p.azimuth = az;
  p.elevation = el;
  return {{p}};
}

Outcome channel_oracles() {
  Ledger led("channel");
  num::Rng rng(4);
  double worst_kron = 0.0, worst_rot = 0.0, worst_slope = 0.0, worst_db = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t nh = 1 + rng.below(6), nv = 1 + rng.below(6);
    const double lambda = rng.uniform(0.05, 0.2);
    const double dx = rng.uniform(0.2, 1.0) * lambda, dz = rng.uniform(0.2, 1.0) * lambda;
    const double az = rng.uniform(-kPi, kPi), el = rng.uniform(0, kPi);
    const auto a = channel::steering_vector({nh, nv, dx, dz}, az, el, lambda);
    std::vector<cd> ah(nh), av(nv);
    for (std::size_t i = 0; i < nh; ++i) ah[i] = std::exp(cd(0, 2 * kPi * i * dx * std::sin(el) * std::cos(az) / lambda));
    for (std::size_t i = 0; i < nv; ++i) av[i] = std::exp(cd(0, 2 * kPi * i * dz * std::sin(el) * std::sin(az) / lambda));
    led.expect(a.size() == nh * nv, "steering size");
    for (std::size_t h = 0; h < nh && a.size() == nh * nv; ++h) {
      for (std::size_t v = 0; v < nv; ++v) led.worst(worst_kron, std::abs(a[h * nv + v] - ah[h] * av[v]));
    }
  }
  led.expect(worst_kron < 1e-10, "Kronecker error " + fmt(worst_kron));

  channel::ChannelConfig cfg;
  const double dt = cfg.sample_interval_s;
  for (int trial = 0; trial < 50; ++trial) {
    const double fd = rng.uniform(-400.0, 400.0), tau = rng.uniform(0.0, 1e-6);
    const auto paths = single_path(std::polar(rng.uniform(0.1, 2.0), rng.uniform(-kPi, kPi)), tau, fd,
                                   rng.uniform(-kPi, kPi), rng.uniform(0, kPi));
    const double t = dt * static_cast<double>(rng.below(40));
    const auto h0 = channel::csi_frame(paths, cfg, t), h1 = channel::csi_frame(paths, cfg, t + dt);
    const cd rot = std::polar(1.0, 2 * kPi * fd * dt);
    for (std::size_t i = 0; i < h0.size(); ++i) led.worst(worst_rot, std::abs(h1[i] / h0[i] - rot));
    const cd slope = std::polar(1.0, -2 * kPi * tau * cfg.subcarrier_spacing_hz);
    for (std::size_t n = 0; n < cfg.geometry.antennas(); ++n) {
      for (std::size_t k = 0; k + 1 < cfg.subcarriers; ++k) {
        led.worst(worst_slope, std::abs(h0[n * cfg.subcarriers + k + 1] / h0[n * cfg.subcarriers + k] - slope));
      }
    }
  }
  led.expect(worst_rot < 1e-10, "Doppler rotation error " + fmt(worst_rot));
  led.expect(worst_slope < 1e-10, "delay slope error " + fmt(worst_slope));

  num::Rng noise(44);
  std::vector<cd> clean(200000);
  for (std::size_t i = 0; i < clean.size(); ++i) clean[i] = std::polar(rng.uniform(0.5, 1.5), rng.uniform(-kPi, kPi));
  double ps = 0.0;
  for (const auto& v : clean) ps += std::norm(v);
  ps /= static_cast<double>(clean.size());
  for (double snr : {0.0, 5.0, 10.0, 15.0, 20.0, 25.0}) {
    auto noisy = clean;
    channel::add_awgn_inplace(noisy, snr, noise);
    double pn = 0.0;
    for (std::size_t i = 0; i < clean.size(); ++i) pn += std::norm(noisy[i] - clean[i]);
    pn /= static_cast<double>(clean.size());
    const double err = std::abs(10 * std::log10(ps / pn) - snr);
    led.worst(worst_db, err);
    led.expect(err <= 0.3, "AWGN at " + fmt(snr) + " dB off by " + fmt(err) + " dB");
  }
  return {led.ok(), "Kronecker " + fmt(worst_kron) + ", Doppler rotation " + fmt(worst_rot) + ", delay slope " +
                        fmt(worst_slope) + ", AWGN max deviation " + fmt(worst_db) + " dB"};
}

// --- 5 -----------------------------------------------------------------------

Outcome affine_equivariance() {
  Ledger led("affine");
  num::Rng rng(5);
  double worst = 0.0;
  for (model::Ablation ab : {model::Ablation::none, model::Ablation::no_se, model::Ablation::no_patch,
                             model::Ablation::attention_backbone}) {
    model::ModelConfig cfg = model::desk_model_preset();
    cfg.ablation = ab;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const model::ModelState st = model::init_model(cfg, seed);
      const Tensor x = testutil::random_tensor({8, cfg.history, 2 * cfg.subcarriers}, rng);
      const Tensor y = model::forward(x, st);
      for (double a : {0.25, 3.0, 17.0}) {
        for (double b : {-1.0, 0.0, 0.7}) {
          const Tensor ys = model::forward(num::affine(x, a, b), st);
          double err = 0.0;
          for (std::size_t i = 0; i < y.size(); ++i) {
            const double want = a * y.data()[i] + b;
            err = std::max(err, std::abs(ys.data()[i] - want) / std::max(1.0, std::abs(want)));
          }
          led.worst(worst, err);
          led.expect(err < 1e-8, model::to_string(ab) + " a=" + fmt(a) + " b=" + fmt(b) + " err " + fmt(err));
        }
      }
    }
  }
  return {led.ok(), "4 variants x 3 seeds x 9 (a, b), max rel error " + fmt(worst)};
}

// --- 6 -----------------------------------------------------------------------

Outcome overfit() {
  const double cpu0 = cpu_seconds();
  Ledger led("overfit");
  channel::DatasetConfig data = channel::desk_dataset_preset();
  data.train_samples = 8;
  const auto ds = channel::build_dataset(data, channel::Split::train, 0);
  train::TrainConfig tc = train::desk_train_preset();
  tc.batch_size = 8;
  tc.epochs = 500;
  tc.start_epochs = 500;
  tc.end_epochs = 0;
  tc.inject_noise = false;
  tc.seed = 0;
  tc.mode = train::Mode::tdd;
  const model::ModelState init = model::init_model(model::desk_model_preset(), 0);
  std::optional<std::uint64_t> reached;
  double last = 0.0;
  train::TrainHooks hooks;
  hooks.on_step = [&](const train::StepInfo& s, const model::ModelState& st) {
    last = train::dataset_nmse(st, ds, tc, 0);
    if (last < 0.01) reached = s.step;
    return !reached && s.step < 500;
  };
  const auto result = train::train(init, ds, ds, tc, hooks);
  const double cpu = cpu_seconds() - cpu0;
  led.expect(reached.has_value(), "train NMSE " + fmt(last) + " after " + std::to_string(result.steps) + " steps");
  led.expect(result.steps <= 500, "ran " + std::to_string(result.steps) + " steps");
  led.expect(cpu < 180.0, "CPU time " + fmt(cpu) + " s exceeds 180 s");
  return {led.ok(), reached ? "train NMSE " + fmt(last) + " < 0.01 at step " + std::to_string(*reached) + ", " +
                                  fmt(cpu) + " s CPU"
                            : "train NMSE " + fmt(last) + " after 500 steps, " + fmt(cpu) + " s CPU"};
}

// --- 7, 8, 9 -----------------------------------------------------------------

struct CsvRow {
  double value = 0.0;
  double nmse = 0.0;
  double rmse = 0.0;
  double mae = 0.0;
  std::size_t n = 0;
};

std::vector<CsvRow> read_metrics(const std::string& path) {
  std::istringstream in(io::read_file(path));
  std::string line;
  std::getline(in, line);
  if (line != train::kMetricsHeader) throw IoError(path + ": unexpected header '" + line + "'");
  std::vector<CsvRow> rows;
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 7) throw IoError(path + ": malformed row '" + line + "'");
    rows.push_back({std::stod(f[1]), std::stod(f[3]), std::stod(f[4]), std::stod(f[5]), std::stoull(f[6])});
  }
  return rows;
}

struct RunResult {
  std::vector<CsvRow> speed;     // model, speed axis
  std::vector<CsvRow> speed_np;  // NP baseline, speed axis
  std::vector<CsvRow> snr;       // model, SNR axis at 60 km/h
  double mean_nmse = 0.0;        // over the speed axis rows
  double train_cpu_s = 0.0;
};

// Desk protocol: one dataset (seed 0), training seeds 0..4, full and no_se
// variants, each run through the same code paths as the command line tool.
class DeskProtocol {
 public:
  explicit DeskProtocol(fs::path work) : work_(std::move(work)) {}

  const RunResult& run(std::uint64_t seed, model::Ablation ab) {
    const auto key = std::make_pair(seed, ab);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    prepare();
    const std::string stem = (work_ / ("s" + std::to_string(seed) + "_" + model::to_string(ab))).string();
    cli::TrainOptions tr{.preset = cli::Preset::desk, .data = file("train"), .val = file("val"), .out = stem + ".cpmb"};
    tr.seed = seed;
    tr.ablation = ab;
    tr.quiet = true;
    const auto t0 = std::chrono::steady_clock::now();
    const double cpu0 = cpu_seconds();
    cli::cmd_train(tr);
    RunResult r;
    r.train_cpu_s = cpu_seconds() - cpu0;
    std::cerr << "  [desk] seed " << seed << " " << model::to_string(ab) << " trained in " << fmt(seconds_since(t0))
              << " s (" << fmt(r.train_cpu_s) << " s CPU)\n";

    cli::EvalOptions ev{.model = stem + ".cpmb", .data = file("test"), .out = stem + ".speed.csv"};
    cli::cmd_eval(ev);
    ev.axis = train::Axis::snr;
    ev.grid = "0:25:5";
    ev.out = stem + ".snr.csv";
    cli::cmd_eval(ev);
    r.speed = read_metrics(stem + ".speed.csv");
    r.speed_np = read_metrics(stem + ".speed.np.csv");
    r.snr = read_metrics(stem + ".snr.csv");
    for (const auto& row : r.speed) r.mean_nmse += row.nmse / static_cast<double>(r.speed.size());
    return cache_.emplace(key, std::move(r)).first->second;
  }

 private:
  std::string file(const std::string& split) const { return (work_ / (split + ".csid")).string(); }

  void prepare() {
    if (prepared_) return;
    fs::create_directories(work_);
    for (auto split : {channel::Split::train, channel::Split::val, channel::Split::test}) {
      cli::cmd_gen_data({.preset = cli::Preset::desk, .out = file(channel::to_string(split)), .seed = 0, .split = split});
    }
    prepared_ = true;
  }

  fs::path work_;
  bool prepared_ = false;
  std::map<std::pair<std::uint64_t, model::Ablation>, RunResult> cache_;
};

constexpr std::uint64_t kSeeds = 5;
constexpr double kTrainCpuBudget = 30.0 * 60.0;

Outcome beats_np(DeskProtocol& desk) {
  Ledger led("beats-np");
  std::size_t good = 0;
  double worst_ratio_all = 0.0;
  for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
    const auto& r = desk.run(seed, model::Ablation::none);
    led.expect(r.train_cpu_s <= kTrainCpuBudget, "seed " + std::to_string(seed) + " training took " +
                                                     fmt(r.train_cpu_s) + " s CPU");
    bool ok = r.speed.size() == r.speed_np.size() && !r.speed.empty();
    double worst = 0.0;
    std::size_t checked = 0;
    for (std::size_t i = 0; ok && i < r.speed.size(); ++i) {
      if (r.speed[i].value < 40.0 - 1e-9) continue;
      const double ratio = r.speed[i].nmse / r.speed_np[i].nmse;
      worst = std::max(worst, ratio);
      ++checked;
      if (ratio > 0.5) ok = false;
      std::cerr << "  [beats-np] seed " << seed << " " << r.speed[i].value << " km/h model " << fmt(r.speed[i].nmse)
                << " np " << fmt(r.speed_np[i].nmse) << " ratio " << fmt(ratio) << "\n";
    }
    ok = ok && checked > 0;
    worst_ratio_all = std::max(worst_ratio_all, worst);
    if (ok) ++good;
  }
  led.expect(good >= 4, std::to_string(good) + " of " + std::to_string(kSeeds) + " seeds within 0.5x NP");
  return {led.ok(), std::to_string(good) + "/" + std::to_string(kSeeds) +
                        " seeds at <= 0.5x NP for every speed >= 40 km/h (worst ratio " + fmt(worst_ratio_all) + ")"};
}

Outcome snr_trend(DeskProtocol& desk) {
  Ledger led("snr");
  std::string detail;
  for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
    const auto& r = desk.run(seed, model::Ablation::none);
    std::optional<double> at0, at20;
    for (const auto& row : r.snr) {
      if (std::abs(row.value) < 1e-9) at0 = row.nmse;
      if (std::abs(row.value - 20.0) < 1e-9) at20 = row.nmse;
    }
    led.expect(at0 && at20 && *at20 < *at0, "seed " + std::to_string(seed) + " NMSE@20dB " +
                                                fmt(at20.value_or(NAN)) + " vs NMSE@0dB " + fmt(at0.value_or(NAN)));
    detail += (seed ? ", " : "") + fmt(at20.value_or(NAN)) + "<" + fmt(at0.value_or(NAN));
  }
  return {led.ok(), "NMSE 20 dB < 0 dB at 60 km/h per seed: " + detail};
}

Outcome ablation_direction(DeskProtocol& desk) {
  Ledger led("ablation");
  std::size_t good = 0;
  std::string detail;
  for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
    const double full = desk.run(seed, model::Ablation::none).mean_nmse;
    const auto& no_se = desk.run(seed, model::Ablation::no_se);
    led.expect(no_se.train_cpu_s <= kTrainCpuBudget, "seed " + std::to_string(seed) + " no_se training took " +
                                                         fmt(no_se.train_cpu_s) + " s CPU");
    if (full < no_se.mean_nmse) ++good;
    detail += (seed ? ", " : "") + fmt(full) + " vs " + fmt(no_se.mean_nmse);
  }
  led.expect(good >= 4, std::to_string(good) + " of " + std::to_string(kSeeds) + " seeds favor the full model");
  return {led.ok(), std::to_string(good) + "/" + std::to_string(kSeeds) + " seeds full < no_se (" + detail + ")"};
}

// --- 10 ----------------------------------------------------------------------

Outcome complexity_scaling() {
  const auto t0 = std::chrono::steady_clock::now();
  Ledger led("scaling");
  cli::BenchConfig cfg;
  cfg.lengths = {128, 1024};
  const auto rows = cli::run_scaling_bench(cfg);
  double mamba = NAN, attention = NAN;
  for (const auto& r : rows) {
    std::cerr << "  [scaling] " << cli::to_string(r.backbone) << " L=" << r.length << " " << fmt(r.seconds)
              << " s, per token " << fmt(r.per_token_s) << " s\n";
    if (r.length != 1024) continue;
    (r.backbone == cli::Backbone::mamba ? mamba : attention) = r.per_token_ratio;
  }
  led.expect(mamba < 1.5, "Mamba per-token ratio " + fmt(mamba));
  led.expect(attention > mamba, "attention ratio " + fmt(attention) + " not above Mamba's " + fmt(mamba));
  const double secs = seconds_since(t0);
  led.expect(secs < 300.0, "runtime " + fmt(secs) + " s exceeds 300 s");
  return {led.ok(), "per-token ratio L=1024/L=128: Mamba " + fmt(mamba) + ", attention " + fmt(attention) + ", " +
                        fmt(secs) + " s"};
}

// --- 11 ----------------------------------------------------------------------

model::CsiBlock block_from(const std::function<cd(std::size_t, std::size_t, std::size_t)>& f, std::size_t frames,
                           std::size_t antennas = 2, std::size_t subcarriers = 3) {
  model::CsiBlock b(1, frames, antennas, subcarriers);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t a = 0; a < antennas; ++a) {
      for (std::size_t k = 0; k < subcarriers; ++k) b.at(0, t, a, k) = f(t, a, k);
    }
  }
  return b;
}

Outcome metric_identities() {
  Ledger led("metrics");
  using train::nmse;
  const std::vector<cd> truth{{1, 2}, {-3, 0.5}, {0.25, -1}};
  led.expect(nmse(std::span<const cd>(truth), truth) == 0.0, "nmse(truth, truth) != 0");
  led.expect(nmse(std::span<const cd>(std::vector<cd>(3)), truth) == 1.0, "nmse(0, truth) != 1");
  const std::vector<double> p{1, 0}, t{1, 1};
  led.expect(nmse(std::span<const double>(p), t) == 0.5, "nmse([1,0],[1,1]) != 0.5");
  bool threw = false;
  try {
    nmse(std::span<const double>(p), std::vector<double>{0, 0});
  } catch (const DomainError&) {
    threw = true;
  }
  led.expect(threw, "zero-energy truth accepted");

  const std::vector<cd> tt{{1, 2}, {3, -4}};
  const auto zero = train::error_metrics(tt, tt);
  led.expect(zero.rmse == 0.0 && zero.mae == 0.0, "error_metrics(truth, truth) != (0, 0)");
  std::vector<cd> off(tt);
  for (auto& v : off) v += 3.0;
  const auto three = train::error_metrics(off, tt);
  led.expect(std::abs(three.rmse - 3.0) < 1e-12 && std::abs(three.mae - 3.0) < 1e-12, "offset 3 example");
  const std::vector<cd> hp{{1, 2}, {3, -2}};
  const auto hand = train::error_metrics(hp, tt);
  led.expect(std::abs(hand.rmse - std::sqrt(2.0)) < 1e-12 && std::abs(hand.mae - 1.0) < 1e-12, "{0, 2} example");

  num::Rng rng(11);
  std::vector<cd> pr(64), tr(64);
  for (std::size_t i = 0; i < 64; ++i) {
    pr[i] = {rng.normal(), rng.normal()};
    tr[i] = {rng.normal(), rng.normal()};
  }
  const double base = nmse(std::span<const cd>(pr), tr);
  for (double a : {-2.5, 1e-3, 7.0}) {
    std::vector<cd> ps(pr), ts(tr);
    for (auto& v : ps) v *= a;
    for (auto& v : ts) v *= a;
    led.expect(std::abs(nmse(std::span<const cd>(ps), ts) - base) < 1e-12, "scale invariance at a=" + fmt(a));
  }
  std::vector<double> rp, rt;
  for (std::size_t i = 0; i < 64; ++i) {
    rp.insert(rp.end(), {pr[i].real(), pr[i].imag()});
    rt.insert(rt.end(), {tr[i].real(), tr[i].imag()});
  }
  const double loss = train::nmse_loss(Tensor({128}, rp), Tensor({128}, rt)).item();
  led.expect(std::abs(loss - base) < 1e-12, "real-view loss differs from complex NMSE");

  // NP: static channel and the single-path Doppler closed form.
  const std::size_t len = 16, horizon = 4;
  const auto stat = block_from([](auto, auto a, auto k) { return cd(1.0 + a, -0.5 * k); }, len + horizon);
  model::CsiBlock sin(1, len, 2, 3), stt(1, horizon, 2, 3);
  for (std::size_t a = 0; a < 2; ++a) {
    for (std::size_t k = 0; k < 3; ++k) {
      for (std::size_t i = 0; i < len; ++i) sin.at(0, i, a, k) = stat.at(0, i, a, k);
      for (std::size_t q = 0; q < horizon; ++q) stt.at(0, q, a, k) = stat.at(0, len + q, a, k);
    }
  }
  led.expect(nmse(std::span<const cd>(train::baseline_np(sin, horizon).values), stt.values) == 0.0,
             "NP on a static channel is not exact");
  for (double fd : {17.0, 123.0, 555.0}) {
    const double dt = 5e-4;
    const auto full = block_from(
        [&](auto i, auto a, auto k) { return std::polar(1.0, 2 * kPi * fd * dt * i + 0.3 * a - 0.2 * k); },
        len + horizon);
    model::CsiBlock in(1, len, 2, 3), target(1, horizon, 2, 3);
    for (std::size_t a = 0; a < 2; ++a) {
      for (std::size_t k = 0; k < 3; ++k) {
        for (std::size_t i = 0; i < len; ++i) in.at(0, i, a, k) = full.at(0, i, a, k);
        for (std::size_t q = 0; q < horizon; ++q) target.at(0, q, a, k) = full.at(0, len + q, a, k);
      }
    }
    double analytic = 0.0;
    for (std::size_t q = 1; q <= horizon; ++q) analytic += 2.0 - 2.0 * std::cos(2 * kPi * fd * dt * q);
    analytic /= horizon;
    const double got = nmse(std::span<const cd>(train::baseline_np(in, horizon).values), target.values);
    led.expect(std::abs(got - analytic) < 1e-6, "NP Doppler closed form at " + fmt(fd) + " Hz: " + fmt(got) +
                                                    " vs " + fmt(analytic));
  }

  // Linear extrapolation: exact on lines, NP on constants, p(p+1) residual on t^2.
  const cd slope(0.3, -0.7), icpt(-1.0, 2.0);
  const auto lin = block_from([&](auto i, auto a, auto) { return icpt + slope * double(i) + double(a); }, len);
  const auto lp = train::baseline_linear(lin, horizon);
  for (std::size_t q = 0; q < horizon; ++q) {
    led.expect(std::abs(lp.at(0, q, 1, 2) - (icpt + slope * double(len + q) + 1.0)) < 1e-12, "linear not exact");
  }
  const auto flat = block_from([](auto, auto a, auto k) { return cd(a, k); }, len);
  led.expect(train::baseline_linear(flat, horizon).values == train::baseline_np(flat, horizon).values,
             "linear differs from NP on constant input");
  const cd c(0.5, 0.25);
  const auto quad = train::baseline_linear(block_from([&](auto i, auto, auto) { return c * double(i * i); }, len),
                                           horizon);
  for (std::size_t q = 1; q <= horizon; ++q) {
    const cd want = c * double((len - 1 + q) * (len - 1 + q));
    led.expect(std::abs((want - quad.at(0, q - 1, 0, 0)) - c * double(q * (q + 1))) < 1e-9,
               "quadratic residual at p=" + std::to_string(q));
  }

  // Reports: the oracle gives zeros, RMSE >= MAE on every row of every method.
  auto dcfg = channel::desk_dataset_preset();
  dcfg.test_per_speed = 32;
  const auto test = channel::build_dataset(dcfg, channel::Split::test, 11);
  const train::Predictor oracle = [](const train::Batch& b) { return b.target; };
  std::size_t rows = 0;
  for (train::Axis axis : {train::Axis::speed, train::Axis::snr}) {
    for (train::Mode mode : {train::Mode::tdd, train::Mode::fdd}) {
      train::EvalConfig ec;
      ec.axis = axis;
      ec.mode = mode;
      const auto orep = train::evaluate(oracle, test, dcfg.history, dcfg.horizon, ec);
      for (const auto& r : orep.rows) {
        led.expect(r.nmse == 0.0 && r.rmse == 0.0 && r.mae == 0.0, "oracle row not zero");
      }
      for (const auto& pred : {train::np_predictor(dcfg.horizon), train::linear_predictor(dcfg.horizon)}) {
        for (const auto& r : train::evaluate(pred, test, dcfg.history, dcfg.horizon, ec).rows) {
          ++rows;
          led.expect(r.rmse >= r.mae && r.mae > 0.0 && r.nmse > 0.0 && r.n > 0,
                     "row " + fmt(r.value) + " rmse " + fmt(r.rmse) + " mae " + fmt(r.mae));
        }
      }
    }
  }
  return {led.ok(), std::to_string(led.checks()) + " identities, RMSE >= MAE on " + std::to_string(rows) +
                        " baseline report rows"};
}

// --- 12 ----------------------------------------------------------------------

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(CPMAMBA_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

Outcome determinism(const fs::path& work) {
  Ledger led("determinism");
  fs::create_directories(work);
  cli::RunConfig rc = cli::preset_config(cli::Preset::desk);
  rc.dataset.train_samples = 64;
  rc.dataset.val_samples = 16;
  rc.train.epochs = 2;
  rc.train.start_epochs = 1;
  rc.train.end_epochs = 1;
  const std::string cfg = (work / "config.json").string();
  io::write_file_atomic(cfg, cli::to_json(rc, {.dataset = true, .model = true, .train = true}).dump(2));
  auto p = [&](const std::string& name) { return (work / name).string(); };
  const fs::path log = work / "cli.log";

  std::size_t compared = 0;
  auto same = [&](const std::string& a, const std::string& b) {
    const bool eq = fs::exists(a) && fs::exists(b) && io::read_file(a) == io::read_file(b);
    led.expect(eq, a + " and " + b + " differ");
    ++compared;
  };
  for (const char* run : {"1", "2"}) {
    const std::string r = run;
    for (const char* split : {"train", "val"}) {
      const int code = run_cli("gen-data --config " + cfg + " --split " + split + " --seed 9 --out " +
                                   p(std::string(split) + r + ".csid"),
                               log);
      led.expect(code == 0, "gen-data exited " + std::to_string(code));
    }
    const int code = run_cli("train --config " + cfg + " --data " + p("train1.csid") + " --val " + p("val1.csid") +
                                 " --seed 3 --quiet --out " + p("model" + r + ".cpmb"),
                             log);
    led.expect(code == 0, "train exited " + std::to_string(code));
  }
  for (const char* split : {"train", "val"}) {
    same(p(std::string(split) + "1.csid"), p(std::string(split) + "2.csid"));
  }
  same(p("model1.cpmb"), p("model2.cpmb"));
  same(p("model1.history.csv"), p("model2.history.csv"));
  // Manifests name their own output paths; compare them with the paths removed.
  auto stripped = [&](const std::string& path) {
    auto j = nlohmann::json::parse(io::read_file(path));
    for (auto& o : j.at("outputs")) o.erase("path");
    return j;
  };
  const auto m1 = stripped(p("model1.cpmb.manifest.json")), m2 = stripped(p("model2.cpmb.manifest.json"));
  led.expect(m1 == m2, "train manifests differ beyond output paths");
  ++compared;
  return {led.ok(), "gen-data and train outputs byte-identical across runs (" + std::to_string(compared) +
                        " comparisons)"};
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  CLI::App app{"Runs the acceptance criteria and prints one line per criterion"};
  std::vector<int> selected;
  std::string work = (fs::temp_directory_path() / ("cpmamba_acceptance_" + std::to_string(::getpid()))).string();
  bool keep = false;
  app.add_option("--criterion,-c", selected, "Criterion numbers to run [default: all]")->check(CLI::Range(1, 12));
  app.add_option("--work-dir", work, "Scratch directory for generated data and checkpoints");
  app.add_flag("--keep", keep, "Keep the scratch directory");
  CLI11_PARSE(app, argc, argv);
  if (selected.empty()) {
    for (int i = 1; i <= 12; ++i) selected.push_back(i);
  }
  const std::set<int> todo(selected.begin(), selected.end());

  DeskProtocol desk(fs::path(work) / "desk");
  const std::map<int, std::pair<std::string, std::function<Outcome()>>> criteria{
      {1, {"gradient suite", gradient_suite}},
      {2, {"scan oracle", scan_oracle}},
      {3, {"ZOH exactness", zoh_exactness}},
      {4, {"channel oracles", channel_oracles}},
      {5, {"affine equivariance", affine_equivariance}},
      {6, {"overfit 8 samples", overfit}},
      {7, {"beats NP", [&] { return beats_np(desk); }}},
      {8, {"SNR trend", [&] { return snr_trend(desk); }}},
      {9, {"ablation direction", [&] { return ablation_direction(desk); }}},
      {10, {"complexity scaling", complexity_scaling}},
      {11, {"metric identities", metric_identities}},
      {12, {"determinism", [&] { return determinism(fs::path(work) / "determinism"); }}},
  };

  std::size_t failed = 0;
  for (int id : todo) {
    const auto& [name, fn] = criteria.at(id);
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = fn();
    } catch (const std::exception& e) {
      out = {false, std::string("error: ") + e.what()};
    }
    if (!out.pass) ++failed;
    std::cout << (out.pass ? "PASS" : "FAIL") << "  criterion " << id << " (" << name << "): " << out.summary
              << " [" << fmt(seconds_since(t0)) << " s]" << std::endl;
  }
  if (!keep) {
    std::error_code ec;
    fs::remove_all(work, ec);
  }
  return failed == 0 ? 0 : 1;
}
