#include "gradient_suite.hpp"

#include <algorithm>
#include <functional>

#include "cpmamba/model/layers.hpp"
#include "cpmamba/model/model.hpp"
#include "cpmamba/numerics/grad_check.hpp"
#include "cpmamba/numerics/ops.hpp"
#include "cpmamba/ssm/ssm.hpp"
#include "cpmamba/train/metrics.hpp"
#include "test_util.hpp"

namespace cpmamba::testutil {

using num::Tensor;

namespace {

// Contract against a fixed random tensor so every output entry matters.
Tensor project(const Tensor& y, std::uint64_t seed) {
  num::Rng rng = num::Rng::derive(seed, {0x70726f6aULL});
  return num::sum(num::mul(y, random_tensor(y.shape(), rng)));
}

GradResult check(std::string name, const std::function<Tensor()>& f, std::vector<Tensor> inputs) {
  const auto report = num::grad_check(f, std::move(inputs));
  return {std::move(name), report.max_rel_error, report.entries.size()};
}

// Distinct values at least `gap` apart, for max-pool inputs.
Tensor distinct_param(num::Shape shape, num::Rng& rng) {
  const std::size_t n = num::numel(shape);
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n);
  for (std::size_t i = n; i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
  return Tensor::parameter(std::move(shape), std::move(v));
}

}  // namespace

std::vector<GradResult> primitive_gradient_suite(std::uint64_t seed) {
  num::Rng rng = num::Rng::derive(seed, {0x6772616473756974ULL});
  std::vector<GradResult> out;
  const std::uint64_t ps = seed + 1;

  const std::pair<const char*, num::Unary> unaries[] = {{"silu", num::Unary::silu},
                                                        {"relu", num::Unary::relu},
                                                        {"sigmoid", num::Unary::sigmoid},
                                                        {"softplus", num::Unary::softplus},
                                                        {"exp", num::Unary::exp},
                                                        {"neg", num::Unary::neg}};
  for (const auto& [name, kind] : unaries) {
    Tensor x = random_param_off_zero({3, 4}, rng);
    out.push_back(check(name, [&, kind = kind] { return project(num::apply_unary(x, kind), ps); }, {x}));
  }
  {
    Tensor x = random_param({2, 3}, rng);
    out.push_back(check("affine", [&] { return project(num::affine(x, -1.7, 0.3), ps); }, {x}));
  }
  {
    Tensor a = random_param({2, 3, 4}, rng), b = random_param({3, 1}, rng);
    out.push_back(check("add_broadcast", [&] { return project(num::add(a, b), ps); }, {a, b}));
    out.push_back(check("sub_broadcast", [&] { return project(num::sub(a, b), ps); }, {a, b}));
    out.push_back(check("mul_broadcast", [&] { return project(num::mul(a, b), ps); }, {a, b}));
  }
  {
    Tensor x = random_param({5, 2}, rng);
    out.push_back(check("sum", [&] { return num::mul(num::sum(x), num::sum(x)); }, {x}));
    out.push_back(check("mean", [&] { return num::mul(num::mean(x), num::sum(x)); }, {x}));
  }
  {
    Tensor a = random_param({2, 3, 4}, rng), b = random_param({4, 5}, rng);
    out.push_back(check("matmul", [&] { return project(num::matmul(a, b), ps); }, {a, b}));
  }
  {
    Tensor x = random_param({2, 3, 4}, rng), w = random_param({4, 3}, rng), b = random_param({3}, rng);
    out.push_back(check("linear", [&] { return project(num::linear(x, w, b), ps); }, {x, w, b}));
  }
  {
    Tensor x = random_param({2, 2, 4, 3}, rng), k = random_param({3, 2, 3, 3}, rng), b = random_param({3}, rng);
    out.push_back(check("conv2d_3x3", [&] { return project(num::conv2d_3x3(x, k, b), ps); }, {x, k, b}));
  }
  {
    Tensor x = random_param({2, 6, 3}, rng), k = random_param({3, 4}, rng);
    out.push_back(check("causal_conv1d", [&] { return project(num::causal_conv1d(x, k), ps); }, {x, k}));
  }
  {
    Tensor x = random_param({3, 6}, rng, -2, 2), g = random_param({6}, rng), b = random_param({6}, rng);
    out.push_back(check("layer_norm", [&] { return project(num::layer_norm(x, g, b), ps); }, {x, g, b}));
  }
  {
    Tensor x = random_param({2, 3, 2, 3}, rng);
    out.push_back(check("pool_avg", [&] { return project(num::pool_global(x, num::Pool::avg), ps); }, {x}));
    Tensor xm = distinct_param({2, 3, 2, 3}, rng);
    out.push_back(check("pool_max", [&] { return project(num::pool_global(xm, num::Pool::max), ps); }, {xm}));
  }
  {
    Tensor x = random_param({4, 5}, rng);
    out.push_back(check("dropout", [&] {
      num::Rng mask(seed, 0x64726f70ULL);
      return project(num::dropout(x, 0.3, true, mask), ps);
    }, {x}));
  }
  {
    Tensor x = random_param({3, 5}, rng, -2, 2);
    out.push_back(check("softmax_last", [&] { return project(num::softmax_last(x), ps); }, {x}));
  }
  {
    Tensor x = random_param({2, 3, 4}, rng);
    out.push_back(check("reshape", [&] { return project(num::reshape(x, {6, 4}), ps); }, {x}));
    out.push_back(check("permute", [&] { return project(num::permute(x, {1, 2, 0}), ps); }, {x}));
    out.push_back(check("slice", [&] { return project(num::slice(x, 2, 1, 2), ps); }, {x}));
    out.push_back(check("pad_zeros", [&] { return project(num::pad_zeros(x, 1, 2, 1), ps); }, {x}));
  }
  {
    const std::size_t b = 2, len = 5, e = 3, n = 2;
    Tensor x = random_param({b, len, e}, rng), delta = random_param({b, len, e}, rng, 0.05, 0.8);
    Tensor bm = random_param({b, len, n}, rng), cm = random_param({b, len, n}, rng);
    Tensor a = random_param({e, n}, rng, -2.0, -0.2), d = random_param({e}, rng);
    out.push_back(check("selective_scan", [&] {
      return project(ssm::selective_scan({x, delta, bm, cm}, a, d), ps);
    }, {x, delta, bm, cm, a, d}));
    out.push_back(check("selective_scan_euler", [&] {
      return project(ssm::selective_scan({x, delta, bm, cm}, a, d, {.exact_zoh = false}), ps);
    }, {x, delta, bm, cm, a, d}));
  }
  {
    Tensor x = random_param({2, 3, 4}, rng);
    out.push_back(check("normalize", [&] { return project(model::normalize(x).values, ps); }, {x}));
    out.push_back(check("denormalize", [&] { return project(model::denormalize(x, {0.3, 1.7}), ps); }, {x}));
  }
  {
    Tensor p = random_param({2, 3, 4}, rng);
    const Tensor t = random_tensor({2, 3, 4}, rng);
    out.push_back(check("nmse_loss", [&] { return train::nmse_loss(p, t); }, {p}));
  }
  return out;
}

GradResult model_gradient_check(std::uint64_t seed, std::size_t samples) {
  const model::ModelConfig cfg = model::desk_model_preset();
  model::ModelState state = model::init_model(cfg, seed);
  num::Rng rng = num::Rng::derive(seed, {0x6d6f64656cULL});
  // Two samples of N_t = 4 antennas each.
  const std::size_t rows = 2 * 4;
  const Tensor x = random_tensor({rows, cfg.history, cfg.features()}, rng);
  const Tensor y = random_tensor({rows, cfg.horizon, cfg.features()}, rng);
  // Freshly initialized out projections and D are near or exactly zero, which
  // would hide the scan path; give every parameter a generic value.
  for (auto& [key, t] : state.params) {
    if (key.ends_with("a_log") || key.ends_with("dt_bias")) continue;
    for (auto& v : t.mutable_data()) v += rng.uniform(-0.1, 0.1);
  }
  // ReLU kinks in the SE-ResNet sit within 1e-5 of some weights while the
  // smallest Mamba gradients need a wide stencil, so the step adapts. Loss
  // evaluation noise puts differences below ~1e-11 out of reach, hence the
  // 1e-6 floor (absolute 1e-10 for tiny gradients).
  const auto report = num::grad_check(
      [&] { return train::nmse_loss(model::forward(x, state), y); }, state.parameters(),
      {.step = 1e-3, .tolerance = 1e-4, .floor = 1e-6, .min_step = 1e-7, .max_samples = samples, .seed = seed});
  return {"cpmamba_nmse_loss", report.max_rel_error, report.entries.size()};
}

}  // namespace cpmamba::testutil
