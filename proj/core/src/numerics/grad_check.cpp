#include "cpmamba/numerics/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cpmamba/errors.hpp"
#include "cpmamba/numerics/rng.hpp"

namespace cpmamba::num {

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport grad_check(const std::function<Tensor()>& f, std::vector<Tensor> inputs,
                           const GradCheckOptions& options) {
  for (auto& t : inputs) {
    if (!t.requires_grad()) throw ConfigError("grad_check: every input must require grad");
    t.zero_grad();
  }
  {
    Tape tape;
    TapeScope scope(tape);
    Tensor loss = f();
    tape.backward(loss);
  }

  std::vector<std::pair<std::size_t, std::size_t>> picks;
  std::size_t total = 0;
  for (const auto& t : inputs) total += t.size();
  if (options.max_samples == 0 || options.max_samples >= total) {
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      for (std::size_t j = 0; j < inputs[i].size(); ++j) picks.emplace_back(i, j);
    }
  } else {
    Rng rng(options.seed, 0x67726164ULL);
    for (std::size_t s = 0; s < options.max_samples; ++s) {
      std::size_t flat = rng.below(total);
      std::size_t i = 0;
      while (flat >= inputs[i].size()) flat -= inputs[i++].size();
      picks.emplace_back(i, flat);
    }
  }

  GradCheckReport report;
  NoGradGuard no_grad;
  for (const auto& [i, j] : picks) {
    auto w = inputs[i].mutable_data();
    const double saved = w[j];
    double level = 0.0;
    const auto central = [&](double step) {
      const double hi = saved + step, lo = saved - step;
      w[j] = hi;
      const double up = f().item();
      w[j] = lo;
      const double down = f().item();
      w[j] = saved;
      level = std::max(std::abs(up), std::abs(down));
      return (up - down) / (hi - lo);
    };
    double numeric = central(options.step);
    if (options.min_step > 0.0) {
      constexpr double eps = std::numeric_limits<double>::epsilon();
      double best = numeric, best_err = std::numeric_limits<double>::infinity();
      double h = options.step, current = numeric, current_level = level;
      while (h / 10 >= options.min_step * (1 - 1e-9)) {
        const double next = central(h / 10);
        const double err = std::abs(current - next) + eps * current_level / h;
        if (err < best_err) best_err = err, best = current;
        h /= 10;
        current = next;
        current_level = level;
      }
      numeric = best;
    }
    GradCheckEntry e;
    e.tensor = i;
    e.index = j;
    e.analytic = inputs[i].has_grad() ? inputs[i].grad()[j] : 0.0;
    e.numeric = numeric;
    e.rel_error = relative_error(e.analytic, e.numeric, options.floor);
    report.max_rel_error = std::max(report.max_rel_error, e.rel_error);
    report.entries.push_back(e);
  }
  report.passed = report.max_rel_error < options.tolerance;
  return report;
}

GradCheckReport grad_check(const std::function<Tensor()>& f, Tensor input, const GradCheckOptions& options) {
  return grad_check(f, std::vector<Tensor>{std::move(input)}, options);
}

}  // namespace cpmamba::num
