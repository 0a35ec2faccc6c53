#include "cpmamba/numerics/adam.hpp"

#include <cmath>

#include "cpmamba/errors.hpp"

namespace cpmamba::num {

AdamState::AdamState(const std::vector<Tensor>& params, AdamOptions options) : options_(options) {
  shapes_.reserve(params.size());
  for (const auto& p : params) {
    shapes_.push_back(p.shape());
    m_.emplace_back(p.size(), 0.0);
    v_.emplace_back(p.size(), 0.0);
  }
}

void AdamState::step(std::vector<Tensor>& params, double lr) {
  if (!(lr > 0.0)) throw ConfigError("adam: learning rate must be positive");
  if (params.size() != shapes_.size()) {
    throw ShapeError("adam: expected " + std::to_string(shapes_.size()) + " parameters, got " +
                     std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].shape() != shapes_[i]) {
      throw ShapeError("adam: parameter " + std::to_string(i) + " has shape " + to_string(params[i].shape()) +
                       ", state expects " + to_string(shapes_[i]));
    }
  }
  ++step_;
  const double b1 = options_.beta1;
  const double b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].has_grad()) continue;
    auto w = params[i].mutable_data();
    const auto g = params[i].grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = b1 * m[j] + (1.0 - b1) * g[j];
      v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
      const double m_hat = m[j] / c1;
      const double v_hat = v[j] / c2;
      w[j] -= lr * m_hat / (std::sqrt(v_hat) + options_.eps);
    }
  }
}

}  // namespace cpmamba::num
