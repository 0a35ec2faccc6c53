#include "cpmamba/train/metrics.hpp"

#include <cmath>
#include <string>

#include "cpmamba/errors.hpp"
#include "cpmamba/numerics/tensor.hpp"

namespace cpmamba::train {

namespace {

void same_size(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw ShapeError(std::string(what) + ": prediction has " + std::to_string(a) + " entries, truth has " +
                     std::to_string(b));
  }
}

double ratio(double err, double energy) {
  if (!(energy > 0.0)) throw DomainError("nmse: ground truth has zero energy");
  return err / energy;
}

}  // namespace

double nmse(std::span<const double> pred, std::span<const double> truth) {
  same_size(pred.size(), truth.size(), "nmse");
  double err = 0.0, energy = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - truth[i];
    err += d * d;
    energy += truth[i] * truth[i];
  }
  return ratio(err, energy);
}

double nmse(std::span<const cd> pred, std::span<const cd> truth) {
  same_size(pred.size(), truth.size(), "nmse");
  double err = 0.0, energy = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    err += std::norm(pred[i] - truth[i]);
    energy += std::norm(truth[i]);
  }
  return ratio(err, energy);
}

Tensor nmse_loss(const Tensor& pred, const Tensor& truth) {
  if (pred.shape() != truth.shape()) {
    throw ShapeError("nmse_loss: prediction " + num::to_string(pred.shape()) + " vs truth " +
                     num::to_string(truth.shape()));
  }
  const auto p = pred.data();
  const auto t = truth.data();
  double err = 0.0, energy = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = p[i] - t[i];
    err += d * d;
    energy += t[i] * t[i];
  }
  Tensor out = Tensor::scalar(ratio(err, energy));
  num::detail::attach({pred}, out, [pred, truth, energy](std::span<const double> g) {
    if (!pred.requires_grad()) return;
    auto& gp = pred.impl()->ensure_grad();
    const auto p = pred.data();
    const auto t = truth.data();
    const double scale = 2.0 * g[0] / energy;
    for (std::size_t i = 0; i < p.size(); ++i) gp[i] += scale * (p[i] - t[i]);
  });
  return out;
}

ErrorMetrics error_metrics(std::span<const cd> pred, std::span<const cd> truth) {
  MetricAccumulator acc;
  acc.add(pred, truth);
  return {acc.rmse(), acc.mae()};
}

void MetricAccumulator::add(std::span<const cd> pred, std::span<const cd> truth) {
  same_size(pred.size(), truth.size(), "metrics");
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const cd d = pred[i] - truth[i];
    err_energy_ += std::norm(d);
    abs_sum_ += std::abs(d);
    truth_energy_ += std::norm(truth[i]);
  }
  entries_ += pred.size();
}

double MetricAccumulator::nmse() const { return ratio(err_energy_, truth_energy_); }

double MetricAccumulator::rmse() const {
  return entries_ == 0 ? 0.0 : std::sqrt(err_energy_ / static_cast<double>(entries_));
}

double MetricAccumulator::mae() const { return entries_ == 0 ? 0.0 : abs_sum_ / static_cast<double>(entries_); }

}  // namespace cpmamba::train
