#include "granorm/optimizer.hpp"

#include <cmath>

#include "granorm/error.hpp"

namespace granorm {

void adam_step(ParamStore& store, const std::vector<Tensor>& grads, AdamState& state,
               const AdamConfig& config) {
  if (grads.size() != store.size()) {
    throw ShapeError("adam_step: " + std::to_string(grads.size()) + " gradients for " +
                     std::to_string(store.size()) + " parameters");
  }
  if (state.m.empty()) {
    for (std::size_t i = 0; i < store.size(); ++i) {
      state.m.emplace_back(store.value(i).shape());
      state.v.emplace_back(store.value(i).shape());
    }
  }
  for (std::size_t i = 0; i < store.size(); ++i) {
    if (!grads[i].same_shape(store.value(i)) || !state.m[i].same_shape(store.value(i))) {
      throw ShapeError("adam_step: shape mismatch for parameter '" + store.name(i) + "'");
    }
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < store.size(); ++i) {
    Tensor& p = store.value(i);
    Tensor& m = state.m[i];
    Tensor& v = state.v[i];
    const Tensor& g = grads[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = config.beta1 * m[k] + (1.0 - config.beta1) * g[k];
      v[k] = config.beta2 * v[k] + (1.0 - config.beta2) * g[k] * g[k];
      double mhat = m[k] / bc1;
      double vhat = v[k] / bc2;
      p[k] -= config.lr * mhat / (std::sqrt(vhat) + config.eps);
    }
  }
}

double global_norm(const std::vector<Tensor>& grads) {
  double sq = 0.0;
  for (const auto& g : grads) {
    for (double x : g.data()) sq += x * x;
  }
  return std::sqrt(sq);
}

double clip_global_norm(std::vector<Tensor>& grads, double max_norm) {
  double norm = global_norm(grads);
  if (norm > max_norm && norm > 0.0) {
    double s = max_norm / norm;
    for (auto& g : grads) {
      for (auto& x : g.data()) x *= s;
    }
  }
  return norm;
}

}  // namespace granorm
