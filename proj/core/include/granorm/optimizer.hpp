#pragma once

#include <vector>

#include "granorm/param_store.hpp"
#include "granorm/tensor.hpp"

namespace granorm {

struct AdamConfig {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  long step = 0;
};

/// One bias-corrected Adam update. `grads` must be aligned with `store`.
void adam_step(ParamStore& store, const std::vector<Tensor>& grads, AdamState& state,
               const AdamConfig& config = {});

double global_norm(const std::vector<Tensor>& grads);

/// Rescales `grads` in place so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
double clip_global_norm(std::vector<Tensor>& grads, double max_norm);

}  // namespace granorm
