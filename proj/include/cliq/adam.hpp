#pragma once

#include <cstdint>
#include <span>

#include "cliq/tensor.hpp"

namespace cliq {

// Adam state for one parameter tensor: first/second moment accumulators plus
// the shared step counter and hyperparameters.
struct AdamState {
  Tensor m;  // first moment, same shape as the parameters
  Tensor v;  // second moment
  std::int64_t step = 0;
  float lr = 1e-3f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;

  static AdamState for_params(const Tensor& params, float lr);
  static AdamState for_size(std::size_t n, float lr);
};

// One Adam update with bias correction, in place. Deterministic; throws
// std::invalid_argument on any shape mismatch or non-positive lr.
void adam_step(Tensor& params, const Tensor& grads, AdamState& state);
void adam_step(std::span<float> params, std::span<const float> grads, AdamState& state);

}  // namespace cliq
