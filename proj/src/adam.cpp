#include "cliq/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace cliq {

AdamState AdamState::for_params(const Tensor& params, float lr) {
  AdamState s;
  s.m = Tensor::zeros(params.shape());
  s.v = Tensor::zeros(params.shape());
  s.lr = lr;
  return s;
}

AdamState AdamState::for_size(std::size_t n, float lr) {
  AdamState s;
  s.m = Tensor::zeros({static_cast<int>(n)});
  s.v = Tensor::zeros({static_cast<int>(n)});
  s.lr = lr;
  return s;
}

void adam_step(Tensor& params, const Tensor& grads, AdamState& state) {
  if (!params.same_shape(grads) || !params.same_shape(state.m) ||
      !params.same_shape(state.v)) {
    throw std::invalid_argument("adam_step: shape mismatch");
  }
  adam_step(params.flat(), grads.flat(), state);
}

void adam_step(std::span<float> params, std::span<const float> grads, AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.m.size() ||
      params.size() != state.v.size()) {
    throw std::invalid_argument("adam_step: shape mismatch");
  }
  if (!(state.lr > 0.0f)) throw std::invalid_argument("adam_step: lr must be positive");

  state.step += 1;
  const float b1 = state.beta1;
  const float b2 = state.beta2;
  const float corr1 = 1.0f - std::pow(b1, static_cast<float>(state.step));
  const float corr2 = 1.0f - std::pow(b2, static_cast<float>(state.step));

  float* p = params.data();
  const float* g = grads.data();
  float* m = state.m.data();
  float* v = state.v.data();
  const std::size_t n = params.size();
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = b1 * m[i] + (1.0f - b1) * g[i];
    v[i] = b2 * v[i] + (1.0f - b2) * g[i] * g[i];
    const float m_hat = m[i] / corr1;
    const float v_hat = v[i] / corr2;
    p[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
  }
}

}  // namespace cliq
