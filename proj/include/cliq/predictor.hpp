#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cliq/backbone.hpp"
#include "cliq/gating.hpp"
#include "cliq/normbank.hpp"
#include "cliq/tensor.hpp"

namespace cliq {

struct PredictionRecord {
  std::string image_id;
  std::vector<std::optional<float>> head_scores;  // absent slots in hard mode
  std::vector<float> weights;
  float q_hat = 0.0f;
  std::string mode;  // "oracle:<task>" | "soft" | "hard"
};

// Score one [1,H,W] image under the named task's frozen bank and head.
float predict_oracle(const FrozenBackbone& backbone, const BankRegistry& registry,
                     const Tensor& image, const std::string& task_id,
                     InferenceStats* stats = nullptr);

// One score per registered task, in registry order.
std::vector<float> predict_all_heads(const FrozenBackbone& backbone,
                                     const BankRegistry& registry, const Tensor& image,
                                     InferenceStats* stats = nullptr);

// Gate-weighted quality. Soft mode evaluates every head; hard mode evaluates
// only the selected head and leaves the other score slots absent.
PredictionRecord predict_gated(const FrozenBackbone& backbone,
                               const BankRegistry& registry, const CentroidStore& store,
                               const Tensor& image, GateMode mode,
                               InferenceStats* stats = nullptr);

}  // namespace cliq
