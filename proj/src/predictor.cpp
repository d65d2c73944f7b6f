#include "cliq/predictor.hpp"

#include <stdexcept>

#include "cliq/synthdata.hpp"

namespace cliq {

float predict_oracle(const FrozenBackbone& backbone, const BankRegistry& registry,
                     const Tensor& image, const std::string& task_id,
                     InferenceStats* stats) {
  const TaskNormBank& bank = registry.bank(task_id);
  const PredictionHead& head = registry.head(task_id);
  const QualityOutput out =
      forward_quality(backbone, bank, head, stack_images({&image}));
  if (stats) stats->quality_passes += 1;
  return out.scores[0];
}

std::vector<float> predict_all_heads(const FrozenBackbone& backbone,
                                     const BankRegistry& registry, const Tensor& image,
                                     InferenceStats* stats) {
  if (registry.task_count() == 0) {
    throw std::logic_error("predict_all_heads: empty registry");
  }
  std::vector<float> scores;
  scores.reserve(registry.task_count());
  for (const std::string& task : registry.task_order()) {
    scores.push_back(predict_oracle(backbone, registry, image, task, stats));
  }
  return scores;
}

PredictionRecord predict_gated(const FrozenBackbone& backbone,
                               const BankRegistry& registry, const CentroidStore& store,
                               const Tensor& image, GateMode mode,
                               InferenceStats* stats) {
  PredictionRecord rec;
  rec.weights = gate(backbone, registry, store, image, mode, stats);
  rec.mode = mode == GateMode::soft ? "soft" : "hard";
  const auto& tasks = registry.task_order();
  rec.head_scores.assign(tasks.size(), std::nullopt);

  if (mode == GateMode::soft) {
    double acc = 0.0;
    for (std::size_t t = 0; t < tasks.size(); ++t) {
      const float score = predict_oracle(backbone, registry, image, tasks[t], stats);
      rec.head_scores[t] = score;
      acc += static_cast<double>(rec.weights[t]) * score;
    }
    rec.q_hat = static_cast<float>(acc);
    return rec;
  }

  // Hard mode: the selected head gets the only quality pass.
  std::size_t best = 0;
  for (std::size_t t = 1; t < rec.weights.size(); ++t) {
    if (rec.weights[t] > rec.weights[best]) best = t;
  }
  const float score = predict_oracle(backbone, registry, image, tasks[best], stats);
  rec.head_scores[best] = score;
  rec.q_hat = score;
  return rec;
}

}  // namespace cliq
