#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cliq/backbone.hpp"
#include "cliq/normbank.hpp"
#include "cliq/synthdata.hpp"

namespace cliq {

inline constexpr const char* kDistortionBankId = "distortion-aware";

struct TrainConfig {
  float lr = 1e-3f;
  float lr_decay_factor = 10.0f;
  int decay_epoch = 8;  // 1-based; this epoch and later run at lr / factor
  int max_epochs = 12;
  int batch_pairs = 16;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float adam_eps = 1e-8f;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainReport {
  std::vector<double> epoch_loss;  // mean fidelity loss per epoch, in [0,1]
  double val_srcc = 0.0;
  double wall_seconds = 0.0;
  std::int64_t steps = 0;
};

// Probability that x beats y under a unit-variance comparison model:
// Phi((score_x - score_y) / sqrt(2)).
double thurstone_prob(double score_x, double score_y);

// 1 - sqrt(r * p) - sqrt((1-r)(1-p)), in [0,1]. r must be 0 or 1.
double fidelity_loss(int r, double p_hat);

// d(loss)/dp of the above; p_hat is clamped to [1e-6, 1-1e-6] before the
// square-root derivative (documented boundary behavior, not an error).
double fidelity_loss_grad(int r, double p_hat);

// Low-level loop: optimizes the given unfrozen bank's gamma/beta (running
// statistics update through the forward passes) and the head, via Adam on
// shuffled pair mini-batches. Shared by task training, gating-bank
// pretraining, and the shared-bank ablation.
TrainReport train_on_pairs(const FrozenBackbone& backbone, TaskNormBank& bank,
                           PredictionHead& head, const TaskDataset& dataset,
                           const PairSet& pairs, const TrainConfig& config);

// Train a fresh bank + head for the dataset's task, freeze, and register.
// Pre-existing registry entries are untouched.
TrainReport train_task(const FrozenBackbone& backbone, BankRegistry& registry,
                       const TaskDataset& dataset, const PairSet& pairs,
                       const TrainConfig& config);

// Same loop over a corpus covering every distortion kind, with a throwaway
// head; the frozen result becomes the registry's distortion-aware bank.
TrainReport pretrain_gating_bank(const FrozenBackbone& backbone, BankRegistry& registry,
                                 const TaskDataset& corpus, const PairSet& pairs,
                                 const TrainConfig& config);

}  // namespace cliq
