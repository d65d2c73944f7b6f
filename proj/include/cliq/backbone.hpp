#pragma once

#include <cstdint>
#include <vector>

#include "cliq/normbank.hpp"
#include "cliq/ops.hpp"
#include "cliq/tensor.hpp"

namespace cliq {

// Geometry of the frozen feature extractor: a plain conv / norm / relu /
// maxpool stack. Stage s halves the spatial side, so the input side must be
// divisible by 2^stage_count.
struct BackboneConfig {
  int stage_count = 4;
  std::vector<int> channels = {8, 16, 32, 64};
  int kernel = 3;
  int conv_stride = 1;
  int input_channels = 1;
  int input_side = 32;
  std::uint64_t filter_seed = 0;

  void validate() const;  // throws std::invalid_argument
  bool operator==(const BackboneConfig&) const = default;
};

// He-style seeded Gaussian filters, immutable after construction.
// Reconstruction from the same config is bit-identical.
class FrozenBackbone {
 public:
  static FrozenBackbone build(const BackboneConfig& config);

  const BackboneConfig& config() const { return config_; }
  int stage_count() const { return config_.stage_count; }
  const Tensor& filters(int stage) const { return filters_[static_cast<std::size_t>(stage)]; }

 private:
  BackboneConfig config_;
  std::vector<Tensor> filters_;
};

struct StageCaches {
  ops::ConvCache conv;
  ops::BnCache bn;
  ops::ReluCache relu;
  ops::PoolCache pool;
};

struct Features {
  std::vector<Tensor> stage_out;  // post-pool activation per stage
  std::vector<Tensor> pooled;     // [N, C_s] globally pooled per stage
  std::vector<StageCaches> caches;
  ops::GapCache last_gap;         // pooling cache for the head path
};

struct QualityOutput {
  std::vector<float> scores;  // one per image
  Features features;
  ops::LinearCache head_cache;
};

// Gradients for everything trainable: gamma/beta at every site plus the head.
struct ParamGrads {
  std::vector<std::vector<float>> d_gamma;
  std::vector<std::vector<float>> d_beta;
  Tensor d_head_weight;  // [1, C_S]
  Tensor d_head_bias;    // [1]
};

// Staged forward pass under the given bank. Train mode on a frozen bank
// raises CorruptBankError. Eval mode never mutates the bank.
Features forward_features(const FrozenBackbone& backbone, TaskNormBank& bank,
                          const Tensor& batch, ops::BnMode mode);
Features forward_features(const FrozenBackbone& backbone, const TaskNormBank& bank,
                          const Tensor& batch);  // eval only

// Features plus the head score per image.
QualityOutput forward_quality(const FrozenBackbone& backbone, TaskNormBank& bank,
                              const PredictionHead& head, const Tensor& batch,
                              ops::BnMode mode);
QualityOutput forward_quality(const FrozenBackbone& backbone, const TaskNormBank& bank,
                              const PredictionHead& head, const Tensor& batch);

// Chain rule from per-image score gradients down to the trainable parameters.
// Needs the caches of a matching train-mode forward_quality.
ParamGrads backward_to_params(const FrozenBackbone& backbone,
                              const std::vector<float>& grad_scores,
                              const QualityOutput& forward,
                              const PredictionHead& head);

}  // namespace cliq
