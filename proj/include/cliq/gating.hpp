#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cliq/backbone.hpp"
#include "cliq/normbank.hpp"
#include "cliq/synthdata.hpp"
#include "cliq/tensor.hpp"

namespace cliq {

struct GatingConfig {
  int k = 8;
  float tau = 32.0f;
  std::vector<int> stages = {3, 4};  // 1-based stage indices

  void validate(int stage_count) const;
  bool operator==(const GatingConfig&) const = default;
};

struct KmeansResult {
  Tensor centroids;             // [K', C] with K' = min(K, N)
  std::vector<int> assignment;  // per input row
  std::vector<double> sse_history;
  int iterations = 0;
};

// Lloyd iterations from kmeans++ seeding. Stops when assignments stop
// changing or after 100 iterations. K > N is reduced to N; empty clusters
// are re-seeded to the point farthest from its current centroid.
KmeansResult kmeans(const Tensor& points, int k, std::uint64_t seed);

// Per-task, per-stage centroid summaries computed under the distortion-aware
// bank. Append-only during training, immutable at inference.
class CentroidStore {
 public:
  CentroidStore() = default;
  explicit CentroidStore(GatingConfig cfg) : cfg_(std::move(cfg)) {}

  const GatingConfig& config() const { return cfg_; }
  void add(const std::string& task, int stage, Tensor centroids);
  bool has(const std::string& task, int stage) const;
  const Tensor& centroids(const std::string& task, int stage) const;
  const std::vector<std::string>& task_order() const { return order_; }
  bool covers(const std::vector<std::string>& tasks) const;
  std::size_t entry_count() const { return entries_.size(); }

 private:
  GatingConfig cfg_;
  std::vector<std::string> order_;
  std::map<std::pair<std::string, int>, Tensor> entries_;
};

// Cluster the task's train-split pooled features at each gating stage under
// the registry's distortion-aware bank. Raises std::logic_error when no
// distortion bank is installed.
void summarize_task(const FrozenBackbone& backbone, const BankRegistry& registry,
                    const TaskDataset& dataset, CentroidStore& store,
                    std::uint64_t seed);

// min_k || feature - c_k ||_2
float min_distance(std::span<const float> feature, const Tensor& centroids);

// a_t = exp(-tau d_t) / sum_u exp(-tau d_u), max-shift stabilized.
std::vector<float> softmin_weights(const std::vector<float>& distances, float tau);

// Elementwise mean over the gating stage set.
std::vector<float> stage_average(const std::vector<std::vector<float>>& per_stage);

enum class GateMode { soft, hard };

// Forward-pass accounting for the complexity checks: counts are per image.
struct InferenceStats {
  std::int64_t quality_passes = 0;
  std::int64_t gating_passes = 0;
};

// Head weights for one [1,H,W] image. Soft: per-stage softmin, then stage
// average. Hard: one-hot at the argmin of the stage-averaged distances, ties
// toward the lower task index.
std::vector<float> gate(const FrozenBackbone& backbone, const BankRegistry& registry,
                        const CentroidStore& store, const Tensor& image, GateMode mode,
                        InferenceStats* stats = nullptr);

// Same computation against an explicit task list and distortion bank; used
// where per-task banks do not live in a registry (shared-bank ablation).
std::vector<float> gate_tasks(const FrozenBackbone& backbone,
                              const TaskNormBank& distortion_bank,
                              const std::vector<std::string>& tasks,
                              const CentroidStore& store, const Tensor& image,
                              GateMode mode, InferenceStats* stats = nullptr);

}  // namespace cliq
