#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cliq/backbone.hpp"
#include "cliq/gating.hpp"
#include "cliq/metrics.hpp"
#include "cliq/normbank.hpp"
#include "cliq/predictor.hpp"
#include "cliq/synthdata.hpp"
#include "cliq/trainer.hpp"

namespace cliq {

struct SeedPack {
  std::uint64_t data = 1;
  std::uint64_t filters = 2;
  std::uint64_t training = 3;
  std::uint64_t kmeans = 4;

  bool operator==(const SeedPack&) const = default;
};

// "task-specific-bn" trains one bank per task (the method); "task-agnostic-bn"
// keeps fine-tuning a single shared bank along the sequence (the ablation).
enum class BaselineMode { task_specific_bn, task_agnostic_bn };

struct ExperimentConfig {
  std::vector<TaskSpec> tasks;
  std::vector<std::string> order;  // execution order over task ids
  std::string order_label = "default";
  SeedPack seeds;
  BackboneConfig backbone;
  TrainConfig train;
  GatingConfig gating;
  int pairs_per_image = 10;
  int corpus_images = 120;
  BaselineMode baseline = BaselineMode::task_specific_bn;

  // The default desk sequence: blur, contrast, white-noise, salt-pepper,
  // 100 images each, families alternating.
  static ExperimentConfig defaults();
  void validate() const;  // throws ConfigError
  std::string to_json_text() const;
  static ExperimentConfig from_json_text(const std::string& text);  // ConfigError
};

// Order-independent artifacts shared by every run of one config family:
// frozen filters, the distortion-aware bank, and the per-task data. Per-task
// seeds bind to task ids, never to sequence positions.
struct RunEnvironment {
  FrozenBackbone backbone;
  TaskNormBank distortion_bank;
  TrainReport corpus_report;
  std::map<std::string, TaskDataset> datasets;
  std::map<std::string, PairSet> pairs;
};

RunEnvironment prepare_environment(const ExperimentConfig& config);

// Datasets and pair sets only, no gating-bank pretraining. Same seeds and
// contents as the corresponding prepare_environment fields.
struct TaskData {
  std::map<std::string, TaskDataset> datasets;
  std::map<std::string, PairSet> pairs;
};
TaskData prepare_task_data(const ExperimentConfig& config);

enum class EvalMode { soft = 0, hard = 1, oracle = 2 };
const char* eval_mode_name(EvalMode mode);

struct ModeResults {
  metrics::SequenceResults soft;
  metrics::SequenceResults hard;
  metrics::SequenceResults oracle;

  const metrics::SequenceResults& by_mode(EvalMode mode) const;
};

struct RunOutcome {
  ExperimentConfig config;
  BankRegistry registry;  // per-task banks (task-specific mode)
  bool task_agnostic = false;
  TaskNormBank shared_bank;                 // ablation only
  std::vector<PredictionHead> shared_heads;  // ablation only, execution order
  CentroidStore store;
  ModeResults results;
  std::vector<TrainReport> task_reports;  // execution order
  // predictions[mode][t][k]: model after task t on test set k (k <= t)
  std::array<std::vector<std::vector<std::vector<float>>>, 3> predictions;
  std::vector<std::vector<float>> test_mos;  // per task, execution order
};

// The continual-learning protocol: pretrained gating bank first, then one
// task at a time; after each task, evaluate all seen test sets in soft, hard,
// and oracle modes.
RunOutcome run_sequence(const ExperimentConfig& config);
RunOutcome run_sequence(const ExperimentConfig& config, const RunEnvironment& env);

// Task orders derived from the config's task list. Labels: default,
// alternating, synthetic-first, realistic-first, each optionally suffixed
// with "-reversed".
std::vector<std::string> order_by_label(const ExperimentConfig& base,
                                        const std::string& label);  // ConfigError

struct OrderRun {
  std::string label;
  RunOutcome outcome;
};
std::vector<OrderRun> run_order_suite(const ExperimentConfig& base,
                                      const std::vector<std::string>& labels);

// Prefix means of PSI_t: the task-length robustness curve.
std::vector<double> length_curve(const metrics::SequenceResults& results);

// Divergence analysis over the per-task banks.
struct KlAnalysis {
  std::vector<std::string> tasks;
  std::vector<std::vector<double>> kl;          // KL(bank_i || bank_j)
  std::vector<std::vector<double>> cross_srcc;  // bank/head i tested on task j
  double kl_srcc_correlation = 0.0;
  double mean_within_family_kl = 0.0;
  double mean_cross_family_kl = 0.0;
};
KlAnalysis analyze_kl(const FrozenBackbone& backbone, const BankRegistry& registry,
                      const std::vector<TaskSpec>& specs,
                      const std::map<std::string, TaskDataset>& datasets);

// Checkpoint directory: manifest.json + payloads/*.bin, SHA-256 per payload.
void save_checkpoint(const std::filesystem::path& dir, const RunOutcome& outcome);

struct LoadedCheckpoint {
  ExperimentConfig config;
  FrozenBackbone backbone;
  BankRegistry registry;
  bool task_agnostic = false;
  TaskNormBank shared_bank;
  std::vector<PredictionHead> shared_heads;
  CentroidStore store;
  bool has_results = false;
  ModeResults results;
};
LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir);  // CheckpointError

// Gated/oracle prediction records for a loaded model over a test set.
std::vector<PredictionRecord> evaluate_loaded(const LoadedCheckpoint& loaded,
                                              const TaskDataset& dataset,
                                              EvalMode mode);

// File outputs. Everything except timings.csv is byte-deterministic for a
// fixed config.
void export_datasets(const std::filesystem::path& dir, const ExperimentConfig& config);
void write_run_outputs(const std::filesystem::path& dir, const RunOutcome& outcome);
void write_order_suite_outputs(const std::filesystem::path& dir,
                               const std::vector<OrderRun>& runs);
void write_predictions_csv(const std::filesystem::path& file,
                           const std::vector<std::string>& tasks,
                           const std::vector<std::string>& image_ids,
                           const std::vector<PredictionRecord>& records);

}  // namespace cliq
