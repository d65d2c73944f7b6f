#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cliq/ops.hpp"
#include "cliq/tensor.hpp"

namespace cliq {

// Per-task normalization parameters: one NormSite per backbone stage. Fresh
// banks start as the identity normalization; once frozen they are immutable.
class TaskNormBank {
 public:
  TaskNormBank() = default;
  TaskNormBank(std::string task_id, const std::vector<int>& site_channels);

  const std::string& task_id() const { return id_; }
  bool frozen() const { return frozen_; }
  void freeze();  // std::logic_error on double freeze

  int site_count() const { return static_cast<int>(sites_.size()); }
  const ops::NormSite& site(int s) const { return sites_[static_cast<std::size_t>(s)]; }
  // Throws CorruptBankError if the bank is frozen.
  ops::NormSite& mutable_site(int s);

  std::vector<int> site_channels() const;
  // Learnable parameters: gamma and beta at every site.
  std::size_t trainable_param_count() const;

  bool bit_equal(const TaskNormBank& other) const;

 private:
  std::string id_;
  std::vector<ops::NormSite> sites_;
  bool frozen_ = false;
};

struct PredictionHead {
  std::string task_id;
  Tensor weight;  // [1, C_S]
  Tensor bias;    // [1]

  static PredictionHead zeros(std::string task_id, int inputs);
  bool bit_equal(const PredictionHead& other) const;
};

// Ordered collection of frozen (bank, head) pairs plus the one designated
// distortion-aware bank used by the gating module.
class BankRegistry {
 public:
  // Bank must be frozen and structurally identical to existing banks.
  // Duplicate task ids raise std::logic_error.
  void add_task(TaskNormBank bank, PredictionHead head);

  bool has_task(const std::string& id) const;
  const TaskNormBank& bank(const std::string& id) const;
  const PredictionHead& head(const std::string& id) const;
  const std::vector<std::string>& task_order() const { return order_; }
  std::size_t task_count() const { return order_.size(); }

  void install_distortion_bank(TaskNormBank bank);  // must be frozen
  bool has_distortion_bank() const { return distortion_.has_value(); }
  const TaskNormBank& distortion_bank() const;

 private:
  std::vector<std::string> order_;
  std::map<std::string, TaskNormBank> banks_;
  std::map<std::string, PredictionHead> heads_;
  std::optional<TaskNormBank> distortion_;
};

// Trainable parameters introduced per task: 2 * sum(C_s) for the bank plus
// the head (C_head inputs, optionally the bias).
std::size_t per_task_param_count(const std::vector<int>& bn_site_channels,
                                 int head_inputs, bool count_head_bias = true);

}  // namespace cliq
