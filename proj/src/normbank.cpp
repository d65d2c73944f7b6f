#include "cliq/normbank.hpp"

#include <cstring>
#include <stdexcept>

#include "cliq/errors.hpp"

namespace cliq {

namespace {

bool site_bit_equal(const ops::NormSite& a, const ops::NormSite& b) {
  const auto eq = [](const std::vector<float>& x, const std::vector<float>& y) {
    return x.size() == y.size() &&
           std::memcmp(x.data(), y.data(), x.size() * sizeof(float)) == 0;
  };
  return eq(a.running_mean, b.running_mean) && eq(a.running_var, b.running_var) &&
         eq(a.gamma, b.gamma) && eq(a.beta, b.beta);
}

}  // namespace

TaskNormBank::TaskNormBank(std::string task_id, const std::vector<int>& site_channels)
    : id_(std::move(task_id)) {
  sites_.reserve(site_channels.size());
  for (const int c : site_channels) {
    if (c <= 0) throw std::invalid_argument("bank site channels must be positive");
    sites_.push_back(ops::NormSite::identity(c));
  }
}

void TaskNormBank::freeze() {
  if (frozen_) throw std::logic_error("bank '" + id_ + "' is already frozen");
  frozen_ = true;
}

ops::NormSite& TaskNormBank::mutable_site(int s) {
  if (frozen_) {
    throw CorruptBankError("bank '" + id_ + "' is frozen; mutation refused");
  }
  return sites_[static_cast<std::size_t>(s)];
}

std::vector<int> TaskNormBank::site_channels() const {
  std::vector<int> c;
  c.reserve(sites_.size());
  for (const auto& s : sites_) c.push_back(s.channels());
  return c;
}

std::size_t TaskNormBank::trainable_param_count() const {
  std::size_t n = 0;
  for (const auto& s : sites_) n += 2 * static_cast<std::size_t>(s.channels());
  return n;
}

bool TaskNormBank::bit_equal(const TaskNormBank& other) const {
  if (id_ != other.id_ || frozen_ != other.frozen_ ||
      sites_.size() != other.sites_.size()) {
    return false;
  }
  for (std::size_t i = 0; i < sites_.size(); ++i) {
    if (!site_bit_equal(sites_[i], other.sites_[i])) return false;
  }
  return true;
}

PredictionHead PredictionHead::zeros(std::string task_id, int inputs) {
  PredictionHead h;
  h.task_id = std::move(task_id);
  h.weight = Tensor({1, inputs});
  h.bias = Tensor({1});
  return h;
}

bool PredictionHead::bit_equal(const PredictionHead& other) const {
  return task_id == other.task_id && weight.bit_equal(other.weight) &&
         bias.bit_equal(other.bias);
}

void BankRegistry::add_task(TaskNormBank bank, PredictionHead head) {
  if (bank.task_id() != head.task_id) {
    throw std::invalid_argument("registry: bank/head task id mismatch");
  }
  if (banks_.count(bank.task_id())) {
    throw std::logic_error("registry: task '" + bank.task_id() + "' already present");
  }
  if (!bank.frozen()) {
    throw std::invalid_argument("registry: bank must be frozen before registration");
  }
  if (!order_.empty() &&
      bank.site_channels() != banks_.at(order_.front()).site_channels()) {
    throw std::invalid_argument("registry: bank layout differs from existing banks");
  }
  order_.push_back(bank.task_id());
  heads_.emplace(head.task_id, std::move(head));
  banks_.emplace(bank.task_id(), std::move(bank));
}

bool BankRegistry::has_task(const std::string& id) const { return banks_.count(id) > 0; }

const TaskNormBank& BankRegistry::bank(const std::string& id) const {
  const auto it = banks_.find(id);
  if (it == banks_.end()) throw std::invalid_argument("registry: unknown task '" + id + "'");
  return it->second;
}

const PredictionHead& BankRegistry::head(const std::string& id) const {
  const auto it = heads_.find(id);
  if (it == heads_.end()) throw std::invalid_argument("registry: unknown task '" + id + "'");
  return it->second;
}

void BankRegistry::install_distortion_bank(TaskNormBank bank) {
  if (!bank.frozen()) {
    throw std::invalid_argument("registry: distortion bank must be frozen");
  }
  if (distortion_) throw std::logic_error("registry: distortion bank already installed");
  distortion_ = std::move(bank);
}

const TaskNormBank& BankRegistry::distortion_bank() const {
  if (!distortion_) throw std::logic_error("registry: no distortion bank installed");
  return *distortion_;
}

std::size_t per_task_param_count(const std::vector<int>& bn_site_channels,
                                 int head_inputs, bool count_head_bias) {
  std::size_t n = 0;
  for (const int c : bn_site_channels) n += 2 * static_cast<std::size_t>(c);
  n += static_cast<std::size_t>(head_inputs);
  if (count_head_bias) n += 1;
  return n;
}

}  // namespace cliq
