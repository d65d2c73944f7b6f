#include "cliq/trainer.hpp"

#include <chrono>
#include <cmath>
#include <set>
#include <stdexcept>

#include "cliq/adam.hpp"
#include "cliq/metrics.hpp"
#include "cliq/rng.hpp"
#include "cliq/statfn.hpp"

namespace cliq {

namespace {

constexpr double kProbClamp = 1e-6;
constexpr double kSqrt2 = 1.4142135623730951;

void check_binary(int r) {
  if (r != 0 && r != 1) throw std::invalid_argument("comparison label must be 0 or 1");
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lr > 0.0f)) throw std::invalid_argument("train config: lr must be positive");
  if (batch_pairs < 1) throw std::invalid_argument("train config: batch_pairs must be >= 1");
  if (max_epochs < 1) throw std::invalid_argument("train config: max_epochs must be >= 1");
  if (decay_epoch > max_epochs) {
    throw std::invalid_argument("train config: decay epoch beyond max epochs");
  }
  if (!(lr_decay_factor >= 1.0f)) {
    throw std::invalid_argument("train config: decay factor must be >= 1");
  }
}

double thurstone_prob(double score_x, double score_y) {
  if (!std::isfinite(score_x) || !std::isfinite(score_y)) {
    throw std::invalid_argument("thurstone_prob: scores must be finite");
  }
  return normal_cdf((score_x - score_y) / kSqrt2);
}

double fidelity_loss(int r, double p_hat) {
  check_binary(r);
  if (!(p_hat >= 0.0 && p_hat <= 1.0)) {
    throw std::invalid_argument("fidelity_loss: p_hat outside [0,1]");
  }
  const double rd = static_cast<double>(r);
  return 1.0 - std::sqrt(rd * p_hat) - std::sqrt((1.0 - rd) * (1.0 - p_hat));
}

double fidelity_loss_grad(int r, double p_hat) {
  check_binary(r);
  if (!(p_hat >= 0.0 && p_hat <= 1.0)) {
    throw std::invalid_argument("fidelity_loss_grad: p_hat outside [0,1]");
  }
  const double p = std::min(1.0 - kProbClamp, std::max(kProbClamp, p_hat));
  // The inactive branch contributes zero when r is binary.
  return r == 1 ? -0.5 / std::sqrt(p) : 0.5 / std::sqrt(1.0 - p);
}

TrainReport train_on_pairs(const FrozenBackbone& backbone, TaskNormBank& bank,
                           PredictionHead& head, const TaskDataset& dataset,
                           const PairSet& pairs, const TrainConfig& config) {
  config.validate();
  if (bank.frozen()) throw std::logic_error("train_on_pairs: bank is frozen");
  if (pairs.task_id != dataset.task_id) {
    throw std::invalid_argument("train_on_pairs: pair set is for task '" +
                                pairs.task_id + "'");
  }
  const int n_train = static_cast<int>(dataset.train.size());
  for (const auto& p : pairs.pairs) {
    if (p.x < 0 || p.x >= n_train || p.y < 0 || p.y >= n_train) {
      throw std::invalid_argument("train_on_pairs: pair index outside train split");
    }
  }
  if (pairs.pairs.empty()) throw std::invalid_argument("train_on_pairs: empty pair set");

  const auto t0 = std::chrono::steady_clock::now();
  const int stages = backbone.stage_count();

  std::vector<AdamState> gamma_state, beta_state;
  for (int s = 0; s < stages; ++s) {
    gamma_state.push_back(AdamState::for_size(bank.site(s).gamma.size(), config.lr));
    beta_state.push_back(AdamState::for_size(bank.site(s).beta.size(), config.lr));
  }
  AdamState head_w_state = AdamState::for_params(head.weight, config.lr);
  AdamState head_b_state = AdamState::for_params(head.bias, config.lr);
  for (AdamState* st : {&head_w_state, &head_b_state}) {
    st->beta1 = config.beta1;
    st->beta2 = config.beta2;
    st->eps = config.adam_eps;
  }
  for (int s = 0; s < stages; ++s) {
    for (AdamState* st : {&gamma_state[static_cast<std::size_t>(s)],
                          &beta_state[static_cast<std::size_t>(s)]}) {
      st->beta1 = config.beta1;
      st->beta2 = config.beta2;
      st->eps = config.adam_eps;
    }
  }

  TrainReport report;
  Rng shuffle_rng(derive_seed(config.seed, "shuffle"));
  std::vector<std::size_t> order(pairs.pairs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const float lr = epoch >= config.decay_epoch ? config.lr / config.lr_decay_factor
                                                 : config.lr;
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;

    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.batch_pairs)) {
      const std::size_t count =
          std::min(order.size() - start, static_cast<std::size_t>(config.batch_pairs));

      // One batch holds both pair sides: x images first, then y images.
      std::vector<const Tensor*> images;
      images.reserve(2 * count);
      for (std::size_t i = 0; i < count; ++i) {
        const auto& p = pairs.pairs[order[start + i]];
        images.push_back(&dataset.train[static_cast<std::size_t>(p.x)].image);
      }
      for (std::size_t i = 0; i < count; ++i) {
        const auto& p = pairs.pairs[order[start + i]];
        images.push_back(&dataset.train[static_cast<std::size_t>(p.y)].image);
      }
      const Tensor batch = stack_images(images);

      QualityOutput fwd =
          forward_quality(backbone, bank, head, batch, ops::BnMode::train);

      std::vector<float> grad_scores(2 * count, 0.0f);
      for (std::size_t i = 0; i < count; ++i) {
        const auto& p = pairs.pairs[order[start + i]];
        const double sx = fwd.scores[i];
        const double sy = fwd.scores[count + i];
        const double diff = (sx - sy) / kSqrt2;
        const double p_hat = normal_cdf(diff);
        loss_sum += fidelity_loss(p.label, p_hat);
        const double upstream = fidelity_loss_grad(p.label, p_hat) *
                                normal_pdf(diff) / kSqrt2 /
                                static_cast<double>(count);
        grad_scores[i] += static_cast<float>(upstream);
        grad_scores[count + i] -= static_cast<float>(upstream);
      }

      const ParamGrads grads = backward_to_params(backbone, grad_scores, fwd, head);

      for (int s = 0; s < stages; ++s) {
        ops::NormSite& site = bank.mutable_site(s);
        gamma_state[static_cast<std::size_t>(s)].lr = lr;
        beta_state[static_cast<std::size_t>(s)].lr = lr;
        adam_step(std::span<float>(site.gamma),
                  std::span<const float>(grads.d_gamma[static_cast<std::size_t>(s)]),
                  gamma_state[static_cast<std::size_t>(s)]);
        adam_step(std::span<float>(site.beta),
                  std::span<const float>(grads.d_beta[static_cast<std::size_t>(s)]),
                  beta_state[static_cast<std::size_t>(s)]);
      }
      head_w_state.lr = lr;
      head_b_state.lr = lr;
      adam_step(head.weight, grads.d_head_weight, head_w_state);
      adam_step(head.bias, grads.d_head_bias, head_b_state);
      report.steps += 1;
    }
    report.epoch_loss.push_back(loss_sum / static_cast<double>(pairs.pairs.size()));
  }

  // Validation SRCC, reporting only (no early stopping).
  if (dataset.val.size() >= 2) {
    std::vector<const Tensor*> val_images;
    std::vector<float> val_mos;
    for (const ImageSample& s : dataset.val) {
      val_images.push_back(&s.image);
      val_mos.push_back(s.mos);
    }
    const QualityOutput out =
        forward_quality(backbone, const_cast<const TaskNormBank&>(bank), head,
                        stack_images(val_images));
    report.val_srcc = metrics::srcc(out.scores, val_mos);
  }

  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

TrainReport train_task(const FrozenBackbone& backbone, BankRegistry& registry,
                       const TaskDataset& dataset, const PairSet& pairs,
                       const TrainConfig& config) {
  if (registry.has_task(dataset.task_id)) {
    throw std::logic_error("train_task: task '" + dataset.task_id + "' already trained");
  }
  TaskNormBank bank(dataset.task_id, backbone.config().channels);
  PredictionHead head =
      PredictionHead::zeros(dataset.task_id, backbone.config().channels.back());
  TrainReport report = train_on_pairs(backbone, bank, head, dataset, pairs, config);
  bank.freeze();
  registry.add_task(std::move(bank), std::move(head));
  return report;
}

TrainReport pretrain_gating_bank(const FrozenBackbone& backbone, BankRegistry& registry,
                                 const TaskDataset& corpus, const PairSet& pairs,
                                 const TrainConfig& config) {
  std::set<Distortion> seen;
  for (const ImageSample& s : corpus.train) seen.insert(s.kind);
  if (seen.size() != all_distortions().size()) {
    throw std::invalid_argument(
        "pretrain_gating_bank: corpus must cover every distortion kind");
  }
  TaskNormBank bank(kDistortionBankId, backbone.config().channels);
  PredictionHead throwaway =
      PredictionHead::zeros(kDistortionBankId, backbone.config().channels.back());
  TrainReport report = train_on_pairs(backbone, bank, throwaway, corpus, pairs, config);
  bank.freeze();
  registry.install_distortion_bank(std::move(bank));
  return report;
}

}  // namespace cliq
