#include "cliq/backbone.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "cliq/errors.hpp"
#include "cliq/rng.hpp"

namespace cliq {

namespace {

constexpr float kBnMomentum = 0.1f;
constexpr float kBnEps = 1e-5f;

}  // namespace

void BackboneConfig::validate() const {
  if (stage_count < 2) throw std::invalid_argument("backbone: need at least 2 stages");
  if (static_cast<int>(channels.size()) != stage_count) {
    throw std::invalid_argument("backbone: channels list must have one entry per stage");
  }
  for (const int c : channels) {
    if (c <= 0) throw std::invalid_argument("backbone: channels must be positive");
  }
  if (kernel < 1) throw std::invalid_argument("backbone: kernel must be >= 1");
  if (conv_stride < 1) throw std::invalid_argument("backbone: stride must be >= 1");
  if (input_channels < 1) throw std::invalid_argument("backbone: input channels must be >= 1");
  if (input_side < kernel) throw std::invalid_argument("backbone: input side smaller than kernel");
  const int pool_factor = 1 << stage_count;
  if (input_side % pool_factor != 0) {
    throw std::invalid_argument("backbone: input side must be divisible by 2^stages");
  }
}

FrozenBackbone FrozenBackbone::build(const BackboneConfig& config) {
  config.validate();
  FrozenBackbone b;
  b.config_ = config;
  Rng rng(config.filter_seed);
  int c_in = config.input_channels;
  for (int s = 0; s < config.stage_count; ++s) {
    const int c_out = config.channels[static_cast<std::size_t>(s)];
    Tensor f({c_out, c_in, config.kernel, config.kernel});
    const float stddev =
        std::sqrt(2.0f / static_cast<float>(c_in * config.kernel * config.kernel));
    for (float& v : f.flat()) {
      v = stddev * static_cast<float>(rng.next_gaussian());
    }
    b.filters_.push_back(std::move(f));
    c_in = c_out;
  }
  return b;
}

Features forward_features(const FrozenBackbone& backbone, TaskNormBank& bank,
                          const Tensor& batch, ops::BnMode mode) {
  const BackboneConfig& cfg = backbone.config();
  if (bank.site_count() != cfg.stage_count) {
    throw std::invalid_argument("forward_features: bank has " +
                                std::to_string(bank.site_count()) + " sites, backbone has " +
                                std::to_string(cfg.stage_count) + " stages");
  }
  if (bank.site_channels() != cfg.channels) {
    throw std::invalid_argument("forward_features: bank channel layout mismatch");
  }
  if (batch.rank() != 4 || batch.dim(1) != cfg.input_channels) {
    throw std::invalid_argument("forward_features: batch must be [N,C_in,H,W]");
  }
  const int pool_factor = 1 << cfg.stage_count;
  if (batch.dim(2) % pool_factor != 0 || batch.dim(3) % pool_factor != 0 ||
      batch.dim(2) < cfg.kernel || batch.dim(3) < cfg.kernel) {
    throw std::invalid_argument("forward_features: spatial dims incompatible with stages");
  }
  if (mode == ops::BnMode::train && bank.frozen()) {
    throw CorruptBankError("forward_features: train mode on frozen bank '" +
                           bank.task_id() + "'");
  }

  Features out;
  out.caches.resize(static_cast<std::size_t>(cfg.stage_count));
  Tensor x = batch;
  for (int s = 0; s < cfg.stage_count; ++s) {
    StageCaches& sc = out.caches[static_cast<std::size_t>(s)];
    auto [conv, conv_cache] = ops::conv2d_forward(x, backbone.filters(s), cfg.conv_stride);
    sc.conv = std::move(conv_cache);

    ops::NormSite& site = mode == ops::BnMode::train
                              ? bank.mutable_site(s)
                              : const_cast<ops::NormSite&>(bank.site(s));
    auto [bn, bn_cache] = ops::batchnorm_forward(conv, site, mode, kBnMomentum, kBnEps);
    sc.bn = std::move(bn_cache);

    auto [act, relu_cache] = ops::relu_forward(bn);
    sc.relu = std::move(relu_cache);

    auto [pooled_map, pool_cache] = ops::maxpool2x2_forward(act);
    sc.pool = std::move(pool_cache);

    auto [gap, gap_cache] = ops::global_avg_pool_forward(pooled_map);
    out.pooled.push_back(std::move(gap));
    if (s == cfg.stage_count - 1) out.last_gap = std::move(gap_cache);

    out.stage_out.push_back(pooled_map);
    x = std::move(pooled_map);
  }
  return out;
}

Features forward_features(const FrozenBackbone& backbone, const TaskNormBank& bank,
                          const Tensor& batch) {
  // Eval mode reads the bank but never writes it; the cast keeps one code path.
  return forward_features(backbone, const_cast<TaskNormBank&>(bank), batch,
                          ops::BnMode::eval);
}

QualityOutput forward_quality(const FrozenBackbone& backbone, TaskNormBank& bank,
                              const PredictionHead& head, const Tensor& batch,
                              ops::BnMode mode) {
  QualityOutput out;
  out.features = forward_features(backbone, bank, batch, mode);
  const Tensor& feature = out.features.pooled.back();
  if (head.weight.dim(1) != feature.dim(1)) {
    throw std::invalid_argument("forward_quality: head width does not match feature");
  }
  auto [scores, cache] = ops::linear_forward(feature, head.weight, head.bias);
  out.head_cache = std::move(cache);
  out.scores.assign(scores.data(), scores.data() + scores.size());
  return out;
}

QualityOutput forward_quality(const FrozenBackbone& backbone, const TaskNormBank& bank,
                              const PredictionHead& head, const Tensor& batch) {
  return forward_quality(backbone, const_cast<TaskNormBank&>(bank), head, batch,
                         ops::BnMode::eval);
}

ParamGrads backward_to_params(const FrozenBackbone& backbone,
                              const std::vector<float>& grad_scores,
                              const QualityOutput& forward,
                              const PredictionHead& head) {
  const Features& f = forward.features;
  const int stages = static_cast<int>(f.caches.size());
  const int n = f.pooled.back().dim(0);
  if (static_cast<int>(grad_scores.size()) != n) {
    throw std::invalid_argument("backward_to_params: grad_scores length mismatch");
  }
  if (!f.caches.back().bn.train_mode) {
    throw std::invalid_argument("backward_to_params: caches must come from train mode");
  }

  ParamGrads grads;
  grads.d_gamma.resize(static_cast<std::size_t>(stages));
  grads.d_beta.resize(static_cast<std::size_t>(stages));

  Tensor d_scores({n, 1});
  for (int i = 0; i < n; ++i) d_scores.at(i, 0) = grad_scores[static_cast<std::size_t>(i)];

  ops::LinearGrads head_grads =
      ops::linear_backward(d_scores, head.weight, forward.head_cache);
  grads.d_head_weight = std::move(head_grads.d_weight);
  grads.d_head_bias = std::move(head_grads.d_bias);

  // Gradient flows through the last stage's global pooling, then back down
  // the stack. Stage-1 conv input gradients are never needed.
  Tensor d_stage = ops::global_avg_pool_backward(head_grads.d_input, f.last_gap);
  for (int s = stages - 1; s >= 0; --s) {
    const StageCaches& sc = f.caches[static_cast<std::size_t>(s)];
    Tensor d_act = ops::maxpool2x2_backward(d_stage, sc.pool);
    Tensor d_bn = ops::relu_backward(d_act, sc.relu);
    auto [d_conv, bn_grads] = ops::batchnorm_backward(d_bn, sc.bn);
    grads.d_gamma[static_cast<std::size_t>(s)] = std::move(bn_grads.d_gamma);
    grads.d_beta[static_cast<std::size_t>(s)] = std::move(bn_grads.d_beta);
    if (s > 0) {
      d_stage = ops::conv2d_backward_input(d_conv, backbone.filters(s), sc.conv);
    }
  }
  return grads;
}

}  // namespace cliq
