#pragma once

#include <utility>
#include <vector>

#include "cliq/tensor.hpp"

namespace cliq::ops {

enum class BnMode { train, eval };

// One normalization site: the per-channel 4-tuple (running mean, running
// variance, scale, shift). Variance is stored rather than sigma; the
// normalizer sqrt(var + eps) is formed at the use site.
struct NormSite {
  std::vector<float> running_mean;
  std::vector<float> running_var;
  std::vector<float> gamma;
  std::vector<float> beta;

  // mean 0, variance 1, gamma 1, beta 0: the identity normalization.
  static NormSite identity(int channels);
  int channels() const { return static_cast<int>(gamma.size()); }
};

// Caches carry whatever the matching backward pass needs. A backward call
// must receive the cache produced by the matching forward call.

struct ConvCache {
  std::vector<int> in_shape;
  std::vector<int> out_shape;
  std::vector<int> filter_shape;
  int stride = 1;
  int pad_h = 0;
  int pad_w = 0;
};

struct BnCache {
  bool train_mode = false;
  std::vector<int> in_shape;
  Tensor xhat;                  // normalized activations
  std::vector<float> inv_std;   // per channel, 1/sqrt(batch var + eps)
  std::vector<float> gamma;     // snapshot used by the forward pass
};

struct ReluCache {
  Tensor input;
};

struct PoolCache {
  std::vector<int> in_shape;
  std::vector<int> argmax;  // flat input index per output element
};

struct GapCache {
  std::vector<int> in_shape;
};

struct LinearCache {
  Tensor input;  // [N, I]
};

struct BnGrads {
  std::vector<float> d_gamma;
  std::vector<float> d_beta;
};

struct LinearGrads {
  Tensor d_weight;
  Tensor d_bias;
  Tensor d_input;
};

// Cross-correlation with same-style zero padding: H' = ceil(H/stride).
// input [N,C,H,W], filters [C',C,k,k]. Fixed loop nest, deterministic.
std::pair<Tensor, ConvCache> conv2d_forward(const Tensor& input,
                                            const Tensor& filters, int stride);

// Gradient w.r.t. the convolution input. Filter gradients are never formed:
// filters stay frozen for the lifetime of the model.
Tensor conv2d_backward_input(const Tensor& grad_out, const Tensor& filters,
                             const ConvCache& cache);

// Train mode normalizes by batch statistics over (N,H,W) per channel and
// updates the site's running mean/variance by an exponential moving average
// with the given momentum. Eval mode applies the stored statistics and never
// mutates the site.
std::pair<Tensor, BnCache> batchnorm_forward(const Tensor& input, NormSite& site,
                                             BnMode mode, float momentum, float eps);

// Exact gradients of the train-mode normalization, including the dependence
// through the batch statistics. Requires a train-mode cache.
std::pair<Tensor, BnGrads> batchnorm_backward(const Tensor& grad_out,
                                              const BnCache& cache);

std::pair<Tensor, ReluCache> relu_forward(const Tensor& input);
Tensor relu_backward(const Tensor& grad_out, const ReluCache& cache);

// 2x2 max pooling with stride 2; ties resolved to the first (row-major)
// maximum. Spatial dims must be even.
std::pair<Tensor, PoolCache> maxpool2x2_forward(const Tensor& input);
Tensor maxpool2x2_backward(const Tensor& grad_out, const PoolCache& cache);

// [N,C,H,W] -> [N,C] per-channel spatial mean.
std::pair<Tensor, GapCache> global_avg_pool_forward(const Tensor& input);
Tensor global_avg_pool_backward(const Tensor& grad_out, const GapCache& cache);

// input [N,I], weight [O,I], bias [O] -> [N,O].
std::pair<Tensor, LinearCache> linear_forward(const Tensor& input,
                                              const Tensor& weight,
                                              const Tensor& bias);
LinearGrads linear_backward(const Tensor& grad_out, const Tensor& weight,
                            const LinearCache& cache);

}  // namespace cliq::ops
