#include "cliq/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "cliq/errors.hpp"
#include "cliq/kernels.hpp"

namespace cliq::ops {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

int ceil_div(int a, int b) { return (a + b - 1) / b; }

struct ConvGeometry {
  int n, c_in, h, w;
  int c_out, k;
  int stride;
  int h_out, w_out;
  int pad_h, pad_w;
};

ConvGeometry conv_geometry(const std::vector<int>& in_shape,
                           const std::vector<int>& filt_shape, int stride) {
  require(in_shape.size() == 4, "conv2d: input must be [N,C,H,W]");
  require(filt_shape.size() == 4, "conv2d: filters must be [C',C,k,k]");
  ConvGeometry g;
  g.n = in_shape[0];
  g.c_in = in_shape[1];
  g.h = in_shape[2];
  g.w = in_shape[3];
  g.c_out = filt_shape[0];
  g.k = filt_shape[2];
  g.stride = stride;
  require(filt_shape[1] == g.c_in, "conv2d: filter channel count mismatch");
  require(filt_shape[3] == g.k, "conv2d: filters must be square");
  require(stride >= 1, "conv2d: stride must be >= 1");
  require(g.k <= g.h && g.k <= g.w, "conv2d: kernel larger than input");
  g.h_out = ceil_div(g.h, stride);
  g.w_out = ceil_div(g.w, stride);
  // Same-style padding, beginning side gets the smaller half.
  g.pad_h = std::max(0, (g.h_out - 1) * stride + g.k - g.h) / 2;
  g.pad_w = std::max(0, (g.w_out - 1) * stride + g.k - g.w) / 2;
  return g;
}

}  // namespace

NormSite NormSite::identity(int channels) {
  NormSite s;
  s.running_mean.assign(static_cast<std::size_t>(channels), 0.0f);
  s.running_var.assign(static_cast<std::size_t>(channels), 1.0f);
  s.gamma.assign(static_cast<std::size_t>(channels), 1.0f);
  s.beta.assign(static_cast<std::size_t>(channels), 0.0f);
  return s;
}

std::pair<Tensor, ConvCache> conv2d_forward(const Tensor& input,
                                            const Tensor& filters, int stride) {
  const ConvGeometry g = conv_geometry(input.shape(), filters.shape(), stride);
  Tensor out({g.n, g.c_out, g.h_out, g.w_out});

  const std::size_t in_plane = static_cast<std::size_t>(g.h) * g.w;
  const std::size_t out_plane = static_cast<std::size_t>(g.h_out) * g.w_out;

  if (stride == 1 && g.k == 3 && g.w >= 3 && g.c_out % 8 == 0) {
    // Output-channel-blocked path: 8 channels per kernel call, input values
    // broadcast. Taps accumulate in (ci,ky,kx) order per element, exactly as
    // the row paths below.
    const std::size_t wt_size = static_cast<std::size_t>(g.c_in) * 9 * 8;
    std::vector<float> wt(wt_size);
    for (int n = 0; n < g.n; ++n) {
      const float* in_base = input.data() + static_cast<std::size_t>(n) * g.c_in * in_plane;
      for (int co0 = 0; co0 < g.c_out; co0 += 8) {
        for (int ci = 0; ci < g.c_in; ++ci) {
          for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
              for (int lane = 0; lane < 8; ++lane) {
                wt[static_cast<std::size_t>(((ci * 3 + ky) * 3 + kx) * 8 + lane)] =
                    filters.at(co0 + lane, ci, ky, kx);
              }
            }
          }
        }
        kernels::conv3x3_block8(
            out.data() + (static_cast<std::size_t>(n) * g.c_out + co0) * out_plane,
            in_base, g.c_in, g.h, g.w, wt.data());
      }
    }
  } else if (stride == 1 && g.k == 3 && g.w >= 3) {
    // Fused 3-tap row path. Per output element the taps still accumulate in
    // (ci,ky,kx) order, bit-identical to the per-tap path below.
    for (int n = 0; n < g.n; ++n) {
      for (int co = 0; co < g.c_out; ++co) {
        float* out_base = out.data() + (static_cast<std::size_t>(n) * g.c_out + co) * out_plane;
        for (int ci = 0; ci < g.c_in; ++ci) {
          const float* in_base =
              input.data() + (static_cast<std::size_t>(n) * g.c_in + ci) * in_plane;
          for (int ky = 0; ky < 3; ++ky) {
            const float w0 = filters.at(co, ci, ky, 0);
            const float w1 = filters.at(co, ci, ky, 1);
            const float w2 = filters.at(co, ci, ky, 2);
            const int oy_lo = std::max(0, g.pad_h - ky);
            const int oy_hi = std::min(g.h_out, g.h - ky + g.pad_h);
            for (int oy = oy_lo; oy < oy_hi; ++oy) {
              const int iy = oy + ky - g.pad_h;
              float* orow = out_base + static_cast<std::size_t>(oy) * g.w_out;
              const float* irow = in_base + static_cast<std::size_t>(iy) * g.w;
              orow[0] += w1 * irow[0];
              orow[0] += w2 * irow[1];
              kernels::add_scaled3(orow + 1, irow, irow + 1, irow + 2, w0, w1, w2,
                                   static_cast<std::size_t>(g.w_out - 2));
              orow[g.w_out - 1] += w0 * irow[g.w - 2];
              orow[g.w_out - 1] += w1 * irow[g.w - 1];
            }
          }
        }
      }
    }
  } else if (stride == 1) {
    // Per-tap row path: each filter tap contributes a shifted add_scaled
    // over a contiguous input row.
    for (int n = 0; n < g.n; ++n) {
      for (int co = 0; co < g.c_out; ++co) {
        float* out_base = out.data() + (static_cast<std::size_t>(n) * g.c_out + co) * out_plane;
        for (int ci = 0; ci < g.c_in; ++ci) {
          const float* in_base =
              input.data() + (static_cast<std::size_t>(n) * g.c_in + ci) * in_plane;
          for (int ky = 0; ky < g.k; ++ky) {
            for (int kx = 0; kx < g.k; ++kx) {
              const float wgt = filters.at(co, ci, ky, kx);
              const int ox_lo = std::max(0, g.pad_w - kx);
              const int ox_hi = std::min(g.w_out, g.w - kx + g.pad_w);
              if (ox_lo >= ox_hi) continue;
              const int shift = kx - g.pad_w;
              const int oy_lo = std::max(0, g.pad_h - ky);
              const int oy_hi = std::min(g.h_out, g.h - ky + g.pad_h);
              for (int oy = oy_lo; oy < oy_hi; ++oy) {
                const int iy = oy + ky - g.pad_h;
                kernels::add_scaled(out_base + static_cast<std::size_t>(oy) * g.w_out + ox_lo,
                                    in_base + static_cast<std::size_t>(iy) * g.w + ox_lo + shift,
                                    wgt, static_cast<std::size_t>(ox_hi - ox_lo));
              }
            }
          }
        }
      }
    }
  } else {
    for (int n = 0; n < g.n; ++n) {
      for (int co = 0; co < g.c_out; ++co) {
        for (int oy = 0; oy < g.h_out; ++oy) {
          for (int ox = 0; ox < g.w_out; ++ox) {
            float acc = 0.0f;
            for (int ci = 0; ci < g.c_in; ++ci) {
              for (int ky = 0; ky < g.k; ++ky) {
                const int iy = oy * stride + ky - g.pad_h;
                if (iy < 0 || iy >= g.h) continue;
                for (int kx = 0; kx < g.k; ++kx) {
                  const int ix = ox * stride + kx - g.pad_w;
                  if (ix < 0 || ix >= g.w) continue;
                  acc += filters.at(co, ci, ky, kx) * input.at(n, ci, iy, ix);
                }
              }
            }
            out.at(n, co, oy, ox) = acc;
          }
        }
      }
    }
  }

  ConvCache cache;
  cache.in_shape = input.shape();
  cache.out_shape = out.shape();
  cache.filter_shape = filters.shape();
  cache.stride = stride;
  cache.pad_h = g.pad_h;
  cache.pad_w = g.pad_w;
  return {std::move(out), std::move(cache)};
}

Tensor conv2d_backward_input(const Tensor& grad_out, const Tensor& filters,
                             const ConvCache& cache) {
  require(grad_out.shape() == cache.out_shape,
          "conv2d_backward_input: grad_out does not match forward output");
  require(filters.shape() == cache.filter_shape,
          "conv2d_backward_input: filters do not match forward call");
  const ConvGeometry g = conv_geometry(cache.in_shape, cache.filter_shape, cache.stride);

  Tensor grad_in(cache.in_shape);
  const std::size_t in_plane = static_cast<std::size_t>(g.h) * g.w;
  const std::size_t out_plane = static_cast<std::size_t>(g.h_out) * g.w_out;

  if (g.stride == 1 && g.k == 3 && g.w >= 3 && g.c_in % 8 == 0) {
    // Input-channel-blocked mirror of the forward fast path; (co,ky,kx)
    // accumulation order per element.
    const std::size_t wt_size = static_cast<std::size_t>(g.c_out) * 9 * 8;
    std::vector<float> wt(wt_size);
    for (int n = 0; n < g.n; ++n) {
      const float* gout_base =
          grad_out.data() + static_cast<std::size_t>(n) * g.c_out * out_plane;
      for (int ci0 = 0; ci0 < g.c_in; ci0 += 8) {
        for (int co = 0; co < g.c_out; ++co) {
          for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
              for (int lane = 0; lane < 8; ++lane) {
                wt[static_cast<std::size_t>(((co * 3 + ky) * 3 + kx) * 8 + lane)] =
                    filters.at(co, ci0 + lane, ky, kx);
              }
            }
          }
        }
        kernels::conv3x3_block8_grad(
            grad_in.data() + (static_cast<std::size_t>(n) * g.c_in + ci0) * in_plane,
            gout_base, g.c_out, g.h, g.w, wt.data());
      }
    }
  } else if (g.stride == 1 && g.k == 3 && g.w >= 3) {
    for (int n = 0; n < g.n; ++n) {
      for (int co = 0; co < g.c_out; ++co) {
        const float* gout_base =
            grad_out.data() + (static_cast<std::size_t>(n) * g.c_out + co) * out_plane;
        for (int ci = 0; ci < g.c_in; ++ci) {
          float* gin_base =
              grad_in.data() + (static_cast<std::size_t>(n) * g.c_in + ci) * in_plane;
          for (int ky = 0; ky < 3; ++ky) {
            const float w0 = filters.at(co, ci, ky, 0);
            const float w1 = filters.at(co, ci, ky, 1);
            const float w2 = filters.at(co, ci, ky, 2);
            const int oy_lo = std::max(0, g.pad_h - ky);
            const int oy_hi = std::min(g.h_out, g.h - ky + g.pad_h);
            for (int oy = oy_lo; oy < oy_hi; ++oy) {
              const int iy = oy + ky - g.pad_h;
              float* grow = gin_base + static_cast<std::size_t>(iy) * g.w;
              const float* orow = gout_base + static_cast<std::size_t>(oy) * g.w_out;
              grow[0] += w0 * orow[1];
              grow[0] += w1 * orow[0];
              kernels::add_scaled3(grow + 1, orow + 2, orow + 1, orow, w0, w1, w2,
                                   static_cast<std::size_t>(g.w - 2));
              grow[g.w - 1] += w1 * orow[g.w_out - 1];
              grow[g.w - 1] += w2 * orow[g.w_out - 2];
            }
          }
        }
      }
    }
  } else if (g.stride == 1) {
    for (int n = 0; n < g.n; ++n) {
      for (int co = 0; co < g.c_out; ++co) {
        const float* gout_base =
            grad_out.data() + (static_cast<std::size_t>(n) * g.c_out + co) * out_plane;
        for (int ci = 0; ci < g.c_in; ++ci) {
          float* gin_base =
              grad_in.data() + (static_cast<std::size_t>(n) * g.c_in + ci) * in_plane;
          for (int ky = 0; ky < g.k; ++ky) {
            for (int kx = 0; kx < g.k; ++kx) {
              const float wgt = filters.at(co, ci, ky, kx);
              const int ox_lo = std::max(0, g.pad_w - kx);
              const int ox_hi = std::min(g.w_out, g.w - kx + g.pad_w);
              if (ox_lo >= ox_hi) continue;
              const int shift = kx - g.pad_w;
              const int oy_lo = std::max(0, g.pad_h - ky);
              const int oy_hi = std::min(g.h_out, g.h - ky + g.pad_h);
              for (int oy = oy_lo; oy < oy_hi; ++oy) {
                const int iy = oy + ky - g.pad_h;
                kernels::add_scaled(gin_base + static_cast<std::size_t>(iy) * g.w + ox_lo + shift,
                                    gout_base + static_cast<std::size_t>(oy) * g.w_out + ox_lo,
                                    wgt, static_cast<std::size_t>(ox_hi - ox_lo));
              }
            }
          }
        }
      }
    }
  } else {
    for (int n = 0; n < g.n; ++n) {
      for (int co = 0; co < g.c_out; ++co) {
        for (int oy = 0; oy < g.h_out; ++oy) {
          for (int ox = 0; ox < g.w_out; ++ox) {
            const float go = grad_out.at(n, co, oy, ox);
            for (int ci = 0; ci < g.c_in; ++ci) {
              for (int ky = 0; ky < g.k; ++ky) {
                const int iy = oy * g.stride + ky - g.pad_h;
                if (iy < 0 || iy >= g.h) continue;
                for (int kx = 0; kx < g.k; ++kx) {
                  const int ix = ox * g.stride + kx - g.pad_w;
                  if (ix < 0 || ix >= g.w) continue;
                  grad_in.at(n, ci, iy, ix) += filters.at(co, ci, ky, kx) * go;
                }
              }
            }
          }
        }
      }
    }
  }
  return grad_in;
}

std::pair<Tensor, BnCache> batchnorm_forward(const Tensor& input, NormSite& site,
                                             BnMode mode, float momentum, float eps) {
  require(input.rank() == 4, "batchnorm: input must be [N,C,H,W]");
  const int n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  require(site.channels() == c, "batchnorm: site channel count mismatch");
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const std::size_t count = static_cast<std::size_t>(n) * plane;

  Tensor out(input.shape());
  BnCache cache;
  cache.in_shape = input.shape();

  if (mode == BnMode::eval) {
    for (int ch = 0; ch < c; ++ch) {
      const float var = site.running_var[ch];
      if (!(var >= 0.0f) || !std::isfinite(var)) {
        throw CorruptBankError("batchnorm: stored variance invalid for channel " +
                               std::to_string(ch));
      }
      const float inv = 1.0f / std::sqrt(var + eps);
      const float a = site.gamma[ch] * inv;
      const float b = site.beta[ch] - site.running_mean[ch] * a;
      for (int img = 0; img < n; ++img) {
        const std::size_t base = (static_cast<std::size_t>(img) * c + ch) * plane;
        kernels::scale_shift(out.data() + base, input.data() + base, a, b, plane);
      }
    }
    cache.train_mode = false;
    return {std::move(out), std::move(cache)};
  }

  require(count >= 2, "batchnorm: train mode needs N*H*W >= 2");
  cache.train_mode = true;
  cache.xhat = Tensor(input.shape());
  cache.inv_std.resize(static_cast<std::size_t>(c));
  cache.gamma = site.gamma;

  for (int ch = 0; ch < c; ++ch) {
    double sum = 0.0;
    for (int img = 0; img < n; ++img) {
      const float* row = input.data() + (static_cast<std::size_t>(img) * c + ch) * plane;
      for (std::size_t i = 0; i < plane; ++i) sum += row[i];
    }
    const float mean = static_cast<float>(sum / static_cast<double>(count));
    double sq = 0.0;
    for (int img = 0; img < n; ++img) {
      const float* row = input.data() + (static_cast<std::size_t>(img) * c + ch) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        const double d = static_cast<double>(row[i]) - mean;
        sq += d * d;
      }
    }
    const float var = static_cast<float>(sq / static_cast<double>(count));
    const float inv = 1.0f / std::sqrt(var + eps);
    cache.inv_std[ch] = inv;

    // xhat = (x - mean) * inv, then out = gamma * xhat + beta.
    for (int img = 0; img < n; ++img) {
      const std::size_t base = (static_cast<std::size_t>(img) * c + ch) * plane;
      kernels::scale_shift(cache.xhat.data() + base, input.data() + base, inv,
                           -mean * inv, plane);
      kernels::scale_shift(out.data() + base, cache.xhat.data() + base,
                           site.gamma[ch], site.beta[ch], plane);
    }

    site.running_mean[ch] = (1.0f - momentum) * site.running_mean[ch] + momentum * mean;
    site.running_var[ch] = (1.0f - momentum) * site.running_var[ch] + momentum * var;
  }
  return {std::move(out), std::move(cache)};
}

std::pair<Tensor, BnGrads> batchnorm_backward(const Tensor& grad_out,
                                              const BnCache& cache) {
  require(cache.train_mode, "batchnorm_backward: needs a train-mode cache");
  require(grad_out.shape() == cache.in_shape, "batchnorm_backward: shape mismatch");
  const int n = grad_out.dim(0), c = grad_out.dim(1), h = grad_out.dim(2),
            w = grad_out.dim(3);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const double count = static_cast<double>(n) * static_cast<double>(plane);

  Tensor grad_in(cache.in_shape);
  BnGrads grads;
  grads.d_gamma.resize(static_cast<std::size_t>(c));
  grads.d_beta.resize(static_cast<std::size_t>(c));

  for (int ch = 0; ch < c; ++ch) {
    double s1 = 0.0;  // sum dy
    double s2 = 0.0;  // sum dy * xhat
    for (int img = 0; img < n; ++img) {
      const std::size_t base = (static_cast<std::size_t>(img) * c + ch) * plane;
      const float* dy = grad_out.data() + base;
      const float* xh = cache.xhat.data() + base;
      for (std::size_t i = 0; i < plane; ++i) {
        s1 += dy[i];
        s2 += static_cast<double>(dy[i]) * xh[i];
      }
    }
    grads.d_beta[ch] = static_cast<float>(s1);
    grads.d_gamma[ch] = static_cast<float>(s2);

    // dx = a*dy + c0 + c1*xhat with the batch-statistics terms folded in.
    const float a = cache.gamma[ch] * cache.inv_std[ch];
    const float c0 = static_cast<float>(-static_cast<double>(a) * s1 / count);
    const float c1 = static_cast<float>(-static_cast<double>(a) * s2 / count);
    for (int img = 0; img < n; ++img) {
      const std::size_t base = (static_cast<std::size_t>(img) * c + ch) * plane;
      kernels::scale_shift(grad_in.data() + base, grad_out.data() + base, a, c0, plane);
      kernels::add_scaled(grad_in.data() + base, cache.xhat.data() + base, c1, plane);
    }
  }
  return {std::move(grad_in), std::move(grads)};
}

std::pair<Tensor, ReluCache> relu_forward(const Tensor& input) {
  Tensor out(input.shape());
  kernels::relu(out.data(), input.data(), input.size());
  ReluCache cache;
  cache.input = input;
  return {std::move(out), std::move(cache)};
}

Tensor relu_backward(const Tensor& grad_out, const ReluCache& cache) {
  require(grad_out.same_shape(cache.input), "relu_backward: shape mismatch");
  Tensor grad_in(grad_out.shape());
  kernels::relu_mask(grad_in.data(), grad_out.data(), cache.input.data(),
                     grad_out.size());
  return grad_in;
}

std::pair<Tensor, PoolCache> maxpool2x2_forward(const Tensor& input) {
  require(input.rank() == 4, "maxpool2x2: input must be [N,C,H,W]");
  const int n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  require(h % 2 == 0 && w % 2 == 0, "maxpool2x2: spatial dims must be even");
  const int ho = h / 2, wo = w / 2;

  Tensor out({n, c, ho, wo});
  PoolCache cache;
  cache.in_shape = input.shape();
  cache.argmax.resize(out.size());

  std::size_t o = 0;
  for (int img = 0; img < n; ++img) {
    for (int ch = 0; ch < c; ++ch) {
      const std::size_t plane_base =
          (static_cast<std::size_t>(img) * c + ch) * static_cast<std::size_t>(h) * w;
      for (int oy = 0; oy < ho; ++oy) {
        for (int ox = 0; ox < wo; ++ox) {
          const int iy = oy * 2, ix = ox * 2;
          std::size_t best_idx = plane_base + static_cast<std::size_t>(iy) * w + ix;
          float best = input[best_idx];
          // Row-major scan; strict > keeps the first maximum on ties.
          const std::size_t candidates[3] = {
              plane_base + static_cast<std::size_t>(iy) * w + ix + 1,
              plane_base + static_cast<std::size_t>(iy + 1) * w + ix,
              plane_base + static_cast<std::size_t>(iy + 1) * w + ix + 1};
          for (const std::size_t idx : candidates) {
            if (input[idx] > best) {
              best = input[idx];
              best_idx = idx;
            }
          }
          out[o] = best;
          cache.argmax[o] = static_cast<int>(best_idx);
          ++o;
        }
      }
    }
  }
  return {std::move(out), std::move(cache)};
}

Tensor maxpool2x2_backward(const Tensor& grad_out, const PoolCache& cache) {
  require(grad_out.size() == cache.argmax.size(),
          "maxpool2x2_backward: grad_out does not match forward output");
  Tensor grad_in(cache.in_shape);
  for (std::size_t o = 0; o < grad_out.size(); ++o) {
    grad_in[static_cast<std::size_t>(cache.argmax[o])] += grad_out[o];
  }
  return grad_in;
}

std::pair<Tensor, GapCache> global_avg_pool_forward(const Tensor& input) {
  require(input.rank() == 4, "global_avg_pool: input must be [N,C,H,W]");
  const int n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  Tensor out({n, c});
  for (int img = 0; img < n; ++img) {
    for (int ch = 0; ch < c; ++ch) {
      const float* row = input.data() + (static_cast<std::size_t>(img) * c + ch) * plane;
      double sum = 0.0;
      for (std::size_t i = 0; i < plane; ++i) sum += row[i];
      out.at(img, ch) = static_cast<float>(sum / static_cast<double>(plane));
    }
  }
  GapCache cache;
  cache.in_shape = input.shape();
  return {std::move(out), std::move(cache)};
}

Tensor global_avg_pool_backward(const Tensor& grad_out, const GapCache& cache) {
  require(grad_out.rank() == 2, "global_avg_pool_backward: grad must be [N,C]");
  require(grad_out.dim(0) == cache.in_shape[0] && grad_out.dim(1) == cache.in_shape[1],
          "global_avg_pool_backward: shape mismatch");
  const int n = cache.in_shape[0], c = cache.in_shape[1];
  const std::size_t plane =
      static_cast<std::size_t>(cache.in_shape[2]) * cache.in_shape[3];
  Tensor grad_in(cache.in_shape);
  for (int img = 0; img < n; ++img) {
    for (int ch = 0; ch < c; ++ch) {
      const float g = grad_out.at(img, ch) / static_cast<float>(plane);
      float* row = grad_in.data() + (static_cast<std::size_t>(img) * c + ch) * plane;
      for (std::size_t i = 0; i < plane; ++i) row[i] = g;
    }
  }
  return grad_in;
}

std::pair<Tensor, LinearCache> linear_forward(const Tensor& input,
                                              const Tensor& weight,
                                              const Tensor& bias) {
  require(input.rank() == 2, "linear: input must be [N,I]");
  require(weight.rank() == 2, "linear: weight must be [O,I]");
  require(bias.rank() == 1 && bias.dim(0) == weight.dim(0),
          "linear: bias must be [O]");
  require(weight.dim(1) == input.dim(1), "linear: inner dimension mismatch");
  const int n = input.dim(0), in_dim = input.dim(1), out_dim = weight.dim(0);

  Tensor out({n, out_dim});
  for (int img = 0; img < n; ++img) {
    const float* x = input.data() + static_cast<std::size_t>(img) * in_dim;
    for (int o = 0; o < out_dim; ++o) {
      const float* wrow = weight.data() + static_cast<std::size_t>(o) * in_dim;
      double acc = static_cast<double>(bias[static_cast<std::size_t>(o)]);
      for (int i = 0; i < in_dim; ++i) acc += static_cast<double>(wrow[i]) * x[i];
      out.at(img, o) = static_cast<float>(acc);
    }
  }
  LinearCache cache;
  cache.input = input;
  return {std::move(out), std::move(cache)};
}

LinearGrads linear_backward(const Tensor& grad_out, const Tensor& weight,
                            const LinearCache& cache) {
  require(grad_out.rank() == 2, "linear_backward: grad must be [N,O]");
  const int n = cache.input.dim(0), in_dim = cache.input.dim(1),
            out_dim = weight.dim(0);
  require(grad_out.dim(0) == n && grad_out.dim(1) == out_dim,
          "linear_backward: shape mismatch");

  LinearGrads g;
  g.d_weight = Tensor({out_dim, in_dim});
  g.d_bias = Tensor({out_dim});
  g.d_input = Tensor({n, in_dim});

  for (int o = 0; o < out_dim; ++o) {
    double db = 0.0;
    for (int img = 0; img < n; ++img) db += grad_out.at(img, o);
    g.d_bias[static_cast<std::size_t>(o)] = static_cast<float>(db);
    for (int i = 0; i < in_dim; ++i) {
      double dw = 0.0;
      for (int img = 0; img < n; ++img) {
        dw += static_cast<double>(grad_out.at(img, o)) * cache.input.at(img, i);
      }
      g.d_weight.at(o, i) = static_cast<float>(dw);
    }
  }
  for (int img = 0; img < n; ++img) {
    for (int i = 0; i < in_dim; ++i) {
      double dx = 0.0;
      for (int o = 0; o < out_dim; ++o) {
        dx += static_cast<double>(grad_out.at(img, o)) * weight.at(o, i);
      }
      g.d_input.at(img, i) = static_cast<float>(dx);
    }
  }
  return g;
}

}  // namespace cliq::ops
