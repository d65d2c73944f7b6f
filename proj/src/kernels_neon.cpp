#include "cliq/kernels.hpp"

#if defined(__ARM_NEON) || defined(__ARM_NEON__)

#include <arm_neon.h>

// NEON variants. vmul + vadd instead of vmla/vfma for the same reason the
// AVX2 path avoids fmadd: fused accumulation would break bit-equality with
// the scalar reference.

namespace cliq::kernels::detail {

void add_scaled_neon(float* y, const float* x, float a, std::size_t n) {
  const float32x4_t av = vdupq_n_f32(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const float32x4_t xv = vld1q_f32(x + i);
    const float32x4_t yv = vld1q_f32(y + i);
    vst1q_f32(y + i, vaddq_f32(yv, vmulq_f32(av, xv)));
  }
  add_scaled_scalar(y + i, x + i, a, n - i);
}

void add_scaled3_neon(float* y, const float* a, const float* b, const float* c,
                      float w0, float w1, float w2, std::size_t n) {
  const float32x4_t w0v = vdupq_n_f32(w0);
  const float32x4_t w1v = vdupq_n_f32(w1);
  const float32x4_t w2v = vdupq_n_f32(w2);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    float32x4_t acc = vld1q_f32(y + i);
    acc = vaddq_f32(acc, vmulq_f32(w0v, vld1q_f32(a + i)));
    acc = vaddq_f32(acc, vmulq_f32(w1v, vld1q_f32(b + i)));
    acc = vaddq_f32(acc, vmulq_f32(w2v, vld1q_f32(c + i)));
    vst1q_f32(y + i, acc);
  }
  add_scaled3_scalar(y + i, a + i, b + i, c + i, w0, w1, w2, n - i);
}

void conv3x3_block8_neon(float* out8, const float* in, int c_in, int h, int w,
                         const float* wt) {
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  float lanes[8];
  for (int oy = 0; oy < h; ++oy) {
    for (int ox = 0; ox < w; ++ox) {
      float32x4_t acc_lo = vdupq_n_f32(0.0f);
      float32x4_t acc_hi = vdupq_n_f32(0.0f);
      for (int ci = 0; ci < c_in; ++ci) {
        const float* ip = in + static_cast<std::size_t>(ci) * plane;
        for (int ky = 0; ky < 3; ++ky) {
          const int iy = oy + ky - 1;
          if (iy < 0 || iy >= h) continue;
          const float* irow = ip + static_cast<std::size_t>(iy) * w;
          const float* wbase = wt + ((ci * 3 + ky) * 3) * 8;
          for (int kx = 0; kx < 3; ++kx) {
            const int ix = ox + kx - 1;
            if (ix < 0 || ix >= w) continue;
            const float32x4_t v = vdupq_n_f32(irow[ix]);
            acc_lo = vaddq_f32(acc_lo, vmulq_f32(v, vld1q_f32(wbase + kx * 8)));
            acc_hi = vaddq_f32(acc_hi, vmulq_f32(v, vld1q_f32(wbase + kx * 8 + 4)));
          }
        }
      }
      vst1q_f32(lanes, acc_lo);
      vst1q_f32(lanes + 4, acc_hi);
      const std::size_t p = static_cast<std::size_t>(oy) * w + ox;
      for (int l = 0; l < 8; ++l) out8[static_cast<std::size_t>(l) * plane + p] = lanes[l];
    }
  }
}

void conv3x3_block8_grad_neon(float* din8, const float* gout, int c_out, int h,
                              int w, const float* wt) {
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  float lanes[8];
  for (int iy = 0; iy < h; ++iy) {
    for (int ix = 0; ix < w; ++ix) {
      float32x4_t acc_lo = vdupq_n_f32(0.0f);
      float32x4_t acc_hi = vdupq_n_f32(0.0f);
      for (int co = 0; co < c_out; ++co) {
        const float* gp = gout + static_cast<std::size_t>(co) * plane;
        for (int ky = 0; ky < 3; ++ky) {
          const int oy = iy - ky + 1;
          if (oy < 0 || oy >= h) continue;
          const float* grow = gp + static_cast<std::size_t>(oy) * w;
          const float* wbase = wt + ((co * 3 + ky) * 3) * 8;
          for (int kx = 0; kx < 3; ++kx) {
            const int ox = ix - kx + 1;
            if (ox < 0 || ox >= w) continue;
            const float32x4_t v = vdupq_n_f32(grow[ox]);
            acc_lo = vaddq_f32(acc_lo, vmulq_f32(v, vld1q_f32(wbase + kx * 8)));
            acc_hi = vaddq_f32(acc_hi, vmulq_f32(v, vld1q_f32(wbase + kx * 8 + 4)));
          }
        }
      }
      vst1q_f32(lanes, acc_lo);
      vst1q_f32(lanes + 4, acc_hi);
      const std::size_t p = static_cast<std::size_t>(iy) * w + ix;
      for (int l = 0; l < 8; ++l) din8[static_cast<std::size_t>(l) * plane + p] = lanes[l];
    }
  }
}

void scale_shift_neon(float* y, const float* x, float a, float b, std::size_t n) {
  const float32x4_t av = vdupq_n_f32(a);
  const float32x4_t bv = vdupq_n_f32(b);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const float32x4_t xv = vld1q_f32(x + i);
    vst1q_f32(y + i, vaddq_f32(vmulq_f32(xv, av), bv));
  }
  scale_shift_scalar(y + i, x + i, a, b, n - i);
}

void relu_neon(float* y, const float* x, std::size_t n) {
  const float32x4_t zero = vdupq_n_f32(0.0f);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    vst1q_f32(y + i, vmaxq_f32(vld1q_f32(x + i), zero));
  }
  relu_scalar(y + i, x + i, n - i);
}

void relu_mask_neon(float* y, const float* g, const float* x, std::size_t n) {
  const float32x4_t zero = vdupq_n_f32(0.0f);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const uint32x4_t mask = vcgtq_f32(vld1q_f32(x + i), zero);
    const uint32x4_t gv = vreinterpretq_u32_f32(vld1q_f32(g + i));
    vst1q_f32(y + i, vreinterpretq_f32_u32(vandq_u32(mask, gv)));
  }
  relu_mask_scalar(y + i, g + i, x + i, n - i);
}

}  // namespace cliq::kernels::detail

#endif  // __ARM_NEON
