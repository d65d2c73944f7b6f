#include "cliq/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

// AVX2 variants. Deliberately mul + add rather than fmadd: an fma would skip
// the intermediate rounding step and break bit-equality with the scalar
// reference. Tails fall through to the scalar kernels.

namespace cliq::kernels::detail {

void add_scaled_avx2(float* y, const float* x, float a, std::size_t n) {
  const __m256 av = _mm256_set1_ps(a);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 xv = _mm256_loadu_ps(x + i);
    const __m256 yv = _mm256_loadu_ps(y + i);
    _mm256_storeu_ps(y + i, _mm256_add_ps(yv, _mm256_mul_ps(av, xv)));
  }
  add_scaled_scalar(y + i, x + i, a, n - i);
}

void add_scaled3_avx2(float* y, const float* a, const float* b, const float* c,
                      float w0, float w1, float w2, std::size_t n) {
  const __m256 w0v = _mm256_set1_ps(w0);
  const __m256 w1v = _mm256_set1_ps(w1);
  const __m256 w2v = _mm256_set1_ps(w2);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 acc = _mm256_loadu_ps(y + i);
    acc = _mm256_add_ps(acc, _mm256_mul_ps(w0v, _mm256_loadu_ps(a + i)));
    acc = _mm256_add_ps(acc, _mm256_mul_ps(w1v, _mm256_loadu_ps(b + i)));
    acc = _mm256_add_ps(acc, _mm256_mul_ps(w2v, _mm256_loadu_ps(c + i)));
    _mm256_storeu_ps(y + i, acc);
  }
  add_scaled3_scalar(y + i, a + i, b + i, c + i, w0, w1, w2, n - i);
}

void conv3x3_block8_avx2(float* out8, const float* in, int c_in, int h, int w,
                         const float* wt) {
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  float lanes[8];
  for (int oy = 0; oy < h; ++oy) {
    for (int ox = 0; ox < w; ++ox) {
      __m256 acc = _mm256_setzero_ps();
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
            const __m256 v = _mm256_set1_ps(irow[ix]);
            acc = _mm256_add_ps(acc, _mm256_mul_ps(v, _mm256_loadu_ps(wbase + kx * 8)));
          }
        }
      }
      _mm256_storeu_ps(lanes, acc);
      const std::size_t p = static_cast<std::size_t>(oy) * w + ox;
      for (int l = 0; l < 8; ++l) out8[static_cast<std::size_t>(l) * plane + p] = lanes[l];
    }
  }
}

void conv3x3_block8_grad_avx2(float* din8, const float* gout, int c_out, int h,
                              int w, const float* wt) {
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  float lanes[8];
  for (int iy = 0; iy < h; ++iy) {
    for (int ix = 0; ix < w; ++ix) {
      __m256 acc = _mm256_setzero_ps();
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
            const __m256 v = _mm256_set1_ps(grow[ox]);
            acc = _mm256_add_ps(acc, _mm256_mul_ps(v, _mm256_loadu_ps(wbase + kx * 8)));
          }
        }
      }
      _mm256_storeu_ps(lanes, acc);
      const std::size_t p = static_cast<std::size_t>(iy) * w + ix;
      for (int l = 0; l < 8; ++l) din8[static_cast<std::size_t>(l) * plane + p] = lanes[l];
    }
  }
}

void scale_shift_avx2(float* y, const float* x, float a, float b, std::size_t n) {
  const __m256 av = _mm256_set1_ps(a);
  const __m256 bv = _mm256_set1_ps(b);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 xv = _mm256_loadu_ps(x + i);
    _mm256_storeu_ps(y + i, _mm256_add_ps(_mm256_mul_ps(xv, av), bv));
  }
  scale_shift_scalar(y + i, x + i, a, b, n - i);
}

void relu_avx2(float* y, const float* x, std::size_t n) {
  const __m256 zero = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    // max(x, 0) returns +0 for x == -0, matching the scalar ternary.
    _mm256_storeu_ps(y + i, _mm256_max_ps(_mm256_loadu_ps(x + i), zero));
  }
  relu_scalar(y + i, x + i, n - i);
}

void relu_mask_avx2(float* y, const float* g, const float* x, std::size_t n) {
  const __m256 zero = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 mask = _mm256_cmp_ps(_mm256_loadu_ps(x + i), zero, _CMP_GT_OQ);
    _mm256_storeu_ps(y + i, _mm256_and_ps(mask, _mm256_loadu_ps(g + i)));
  }
  relu_mask_scalar(y + i, g + i, x + i, n - i);
}

}  // namespace cliq::kernels::detail

#endif  // x86_64
