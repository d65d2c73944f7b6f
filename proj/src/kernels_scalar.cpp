#include "cliq/kernels.hpp"

// Reference kernels. These define the numeric contract: per-element
// mul-then-add, no reassociation. The translation unit is built with
// -ffp-contract=off so the compiler cannot fuse the multiply and add.

namespace cliq::kernels::detail {

void add_scaled_scalar(float* y, const float* x, float a, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    y[i] += a * x[i];
  }
}

void add_scaled3_scalar(float* y, const float* a, const float* b, const float* c,
                        float w0, float w1, float w2, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = ((y[i] + w0 * a[i]) + w1 * b[i]) + w2 * c[i];
  }
}

void conv3x3_block8_scalar(float* out8, const float* in, int c_in, int h, int w,
                           const float* wt) {
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (int oy = 0; oy < h; ++oy) {
    for (int ox = 0; ox < w; ++ox) {
      float acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
      for (int ci = 0; ci < c_in; ++ci) {
        const float* ip = in + static_cast<std::size_t>(ci) * plane;
        for (int ky = 0; ky < 3; ++ky) {
          const int iy = oy + ky - 1;
          if (iy < 0 || iy >= h) continue;
          for (int kx = 0; kx < 3; ++kx) {
            const int ix = ox + kx - 1;
            if (ix < 0 || ix >= w) continue;
            const float v = ip[static_cast<std::size_t>(iy) * w + ix];
            const float* wrow = wt + (((ci * 3 + ky) * 3 + kx) * 8);
            for (int l = 0; l < 8; ++l) acc[l] += wrow[l] * v;
          }
        }
      }
      const std::size_t p = static_cast<std::size_t>(oy) * w + ox;
      for (int l = 0; l < 8; ++l) out8[static_cast<std::size_t>(l) * plane + p] = acc[l];
    }
  }
}

void conv3x3_block8_grad_scalar(float* din8, const float* gout, int c_out, int h,
                                int w, const float* wt) {
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (int iy = 0; iy < h; ++iy) {
    for (int ix = 0; ix < w; ++ix) {
      float acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
      for (int co = 0; co < c_out; ++co) {
        const float* gp = gout + static_cast<std::size_t>(co) * plane;
        for (int ky = 0; ky < 3; ++ky) {
          const int oy = iy - ky + 1;
          if (oy < 0 || oy >= h) continue;
          for (int kx = 0; kx < 3; ++kx) {
            const int ox = ix - kx + 1;
            if (ox < 0 || ox >= w) continue;
            const float v = gp[static_cast<std::size_t>(oy) * w + ox];
            const float* wrow = wt + (((co * 3 + ky) * 3 + kx) * 8);
            for (int l = 0; l < 8; ++l) acc[l] += wrow[l] * v;
          }
        }
      }
      const std::size_t p = static_cast<std::size_t>(iy) * w + ix;
      for (int l = 0; l < 8; ++l) din8[static_cast<std::size_t>(l) * plane + p] = acc[l];
    }
  }
}

void scale_shift_scalar(float* y, const float* x, float a, float b, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = x[i] * a + b;
  }
}

void relu_scalar(float* y, const float* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = x[i] > 0.0f ? x[i] : 0.0f;
  }
}

void relu_mask_scalar(float* y, const float* g, const float* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = x[i] > 0.0f ? g[i] : 0.0f;
  }
}

}  // namespace cliq::kernels::detail
