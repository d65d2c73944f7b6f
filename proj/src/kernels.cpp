#include "cliq/kernels.hpp"

#include <cstdlib>
#include <cstring>
#include <stdexcept>

namespace cliq::kernels {

namespace {

struct KernelTable {
  void (*add_scaled)(float*, const float*, float, std::size_t);
  void (*add_scaled3)(float*, const float*, const float*, const float*, float, float,
                      float, std::size_t);
  void (*conv3x3_block8)(float*, const float*, int, int, int, const float*);
  void (*conv3x3_block8_grad)(float*, const float*, int, int, int, const float*);
  void (*scale_shift)(float*, const float*, float, float, std::size_t);
  void (*relu)(float*, const float*, std::size_t);
  void (*relu_mask)(float*, const float*, const float*, std::size_t);
};

constexpr KernelTable kScalarTable = {
    detail::add_scaled_scalar,
    detail::add_scaled3_scalar,
    detail::conv3x3_block8_scalar,
    detail::conv3x3_block8_grad_scalar,
    detail::scale_shift_scalar,
    detail::relu_scalar,
    detail::relu_mask_scalar,
};

KernelTable table_for(Backend b) {
  switch (b) {
    case Backend::scalar:
      return kScalarTable;
#if defined(__x86_64__) || defined(_M_X64)
    case Backend::avx2:
      return {detail::add_scaled_avx2,       detail::add_scaled3_avx2,
              detail::conv3x3_block8_avx2,   detail::conv3x3_block8_grad_avx2,
              detail::scale_shift_avx2,      detail::relu_avx2,
              detail::relu_mask_avx2};
#endif
#if defined(__ARM_NEON) || defined(__ARM_NEON__)
    case Backend::neon:
      return {detail::add_scaled_neon,       detail::add_scaled3_neon,
              detail::conv3x3_block8_neon,   detail::conv3x3_block8_grad_neon,
              detail::scale_shift_neon,      detail::relu_neon,
              detail::relu_mask_neon};
#endif
    default:
      throw std::invalid_argument(std::string("kernel backend not supported here: ") +
                                  backend_name(b));
  }
}

Backend g_active = detect_backend();
KernelTable g_table = table_for(g_active);

}  // namespace

const char* backend_name(Backend b) {
  switch (b) {
    case Backend::scalar: return "scalar";
    case Backend::avx2: return "avx2";
    case Backend::neon: return "neon";
  }
  return "?";
}

bool backend_supported(Backend b) {
  switch (b) {
    case Backend::scalar:
      return true;
    case Backend::avx2:
#if defined(__x86_64__) || defined(_M_X64)
      return __builtin_cpu_supports("avx2") != 0;
#else
      return false;
#endif
    case Backend::neon:
#if defined(__ARM_NEON) || defined(__ARM_NEON__)
      return true;
#else
      return false;
#endif
  }
  return false;
}

Backend detect_backend() {
  if (const char* env = std::getenv("CLIQ_KERNELS")) {
    for (const Backend b : {Backend::scalar, Backend::avx2, Backend::neon}) {
      if (std::strcmp(env, backend_name(b)) == 0 && backend_supported(b)) {
        return b;
      }
    }
  }
  if (backend_supported(Backend::avx2)) return Backend::avx2;
  if (backend_supported(Backend::neon)) return Backend::neon;
  return Backend::scalar;
}

Backend active_backend() { return g_active; }

void select_backend(Backend b) {
  if (!backend_supported(b)) {
    throw std::invalid_argument(std::string("kernel backend not supported here: ") +
                                backend_name(b));
  }
  g_active = b;
  g_table = table_for(b);
}

void add_scaled(float* y, const float* x, float a, std::size_t n) {
  g_table.add_scaled(y, x, a, n);
}

void add_scaled3(float* y, const float* a, const float* b, const float* c, float w0,
                 float w1, float w2, std::size_t n) {
  g_table.add_scaled3(y, a, b, c, w0, w1, w2, n);
}

void conv3x3_block8(float* out8, const float* in, int c_in, int h, int w,
                    const float* wt) {
  g_table.conv3x3_block8(out8, in, c_in, h, w, wt);
}

void conv3x3_block8_grad(float* din8, const float* gout, int c_out, int h, int w,
                         const float* wt) {
  g_table.conv3x3_block8_grad(din8, gout, c_out, h, w, wt);
}

void scale_shift(float* y, const float* x, float a, float b, std::size_t n) {
  g_table.scale_shift(y, x, a, b, n);
}

void relu(float* y, const float* x, std::size_t n) {
  g_table.relu(y, x, n);
}

void relu_mask(float* y, const float* g, const float* x, std::size_t n) {
  g_table.relu_mask(y, g, x, n);
}

}  // namespace cliq::kernels
