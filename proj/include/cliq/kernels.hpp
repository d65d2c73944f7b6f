#pragma once

#include <cstddef>
#include <string>

namespace cliq::kernels {

// The four hot elementwise loops of the engine. Every backend computes
// mul-then-add with no fma contraction and no reordered reductions, so all
// backends produce bit-identical results; the equivalence tests assert exact
// equality. Reductions (sums, dot products) stay scalar everywhere.

enum class Backend { scalar, avx2, neon };

const char* backend_name(Backend b);
bool backend_supported(Backend b);
// Best supported backend; the CLIQ_KERNELS env var (scalar|avx2|neon)
// overrides detection.
Backend detect_backend();
// Currently active backend (detect_backend() until select_backend is called).
Backend active_backend();
// Throws std::invalid_argument if unsupported on this machine.
void select_backend(Backend b);

// y[i] += a * x[i]
void add_scaled(float* y, const float* x, float a, std::size_t n);
// Fused 3-tap row update, bit-identical to three sequential add_scaled
// calls: y[i] = ((y[i] + w0*a[i]) + w1*b[i]) + w2*c[i].
void add_scaled3(float* y, const float* a, const float* b, const float* c,
                 float w0, float w1, float w2, std::size_t n);
// 3x3 same-padded cross-correlation of c_in input planes into 8 consecutive
// output-channel planes (each h*w floats). Taps are pre-transposed:
// wt[((ci*3+ky)*3+kx)*8 + lane], lane = output channel. Accumulation per
// output element runs in (ci,ky,kx) order, matching the per-tap row path.
void conv3x3_block8(float* out8, const float* in, int c_in, int h, int w,
                    const float* wt);
// Input-gradient mirror: fills 8 consecutive input-channel planes from c_out
// upstream planes. wt[((co*3+ky)*3+kx)*8 + lane], lane = input channel;
// accumulation per element runs in (co,ky,kx) order.
void conv3x3_block8_grad(float* din8, const float* gout, int c_out, int h, int w,
                         const float* wt);
// y[i] = x[i] * a + b
void scale_shift(float* y, const float* x, float a, float b, std::size_t n);
// y[i] = x[i] > 0 ? x[i] : 0
void relu(float* y, const float* x, std::size_t n);
// y[i] = x[i] > 0 ? g[i] : 0
void relu_mask(float* y, const float* g, const float* x, std::size_t n);

namespace detail {
void add_scaled_scalar(float* y, const float* x, float a, std::size_t n);
void add_scaled3_scalar(float* y, const float* a, const float* b, const float* c,
                        float w0, float w1, float w2, std::size_t n);
void conv3x3_block8_scalar(float* out8, const float* in, int c_in, int h, int w,
                           const float* wt);
void conv3x3_block8_grad_scalar(float* din8, const float* gout, int c_out, int h,
                                int w, const float* wt);
void scale_shift_scalar(float* y, const float* x, float a, float b, std::size_t n);
void relu_scalar(float* y, const float* x, std::size_t n);
void relu_mask_scalar(float* y, const float* g, const float* x, std::size_t n);

#if defined(__x86_64__) || defined(_M_X64)
void add_scaled_avx2(float* y, const float* x, float a, std::size_t n);
void add_scaled3_avx2(float* y, const float* a, const float* b, const float* c,
                      float w0, float w1, float w2, std::size_t n);
void conv3x3_block8_avx2(float* out8, const float* in, int c_in, int h, int w,
                         const float* wt);
void conv3x3_block8_grad_avx2(float* din8, const float* gout, int c_out, int h,
                              int w, const float* wt);
void scale_shift_avx2(float* y, const float* x, float a, float b, std::size_t n);
void relu_avx2(float* y, const float* x, std::size_t n);
void relu_mask_avx2(float* y, const float* g, const float* x, std::size_t n);
#endif

#if defined(__ARM_NEON) || defined(__ARM_NEON__)
void add_scaled_neon(float* y, const float* x, float a, std::size_t n);
void add_scaled3_neon(float* y, const float* a, const float* b, const float* c,
                      float w0, float w1, float w2, std::size_t n);
void conv3x3_block8_neon(float* out8, const float* in, int c_in, int h, int w,
                         const float* wt);
void conv3x3_block8_grad_neon(float* din8, const float* gout, int c_out, int h,
                              int w, const float* wt);
void scale_shift_neon(float* y, const float* x, float a, float b, std::size_t n);
void relu_neon(float* y, const float* x, std::size_t n);
void relu_mask_neon(float* y, const float* g, const float* x, std::size_t n);
#endif
}  // namespace detail

}  // namespace cliq::kernels
