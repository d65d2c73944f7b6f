#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <vector>

#include "cliq/kernels.hpp"
#include "cliq/rng.hpp"

using namespace cliq;

namespace {

std::vector<float> random_vec(Rng& rng, std::size_t n, double scale = 2.0) {
  std::vector<float> v(n);
  for (float& x : v) x = static_cast<float>(scale * (rng.next_unit() * 2.0 - 1.0));
  return v;
}

bool bits_equal(const std::vector<float>& a, const std::vector<float>& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

// Every SIMD backend must be bit-identical to the scalar reference, including
// on lengths that exercise the vector tail and on signed zeros.
void check_backend_equivalence(kernels::Backend simd) {
  Rng rng(7);
  const std::size_t lengths[] = {1, 3, 7, 8, 9, 15, 16, 17, 64, 100, 1001};
  for (const std::size_t n : lengths) {
    std::vector<float> x = random_vec(rng, n);
    std::vector<float> g = random_vec(rng, n);
    // Sprinkle exact zeros of both signs through the mask input.
    for (std::size_t i = 0; i < n; i += 5) x[i] = (i % 10 == 0) ? 0.0f : -0.0f;
    const float a = static_cast<float>(rng.next_unit() * 2.0 - 1.0);
    const float b = static_cast<float>(rng.next_unit() * 2.0 - 1.0);
    std::vector<float> y0 = random_vec(rng, n);

    std::vector<float> want = y0, got = y0;
    kernels::select_backend(kernels::Backend::scalar);
    kernels::add_scaled(want.data(), x.data(), a, n);
    kernels::select_backend(simd);
    kernels::add_scaled(got.data(), x.data(), a, n);
    CHECK(bits_equal(want, got));

    kernels::select_backend(kernels::Backend::scalar);
    kernels::scale_shift(want.data(), x.data(), a, b, n);
    kernels::select_backend(simd);
    kernels::scale_shift(got.data(), x.data(), a, b, n);
    CHECK(bits_equal(want, got));

    kernels::select_backend(kernels::Backend::scalar);
    kernels::relu(want.data(), x.data(), n);
    kernels::select_backend(simd);
    kernels::relu(got.data(), x.data(), n);
    CHECK(bits_equal(want, got));

    kernels::select_backend(kernels::Backend::scalar);
    kernels::relu_mask(want.data(), g.data(), x.data(), n);
    kernels::select_backend(simd);
    kernels::relu_mask(got.data(), g.data(), x.data(), n);
    CHECK(bits_equal(want, got));

    if (n >= 3) {
      const std::vector<float> a3 = random_vec(rng, n);
      const std::vector<float> b3 = random_vec(rng, n);
      const std::vector<float> c3 = random_vec(rng, n);
      want = y0;
      got = y0;
      kernels::select_backend(kernels::Backend::scalar);
      kernels::add_scaled3(want.data(), a3.data(), b3.data(), c3.data(), a, b, -a, n);
      kernels::select_backend(simd);
      kernels::add_scaled3(got.data(), a3.data(), b3.data(), c3.data(), a, b, -a, n);
      CHECK(bits_equal(want, got));
    }
  }

  // Channel-blocked conv kernels, forward and input-gradient.
  for (const auto& [c, h, w] : {std::tuple{3, 4, 5}, {16, 8, 8}, {7, 4, 4}}) {
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    std::vector<float> in = random_vec(rng, static_cast<std::size_t>(c) * plane);
    std::vector<float> wt = random_vec(rng, static_cast<std::size_t>(c) * 9 * 8);
    std::vector<float> want(8 * plane), got(8 * plane);
    kernels::select_backend(kernels::Backend::scalar);
    kernels::conv3x3_block8(want.data(), in.data(), c, h, w, wt.data());
    kernels::select_backend(simd);
    kernels::conv3x3_block8(got.data(), in.data(), c, h, w, wt.data());
    CHECK(bits_equal(want, got));

    kernels::select_backend(kernels::Backend::scalar);
    kernels::conv3x3_block8_grad(want.data(), in.data(), c, h, w, wt.data());
    kernels::select_backend(simd);
    kernels::conv3x3_block8_grad(got.data(), in.data(), c, h, w, wt.data());
    CHECK(bits_equal(want, got));
  }
  kernels::select_backend(kernels::detect_backend());
}

}  // namespace

TEST_CASE("scalar backend is always supported and selectable") {
  CHECK(kernels::backend_supported(kernels::Backend::scalar));
  kernels::select_backend(kernels::Backend::scalar);
  CHECK(kernels::active_backend() == kernels::Backend::scalar);
  kernels::select_backend(kernels::detect_backend());
}

TEST_CASE("selecting an unsupported backend throws") {
  const kernels::Backend foreign =
#if defined(__x86_64__) || defined(_M_X64)
      kernels::Backend::neon;
#else
      kernels::Backend::avx2;
#endif
  CHECK(!kernels::backend_supported(foreign));
  CHECK_THROWS_AS(kernels::select_backend(foreign), std::invalid_argument);
}

TEST_CASE("avx2 kernels match scalar bit for bit") {
  if (!kernels::backend_supported(kernels::Backend::avx2)) {
    MESSAGE("avx2 not available on this machine; skipping");
    return;
  }
  check_backend_equivalence(kernels::Backend::avx2);
}

TEST_CASE("neon kernels match scalar bit for bit") {
  if (!kernels::backend_supported(kernels::Backend::neon)) {
    MESSAGE("neon not available on this machine; skipping");
    return;
  }
  check_backend_equivalence(kernels::Backend::neon);
}

TEST_CASE("add_scaled3 is bit-identical to three sequential add_scaled calls") {
  Rng rng(41);
  for (const std::size_t n : {1UL, 5UL, 8UL, 29UL, 257UL}) {
    const std::vector<float> a = random_vec(rng, n);
    const std::vector<float> b = random_vec(rng, n);
    const std::vector<float> c = random_vec(rng, n);
    const float w0 = 0.37f, w1 = -1.21f, w2 = 0.055f;
    std::vector<float> fused = random_vec(rng, n);
    std::vector<float> unfused = fused;

    kernels::add_scaled3(fused.data(), a.data(), b.data(), c.data(), w0, w1, w2, n);
    kernels::add_scaled(unfused.data(), a.data(), w0, n);
    kernels::add_scaled(unfused.data(), b.data(), w1, n);
    kernels::add_scaled(unfused.data(), c.data(), w2, n);
    CHECK(bits_equal(fused, unfused));
  }
}

TEST_CASE("scalar kernel semantics") {
  kernels::select_backend(kernels::Backend::scalar);
  float y[3] = {1.0f, 2.0f, 3.0f};
  const float x[3] = {10.0f, 20.0f, 30.0f};
  kernels::add_scaled(y, x, 0.5f, 3);
  CHECK(y[0] == 6.0f);
  CHECK(y[1] == 12.0f);
  CHECK(y[2] == 18.0f);

  float out[3];
  kernels::scale_shift(out, x, 2.0f, 1.0f, 3);
  CHECK(out[0] == 21.0f);
  CHECK(out[2] == 61.0f);

  const float r[3] = {-1.0f, 0.0f, 2.0f};
  kernels::relu(out, r, 3);
  CHECK(out[0] == 0.0f);
  CHECK(out[1] == 0.0f);
  CHECK(out[2] == 2.0f);

  const float g[3] = {5.0f, 6.0f, 7.0f};
  kernels::relu_mask(out, g, r, 3);
  CHECK(out[0] == 0.0f);
  CHECK(out[1] == 0.0f);
  CHECK(out[2] == 7.0f);
  kernels::select_backend(kernels::detect_backend());
}
