#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cliq/metrics.hpp"
#include "cliq/rng.hpp"
#include "oracles.hpp"

using namespace cliq;

TEST_CASE("srcc: monotone agreement and reversal") {
  CHECK(metrics::srcc(std::vector<double>{1, 2, 3}, {10, 20, 30}) ==
        doctest::Approx(1.0));
  CHECK(metrics::srcc(std::vector<double>{1, 2, 3}, {3, 2, 1}) ==
        doctest::Approx(-1.0));
}

TEST_CASE("srcc tie handling matches the average-rank oracle to 4 s.f.") {
  const std::vector<double> a = {1, 2, 2, 3};
  const std::vector<double> b = {1, 2, 3, 4};
  const double want = oracles::spearman_reference(a, b);
  // Frozen from the oracle: ranks (1, 2.5, 2.5, 4) vs (1,2,3,4) -> 0.948683.
  CHECK(want == doctest::Approx(0.948683).epsilon(1e-6));
  CHECK(metrics::srcc(a, b) == doctest::Approx(want).epsilon(1e-9));
}

TEST_CASE("srcc of a vector with itself is exactly 1.0") {
  Rng rng(5);
  std::vector<float> v(50);
  for (float& x : v) x = static_cast<float>(rng.next_unit());
  v[7] = v[13];  // a tie
  CHECK(metrics::srcc(v, v) == 1.0);
}

TEST_CASE("srcc is invariant under strictly increasing transforms") {
  Rng rng(9);
  std::vector<double> a(30), b(30);
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = rng.next_unit() * 4.0 - 2.0;
    b[i] = rng.next_unit() * 4.0 - 2.0;
  }
  const double base = metrics::srcc(a, b);
  std::vector<double> a2(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) a2[i] = std::exp(2.0 * a[i]) + 5.0;
  CHECK(metrics::srcc(a2, b) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("srcc error cases") {
  CHECK_THROWS_AS(metrics::srcc(std::vector<double>{1.0}, {2.0}), std::domain_error);
  CHECK_THROWS_AS(metrics::srcc(std::vector<double>{1, 1, 1}, {1, 2, 3}),
                  std::domain_error);
  CHECK_THROWS_AS(metrics::srcc(std::vector<double>{1, 2}, {1, 2, 3}),
                  std::invalid_argument);
}

TEST_CASE("msrcc and mpi are plain means") {
  CHECK(metrics::msrcc({1.0, 1.0, 1.0}) == doctest::Approx(1.0));
  CHECK(metrics::msrcc({0.8, 0.9}) == doctest::Approx(0.85));
  CHECK(metrics::mpi({0.7, 0.7, 0.7}) == doctest::Approx(0.7));
  CHECK(metrics::mpi({0.5}) == doctest::Approx(0.5));
  // Permutation invariance.
  CHECK(metrics::msrcc({0.1, 0.5, 0.9}) == doctest::Approx(metrics::msrcc({0.9, 0.1, 0.5})));
}

TEST_CASE("msi: first task pinned to 1, later rows averaged") {
  const auto r = metrics::msi({{}, {0.8}});
  CHECK(r.si[0] == 1.0);
  CHECK(r.si[1] == doctest::Approx(0.8));
  CHECK(r.msi == doctest::Approx(0.9));

  const auto one = metrics::msi({{}});
  CHECK(one.msi == 1.0);

  CHECK_THROWS_AS(metrics::msi({{}, {0.8, 0.9}}), std::invalid_argument);
}

TEST_CASE("mpsi arithmetic") {
  // Scalar sanity: (0.853 + 0.979) / 2 = 0.916.
  const auto r = metrics::mpsi({0.853}, {0.979});
  CHECK(r.mpsi == doctest::Approx(0.916).epsilon(5e-4));

  const auto same = metrics::mpsi({0.4, 0.6}, {0.4, 0.6});
  CHECK(same.mpsi == doctest::Approx(0.5));

  const auto ones = metrics::mpsi({1.0, 1.0}, {1.0, 1.0});
  CHECK(ones.mpsi == doctest::Approx(1.0));
}

TEST_CASE("bank_kl: identity, closed form, asymmetry, positivity") {
  metrics::BankGaussian p{{0.0}, {1.0}};
  CHECK(metrics::bank_kl(p, p) == doctest::Approx(0.0).epsilon(1e-9));

  metrics::BankGaussian q{{1.0}, {1.0}};
  CHECK(metrics::bank_kl(p, q) == doctest::Approx(0.5).epsilon(1e-12));

  metrics::BankGaussian r{{0.3, -0.2}, {0.5, 2.0}};
  metrics::BankGaussian s{{0.1, 0.4}, {1.5, 0.7}};
  CHECK(metrics::bank_kl(r, s) != doctest::Approx(metrics::bank_kl(s, r)));
  CHECK(metrics::bank_kl(r, s) > 0.0);
  CHECK(metrics::bank_kl(s, r) > 0.0);

  metrics::BankGaussian bad{{0.0}, {0.0}};
  CHECK_THROWS_AS(metrics::bank_kl(p, bad), std::invalid_argument);
}

TEST_CASE("bank_kl is zero only for identical Gaussians") {
  metrics::BankGaussian p{{0.2, 0.4}, {1.1, 0.9}};
  metrics::BankGaussian nudged{{0.2, 0.4001}, {1.1, 0.9}};
  CHECK(metrics::bank_kl(p, p) < 1e-9);
  CHECK(metrics::bank_kl(p, nudged) > 1e-9);
}

TEST_CASE("bank_gaussian reads the last site's running statistics") {
  TaskNormBank bank("t", {2, 3});
  bank.mutable_site(1).running_mean = {0.1f, 0.2f, 0.3f};
  bank.mutable_site(1).running_var = {1.5f, 2.5f, 3.5f};
  const auto g = metrics::bank_gaussian(bank);
  REQUIRE(g.mean.size() == 3);
  CHECK(g.mean[0] == doctest::Approx(0.1));
  CHECK(g.var[2] == doctest::Approx(3.5));
}

TEST_CASE("kl_vs_srcc_correlation: negated matrix gives -1, label-permutation invariant") {
  const std::vector<std::vector<double>> kl = {
      {0.0, 2.0, 5.0}, {1.0, 0.0, 4.0}, {6.0, 3.0, 0.0}};
  std::vector<std::vector<double>> neg(3, std::vector<double>(3, 0.0));
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) neg[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
        -kl[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  CHECK(metrics::kl_vs_srcc_correlation(kl, neg) == doctest::Approx(-1.0));

  // Permute task labels 0<->2 in both matrices; result unchanged.
  const auto permute = [](const std::vector<std::vector<double>>& m) {
    const int p[3] = {2, 1, 0};
    std::vector<std::vector<double>> out(3, std::vector<double>(3, 0.0));
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        out[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
            m[static_cast<std::size_t>(p[i])][static_cast<std::size_t>(p[j])];
    return out;
  };
  CHECK(metrics::kl_vs_srcc_correlation(permute(kl), permute(neg)) ==
        doctest::Approx(-1.0));

  CHECK_THROWS_AS(metrics::kl_vs_srcc_correlation({{0.0}}, {{0.0}}), std::domain_error);
}

TEST_CASE("finalize_sequence wires the composite metrics together") {
  // T = 2: srcc rows {0.9}, {0.85, 0.8}; srcc_hat row for t=1: {0.7}.
  const auto r = metrics::finalize_sequence({"a", "b"}, {{0.9}, {0.85, 0.8}}, {{}, {0.7}});
  CHECK(r.pi == std::vector<double>{0.9, 0.8});
  CHECK(r.si[0] == 1.0);
  CHECK(r.si[1] == doctest::Approx(0.7));
  CHECK(r.msrcc == doctest::Approx((0.85 + 0.8) / 2.0));
  CHECK(r.mpi == doctest::Approx(0.85));
  CHECK(r.msi == doctest::Approx(0.85));
  CHECK(r.mpsi == doctest::Approx(0.85));
  // T=1: msi = 1, mpsi = (srcc_11 + 1) / 2.
  const auto one = metrics::finalize_sequence({"a"}, {{0.9}}, {{}});
  CHECK(one.msi == 1.0);
  CHECK(one.mpsi == doctest::Approx((0.9 + 1.0) / 2.0));
}

TEST_CASE("composite metrics stay within [-1, 1] for random valid inputs") {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t t_count = 1 + rng.next_below(5);
    std::vector<std::vector<double>> srcc_m, hat_m;
    std::vector<std::string> names;
    for (std::size_t t = 0; t < t_count; ++t) {
      names.push_back("t" + std::to_string(t));
      std::vector<double> row(t + 1), hat(t);
      for (double& v : row) v = rng.next_unit() * 2.0 - 1.0;
      for (double& v : hat) v = rng.next_unit() * 2.0 - 1.0;
      srcc_m.push_back(row);
      hat_m.push_back(hat);
    }
    const auto r = metrics::finalize_sequence(names, srcc_m, hat_m);
    for (const double v : {r.msrcc, r.mpi, r.msi, r.mpsi}) {
      CHECK(v >= -1.0);
      CHECK(v <= 1.0);
    }
  }
}
