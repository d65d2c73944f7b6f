#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cliq/errors.hpp"
#include "cliq/normbank.hpp"
#include "cliq/ops.hpp"
#include "cliq/rng.hpp"
#include "oracles.hpp"

using namespace cliq;

TEST_CASE("fresh banks start as the identity normalization") {
  const std::vector<int> channels = {8, 16, 32, 64};
  TaskNormBank a("t", channels);
  TaskNormBank b("t", channels);
  CHECK(a.bit_equal(b));
  for (int s = 0; s < a.site_count(); ++s) {
    for (const float v : a.site(s).gamma) CHECK(v == 1.0f);
    for (const float v : a.site(s).beta) CHECK(v == 0.0f);
    for (const float v : a.site(s).running_mean) CHECK(v == 0.0f);
    for (const float v : a.site(s).running_var) CHECK(v == 1.0f);
  }

  // Identity bank with eps 0 passes activations through unchanged.
  Rng rng(3);
  Tensor x({1, 8, 4, 4});
  oracles::fill_random(x, rng);
  const auto [out, _] = ops::batchnorm_forward(
      x, const_cast<ops::NormSite&>(a.site(0)), ops::BnMode::eval, 0.1f, 0.0f);
  CHECK(out.bit_equal(x));
}

TEST_CASE("trainable parameter counts") {
  TaskNormBank bank("t", {8, 16, 32, 64});
  CHECK(bank.trainable_param_count() == 240);  // 2 * (8+16+32+64)
  CHECK(per_task_param_count({8, 16, 32, 64}, 64, true) == 305);
  CHECK(per_task_param_count({8, 16, 32, 64}, 64, false) == 304);

  // Additivity: each registered task adds exactly the per-task count.
  BankRegistry registry;
  std::size_t total = 0;
  for (const char* id : {"a", "b", "c"}) {
    TaskNormBank b(id, {8, 16, 32, 64});
    b.freeze();
    PredictionHead h = PredictionHead::zeros(id, 64);
    const std::size_t before = total;
    registry.add_task(std::move(b), std::move(h));
    total = 0;
    for (const std::string& t : registry.task_order()) {
      total += registry.bank(t).trainable_param_count();
      total += registry.head(t).weight.size() + registry.head(t).bias.size();
    }
    CHECK(total - before == 305);
  }
}

TEST_CASE("freeze: reads unchanged, mutation refused, double freeze is an error") {
  TaskNormBank bank("t", {2, 3});
  bank.mutable_site(0).gamma[1] = 1.25f;
  bank.mutable_site(1).running_var[2] = 0.5f;
  const TaskNormBank before_freeze = bank;

  bank.freeze();
  CHECK(bank.frozen());
  // Read state is untouched by freezing.
  for (int s = 0; s < bank.site_count(); ++s) {
    CHECK(bank.site(s).gamma == before_freeze.site(s).gamma);
    CHECK(bank.site(s).running_var == before_freeze.site(s).running_var);
  }
  CHECK_THROWS_AS(bank.mutable_site(0), CorruptBankError);
  CHECK_THROWS_AS(bank.freeze(), std::logic_error);
}

TEST_CASE("registry guards: duplicates, layout, id pairing, frozen requirement") {
  BankRegistry registry;
  TaskNormBank bank("a", {2, 3});
  bank.freeze();
  registry.add_task(std::move(bank), PredictionHead::zeros("a", 3));
  CHECK(registry.has_task("a"));
  CHECK(registry.task_count() == 1);

  TaskNormBank dup("a", {2, 3});
  dup.freeze();
  CHECK_THROWS_AS(registry.add_task(std::move(dup), PredictionHead::zeros("a", 3)),
                  std::logic_error);

  TaskNormBank mismatched_layout("b", {4, 3});
  mismatched_layout.freeze();
  CHECK_THROWS_AS(
      registry.add_task(std::move(mismatched_layout), PredictionHead::zeros("b", 3)),
      std::invalid_argument);

  TaskNormBank wrong_id("c", {2, 3});
  wrong_id.freeze();
  CHECK_THROWS_AS(registry.add_task(std::move(wrong_id), PredictionHead::zeros("d", 3)),
                  std::invalid_argument);

  TaskNormBank unfrozen("e", {2, 3});
  CHECK_THROWS_AS(registry.add_task(std::move(unfrozen), PredictionHead::zeros("e", 3)),
                  std::invalid_argument);

  CHECK_THROWS_AS(registry.bank("nope"), std::invalid_argument);
  CHECK_THROWS_AS(registry.distortion_bank(), std::logic_error);

  TaskNormBank dist("distortion-aware", {2, 3});
  dist.freeze();
  registry.install_distortion_bank(std::move(dist));
  CHECK(registry.has_distortion_bank());
  TaskNormBank second("distortion-aware", {2, 3});
  second.freeze();
  CHECK_THROWS_AS(registry.install_distortion_bank(std::move(second)), std::logic_error);
}
