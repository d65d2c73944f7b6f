#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "cliq/synthdata.hpp"
#include "oracles.hpp"

using namespace cliq;

namespace {

double total_variation(const Tensor& img) {
  const int h = img.dim(1), w = img.dim(2);
  double tv = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (x + 1 < w) tv += std::abs(img.at(0, y, x + 1) - img.at(0, y, x));
      if (y + 1 < h) tv += std::abs(img.at(0, y + 1, x) - img.at(0, y, x));
    }
  }
  return tv;
}

TaskSpec default_spec() {
  TaskSpec spec;
  spec.id = "blur";
  spec.kinds = {Distortion::blur};
  spec.image_count = 100;
  return spec;
}

}  // namespace

TEST_CASE("base images: deterministic, in range, textured") {
  const auto a = generate_base_images(8, 32, 42);
  const auto b = generate_base_images(8, 32, 42);
  REQUIRE(a.size() == 8);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].bit_equal(b[i]));

  for (const Tensor& img : a) {
    double sum = 0.0, sq = 0.0;
    for (const float v : img.flat()) {
      CHECK(v >= 0.0f);
      CHECK(v <= 1.0f);
      sum += v;
      sq += static_cast<double>(v) * v;
    }
    const double mean = sum / static_cast<double>(img.size());
    const double stddev = std::sqrt(sq / static_cast<double>(img.size()) - mean * mean);
    CHECK(stddev > 0.01);
  }

  const auto c = generate_base_images(8, 32, 43);
  CHECK_FALSE(a[0].bit_equal(c[0]));
}

TEST_CASE("level 0 is the identity for every distortion kind") {
  const auto imgs = generate_base_images(1, 32, 7);
  for (const Distortion kind : all_distortions()) {
    const Tensor out = apply_distortion(imgs[0], kind, 0.0f, 123);
    CHECK(out.bit_equal(imgs[0]));
  }
}

TEST_CASE("distorted pixels stay in [0,1]") {
  const auto imgs = generate_base_images(2, 32, 11);
  for (const Distortion kind : all_distortions()) {
    for (const float level : {0.25f, 0.6f, 1.0f}) {
      const Tensor out = apply_distortion(imgs[0], kind, level, 5);
      for (const float v : out.flat()) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
      }
    }
  }
}

TEST_CASE("blur at level 1 reduces total variation") {
  const auto imgs = generate_base_images(4, 32, 13);
  for (const Tensor& img : imgs) {
    const Tensor blurred = apply_distortion(img, Distortion::blur, 1.0f, 5);
    CHECK(total_variation(blurred) < total_variation(img));
  }
}

TEST_CASE("white-noise empirical std is within 20% of the configured sigma") {
  // sigma(level) = 0.2 * level; measured on the additive residual.
  const auto imgs = generate_base_images(20, 32, 17);
  for (const float level : {0.4f, 0.8f}) {
    const double sigma_cfg = 0.2 * level;
    double sq = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < imgs.size(); ++i) {
      const Tensor noisy =
          apply_distortion(imgs[i], Distortion::white_noise, level, 1000 + i);
      for (std::size_t p = 0; p < noisy.size(); ++p) {
        const double d = static_cast<double>(noisy[p]) - imgs[i][p];
        sq += d * d;
        ++count;
      }
    }
    const double measured = std::sqrt(sq / static_cast<double>(count));
    CHECK(measured > 0.8 * sigma_cfg);
    CHECK(measured < 1.2 * sigma_cfg);
  }
}

TEST_CASE("unknown level range and bad kinds are rejected") {
  const auto imgs = generate_base_images(1, 32, 19);
  CHECK_THROWS_AS(apply_distortion(imgs[0], Distortion::blur, 1.5f, 0),
                  std::invalid_argument);
  CHECK_THROWS_AS(distortion_from_string("vignette"), std::invalid_argument);
  CHECK(distortion_from_string("salt-pepper") == Distortion::salt_pepper);
}

TEST_CASE("distortion families split 3/3") {
  int synthetic = 0;
  for (const Distortion d : all_distortions()) {
    if (scenario_of(d) == Scenario::synthetic) ++synthetic;
  }
  CHECK(synthetic == 3);
  CHECK(scenario_of(Distortion::blur) == Scenario::synthetic);
  CHECK(scenario_of(Distortion::contrast) == Scenario::realistic);
}

TEST_CASE("task dataset: split sizes, disjoint content, determinism") {
  const TaskSpec spec = default_spec();
  const TaskDataset ds = make_task_dataset(spec, 99);
  CHECK(ds.train.size() == 70);
  CHECK(ds.val.size() == 10);
  CHECK(ds.test.size() == 20);

  std::set<int> seen;
  for (const auto* part : {&ds.train, &ds.val, &ds.test}) {
    for (const ImageSample& s : *part) {
      CHECK(seen.insert(s.source_id).second);  // no id in two partitions
      CHECK(s.mos >= 0.0f);
      CHECK(s.mos <= 5.0f);
    }
  }
  CHECK(seen.size() == 100);

  const TaskDataset again = make_task_dataset(spec, 99);
  REQUIRE(again.train.size() == ds.train.size());
  for (std::size_t i = 0; i < ds.train.size(); ++i) {
    CHECK(ds.train[i].image.bit_equal(again.train[i].image));
    CHECK(ds.train[i].mos == again.train[i].mos);
  }

  TaskSpec tiny = spec;
  tiny.image_count = 10;
  CHECK_THROWS_AS(make_task_dataset(tiny, 1), std::invalid_argument);
}

TEST_CASE("level-0 samples score a MOS of at least 4.8") {
  TaskSpec spec = default_spec();
  spec.level_min = 0.0f;
  spec.level_max = 0.0f;
  const TaskDataset ds = make_task_dataset(spec, 31);
  for (const auto* part : {&ds.train, &ds.val, &ds.test}) {
    for (const ImageSample& s : *part) CHECK(s.mos >= 4.8f);
  }
}

TEST_CASE("MOS decreases with level: spearman(level, mos) <= -0.95") {
  TaskSpec spec = default_spec();
  spec.kinds = {Distortion::blur, Distortion::white_noise};
  const TaskDataset ds = make_task_dataset(spec, 55);
  std::vector<double> levels, mos;
  for (const ImageSample& s : ds.train) {
    levels.push_back(s.level);
    mos.push_back(s.mos);
  }
  CHECK(oracles::spearman_reference(levels, mos) <= -0.95);
}

TEST_CASE("pair labels follow the mos comparison with ties mapping to 1") {
  CHECK(pair_label(3.2f, 3.2f) == 1);
  CHECK(pair_label(1.0f, 4.0f) == 0);
  CHECK(pair_label(4.0f, 1.0f) == 1);
}

TEST_CASE("build_pairs: distinct pairs, valid indices, labels consistent") {
  const TaskDataset ds = make_task_dataset(default_spec(), 77);
  const PairSet pairs = build_pairs(ds, 700, 5);
  CHECK(pairs.pairs.size() == 700);

  std::set<std::pair<int, int>> seen;
  for (const auto& p : pairs.pairs) {
    CHECK(p.x >= 0);
    CHECK(p.x < 70);
    CHECK(p.y >= 0);
    CHECK(p.y < 70);
    CHECK(p.x != p.y);
    CHECK(seen.insert({std::min(p.x, p.y), std::max(p.x, p.y)}).second);
    const int want = pair_label(ds.train[static_cast<std::size_t>(p.x)].mos,
                                ds.train[static_cast<std::size_t>(p.y)].mos);
    CHECK(p.label == want);
  }

  CHECK_THROWS_AS(build_pairs(ds, 70 * 69 / 2 + 1, 5), std::invalid_argument);

  const PairSet again = build_pairs(ds, 700, 5);
  for (std::size_t i = 0; i < pairs.pairs.size(); ++i) {
    CHECK(pairs.pairs[i].x == again.pairs[i].x);
    CHECK(pairs.pairs[i].y == again.pairs[i].y);
    CHECK(pairs.pairs[i].label == again.pairs[i].label);
  }
}
