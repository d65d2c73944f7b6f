#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "cliq/errors.hpp"
#include "cliq/checkpoint.hpp"
#include "cliq/harness.hpp"

using namespace cliq;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny_config() {
  ExperimentConfig cfg;
  const auto task = [](const char* id, Distortion kind) {
    TaskSpec t;
    t.id = id;
    t.kinds = {kind};
    t.image_count = 24;
    return t;
  };
  cfg.tasks = {task("blur", Distortion::blur), task("contrast", Distortion::contrast)};
  cfg.order = {"blur", "contrast"};
  cfg.backbone.stage_count = 2;
  cfg.backbone.channels = {4, 6};
  cfg.backbone.input_side = 16;
  cfg.train.max_epochs = 3;
  cfg.train.decay_epoch = 2;
  cfg.train.batch_pairs = 8;
  cfg.gating.k = 4;
  cfg.gating.stages = {1, 2};
  cfg.pairs_per_image = 5;
  cfg.corpus_images = 24;
  return cfg;
}

fs::path temp_dir(const char* tag) {
  const fs::path dir = fs::temp_directory_path() / (std::string("cliq_harness_") + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

bool trees_identical(const fs::path& a, const fs::path& b) {
  std::vector<fs::path> rel_a, rel_b;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (e.is_regular_file()) rel_a.push_back(fs::relative(e.path(), a));
  }
  for (const auto& e : fs::recursive_directory_iterator(b)) {
    if (e.is_regular_file()) rel_b.push_back(fs::relative(e.path(), b));
  }
  std::sort(rel_a.begin(), rel_a.end());
  std::sort(rel_b.begin(), rel_b.end());
  if (rel_a != rel_b) return false;
  for (const auto& rel : rel_a) {
    if (slurp(a / rel) != slurp(b / rel)) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("config json round trip and validation") {
  const ExperimentConfig cfg = tiny_config();
  const std::string text = cfg.to_json_text();
  const ExperimentConfig back = ExperimentConfig::from_json_text(text);
  CHECK(back.to_json_text() == text);
  CHECK(back.order == cfg.order);
  CHECK(back.backbone.channels == cfg.backbone.channels);
  CHECK(back.train.max_epochs == 3);

  ExperimentConfig dup = cfg;
  dup.tasks.push_back(dup.tasks[0]);
  dup.order.push_back(dup.tasks[0].id);
  CHECK_THROWS_AS(dup.validate(), ConfigError);

  ExperimentConfig bad_order = cfg;
  bad_order.order = {"blur", "blur"};
  CHECK_THROWS_AS(bad_order.validate(), ConfigError);

  ExperimentConfig reserved = cfg;
  reserved.tasks[0].id = "corpus";
  reserved.order[0] = "corpus";
  CHECK_THROWS_AS(reserved.validate(), ConfigError);

  CHECK_THROWS_AS(ExperimentConfig::from_json_text("{ nope"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json_text(R"({"baseline": "mystery"})"),
                  ConfigError);

  const ExperimentConfig defaults = ExperimentConfig::defaults();
  CHECK(defaults.tasks.size() == 4);
  CHECK(defaults.order == std::vector<std::string>{"blur", "contrast", "white-noise",
                                                   "salt-pepper"});
}

TEST_CASE("order labels derive the expected permutations") {
  const ExperimentConfig cfg = tiny_config();  // blur (synthetic), contrast (realistic)
  CHECK(order_by_label(cfg, "default") == cfg.order);
  CHECK(order_by_label(cfg, "default-reversed") ==
        std::vector<std::string>{"contrast", "blur"});
  CHECK(order_by_label(cfg, "synthetic-first") ==
        std::vector<std::string>{"blur", "contrast"});
  CHECK(order_by_label(cfg, "realistic-first") ==
        std::vector<std::string>{"contrast", "blur"});
  CHECK(order_by_label(cfg, "alternating") ==
        std::vector<std::string>{"blur", "contrast"});
  CHECK_THROWS_AS(order_by_label(cfg, "zigzag"), ConfigError);

  // Reversing a single-task order changes nothing.
  ExperimentConfig solo = cfg;
  solo.tasks.resize(1);
  solo.order = {"blur"};
  CHECK(order_by_label(solo, "default-reversed") == solo.order);
}

TEST_CASE("run_sequence fills matrices; oracle stability is exact") {
  const ExperimentConfig cfg = tiny_config();
  const RunEnvironment env = prepare_environment(cfg);
  const RunOutcome run = run_sequence(cfg, env);

  for (const EvalMode mode : {EvalMode::soft, EvalMode::hard, EvalMode::oracle}) {
    const metrics::SequenceResults& r = run.results.by_mode(mode);
    REQUIRE(r.tasks.size() == 2);
    REQUIRE(r.srcc.size() == 2);
    CHECK(r.srcc[0].size() == 1);
    CHECK(r.srcc[1].size() == 2);
    for (const auto& row : r.srcc) {
      for (const double v : row) {
        CHECK(v >= -1.0);
        CHECK(v <= 1.0);
      }
    }
  }

  // Oracle predictions of the old task are bit-identical across time.
  const auto& oracle_preds = run.predictions[static_cast<std::size_t>(EvalMode::oracle)];
  REQUIRE(oracle_preds[1][0].size() == oracle_preds[0][0].size());
  CHECK(std::memcmp(oracle_preds[1][0].data(), oracle_preds[0][0].data(),
                    oracle_preds[0][0].size() * sizeof(float)) == 0);
  CHECK(run.results.oracle.msi == 1.0);
  CHECK(run.results.oracle.si[1] == 1.0);
}

TEST_CASE("single-task sequence: msi = 1 and mpsi = (srcc11 + 1) / 2") {
  ExperimentConfig cfg = tiny_config();
  cfg.tasks.resize(1);
  cfg.order = {"blur"};
  const RunOutcome run = run_sequence(cfg);
  for (const EvalMode mode : {EvalMode::soft, EvalMode::hard, EvalMode::oracle}) {
    const metrics::SequenceResults& r = run.results.by_mode(mode);
    CHECK(r.msi == 1.0);
    CHECK(r.mpsi == doctest::Approx((r.srcc[0][0] + 1.0) / 2.0).epsilon(1e-12));
  }
}

TEST_CASE("rerunning an identical config reproduces results bit for bit") {
  const ExperimentConfig cfg = tiny_config();
  const RunEnvironment env = prepare_environment(cfg);
  const RunOutcome a = run_sequence(cfg, env);
  const RunOutcome b = run_sequence(cfg, env);
  for (std::size_t m = 0; m < 3; ++m) {
    for (std::size_t t = 0; t < 2; ++t) {
      for (std::size_t k = 0; k <= t; ++k) {
        REQUIRE(a.predictions[m][t][k].size() == b.predictions[m][t][k].size());
        CHECK(std::memcmp(a.predictions[m][t][k].data(), b.predictions[m][t][k].data(),
                          a.predictions[m][t][k].size() * sizeof(float)) == 0);
      }
    }
  }
  CHECK(a.results.soft.msrcc == b.results.soft.msrcc);

  // Emitted files are byte-identical too, timings excepted.
  const fs::path d1 = temp_dir("out1");
  const fs::path d2 = temp_dir("out2");
  write_run_outputs(d1, a);
  write_run_outputs(d2, b);
  fs::remove(d1 / "timings.csv");
  fs::remove(d2 / "timings.csv");
  CHECK(trees_identical(d1, d2));
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST_CASE("checkpoint: save/load/save byte-identical, predictions preserved") {
  const ExperimentConfig cfg = tiny_config();
  const RunEnvironment env = prepare_environment(cfg);
  const RunOutcome run = run_sequence(cfg, env);

  const fs::path dir1 = temp_dir("ck1");
  save_checkpoint(dir1, run);

  const LoadedCheckpoint loaded = load_checkpoint(dir1);
  CHECK(loaded.has_results);
  CHECK(loaded.results.soft.msrcc == run.results.soft.msrcc);
  CHECK(loaded.registry.task_order() == run.registry.task_order());
  CHECK(loaded.registry.bank("blur").bit_equal(run.registry.bank("blur")));
  CHECK(loaded.store.centroids("contrast", 2).bit_equal(run.store.centroids("contrast", 2)));

  const fs::path dir2 = temp_dir("ck2");
  save_checkpoint(dir2, [&] {
    RunOutcome copy = run;  // emulate re-save from loaded state
    copy.registry = loaded.registry;
    copy.store = loaded.store;
    copy.config = loaded.config;
    copy.results = loaded.results;
    return copy;
  }());
  CHECK(trees_identical(dir1, dir2));

  // Inference after the round trip is bit-identical to the recorded run.
  const std::size_t last = cfg.order.size() - 1;
  for (std::size_t k = 0; k < cfg.order.size(); ++k) {
    const auto records =
        evaluate_loaded(loaded, env.datasets.at(cfg.order[k]), EvalMode::soft);
    const auto& want = run.predictions[static_cast<std::size_t>(EvalMode::soft)][last][k];
    REQUIRE(records.size() == want.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
      CHECK(std::memcmp(&records[i].q_hat, &want[i], sizeof(float)) == 0);
    }
  }

  // Version and corruption failures map to distinct error kinds.
  {
    std::string manifest = slurp(dir2 / "manifest.json");
    const auto pos = manifest.find("\"format_version\": 1");
    REQUIRE(pos != std::string::npos);
    manifest.replace(pos, std::strlen("\"format_version\": 1"), "\"format_version\": 9");
    std::ofstream out(dir2 / "manifest.json", std::ios::trunc);
    out << manifest;
  }
  try {
    (void)load_checkpoint(dir2);
    FAIL("expected CheckpointError");
  } catch (const CheckpointError& e) {
    CHECK(e.kind() == CheckpointError::Kind::version_mismatch);
  }

  {
    // Flip a payload byte under dir1.
    const fs::path victim = dir1 / "payloads" / "bank_blur_site0_gamma.bin";
    REQUIRE(fs::exists(victim));
    std::fstream f(victim, std::ios::in | std::ios::out | std::ios::binary);
    f.seekg(18);
    char c;
    f.get(c);
    f.seekp(18);
    f.put(static_cast<char>(c ^ 0x40));
  }
  try {
    (void)load_checkpoint(dir1);
    FAIL("expected CheckpointError");
  } catch (const CheckpointError& e) {
    CHECK(e.kind() == CheckpointError::Kind::checksum_mismatch);
  }

  fs::remove_all(dir1);
  fs::remove_all(dir2);
}

TEST_CASE("task-agnostic baseline: shared bank drifts, checkpoint round-trips") {
  ExperimentConfig cfg = tiny_config();
  cfg.baseline = BaselineMode::task_agnostic_bn;
  const RunOutcome run = run_sequence(cfg);
  CHECK(run.task_agnostic);
  CHECK(run.shared_heads.size() == 2);
  CHECK(run.registry.task_count() == 0);
  CHECK(run.shared_bank.frozen());

  const fs::path dir = temp_dir("agn");
  save_checkpoint(dir, run);
  const LoadedCheckpoint loaded = load_checkpoint(dir);
  CHECK(loaded.task_agnostic);
  CHECK(loaded.shared_heads.size() == 2);
  CHECK(loaded.shared_bank.bit_equal(run.shared_bank));

  const auto records = evaluate_loaded(loaded, prepare_environment(cfg).datasets.at("blur"),
                                       EvalMode::soft);
  CHECK(records.size() == 5);  // 20% of 24 (rounded split)
  fs::remove_all(dir);
}

TEST_CASE("order suite: oracle results identical across orders, rows per order") {
  const ExperimentConfig cfg = tiny_config();
  const auto runs = run_order_suite(cfg, {"default", "default-reversed"});
  REQUIRE(runs.size() == 2);
  CHECK(runs[0].label == "default");

  // Per-task oracle predictions are byte-identical regardless of order.
  const auto find_task_index = [](const RunOutcome& run, const std::string& id) {
    for (std::size_t i = 0; i < run.config.order.size(); ++i) {
      if (run.config.order[i] == id) return i;
    }
    REQUIRE(false);
    return std::size_t(0);
  };
  for (const std::string task : {"blur", "contrast"}) {
    const std::size_t ia = find_task_index(runs[0].outcome, task);
    const std::size_t ib = find_task_index(runs[1].outcome, task);
    const auto& pa = runs[0].outcome.predictions[2][ia][ia];  // oracle at training time
    const auto& pb = runs[1].outcome.predictions[2][ib][ib];
    REQUIRE(pa.size() == pb.size());
    CHECK(std::memcmp(pa.data(), pb.data(), pa.size() * sizeof(float)) == 0);
  }

  const fs::path dir = temp_dir("orders");
  write_order_suite_outputs(dir, runs);
  const std::string csv = slurp(dir / "orders_summary.csv");
  CHECK(csv.find("default-reversed,soft") != std::string::npos);
  fs::remove_all(dir);

  CHECK_THROWS_AS(run_order_suite(cfg, {"default"}), ConfigError);
}

TEST_CASE("length curve is the prefix mean of psi and recomputable") {
  const ExperimentConfig cfg = tiny_config();
  const RunOutcome run = run_sequence(cfg);
  const metrics::SequenceResults& r = run.results.soft;
  const std::vector<double> curve = length_curve(r);
  REQUIRE(curve.size() == r.psi.size());
  CHECK(curve[0] == doctest::Approx(r.psi[0]).epsilon(1e-12));

  // Recompute from the stored matrices.
  double acc = 0.0;
  for (std::size_t t = 0; t < r.psi.size(); ++t) {
    const double pi = r.srcc[t][t];
    double si = 1.0;
    if (t > 0) {
      si = 0.0;
      for (std::size_t k = 0; k < t; ++k) si += r.srcc_hat[t][k];
      si /= static_cast<double>(t);
    }
    acc += 0.5 * (pi + si);
    CHECK(curve[t] == doctest::Approx(acc / static_cast<double>(t + 1)).epsilon(1e-12));
  }
}

TEST_CASE("kl analysis: zero diagonal, family means populated") {
  const ExperimentConfig cfg = tiny_config();
  const RunEnvironment env = prepare_environment(cfg);
  const RunOutcome run = run_sequence(cfg, env);
  const KlAnalysis kl = analyze_kl(env.backbone, run.registry, cfg.tasks, env.datasets);
  REQUIRE(kl.tasks.size() == 2);
  CHECK(kl.kl[0][0] == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(kl.kl[1][1] == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(kl.kl[0][1] > 0.0);
  CHECK(kl.mean_cross_family_kl > 0.0);  // blur vs contrast are different families
  CHECK(kl.mean_within_family_kl == 0.0);  // no same-family pair in this config
}

TEST_CASE("dataset export writes manifests and decodable image payloads") {
  const ExperimentConfig cfg = tiny_config();
  const fs::path dir = temp_dir("data");
  export_datasets(dir, cfg);
  for (const std::string task : {"blur", "contrast"}) {
    CHECK(fs::exists(dir / task / "manifest.json"));
    const std::string manifest = slurp(dir / task / "manifest.json");
    CHECK(manifest.find("\"mos\"") != std::string::npos);
    // At least one image payload decodes.
    bool decoded = false;
    for (const auto& e : fs::directory_iterator(dir / task / "images")) {
      std::ifstream in(e.path(), std::ios::binary);
      std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                      std::istreambuf_iterator<char>());
      const Tensor img = checkpoint::decode_tensor(bytes);
      CHECK(img.shape() == std::vector<int>{1, 16, 16});
      decoded = true;
      break;
    }
    CHECK(decoded);
  }
  fs::remove_all(dir);
}
