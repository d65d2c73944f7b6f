// cliq: continual-learning engine for blind quality-regression models.
//
// Subcommands: gen-data, pretrain-gating, train-seq, eval, analyze-kl,
// orders, report. Exit codes: 0 success, 2 invalid config, 3 corrupted
// checkpoint.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cliq/errors.hpp"
#include "cliq/harness.hpp"
#include "cliq/rng.hpp"

namespace fs = std::filesystem;
using cliq::ExperimentConfig;
using ordered_json = nlohmann::ordered_json;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  bool seed_set = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "experiment config JSON");
  cmd->add_option("--out", args.out_dir, "output directory");
  cmd->add_option("--seed", args.seed, "master seed overriding the config seeds")
      ->each([&args](const std::string&) { args.seed_set = true; });
}

ExperimentConfig load_config(const CommonArgs& args) {
  ExperimentConfig cfg = ExperimentConfig::defaults();
  if (!args.config_path.empty()) {
    std::ifstream in(args.config_path);
    if (!in) throw cliq::ConfigError("cannot read config file " + args.config_path);
    std::stringstream buf;
    buf << in.rdbuf();
    cfg = ExperimentConfig::from_json_text(buf.str());
  }
  if (args.seed_set) {
    cfg.seeds.data = cliq::derive_seed(args.seed, "data");
    cfg.seeds.filters = cliq::derive_seed(args.seed, "filters");
    cfg.seeds.training = cliq::derive_seed(args.seed, "training");
    cfg.seeds.kmeans = cliq::derive_seed(args.seed, "kmeans");
  }
  cfg.validate();
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

cliq::EvalMode parse_mode(const std::string& mode) {
  if (mode == "soft") return cliq::EvalMode::soft;
  if (mode == "hard") return cliq::EvalMode::hard;
  if (mode == "oracle") return cliq::EvalMode::oracle;
  throw cliq::ConfigError("unknown mode '" + mode + "' (want soft|hard|oracle)");
}

int cmd_gen_data(const CommonArgs& args) {
  const ExperimentConfig cfg = load_config(args);
  cliq::export_datasets(fs::path(args.out_dir) / "data", cfg);
  write_text(fs::path(args.out_dir) / "config.json", cfg.to_json_text());
  std::printf("wrote %zu task datasets under %s/data\n", cfg.tasks.size(),
              args.out_dir.c_str());
  return 0;
}

int cmd_pretrain_gating(const CommonArgs& args) {
  const ExperimentConfig cfg = load_config(args);
  const cliq::RunEnvironment env = cliq::prepare_environment(cfg);

  cliq::RunOutcome partial;
  partial.config = cfg;
  {
    cliq::TaskNormBank copy = env.distortion_bank;
    partial.registry.install_distortion_bank(std::move(copy));
  }
  partial.store = cliq::CentroidStore(cfg.gating);
  cliq::save_checkpoint(fs::path(args.out_dir) / "checkpoint", partial);

  std::ostringstream log;
  log << "task,epoch,mean_fidelity_loss,val_srcc,steps\n";
  for (std::size_t e = 0; e < env.corpus_report.epoch_loss.size(); ++e) {
    log << "corpus," << (e + 1) << "," << env.corpus_report.epoch_loss[e] << ","
        << env.corpus_report.val_srcc << "," << env.corpus_report.steps << "\n";
  }
  write_text(fs::path(args.out_dir) / "pretrain_log.csv", log.str());
  std::printf("distortion-aware bank written to %s/checkpoint\n", args.out_dir.c_str());
  return 0;
}

int cmd_train_seq(const CommonArgs& args, const std::string& baseline) {
  ExperimentConfig cfg = load_config(args);
  if (!baseline.empty()) {
    if (baseline != "task-agnostic-bn") {
      throw cliq::ConfigError("unknown baseline '" + baseline + "'");
    }
    cfg.baseline = cliq::BaselineMode::task_agnostic_bn;
  }
  const cliq::RunOutcome run = cliq::run_sequence(cfg);
  cliq::save_checkpoint(fs::path(args.out_dir) / "checkpoint", run);
  cliq::write_run_outputs(args.out_dir, run);
  write_text(fs::path(args.out_dir) / "config.json", cfg.to_json_text());
  std::printf("sequence complete: soft msrcc %.4f mpsi %.4f (oracle msi %.4f)\n",
              run.results.soft.msrcc, run.results.soft.mpsi, run.results.oracle.msi);
  return 0;
}

int cmd_eval(const CommonArgs& args, const std::string& checkpoint_dir,
             const std::string& mode_name) {
  const cliq::LoadedCheckpoint loaded = cliq::load_checkpoint(checkpoint_dir);
  const cliq::EvalMode mode = parse_mode(mode_name);
  const cliq::TaskData data = cliq::prepare_task_data(loaded.config);

  std::vector<std::string> tasks;
  if (loaded.task_agnostic) {
    for (const auto& h : loaded.shared_heads) tasks.push_back(h.task_id);
  } else {
    tasks = loaded.registry.task_order();
  }
  if (tasks.empty()) throw cliq::ConfigError("checkpoint holds no trained tasks");

  ordered_json summary;
  summary["mode"] = mode_name;
  summary["per_task_srcc"] = ordered_json::object();
  for (const std::string& task : tasks) {
    const cliq::TaskDataset& ds = data.datasets.at(task);
    const auto records = cliq::evaluate_loaded(loaded, ds, mode);
    std::vector<std::string> ids;
    std::vector<float> q, mos;
    for (std::size_t i = 0; i < records.size(); ++i) {
      ids.push_back(task + "/" + std::to_string(ds.test[i].source_id));
      q.push_back(records[i].q_hat);
      mos.push_back(ds.test[i].mos);
    }
    cliq::write_predictions_csv(
        fs::path(args.out_dir) / ("predictions_" + mode_name + "_" + task + ".csv"),
        tasks, ids, records);
    summary["per_task_srcc"][task] = cliq::metrics::srcc(q, mos);
  }
  write_text(fs::path(args.out_dir) / ("eval_" + mode_name + ".json"),
             summary.dump(2) + "\n");
  std::printf("evaluated %zu tasks in %s mode; summary in %s\n", tasks.size(),
              mode_name.c_str(), args.out_dir.c_str());
  return 0;
}

int cmd_analyze_kl(const CommonArgs& args, const std::string& checkpoint_dir) {
  const cliq::LoadedCheckpoint loaded = cliq::load_checkpoint(checkpoint_dir);
  if (loaded.task_agnostic) {
    throw cliq::ConfigError("analyze-kl needs per-task banks (task-specific-bn mode)");
  }
  if (loaded.registry.task_count() < 2) {
    throw cliq::ConfigError("analyze-kl needs at least two trained tasks");
  }
  const cliq::TaskData data = cliq::prepare_task_data(loaded.config);
  const cliq::KlAnalysis kl =
      cliq::analyze_kl(loaded.backbone, loaded.registry, loaded.config.tasks,
                       data.datasets);

  const auto matrix_csv = [&](const std::vector<std::vector<double>>& m) {
    std::ostringstream out;
    out << "task";
    for (const auto& t : kl.tasks) out << "," << t;
    out << "\n";
    for (std::size_t i = 0; i < m.size(); ++i) {
      out << kl.tasks[i];
      for (const double v : m[i]) {
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.10g", v);
        out << "," << buf;
      }
      out << "\n";
    }
    return out.str();
  };
  write_text(fs::path(args.out_dir) / "kl_matrix.csv", matrix_csv(kl.kl));
  write_text(fs::path(args.out_dir) / "cross_srcc.csv", matrix_csv(kl.cross_srcc));

  ordered_json j;
  j["tasks"] = kl.tasks;
  j["kl_vs_srcc_correlation"] = kl.kl_srcc_correlation;
  j["mean_within_family_kl"] = kl.mean_within_family_kl;
  j["mean_cross_family_kl"] = kl.mean_cross_family_kl;
  write_text(fs::path(args.out_dir) / "kl_summary.json", j.dump(2) + "\n");
  std::printf("kl/srcc correlation %.4f (within-family %.2f vs cross-family %.2f)\n",
              kl.kl_srcc_correlation, kl.mean_within_family_kl, kl.mean_cross_family_kl);
  return 0;
}

int cmd_orders(const CommonArgs& args, const std::string& labels_csv) {
  const ExperimentConfig cfg = load_config(args);
  std::vector<std::string> labels;
  std::stringstream ss(labels_csv);
  std::string label;
  while (std::getline(ss, label, ',')) {
    if (!label.empty()) labels.push_back(label);
  }
  const auto runs = cliq::run_order_suite(cfg, labels);
  cliq::write_order_suite_outputs(args.out_dir, runs);
  for (const auto& run : runs) {
    std::printf("%-28s soft msrcc %.4f  mpsi %.4f\n", run.label.c_str(),
                run.outcome.results.soft.msrcc, run.outcome.results.soft.mpsi);
  }
  return 0;
}

int cmd_report(const CommonArgs& args) {
  ordered_json report;
  std::ostringstream csv;
  csv << "source,key,value\n";
  const fs::path out(args.out_dir);
  for (const char* name :
       {"results_soft.json", "results_hard.json", "results_oracle.json",
        "orders_summary.json", "eval_soft.json", "eval_hard.json", "eval_oracle.json",
        "kl_summary.json"}) {
    const fs::path path = out / name;
    if (!fs::exists(path)) continue;
    std::ifstream in(path);
    ordered_json j;
    in >> j;
    report[name] = j;
    if (j.is_object()) {
      for (const auto& [key, value] : j.items()) {
        if (value.is_number()) {
          csv << name << "," << key << "," << value.dump() << "\n";
        }
      }
    }
  }
  if (report.empty()) {
    std::printf("nothing to report under %s\n", args.out_dir.c_str());
    return 0;
  }
  write_text(out / "report.json", report.dump(2) + "\n");
  write_text(out / "report.csv", csv.str());
  std::printf("aggregated %zu result files into %s/report.json\n", report.size(),
              args.out_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"continual-learning engine for blind quality-regression models"};
  app.require_subcommand(1);

  CommonArgs gen_args, pre_args, train_args, eval_args, kl_args, orders_args, report_args;
  std::string baseline, eval_checkpoint, kl_checkpoint, eval_mode = "soft";
  std::string order_labels =
      "default,alternating,synthetic-first,realistic-first,"
      "default-reversed,alternating-reversed,synthetic-first-reversed,"
      "realistic-first-reversed";

  CLI::App* gen = app.add_subcommand("gen-data", "emit the per-task datasets");
  add_common(gen, gen_args);

  CLI::App* pre = app.add_subcommand("pretrain-gating",
                                     "train the distortion-aware gating bank");
  add_common(pre, pre_args);

  CLI::App* train = app.add_subcommand("train-seq", "run the continual sequence");
  add_common(train, train_args);
  train->add_option("--baseline", baseline,
                    "ablation switch; the only value is task-agnostic-bn");

  CLI::App* eval = app.add_subcommand("eval", "metrics from a checkpoint");
  add_common(eval, eval_args);
  eval->add_option("checkpoint", eval_checkpoint, "checkpoint directory")->required();
  eval->add_option("--mode", eval_mode, "soft|hard|oracle");

  CLI::App* kl = app.add_subcommand("analyze-kl", "bank divergence analysis");
  add_common(kl, kl_args);
  kl->add_option("checkpoint", kl_checkpoint, "checkpoint directory")->required();

  CLI::App* orders = app.add_subcommand("orders", "task-order robustness suite");
  add_common(orders, orders_args);
  orders->add_option("--orders", order_labels, "comma-separated order labels");

  CLI::App* report = app.add_subcommand("report", "aggregate CSV/JSON outputs");
  add_common(report, report_args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen_data(gen_args);
    if (pre->parsed()) return cmd_pretrain_gating(pre_args);
    if (train->parsed()) return cmd_train_seq(train_args, baseline);
    if (eval->parsed()) return cmd_eval(eval_args, eval_checkpoint, eval_mode);
    if (kl->parsed()) return cmd_analyze_kl(kl_args, kl_checkpoint);
    if (orders->parsed()) return cmd_orders(orders_args, order_labels);
    if (report->parsed()) return cmd_report(report_args);
  } catch (const cliq::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const cliq::CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
