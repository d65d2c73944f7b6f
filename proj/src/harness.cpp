#include "cliq/harness.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "cliq/checkpoint.hpp"
#include "cliq/errors.hpp"
#include "cliq/rng.hpp"

namespace cliq {

using ordered_json = nlohmann::ordered_json;

namespace {

constexpr const char* kSharedBankId = "task-agnostic";
constexpr const char* kCorpusId = "corpus";

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

bool valid_id(const std::string& id) {
  if (id.empty() || id.size() > 64) return false;
  for (const char c : id) {
    if (!((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-' || c == '_')) {
      return false;
    }
  }
  return true;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

ordered_json config_to_json(const ExperimentConfig& cfg) {
  ordered_json j;
  j["tasks"] = ordered_json::array();
  for (const TaskSpec& t : cfg.tasks) {
    ordered_json tj;
    tj["id"] = t.id;
    tj["kinds"] = ordered_json::array();
    for (const Distortion d : t.kinds) tj["kinds"].push_back(to_string(d));
    tj["level_min"] = static_cast<double>(t.level_min);
    tj["level_max"] = static_cast<double>(t.level_max);
    tj["images"] = t.image_count;
    j["tasks"].push_back(std::move(tj));
  }
  j["order"] = cfg.order;
  j["order_label"] = cfg.order_label;
  j["seeds"] = {{"data", cfg.seeds.data},
                {"filters", cfg.seeds.filters},
                {"training", cfg.seeds.training},
                {"kmeans", cfg.seeds.kmeans}};
  j["backbone"] = {{"stages", cfg.backbone.stage_count},
                   {"channels", cfg.backbone.channels},
                   {"kernel", cfg.backbone.kernel},
                   {"conv_stride", cfg.backbone.conv_stride},
                   {"input_channels", cfg.backbone.input_channels},
                   {"input_side", cfg.backbone.input_side}};
  j["train"] = {{"lr", static_cast<double>(cfg.train.lr)},
                {"lr_decay_factor", static_cast<double>(cfg.train.lr_decay_factor)},
                {"decay_epoch", cfg.train.decay_epoch},
                {"max_epochs", cfg.train.max_epochs},
                {"batch_pairs", cfg.train.batch_pairs},
                {"beta1", static_cast<double>(cfg.train.beta1)},
                {"beta2", static_cast<double>(cfg.train.beta2)},
                {"adam_eps", static_cast<double>(cfg.train.adam_eps)}};
  j["gating"] = {{"k", cfg.gating.k},
                 {"tau", static_cast<double>(cfg.gating.tau)},
                 {"stages", cfg.gating.stages}};
  j["pairs_per_image"] = cfg.pairs_per_image;
  j["corpus_images"] = cfg.corpus_images;
  j["baseline"] = cfg.baseline == BaselineMode::task_agnostic_bn ? "task-agnostic-bn"
                                                                 : "task-specific-bn";
  return j;
}

ExperimentConfig config_from_json(const ordered_json& j) {
  ExperimentConfig cfg = ExperimentConfig::defaults();
  try {
    if (j.contains("tasks")) {
      cfg.tasks.clear();
      for (const auto& tj : j.at("tasks")) {
        TaskSpec t;
        t.id = tj.at("id").get<std::string>();
        t.kinds.clear();
        for (const auto& k : tj.at("kinds")) {
          t.kinds.push_back(distortion_from_string(k.get<std::string>()));
        }
        t.level_min = static_cast<float>(tj.value("level_min", 0.0));
        t.level_max = static_cast<float>(tj.value("level_max", 1.0));
        t.image_count = tj.value("images", 100);
        cfg.tasks.push_back(std::move(t));
      }
    }
    if (j.contains("order")) {
      cfg.order = j.at("order").get<std::vector<std::string>>();
    } else {
      cfg.order.clear();
    }
    cfg.order_label = j.value("order_label", std::string("default"));
    if (j.contains("seeds")) {
      const auto& s = j.at("seeds");
      cfg.seeds.data = s.value("data", cfg.seeds.data);
      cfg.seeds.filters = s.value("filters", cfg.seeds.filters);
      cfg.seeds.training = s.value("training", cfg.seeds.training);
      cfg.seeds.kmeans = s.value("kmeans", cfg.seeds.kmeans);
    }
    if (j.contains("backbone")) {
      const auto& b = j.at("backbone");
      cfg.backbone.stage_count = b.value("stages", cfg.backbone.stage_count);
      if (b.contains("channels")) cfg.backbone.channels = b.at("channels").get<std::vector<int>>();
      cfg.backbone.kernel = b.value("kernel", cfg.backbone.kernel);
      cfg.backbone.conv_stride = b.value("conv_stride", cfg.backbone.conv_stride);
      cfg.backbone.input_channels = b.value("input_channels", cfg.backbone.input_channels);
      cfg.backbone.input_side = b.value("input_side", cfg.backbone.input_side);
    }
    if (j.contains("train")) {
      const auto& t = j.at("train");
      cfg.train.lr = static_cast<float>(t.value("lr", static_cast<double>(cfg.train.lr)));
      cfg.train.lr_decay_factor = static_cast<float>(
          t.value("lr_decay_factor", static_cast<double>(cfg.train.lr_decay_factor)));
      cfg.train.decay_epoch = t.value("decay_epoch", cfg.train.decay_epoch);
      cfg.train.max_epochs = t.value("max_epochs", cfg.train.max_epochs);
      cfg.train.batch_pairs = t.value("batch_pairs", cfg.train.batch_pairs);
      cfg.train.beta1 = static_cast<float>(t.value("beta1", static_cast<double>(cfg.train.beta1)));
      cfg.train.beta2 = static_cast<float>(t.value("beta2", static_cast<double>(cfg.train.beta2)));
      cfg.train.adam_eps =
          static_cast<float>(t.value("adam_eps", static_cast<double>(cfg.train.adam_eps)));
    }
    if (j.contains("gating")) {
      const auto& g = j.at("gating");
      cfg.gating.k = g.value("k", cfg.gating.k);
      cfg.gating.tau = static_cast<float>(g.value("tau", static_cast<double>(cfg.gating.tau)));
      if (g.contains("stages")) cfg.gating.stages = g.at("stages").get<std::vector<int>>();
    }
    cfg.pairs_per_image = j.value("pairs_per_image", cfg.pairs_per_image);
    cfg.corpus_images = j.value("corpus_images", cfg.corpus_images);
    const std::string baseline = j.value("baseline", std::string("task-specific-bn"));
    if (baseline == "task-specific-bn") {
      cfg.baseline = BaselineMode::task_specific_bn;
    } else if (baseline == "task-agnostic-bn") {
      cfg.baseline = BaselineMode::task_agnostic_bn;
    } else {
      throw ConfigError("unknown baseline '" + baseline + "'");
    }
  } catch (const ordered_json::exception& e) {
    throw ConfigError(std::string("bad experiment config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("bad experiment config: ") + e.what());
  }
  if (cfg.order.empty()) {
    for (const TaskSpec& t : cfg.tasks) cfg.order.push_back(t.id);
  }
  cfg.validate();
  return cfg;
}

ordered_json results_to_json(const metrics::SequenceResults& r) {
  ordered_json j;
  j["tasks"] = r.tasks;
  j["srcc"] = r.srcc;
  j["srcc_hat"] = r.srcc_hat;
  j["pi"] = r.pi;
  j["si"] = r.si;
  j["psi"] = r.psi;
  j["msrcc"] = r.msrcc;
  j["mpi"] = r.mpi;
  j["msi"] = r.msi;
  j["mpsi"] = r.mpsi;
  return j;
}

metrics::SequenceResults results_from_json(const ordered_json& j) {
  return metrics::finalize_sequence(j.at("tasks").get<std::vector<std::string>>(),
                                    j.at("srcc").get<std::vector<std::vector<double>>>(),
                                    j.at("srcc_hat").get<std::vector<std::vector<double>>>());
}

// Uniform view over the two model variants so evaluation code is shared.
struct ModelView {
  const FrozenBackbone* backbone = nullptr;
  const BankRegistry* registry = nullptr;  // always holds the distortion bank
  const CentroidStore* store = nullptr;
  const std::vector<std::string>* tasks = nullptr;  // seen tasks, execution order
  bool agnostic = false;
  const TaskNormBank* shared_bank = nullptr;
  const std::vector<PredictionHead>* shared_heads = nullptr;

  float head_score(std::size_t k, const Tensor& image, InferenceStats* stats) const {
    if (!agnostic) {
      return predict_oracle(*backbone, *registry, image, (*tasks)[k], stats);
    }
    const QualityOutput q = forward_quality(*backbone, *shared_bank,
                                            (*shared_heads)[k], stack_images({&image}));
    if (stats) stats->quality_passes += 1;
    return q.scores[0];
  }

  PredictionRecord gated(const Tensor& image, GateMode mode,
                         InferenceStats* stats) const {
    if (!agnostic) {
      return predict_gated(*backbone, *registry, *store, image, mode, stats);
    }
    PredictionRecord rec;
    rec.mode = mode == GateMode::soft ? "soft" : "hard";
    rec.weights = gate_tasks(*backbone, registry->distortion_bank(), *tasks, *store,
                             image, mode, stats);
    rec.head_scores.assign(tasks->size(), std::nullopt);
    if (mode == GateMode::soft) {
      double acc = 0.0;
      for (std::size_t k = 0; k < tasks->size(); ++k) {
        const float s = head_score(k, image, stats);
        rec.head_scores[k] = s;
        acc += static_cast<double>(rec.weights[k]) * s;
      }
      rec.q_hat = static_cast<float>(acc);
    } else {
      std::size_t best = 0;
      for (std::size_t k = 1; k < rec.weights.size(); ++k) {
        if (rec.weights[k] > rec.weights[best]) best = k;
      }
      const float s = head_score(best, image, stats);
      rec.head_scores[best] = s;
      rec.q_hat = s;
    }
    return rec;
  }

  std::vector<float> predictions(const TaskDataset& ds, std::size_t task_index,
                                 EvalMode mode) const {
    std::vector<float> out;
    out.reserve(ds.test.size());
    for (const ImageSample& s : ds.test) {
      switch (mode) {
        case EvalMode::soft:
          out.push_back(gated(s.image, GateMode::soft, nullptr).q_hat);
          break;
        case EvalMode::hard:
          out.push_back(gated(s.image, GateMode::hard, nullptr).q_hat);
          break;
        case EvalMode::oracle:
          out.push_back(head_score(task_index, s.image, nullptr));
          break;
      }
    }
    return out;
  }
};

TaskSpec corpus_spec(const ExperimentConfig& cfg) {
  TaskSpec spec;
  spec.id = kCorpusId;
  spec.kinds = all_distortions();
  spec.image_count = cfg.corpus_images;
  spec.side = cfg.backbone.input_side;
  return spec;
}

Tensor vector_tensor(const std::vector<float>& v) {
  return Tensor({static_cast<int>(v.size())}, v);
}

void put_bank(checkpoint::PayloadStore& store, const std::string& prefix,
              const TaskNormBank& bank) {
  for (int s = 0; s < bank.site_count(); ++s) {
    const ops::NormSite& site = bank.site(s);
    const std::string base = prefix + "/site" + std::to_string(s) + "/";
    store.put(base + "mean", vector_tensor(site.running_mean));
    store.put(base + "var", vector_tensor(site.running_var));
    store.put(base + "gamma", vector_tensor(site.gamma));
    store.put(base + "beta", vector_tensor(site.beta));
  }
}

TaskNormBank bank_from_payloads(const checkpoint::PayloadStore& store,
                                const std::string& prefix, const std::string& id,
                                const std::vector<int>& channels) {
  TaskNormBank bank(id, channels);
  for (int s = 0; s < bank.site_count(); ++s) {
    const std::string base = prefix + "/site" + std::to_string(s) + "/";
    ops::NormSite& site = bank.mutable_site(s);
    const auto load = [&](const char* field) {
      const Tensor& t = store.get(base + field);
      if (t.rank() != 1 || t.dim(0) != site.channels()) {
        throw CheckpointError(CheckpointError::Kind::malformed,
                              "bank payload shape mismatch at " + base + field);
      }
      return std::vector<float>(t.data(), t.data() + t.size());
    };
    site.running_mean = load("mean");
    site.running_var = load("var");
    site.gamma = load("gamma");
    site.beta = load("beta");
  }
  bank.freeze();
  return bank;
}

}  // namespace

const char* eval_mode_name(EvalMode mode) {
  switch (mode) {
    case EvalMode::soft: return "soft";
    case EvalMode::hard: return "hard";
    case EvalMode::oracle: return "oracle";
  }
  return "?";
}

const metrics::SequenceResults& ModeResults::by_mode(EvalMode mode) const {
  switch (mode) {
    case EvalMode::soft: return soft;
    case EvalMode::hard: return hard;
    case EvalMode::oracle: return oracle;
  }
  return soft;
}

ExperimentConfig ExperimentConfig::defaults() {
  ExperimentConfig cfg;
  const auto task = [](const char* id, Distortion kind) {
    TaskSpec t;
    t.id = id;
    t.kinds = {kind};
    t.image_count = 100;
    t.side = 32;
    return t;
  };
  cfg.tasks = {task("blur", Distortion::blur), task("contrast", Distortion::contrast),
               task("white-noise", Distortion::white_noise),
               task("salt-pepper", Distortion::salt_pepper)};
  cfg.order = {"blur", "contrast", "white-noise", "salt-pepper"};
  return cfg;
}

void ExperimentConfig::validate() const {
  if (tasks.empty()) throw ConfigError("config: no tasks");
  std::set<std::string> ids;
  for (const TaskSpec& t : tasks) {
    if (!valid_id(t.id)) throw ConfigError("config: bad task id '" + t.id + "'");
    if (t.id == kCorpusId || t.id == kDistortionBankId || t.id == kSharedBankId) {
      throw ConfigError("config: task id '" + t.id + "' is reserved");
    }
    if (!ids.insert(t.id).second) throw ConfigError("config: duplicate task id '" + t.id + "'");
    if (t.kinds.empty()) throw ConfigError("config: task '" + t.id + "' has no kinds");
    if (t.image_count < 20) throw ConfigError("config: task '" + t.id + "' needs >= 20 images");
  }
  if (order.size() != tasks.size()) {
    throw ConfigError("config: order must list every task exactly once");
  }
  std::set<std::string> order_ids(order.begin(), order.end());
  if (order_ids != ids) throw ConfigError("config: order is not a permutation of tasks");
  try {
    backbone.validate();
    train.validate();
    gating.validate(backbone.stage_count);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (pairs_per_image < 1) throw ConfigError("config: pairs_per_image must be >= 1");
  if (corpus_images < 20) throw ConfigError("config: corpus_images must be >= 20");
}

std::string ExperimentConfig::to_json_text() const {
  return config_to_json(*this).dump(2) + "\n";
}

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const ordered_json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return config_from_json(j);
}

TaskData prepare_task_data(const ExperimentConfig& config) {
  config.validate();
  TaskData data;
  for (const TaskSpec& spec : config.tasks) {
    TaskSpec s = spec;
    s.side = config.backbone.input_side;
    TaskDataset ds = make_task_dataset(s, derive_seed(config.seeds.data, s.id));
    PairSet pairs =
        build_pairs(ds, config.pairs_per_image * static_cast<int>(ds.train.size()),
                    derive_seed(config.seeds.data, s.id + "/pairs"));
    data.pairs.emplace(s.id, std::move(pairs));
    data.datasets.emplace(s.id, std::move(ds));
  }
  return data;
}

RunEnvironment prepare_environment(const ExperimentConfig& config) {
  config.validate();
  BackboneConfig bb = config.backbone;
  bb.filter_seed = config.seeds.filters;

  RunEnvironment env{FrozenBackbone::build(bb), TaskNormBank(), TrainReport(), {}, {}};

  const TaskDataset corpus =
      make_task_dataset(corpus_spec(config), derive_seed(config.seeds.data, kCorpusId));
  const PairSet corpus_pairs =
      build_pairs(corpus, config.pairs_per_image * static_cast<int>(corpus.train.size()),
                  derive_seed(config.seeds.data, std::string(kCorpusId) + "/pairs"));
  TrainConfig tc = config.train;
  tc.seed = derive_seed(config.seeds.training, kCorpusId);
  BankRegistry scratch;
  env.corpus_report =
      pretrain_gating_bank(env.backbone, scratch, corpus, corpus_pairs, tc);
  env.distortion_bank = scratch.distortion_bank();

  TaskData data = prepare_task_data(config);
  env.datasets = std::move(data.datasets);
  env.pairs = std::move(data.pairs);
  return env;
}

RunOutcome run_sequence(const ExperimentConfig& config) {
  return run_sequence(config, prepare_environment(config));
}

RunOutcome run_sequence(const ExperimentConfig& config, const RunEnvironment& env) {
  config.validate();
  RunOutcome out;
  out.config = config;
  out.task_agnostic = config.baseline == BaselineMode::task_agnostic_bn;
  out.store = CentroidStore(config.gating);
  {
    TaskNormBank dist_copy = env.distortion_bank;
    out.registry.install_distortion_bank(std::move(dist_copy));
  }
  if (out.task_agnostic) {
    out.shared_bank = TaskNormBank(kSharedBankId, config.backbone.channels);
  }

  std::vector<std::string> seen;
  const std::size_t t_count = config.order.size();
  for (auto& per_mode : out.predictions) per_mode.resize(t_count);

  for (std::size_t t = 0; t < t_count; ++t) {
    const std::string& id = config.order[t];
    const TaskDataset& ds = env.datasets.at(id);
    const PairSet& pairs = env.pairs.at(id);
    TrainConfig tc = config.train;
    tc.seed = derive_seed(config.seeds.training, id);

    if (out.task_agnostic) {
      PredictionHead head = PredictionHead::zeros(id, config.backbone.channels.back());
      out.task_reports.push_back(
          train_on_pairs(env.backbone, out.shared_bank, head, ds, pairs, tc));
      out.shared_heads.push_back(std::move(head));
    } else {
      out.task_reports.push_back(train_task(env.backbone, out.registry, ds, pairs, tc));
    }
    summarize_task(env.backbone, out.registry, ds, out.store,
                   derive_seed(config.seeds.kmeans, id));
    seen.push_back(id);

    std::vector<float> mos;
    for (const ImageSample& s : ds.test) mos.push_back(s.mos);
    out.test_mos.push_back(std::move(mos));

    ModelView view;
    view.backbone = &env.backbone;
    view.registry = &out.registry;
    view.store = &out.store;
    view.tasks = &seen;
    view.agnostic = out.task_agnostic;
    view.shared_bank = &out.shared_bank;
    view.shared_heads = &out.shared_heads;

    for (const EvalMode mode : {EvalMode::soft, EvalMode::hard, EvalMode::oracle}) {
      auto& rows = out.predictions[static_cast<std::size_t>(mode)];
      rows[t].resize(t + 1);
      for (std::size_t k = 0; k <= t; ++k) {
        rows[t][k] = view.predictions(env.datasets.at(config.order[k]), k, mode);
      }
    }
  }

  for (const EvalMode mode : {EvalMode::soft, EvalMode::hard, EvalMode::oracle}) {
    const auto& rows = out.predictions[static_cast<std::size_t>(mode)];
    std::vector<std::vector<double>> srcc_m(t_count), hat_m(t_count);
    for (std::size_t t = 0; t < t_count; ++t) {
      for (std::size_t k = 0; k <= t; ++k) {
        srcc_m[t].push_back(metrics::srcc(rows[t][k], out.test_mos[k]));
        if (k < t) hat_m[t].push_back(metrics::srcc(rows[t][k], rows[k][k]));
      }
    }
    metrics::SequenceResults res =
        metrics::finalize_sequence(config.order, std::move(srcc_m), std::move(hat_m));
    switch (mode) {
      case EvalMode::soft: out.results.soft = std::move(res); break;
      case EvalMode::hard: out.results.hard = std::move(res); break;
      case EvalMode::oracle: out.results.oracle = std::move(res); break;
    }
  }

  if (out.task_agnostic) out.shared_bank.freeze();
  return out;
}

std::vector<std::string> order_by_label(const ExperimentConfig& base,
                                        const std::string& label) {
  std::string core = label;
  bool reversed = false;
  const std::string suffix = "-reversed";
  if (core.size() > suffix.size() &&
      core.compare(core.size() - suffix.size(), suffix.size(), suffix) == 0) {
    reversed = true;
    core = core.substr(0, core.size() - suffix.size());
  }

  std::vector<std::string> synthetic, realistic;
  for (const TaskSpec& t : base.tasks) {
    (scenario_of(t.kinds.front()) == Scenario::synthetic ? synthetic : realistic)
        .push_back(t.id);
  }

  std::vector<std::string> order;
  if (core == "default") {
    order = base.order;
  } else if (core == "alternating") {
    std::size_t i = 0, j = 0;
    while (i < synthetic.size() || j < realistic.size()) {
      if (i < synthetic.size()) order.push_back(synthetic[i++]);
      if (j < realistic.size()) order.push_back(realistic[j++]);
    }
  } else if (core == "synthetic-first") {
    order = synthetic;
    order.insert(order.end(), realistic.begin(), realistic.end());
  } else if (core == "realistic-first") {
    order = realistic;
    order.insert(order.end(), synthetic.begin(), synthetic.end());
  } else {
    throw ConfigError("unknown order label '" + label + "'");
  }
  if (reversed) std::reverse(order.begin(), order.end());
  return order;
}

std::vector<OrderRun> run_order_suite(const ExperimentConfig& base,
                                      const std::vector<std::string>& labels) {
  if (labels.size() < 2) throw ConfigError("order suite needs at least two orders");
  const RunEnvironment env = prepare_environment(base);
  std::vector<OrderRun> runs;
  runs.reserve(labels.size());
  for (const std::string& label : labels) {
    ExperimentConfig cfg = base;
    cfg.order = order_by_label(base, label);
    cfg.order_label = label;
    runs.push_back({label, run_sequence(cfg, env)});
  }
  return runs;
}

std::vector<double> length_curve(const metrics::SequenceResults& results) {
  std::vector<double> curve;
  double acc = 0.0;
  for (std::size_t t = 0; t < results.psi.size(); ++t) {
    acc += results.psi[t];
    curve.push_back(acc / static_cast<double>(t + 1));
  }
  return curve;
}

KlAnalysis analyze_kl(const FrozenBackbone& backbone, const BankRegistry& registry,
                      const std::vector<TaskSpec>& specs,
                      const std::map<std::string, TaskDataset>& datasets) {
  KlAnalysis out;
  out.tasks = registry.task_order();
  const std::size_t t_count = out.tasks.size();
  if (t_count < 2) throw std::invalid_argument("analyze_kl: need at least two tasks");

  std::vector<metrics::BankGaussian> gaussians;
  for (const std::string& id : out.tasks) {
    gaussians.push_back(metrics::bank_gaussian(registry.bank(id)));
  }
  out.kl.assign(t_count, std::vector<double>(t_count, 0.0));
  for (std::size_t i = 0; i < t_count; ++i) {
    for (std::size_t j = 0; j < t_count; ++j) {
      out.kl[i][j] = metrics::bank_kl(gaussians[i], gaussians[j]);
    }
  }

  out.cross_srcc.assign(t_count, std::vector<double>(t_count, 0.0));
  for (std::size_t i = 0; i < t_count; ++i) {
    for (std::size_t j = 0; j < t_count; ++j) {
      const TaskDataset& ds = datasets.at(out.tasks[j]);
      std::vector<float> scores, mos;
      for (const ImageSample& s : ds.test) {
        scores.push_back(predict_oracle(backbone, registry, s.image, out.tasks[i]));
        mos.push_back(s.mos);
      }
      out.cross_srcc[i][j] = metrics::srcc(scores, mos);
    }
  }
  out.kl_srcc_correlation = metrics::kl_vs_srcc_correlation(out.kl, out.cross_srcc);

  std::map<std::string, Scenario> family;
  for (const TaskSpec& spec : specs) family[spec.id] = scenario_of(spec.kinds.front());
  double within = 0.0, cross = 0.0;
  int n_within = 0, n_cross = 0;
  for (std::size_t i = 0; i < t_count; ++i) {
    for (std::size_t j = 0; j < t_count; ++j) {
      if (i == j) continue;
      if (family.at(out.tasks[i]) == family.at(out.tasks[j])) {
        within += out.kl[i][j];
        ++n_within;
      } else {
        cross += out.kl[i][j];
        ++n_cross;
      }
    }
  }
  out.mean_within_family_kl = n_within ? within / n_within : 0.0;
  out.mean_cross_family_kl = n_cross ? cross / n_cross : 0.0;
  return out;
}

void save_checkpoint(const std::filesystem::path& dir, const RunOutcome& outcome) {
  checkpoint::PayloadStore payloads;
  put_bank(payloads, std::string("bank/") + kDistortionBankId,
           outcome.registry.distortion_bank());

  std::vector<std::string> tasks;
  if (outcome.task_agnostic) {
    for (const PredictionHead& h : outcome.shared_heads) tasks.push_back(h.task_id);
  } else {
    tasks = outcome.registry.task_order();
  }

  if (outcome.task_agnostic) {
    put_bank(payloads, std::string("bank/") + kSharedBankId, outcome.shared_bank);
    for (const PredictionHead& h : outcome.shared_heads) {
      payloads.put("head/" + h.task_id + "/weight", h.weight);
      payloads.put("head/" + h.task_id + "/bias", h.bias);
    }
  } else {
    for (const std::string& id : tasks) {
      put_bank(payloads, "bank/" + id, outcome.registry.bank(id));
      payloads.put("head/" + id + "/weight", outcome.registry.head(id).weight);
      payloads.put("head/" + id + "/bias", outcome.registry.head(id).bias);
    }
  }
  for (const std::string& id : tasks) {
    for (const int stage : outcome.store.config().stages) {
      payloads.put("centroids/" + id + "/stage" + std::to_string(stage),
                   outcome.store.centroids(id, stage));
    }
  }

  ordered_json manifest;
  manifest["format"] = "cliq-checkpoint";
  manifest["format_version"] = 1;
  manifest["experiment"] = config_to_json(outcome.config);
  manifest["tasks"] = tasks;
  manifest["payloads"] = ordered_json::array();
  for (const checkpoint::PayloadIndexEntry& e : checkpoint::manifest_index(payloads)) {
    manifest["payloads"].push_back(
        {{"name", e.name}, {"file", e.file}, {"bytes", e.bytes}, {"sha256", e.sha256}});
  }
  if (!outcome.results.soft.tasks.empty()) {
    manifest["results"] = {{"soft", results_to_json(outcome.results.soft)},
                           {"hard", results_to_json(outcome.results.hard)},
                           {"oracle", results_to_json(outcome.results.oracle)}};
  } else {
    manifest["results"] = nullptr;
  }

  checkpoint::write_payloads(dir, payloads);
  std::ofstream out = open_out(dir / "manifest.json");
  out << manifest.dump(2) << "\n";
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) {
    throw CheckpointError(CheckpointError::Kind::truncated,
                          "missing manifest at " + (dir / "manifest.json").string());
  }
  ordered_json manifest;
  try {
    in >> manifest;
  } catch (const ordered_json::exception& e) {
    throw CheckpointError(CheckpointError::Kind::malformed,
                          std::string("manifest is not valid JSON: ") + e.what());
  }
  try {
    if (manifest.value("format", std::string()) != "cliq-checkpoint") {
      throw CheckpointError(CheckpointError::Kind::malformed, "unrecognized manifest format");
    }
    if (manifest.value("format_version", -1) != 1) {
      throw CheckpointError(CheckpointError::Kind::version_mismatch,
                            "unsupported checkpoint format version");
    }

    LoadedCheckpoint loaded;
    loaded.config = config_from_json(manifest.at("experiment"));
    BackboneConfig bb = loaded.config.backbone;
    bb.filter_seed = loaded.config.seeds.filters;
    loaded.backbone = FrozenBackbone::build(bb);
    loaded.task_agnostic = loaded.config.baseline == BaselineMode::task_agnostic_bn;

    std::vector<checkpoint::PayloadIndexEntry> index;
    for (const auto& pj : manifest.at("payloads")) {
      checkpoint::PayloadIndexEntry e;
      e.name = pj.at("name").get<std::string>();
      e.file = pj.at("file").get<std::string>();
      e.bytes = pj.at("bytes").get<std::uint64_t>();
      e.sha256 = pj.at("sha256").get<std::string>();
      index.push_back(std::move(e));
    }
    const checkpoint::PayloadStore payloads = checkpoint::read_payloads(dir, index);

    const std::vector<int>& channels = loaded.config.backbone.channels;
    loaded.registry.install_distortion_bank(bank_from_payloads(
        payloads, std::string("bank/") + kDistortionBankId, kDistortionBankId, channels));

    const auto tasks = manifest.at("tasks").get<std::vector<std::string>>();
    if (loaded.task_agnostic) {
      if (!tasks.empty()) {
        loaded.shared_bank = bank_from_payloads(
            payloads, std::string("bank/") + kSharedBankId, kSharedBankId, channels);
      }
      for (const std::string& id : tasks) {
        PredictionHead head;
        head.task_id = id;
        head.weight = payloads.get("head/" + id + "/weight");
        head.bias = payloads.get("head/" + id + "/bias");
        loaded.shared_heads.push_back(std::move(head));
      }
    } else {
      for (const std::string& id : tasks) {
        TaskNormBank bank = bank_from_payloads(payloads, "bank/" + id, id, channels);
        PredictionHead head;
        head.task_id = id;
        head.weight = payloads.get("head/" + id + "/weight");
        head.bias = payloads.get("head/" + id + "/bias");
        loaded.registry.add_task(std::move(bank), std::move(head));
      }
    }

    loaded.store = CentroidStore(loaded.config.gating);
    for (const std::string& id : tasks) {
      for (const int stage : loaded.config.gating.stages) {
        loaded.store.add(id, stage,
                         payloads.get("centroids/" + id + "/stage" + std::to_string(stage)));
      }
    }

    if (!manifest.at("results").is_null()) {
      loaded.has_results = true;
      loaded.results.soft = results_from_json(manifest.at("results").at("soft"));
      loaded.results.hard = results_from_json(manifest.at("results").at("hard"));
      loaded.results.oracle = results_from_json(manifest.at("results").at("oracle"));
    }
    return loaded;
  } catch (const ordered_json::exception& e) {
    throw CheckpointError(CheckpointError::Kind::malformed,
                          std::string("manifest missing fields: ") + e.what());
  } catch (const ConfigError& e) {
    throw CheckpointError(CheckpointError::Kind::malformed,
                          std::string("embedded config invalid: ") + e.what());
  }
}

std::vector<PredictionRecord> evaluate_loaded(const LoadedCheckpoint& loaded,
                                              const TaskDataset& dataset,
                                              EvalMode mode) {
  std::vector<std::string> tasks;
  if (loaded.task_agnostic) {
    for (const PredictionHead& h : loaded.shared_heads) tasks.push_back(h.task_id);
  } else {
    tasks = loaded.registry.task_order();
  }

  ModelView view;
  view.backbone = &loaded.backbone;
  view.registry = &loaded.registry;
  view.store = &loaded.store;
  view.tasks = &tasks;
  view.agnostic = loaded.task_agnostic;
  view.shared_bank = &loaded.shared_bank;
  view.shared_heads = &loaded.shared_heads;

  std::size_t oracle_index = tasks.size();
  if (mode == EvalMode::oracle) {
    for (std::size_t k = 0; k < tasks.size(); ++k) {
      if (tasks[k] == dataset.task_id) oracle_index = k;
    }
    if (oracle_index == tasks.size()) {
      throw std::invalid_argument("evaluate_loaded: task '" + dataset.task_id +
                                  "' not in checkpoint");
    }
  }

  std::vector<PredictionRecord> records;
  records.reserve(dataset.test.size());
  for (const ImageSample& s : dataset.test) {
    PredictionRecord rec;
    if (mode == EvalMode::oracle) {
      rec.mode = "oracle:" + dataset.task_id;
      rec.weights.assign(tasks.size(), 0.0f);
      rec.weights[oracle_index] = 1.0f;
      rec.head_scores.assign(tasks.size(), std::nullopt);
      const float score = view.head_score(oracle_index, s.image, nullptr);
      rec.head_scores[oracle_index] = score;
      rec.q_hat = score;
    } else {
      rec = view.gated(s.image,
                       mode == EvalMode::soft ? GateMode::soft : GateMode::hard, nullptr);
    }
    records.push_back(std::move(rec));
  }
  return records;
}

void export_datasets(const std::filesystem::path& dir, const ExperimentConfig& config) {
  config.validate();
  for (const TaskSpec& spec : config.tasks) {
    TaskSpec s = spec;
    s.side = config.backbone.input_side;
    const TaskDataset ds = make_task_dataset(s, derive_seed(config.seeds.data, s.id));
    const std::filesystem::path task_dir = dir / s.id;
    std::filesystem::create_directories(task_dir / "images");

    ordered_json manifest;
    manifest["task"] = s.id;
    manifest["kinds"] = ordered_json::array();
    for (const Distortion d : s.kinds) manifest["kinds"].push_back(to_string(d));
    manifest["samples"] = ordered_json::array();
    const auto dump_split = [&](const std::vector<ImageSample>& split, const char* name) {
      for (const ImageSample& sample : split) {
        const std::string file =
            "images/" + std::to_string(sample.source_id) + ".bin";
        const std::vector<std::uint8_t> bytes = checkpoint::encode_tensor(sample.image);
        std::ofstream img_out(task_dir / file, std::ios::binary | std::ios::trunc);
        img_out.write(reinterpret_cast<const char*>(bytes.data()),
                      static_cast<std::streamsize>(bytes.size()));
        manifest["samples"].push_back({{"source_id", sample.source_id},
                                       {"split", name},
                                       {"mos", static_cast<double>(sample.mos)},
                                       {"kind", to_string(sample.kind)},
                                       {"level", static_cast<double>(sample.level)},
                                       {"file", file}});
      }
    };
    dump_split(ds.train, "train");
    dump_split(ds.val, "val");
    dump_split(ds.test, "test");
    std::ofstream out = open_out(task_dir / "manifest.json");
    out << manifest.dump(2) << "\n";
  }
}

namespace {

void write_matrix_csv(const std::filesystem::path& file,
                      const std::vector<std::string>& tasks,
                      const std::vector<std::vector<double>>& rows) {
  std::ofstream out = open_out(file);
  out << "model_after";
  for (const std::string& t : tasks) out << "," << t;
  out << "\n";
  for (std::size_t t = 0; t < rows.size(); ++t) {
    out << tasks[t];
    for (std::size_t k = 0; k < tasks.size(); ++k) {
      out << ",";
      if (k < rows[t].size()) out << fmt_double(rows[t][k]);
    }
    out << "\n";
  }
}

}  // namespace

void write_run_outputs(const std::filesystem::path& dir, const RunOutcome& outcome) {
  std::filesystem::create_directories(dir);
  for (const EvalMode mode : {EvalMode::soft, EvalMode::hard, EvalMode::oracle}) {
    const metrics::SequenceResults& r = outcome.results.by_mode(mode);
    const std::string name = eval_mode_name(mode);
    {
      std::ofstream out = open_out(dir / ("results_" + name + ".json"));
      ordered_json j = results_to_json(r);
      j["length_curve_mpsi"] = length_curve(r);
      out << j.dump(2) << "\n";
    }
    write_matrix_csv(dir / ("srcc_" + name + ".csv"), r.tasks, r.srcc);
    write_matrix_csv(dir / ("srcc_hat_" + name + ".csv"), r.tasks, r.srcc_hat);
  }

  {
    std::ofstream out = open_out(dir / "train_log.csv");
    out << "task,epoch,mean_fidelity_loss,val_srcc,steps\n";
    for (std::size_t t = 0; t < outcome.task_reports.size(); ++t) {
      const TrainReport& rep = outcome.task_reports[t];
      for (std::size_t e = 0; e < rep.epoch_loss.size(); ++e) {
        out << outcome.config.order[t] << "," << (e + 1) << ","
            << fmt_double(rep.epoch_loss[e]) << "," << fmt_double(rep.val_srcc) << ","
            << rep.steps << "\n";
      }
    }
  }
  {
    // Wall-clock timings live in their own file: the only non-deterministic
    // output of a run.
    std::ofstream out = open_out(dir / "timings.csv");
    out << "task,wall_seconds\n";
    for (std::size_t t = 0; t < outcome.task_reports.size(); ++t) {
      out << outcome.config.order[t] << ","
          << fmt_double(outcome.task_reports[t].wall_seconds) << "\n";
    }
  }
}

void write_order_suite_outputs(const std::filesystem::path& dir,
                               const std::vector<OrderRun>& runs) {
  std::filesystem::create_directories(dir);
  ordered_json j = ordered_json::array();
  std::ofstream csv = open_out(dir / "orders_summary.csv");
  csv << "order,mode,msrcc,mpi,msi,mpsi\n";
  for (const OrderRun& run : runs) {
    for (const EvalMode mode : {EvalMode::soft, EvalMode::hard, EvalMode::oracle}) {
      const metrics::SequenceResults& r = run.outcome.results.by_mode(mode);
      csv << run.label << "," << eval_mode_name(mode) << "," << fmt_double(r.msrcc)
          << "," << fmt_double(r.mpi) << "," << fmt_double(r.msi) << ","
          << fmt_double(r.mpsi) << "\n";
      j.push_back({{"order", run.label},
                   {"mode", eval_mode_name(mode)},
                   {"msrcc", r.msrcc},
                   {"mpi", r.mpi},
                   {"msi", r.msi},
                   {"mpsi", r.mpsi}});
    }
  }
  std::ofstream out = open_out(dir / "orders_summary.json");
  out << j.dump(2) << "\n";
}

void write_predictions_csv(const std::filesystem::path& file,
                           const std::vector<std::string>& tasks,
                           const std::vector<std::string>& image_ids,
                           const std::vector<PredictionRecord>& records) {
  if (image_ids.size() != records.size()) {
    throw std::invalid_argument("write_predictions_csv: id/record count mismatch");
  }
  std::ofstream out = open_out(file);
  out << "image_id,mode";
  for (const std::string& t : tasks) out << ",score_" << t;
  for (const std::string& t : tasks) out << ",weight_" << t;
  out << ",q_hat\n";
  for (std::size_t i = 0; i < records.size(); ++i) {
    const PredictionRecord& r = records[i];
    out << image_ids[i] << "," << r.mode;
    for (std::size_t t = 0; t < tasks.size(); ++t) {
      out << ",";
      if (t < r.head_scores.size() && r.head_scores[t].has_value()) {
        out << fmt_double(static_cast<double>(*r.head_scores[t]));
      }
    }
    for (std::size_t t = 0; t < tasks.size(); ++t) {
      out << ",";
      if (t < r.weights.size()) out << fmt_double(static_cast<double>(r.weights[t]));
    }
    out << "," << fmt_double(static_cast<double>(r.q_hat)) << "\n";
  }
}

}  // namespace cliq
