#include "cliq/gating.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "cliq/rng.hpp"

namespace cliq {

namespace {

double sq_distance(const float* a, const double* b, int dim) {
  double acc = 0.0;
  for (int i = 0; i < dim; ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    acc += d * d;
  }
  return acc;
}

}  // namespace

void GatingConfig::validate(int stage_count) const {
  if (k < 1) throw std::invalid_argument("gating: K must be >= 1");
  if (!(tau >= 0.0f)) throw std::invalid_argument("gating: tau must be >= 0");
  if (stages.empty()) throw std::invalid_argument("gating: stage set is empty");
  for (const int s : stages) {
    if (s < 1 || s > stage_count) {
      throw std::invalid_argument("gating: stage index outside 1.." +
                                  std::to_string(stage_count));
    }
  }
}

KmeansResult kmeans(const Tensor& points, int k, std::uint64_t seed) {
  if (points.rank() != 2) throw std::invalid_argument("kmeans: points must be [N,C]");
  if (!points.all_finite()) throw std::invalid_argument("kmeans: non-finite points");
  if (k < 1) throw std::invalid_argument("kmeans: K must be >= 1");
  const int n = points.dim(0), dim = points.dim(1);
  k = std::min(k, n);  // documented reduction when K exceeds the point count

  Rng rng(seed);
  // kmeans++ seeding with squared-distance sampling.
  std::vector<std::vector<double>> centers(
      static_cast<std::size_t>(k), std::vector<double>(static_cast<std::size_t>(dim)));
  std::vector<double> best_sq(static_cast<std::size_t>(n),
                              std::numeric_limits<double>::max());
  {
    const int first = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n)));
    for (int d = 0; d < dim; ++d) centers[0][static_cast<std::size_t>(d)] = points.at(first, d);
    for (int c = 1; c < k; ++c) {
      double total = 0.0;
      for (int i = 0; i < n; ++i) {
        const double sq = sq_distance(points.data() + static_cast<std::size_t>(i) * dim,
                                      centers[static_cast<std::size_t>(c - 1)].data(), dim);
        best_sq[static_cast<std::size_t>(i)] =
            std::min(best_sq[static_cast<std::size_t>(i)], sq);
        total += best_sq[static_cast<std::size_t>(i)];
      }
      int pick = 0;
      if (total > 0.0) {
        const double target = rng.next_unit() * total;
        double running = 0.0;
        pick = n - 1;
        for (int i = 0; i < n; ++i) {
          running += best_sq[static_cast<std::size_t>(i)];
          if (running >= target) {
            pick = i;
            break;
          }
        }
      } else {
        pick = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n)));
      }
      for (int d = 0; d < dim; ++d) {
        centers[static_cast<std::size_t>(c)][static_cast<std::size_t>(d)] = points.at(pick, d);
      }
    }
  }

  KmeansResult result;
  result.assignment.assign(static_cast<std::size_t>(n), -1);
  constexpr int kMaxIterations = 100;

  for (int iter = 0; iter < kMaxIterations; ++iter) {
    // Assignment phase; ties go to the lower centroid index.
    bool changed = false;
    double sse = 0.0;
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::max();
      for (int c = 0; c < k; ++c) {
        const double d = sq_distance(points.data() + static_cast<std::size_t>(i) * dim,
                                     centers[static_cast<std::size_t>(c)].data(), dim);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      sse += best_d;
      if (result.assignment[static_cast<std::size_t>(i)] != best) {
        result.assignment[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
    }
    result.sse_history.push_back(sse);
    result.iterations = iter + 1;
    if (!changed && iter > 0) break;

    // Update phase.
    std::vector<std::vector<double>> sums(
        static_cast<std::size_t>(k), std::vector<double>(static_cast<std::size_t>(dim), 0.0));
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (int i = 0; i < n; ++i) {
      const int c = result.assignment[static_cast<std::size_t>(i)];
      counts[static_cast<std::size_t>(c)] += 1;
      for (int d = 0; d < dim; ++d) {
        sums[static_cast<std::size_t>(c)][static_cast<std::size_t>(d)] += points.at(i, d);
      }
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] == 0) {
        // Re-seed an empty cluster to the point farthest from its centroid.
        int farthest = 0;
        double far_d = -1.0;
        for (int i = 0; i < n; ++i) {
          const int a = result.assignment[static_cast<std::size_t>(i)];
          const double d = sq_distance(points.data() + static_cast<std::size_t>(i) * dim,
                                       centers[static_cast<std::size_t>(a)].data(), dim);
          if (d > far_d) {
            far_d = d;
            farthest = i;
          }
        }
        for (int d = 0; d < dim; ++d) {
          centers[static_cast<std::size_t>(c)][static_cast<std::size_t>(d)] =
              points.at(farthest, d);
        }
        continue;
      }
      for (int d = 0; d < dim; ++d) {
        centers[static_cast<std::size_t>(c)][static_cast<std::size_t>(d)] =
            sums[static_cast<std::size_t>(c)][static_cast<std::size_t>(d)] /
            static_cast<double>(counts[static_cast<std::size_t>(c)]);
      }
    }
  }

  result.centroids = Tensor({k, dim});
  for (int c = 0; c < k; ++c) {
    for (int d = 0; d < dim; ++d) {
      result.centroids.at(c, d) =
          static_cast<float>(centers[static_cast<std::size_t>(c)][static_cast<std::size_t>(d)]);
    }
  }
  return result;
}

void CentroidStore::add(const std::string& task, int stage, Tensor centroids) {
  if (centroids.rank() != 2) {
    throw std::invalid_argument("centroid store: centroids must be [K,C]");
  }
  const auto key = std::make_pair(task, stage);
  if (entries_.count(key)) {
    throw std::logic_error("centroid store: duplicate entry for task '" + task + "'");
  }
  if (std::find(order_.begin(), order_.end(), task) == order_.end()) {
    order_.push_back(task);
  }
  entries_.emplace(key, std::move(centroids));
}

bool CentroidStore::has(const std::string& task, int stage) const {
  return entries_.count(std::make_pair(task, stage)) > 0;
}

const Tensor& CentroidStore::centroids(const std::string& task, int stage) const {
  const auto it = entries_.find(std::make_pair(task, stage));
  if (it == entries_.end()) {
    throw std::invalid_argument("centroid store: no entry for task '" + task +
                                "' stage " + std::to_string(stage));
  }
  return it->second;
}

bool CentroidStore::covers(const std::vector<std::string>& tasks) const {
  for (const std::string& t : tasks) {
    for (const int s : cfg_.stages) {
      if (!has(t, s)) return false;
    }
  }
  return true;
}

void summarize_task(const FrozenBackbone& backbone, const BankRegistry& registry,
                    const TaskDataset& dataset, CentroidStore& store,
                    std::uint64_t seed) {
  if (!registry.has_distortion_bank()) {
    throw std::logic_error("summarize_task: distortion-aware bank not installed");
  }
  store.config().validate(backbone.stage_count());

  std::vector<const Tensor*> images;
  images.reserve(dataset.train.size());
  for (const ImageSample& s : dataset.train) images.push_back(&s.image);
  const Features feats =
      forward_features(backbone, registry.distortion_bank(), stack_images(images));

  for (const int stage : store.config().stages) {
    const Tensor& pooled = feats.pooled[static_cast<std::size_t>(stage - 1)];
    const KmeansResult km =
        kmeans(pooled, store.config().k,
               derive_seed(seed, "stage" + std::to_string(stage)));
    store.add(dataset.task_id, stage, km.centroids);
  }
}

float min_distance(std::span<const float> feature, const Tensor& centroids) {
  if (centroids.rank() != 2 ||
      centroids.dim(1) != static_cast<int>(feature.size())) {
    throw std::invalid_argument("min_distance: dimension mismatch");
  }
  const int k = centroids.dim(0), dim = centroids.dim(1);
  double best = std::numeric_limits<double>::max();
  for (int c = 0; c < k; ++c) {
    double acc = 0.0;
    const float* row = centroids.data() + static_cast<std::size_t>(c) * dim;
    for (int d = 0; d < dim; ++d) {
      const double diff = static_cast<double>(feature[static_cast<std::size_t>(d)]) - row[d];
      acc += diff * diff;
    }
    best = std::min(best, acc);
  }
  return static_cast<float>(std::sqrt(best));
}

std::vector<float> softmin_weights(const std::vector<float>& distances, float tau) {
  if (!(tau >= 0.0f)) throw std::invalid_argument("softmin_weights: tau must be >= 0");
  if (distances.empty()) throw std::invalid_argument("softmin_weights: empty input");
  for (const float d : distances) {
    if (!std::isfinite(d)) throw std::invalid_argument("softmin_weights: non-finite distance");
  }
  const float lo = *std::min_element(distances.begin(), distances.end());
  std::vector<double> e(distances.size());
  double total = 0.0;
  for (std::size_t i = 0; i < distances.size(); ++i) {
    e[i] = std::exp(-static_cast<double>(tau) * (static_cast<double>(distances[i]) - lo));
    total += e[i];
  }
  std::vector<float> weights(distances.size());
  for (std::size_t i = 0; i < distances.size(); ++i) {
    weights[i] = static_cast<float>(e[i] / total);
  }
  return weights;
}

std::vector<float> stage_average(const std::vector<std::vector<float>>& per_stage) {
  if (per_stage.empty()) throw std::invalid_argument("stage_average: no stages");
  const std::size_t t_count = per_stage.front().size();
  std::vector<float> out(t_count, 0.0f);
  for (const auto& stage : per_stage) {
    if (stage.size() != t_count) {
      throw std::invalid_argument("stage_average: ragged stage vectors");
    }
    for (std::size_t t = 0; t < t_count; ++t) out[t] += stage[t];
  }
  const float inv = 1.0f / static_cast<float>(per_stage.size());
  for (float& v : out) v *= inv;
  return out;
}

std::vector<float> gate(const FrozenBackbone& backbone, const BankRegistry& registry,
                        const CentroidStore& store, const Tensor& image, GateMode mode,
                        InferenceStats* stats) {
  if (registry.task_count() == 0) throw std::logic_error("gate: no tasks registered");
  return gate_tasks(backbone, registry.distortion_bank(), registry.task_order(), store,
                    image, mode, stats);
}

std::vector<float> gate_tasks(const FrozenBackbone& backbone,
                              const TaskNormBank& distortion_bank,
                              const std::vector<std::string>& tasks,
                              const CentroidStore& store, const Tensor& image,
                              GateMode mode, InferenceStats* stats) {
  if (tasks.empty()) throw std::logic_error("gate: no tasks registered");
  if (!store.covers(tasks)) {
    throw std::logic_error("gate: centroid store does not cover the registry");
  }
  const Features feats =
      forward_features(backbone, distortion_bank, stack_images({&image}));
  if (stats) stats->gating_passes += 1;

  const GatingConfig& cfg = store.config();

  std::vector<std::vector<float>> per_stage_dist;
  per_stage_dist.reserve(cfg.stages.size());
  for (const int stage : cfg.stages) {
    const Tensor& pooled = feats.pooled[static_cast<std::size_t>(stage - 1)];
    std::vector<float> distances(tasks.size());
    for (std::size_t t = 0; t < tasks.size(); ++t) {
      distances[t] = min_distance(
          std::span<const float>(pooled.data(), static_cast<std::size_t>(pooled.dim(1))),
          store.centroids(tasks[t], stage));
    }
    per_stage_dist.push_back(std::move(distances));
  }

  if (mode == GateMode::soft) {
    std::vector<std::vector<float>> per_stage_weights;
    per_stage_weights.reserve(per_stage_dist.size());
    for (const auto& distances : per_stage_dist) {
      per_stage_weights.push_back(softmin_weights(distances, cfg.tau));
    }
    return stage_average(per_stage_weights);
  }

  const std::vector<float> mean_dist = stage_average(per_stage_dist);
  std::size_t best = 0;
  for (std::size_t t = 1; t < mean_dist.size(); ++t) {
    if (mean_dist[t] < mean_dist[best]) best = t;  // ties keep the lower index
  }
  std::vector<float> weights(mean_dist.size(), 0.0f);
  weights[best] = 1.0f;
  return weights;
}

}  // namespace cliq
