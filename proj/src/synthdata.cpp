#include "cliq/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "cliq/rng.hpp"

namespace cliq {

namespace {

constexpr float kMosTop = 5.0f;
constexpr float kMosNoiseStd = 0.05f;

float clamp01(float v) { return std::min(1.0f, std::max(0.0f, v)); }

// Gaussian blur with per-pixel renormalization of the truncated kernel, so
// borders keep the input's range.
Tensor gaussian_blur(const Tensor& img, float sigma) {
  const int h = img.dim(1), w = img.dim(2);
  const int radius = std::max(1, static_cast<int>(std::ceil(2.5f * sigma)));
  std::vector<float> weights(static_cast<std::size_t>(2 * radius + 1));
  for (int i = -radius; i <= radius; ++i) {
    weights[static_cast<std::size_t>(i + radius)] =
        std::exp(-0.5f * static_cast<float>(i * i) / (sigma * sigma));
  }
  // Separable: horizontal then vertical pass.
  Tensor tmp(img.shape());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float acc = 0.0f, wsum = 0.0f;
      for (int i = -radius; i <= radius; ++i) {
        const int xx = x + i;
        if (xx < 0 || xx >= w) continue;
        const float wt = weights[static_cast<std::size_t>(i + radius)];
        acc += wt * img.at(0, y, xx);
        wsum += wt;
      }
      tmp.at(0, y, x) = acc / wsum;
    }
  }
  Tensor out(img.shape());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float acc = 0.0f, wsum = 0.0f;
      for (int i = -radius; i <= radius; ++i) {
        const int yy = y + i;
        if (yy < 0 || yy >= h) continue;
        const float wt = weights[static_cast<std::size_t>(i + radius)];
        acc += wt * tmp.at(0, yy, x);
        wsum += wt;
      }
      out.at(0, y, x) = acc / wsum;
    }
  }
  return out;
}

}  // namespace

const char* to_string(Distortion kind) {
  switch (kind) {
    case Distortion::blur: return "blur";
    case Distortion::white_noise: return "white-noise";
    case Distortion::block_average: return "block-average";
    case Distortion::contrast: return "contrast";
    case Distortion::salt_pepper: return "salt-pepper";
    case Distortion::resample: return "resample";
  }
  return "?";
}

Distortion distortion_from_string(const std::string& name) {
  for (const Distortion d : all_distortions()) {
    if (name == to_string(d)) return d;
  }
  throw std::invalid_argument("unknown distortion kind '" + name + "'");
}

Scenario scenario_of(Distortion kind) {
  switch (kind) {
    case Distortion::blur:
    case Distortion::white_noise:
    case Distortion::block_average:
      return Scenario::synthetic;
    default:
      return Scenario::realistic;
  }
}

const std::vector<Distortion>& all_distortions() {
  static const std::vector<Distortion> kAll = {
      Distortion::blur,         Distortion::white_noise, Distortion::block_average,
      Distortion::contrast,     Distortion::salt_pepper, Distortion::resample};
  return kAll;
}

std::vector<Tensor> generate_base_images(int count, int side, std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("generate_base_images: count must be >= 1");
  if (side < 4) throw std::invalid_argument("generate_base_images: side too small");
  Rng rng(seed);
  std::vector<Tensor> images;
  images.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    Tensor noise({1, side, side});
    for (float& v : noise.flat()) v = static_cast<float>(rng.next_gaussian());
    Tensor img = gaussian_blur(noise, 1.2f);
    float lo = img[0], hi = img[0];
    for (const float v : img.flat()) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (hi > lo) {
      const float scale = 1.0f / (hi - lo);
      for (float& v : img.flat()) v = (v - lo) * scale;
    } else {
      for (float& v : img.flat()) v = 0.5f;
    }
    images.push_back(std::move(img));
  }
  return images;
}

Tensor apply_distortion(const Tensor& image, Distortion kind, float level,
                        std::uint64_t seed) {
  if (image.rank() != 3 || image.dim(0) != 1) {
    throw std::invalid_argument("apply_distortion: image must be [1,H,W]");
  }
  if (!(level >= 0.0f && level <= 1.0f)) {
    throw std::invalid_argument("apply_distortion: level must be in [0,1]");
  }
  if (level == 0.0f) return image;

  const int h = image.dim(1), w = image.dim(2);
  Rng rng(seed);
  switch (kind) {
    case Distortion::blur:
      return gaussian_blur(image, 2.0f * level);

    case Distortion::white_noise: {
      const float sigma = 0.2f * level;
      Tensor out(image.shape());
      for (std::size_t i = 0; i < image.size(); ++i) {
        out[i] = clamp01(image[i] + sigma * static_cast<float>(rng.next_gaussian()));
      }
      return out;
    }

    case Distortion::block_average: {
      const int block = 1 + static_cast<int>(std::lround(7.0f * level));
      if (block <= 1) return image;
      Tensor out(image.shape());
      for (int by = 0; by < h; by += block) {
        for (int bx = 0; bx < w; bx += block) {
          const int ey = std::min(h, by + block), ex = std::min(w, bx + block);
          float sum = 0.0f;
          for (int y = by; y < ey; ++y)
            for (int x = bx; x < ex; ++x) sum += image.at(0, y, x);
          const float mean = sum / static_cast<float>((ey - by) * (ex - bx));
          for (int y = by; y < ey; ++y)
            for (int x = bx; x < ex; ++x) out.at(0, y, x) = mean;
        }
      }
      return out;
    }

    case Distortion::contrast: {
      const float factor = 1.0f - 0.8f * level;
      Tensor out(image.shape());
      for (std::size_t i = 0; i < image.size(); ++i) {
        out[i] = 0.5f + (image[i] - 0.5f) * factor;
      }
      return out;
    }

    case Distortion::salt_pepper: {
      const double prob = 0.3 * level;
      Tensor out = image;
      for (float& v : out.flat()) {
        if (rng.next_unit() < prob) v = rng.next_unit() < 0.5 ? 0.0f : 1.0f;
      }
      return out;
    }

    case Distortion::resample: {
      const int factor = 1 + static_cast<int>(std::lround(3.0f * level));
      if (factor <= 1) return image;
      Tensor out(image.shape());
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          out.at(0, y, x) = image.at(0, (y / factor) * factor, (x / factor) * factor);
        }
      }
      return out;
    }
  }
  throw std::invalid_argument("apply_distortion: unknown kind");
}

int pair_label(float mos_x, float mos_y) { return mos_x >= mos_y ? 1 : 0; }

TaskDataset make_task_dataset(const TaskSpec& spec, std::uint64_t seed) {
  if (spec.image_count < 20) {
    throw std::invalid_argument("make_task_dataset: need at least 20 images");
  }
  if (spec.kinds.empty()) {
    throw std::invalid_argument("make_task_dataset: task recipe has no distortion kinds");
  }
  if (!(spec.level_min >= 0.0f && spec.level_max <= 1.0f &&
        spec.level_min <= spec.level_max)) {
    throw std::invalid_argument("make_task_dataset: bad level range");
  }

  const std::vector<Tensor> bases =
      generate_base_images(spec.image_count, spec.side, derive_seed(seed, "base"));
  Rng rng(derive_seed(seed, "samples"));

  std::vector<ImageSample> samples;
  samples.reserve(bases.size());
  for (int i = 0; i < spec.image_count; ++i) {
    ImageSample s;
    s.kind = spec.kinds[static_cast<std::size_t>(i) % spec.kinds.size()];
    s.level = static_cast<float>(rng.next_uniform(spec.level_min, spec.level_max));
    s.source_id = i;
    s.image = apply_distortion(bases[static_cast<std::size_t>(i)], s.kind, s.level,
                               derive_seed(seed, "distort" + std::to_string(i)));
    const float noise = kMosNoiseStd * static_cast<float>(rng.next_gaussian());
    s.mos = std::min(kMosTop, std::max(0.0f, kMosTop * (1.0f - s.level) + noise));
    samples.push_back(std::move(s));
  }

  // Split by base-content id: each base contributes exactly one sample, so a
  // shuffled id split keeps partitions content-disjoint.
  std::vector<int> ids(static_cast<std::size_t>(spec.image_count));
  for (int i = 0; i < spec.image_count; ++i) ids[static_cast<std::size_t>(i)] = i;
  Rng split_rng(derive_seed(seed, "split"));
  split_rng.shuffle(ids);

  const int n_train = static_cast<int>(std::lround(0.7 * spec.image_count));
  const int n_val = static_cast<int>(std::lround(0.1 * spec.image_count));

  TaskDataset ds;
  ds.task_id = spec.id;
  ds.spec = spec;
  for (int i = 0; i < spec.image_count; ++i) {
    ImageSample& s = samples[static_cast<std::size_t>(ids[static_cast<std::size_t>(i)])];
    if (i < n_train) {
      ds.train.push_back(std::move(s));
    } else if (i < n_train + n_val) {
      ds.val.push_back(std::move(s));
    } else {
      ds.test.push_back(std::move(s));
    }
  }
  return ds;
}

Tensor stack_images(const std::vector<const Tensor*>& images) {
  if (images.empty()) throw std::invalid_argument("stack_images: empty batch");
  const int h = images[0]->dim(1), w = images[0]->dim(2);
  Tensor batch({static_cast<int>(images.size()), 1, h, w});
  float* dst = batch.data();
  for (const Tensor* img : images) {
    if (img->rank() != 3 || img->dim(0) != 1 || img->dim(1) != h || img->dim(2) != w) {
      throw std::invalid_argument("stack_images: inconsistent image shapes");
    }
    std::copy(img->data(), img->data() + img->size(), dst);
    dst += img->size();
  }
  return batch;
}

PairSet build_pairs(const TaskDataset& dataset, int n_pairs, std::uint64_t seed) {
  const int n = static_cast<int>(dataset.train.size());
  if (n < 2) throw std::invalid_argument("build_pairs: train split too small");
  const long long max_pairs = static_cast<long long>(n) * (n - 1) / 2;
  if (n_pairs < 1 || n_pairs > max_pairs) {
    throw std::invalid_argument("build_pairs: n_pairs outside [1, C(n,2)]");
  }

  Rng rng(seed);
  PairSet out;
  out.task_id = dataset.task_id;
  out.pairs.reserve(static_cast<std::size_t>(n_pairs));

  std::set<long long> seen;
  while (static_cast<int>(out.pairs.size()) < n_pairs) {
    int a = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n)));
    int b = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n)));
    if (a == b) continue;
    const long long key =
        static_cast<long long>(std::min(a, b)) * n + std::max(a, b);
    if (!seen.insert(key).second) continue;
    if (rng.next_unit() < 0.5) std::swap(a, b);
    PairSet::Pair p;
    p.x = a;
    p.y = b;
    p.label = pair_label(dataset.train[static_cast<std::size_t>(a)].mos,
                         dataset.train[static_cast<std::size_t>(b)].mos);
    out.pairs.push_back(p);
  }
  return out;
}

}  // namespace cliq
