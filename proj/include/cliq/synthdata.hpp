#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cliq/tensor.hpp"

namespace cliq {

// Procedurally generated quality-regression tasks: smoothed-noise textures,
// parametric distortions with severity monotone in the level, and a rater-
// noise MOS on a [0,5] scale.

enum class Distortion { blur, white_noise, block_average, contrast, salt_pepper, resample };

// Two distortion families; task orders alternate or block by family.
enum class Scenario { synthetic, realistic };

const char* to_string(Distortion kind);
Distortion distortion_from_string(const std::string& name);
Scenario scenario_of(Distortion kind);
const std::vector<Distortion>& all_distortions();

struct ImageSample {
  Tensor image;  // [1, H, W], pixel values in [0,1]
  float mos = 0.0f;
  Distortion kind = Distortion::blur;
  float level = 0.0f;  // in [0,1]
  int source_id = 0;   // base-content identifier; splits are disjoint in it
};

struct TaskSpec {
  std::string id;
  std::vector<Distortion> kinds;
  float level_min = 0.0f;
  float level_max = 1.0f;
  int image_count = 100;
  int side = 32;
};

struct TaskDataset {
  std::string task_id;
  TaskSpec spec;
  std::vector<ImageSample> train;
  std::vector<ImageSample> val;
  std::vector<ImageSample> test;
};

struct PairSet {
  struct Pair {
    int x = 0;  // indices into the originating train split
    int y = 0;
    int label = 0;  // 1 iff mos_x >= mos_y
  };
  std::string task_id;
  std::vector<Pair> pairs;
};

// Seeded smoothed-noise textures rescaled to [0,1].
std::vector<Tensor> generate_base_images(int count, int side, std::uint64_t seed);

// Level 0 returns the image unchanged for every kind; severity is monotone
// in the level by construction of each kind's parameter.
Tensor apply_distortion(const Tensor& image, Distortion kind, float level,
                        std::uint64_t seed);

// One distorted sample per base image; 70/10/20 split by source id.
TaskDataset make_task_dataset(const TaskSpec& spec, std::uint64_t seed);

// Binary comparison label: 1 iff mos_x >= mos_y (ties count as 1).
int pair_label(float mos_x, float mos_y);

// Uniform sample of distinct unordered train-index pairs, random orientation.
PairSet build_pairs(const TaskDataset& dataset, int n_pairs, std::uint64_t seed);

// Stack [1,H,W] images into an [N,1,H,W] batch.
Tensor stack_images(const std::vector<const Tensor*>& images);

}  // namespace cliq
