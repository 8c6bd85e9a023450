#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "sublinear/core.hpp"
#include "sublinear/pattern_learning.hpp"

namespace sublinear {

// Half-open column range [begin, end).
struct ColumnBlock {
  int begin = 0;
  int end = 0;
  int width() const { return end - begin; }
};

// One planted cyclic pattern: scene i shows template
//   floor(((i - 1) mod restart) / stride) mod tau + 1
// in its block (restart = 0 means no restart).
struct PlantedPattern {
  SceneIndex stride = 1;
  int tau = 2;
  SceneIndex restart = 0;
  ColumnBlock block;

  int label(SceneIndex scene) const {
    SceneIndex pos = scene - 1;
    if (restart > 0) pos %= restart;
    return static_cast<int>((pos / stride) % tau) + 1;
  }
};

struct PlantedSpec {
  SceneIndex n_scenes = 0;
  int d = 0;
  std::vector<PlantedPattern> patterns;
  // Minimum pairwise distance between templates of one pattern.
  double separation = 10.0;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
  // Noise stream; defaults to seed. Reusing seed with another noise_seed
  // gives a second observation of the same scenes.
  std::optional<std::uint64_t> noise_seed;
};

// Scene rows with every pattern's template in its block plus i.i.d.
// N(0, noise_sigma^2) on all columns. Throws BlockOverflow when blocks
// overlap or leave 0..d.
RowMatrixXd generate_planted(const PlantedSpec& spec);

struct SyntheticSpec {
  CycleConfig config;
  int d = 0;
  // One block per pattern; empty means default_blocks(d, k).
  std::vector<ColumnBlock> blocks;
  double separation = 10.0;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> noise_seed;
};

struct SyntheticData {
  FeatureMatrix features;  // raw, not normalized
  std::vector<FeatureMask> truth_masks;
  LabelMatrix labels;
};

// Blocks of width round(fraction * d) (shrunk to fit k blocks) laid out from column 0.
std::vector<ColumnBlock> default_blocks(int d, int k, double fraction = 0.2);

// Hierarchical-label planted data for one CycleConfig.
SyntheticData generate_synthetic(const SyntheticSpec& spec);

// Patterns for every plan_cycles(N, k) over the grids, one block of
// `block_width` columns each, deduplicated by (stride, tau), starting at
// column `first_column`.
std::vector<PlantedPattern> planted_grid_patterns(std::span<const SceneIndex> n_grid, std::span<const int> ks,
                                                  int block_width, int first_column = 0);

// Stride-1 patterns (sequential labels) for every cycle length in the sets,
// deduplicated by tau.
std::vector<PlantedPattern> planted_sequential_patterns(std::span<const std::vector<int>> tau_sets, int block_width,
                                                        int first_column = 0);

}  // namespace sublinear
