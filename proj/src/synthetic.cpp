#include "sublinear/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <utility>

#include "sublinear/random.hpp"

namespace sublinear {

namespace {

void check_blocks(const std::vector<ColumnBlock>& blocks, int d) {
  std::vector<ColumnBlock> sorted = blocks;
  std::sort(sorted.begin(), sorted.end(), [](const ColumnBlock& a, const ColumnBlock& b) { return a.begin < b.begin; });
  int total = 0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const auto& b = sorted[i];
    if (b.begin < 0 || b.end > d || b.width() < 1) {
      throw Error(Errc::BlockOverflow, "block [" + std::to_string(b.begin) + ", " + std::to_string(b.end) +
                                           ") outside 0.." + std::to_string(d));
    }
    if (i > 0 && b.begin < sorted[i - 1].end) {
      throw Error(Errc::BlockOverflow, "blocks [" + std::to_string(sorted[i - 1].begin) + ", " +
                                           std::to_string(sorted[i - 1].end) + ") and [" + std::to_string(b.begin) +
                                           ", " + std::to_string(b.end) + ") overlap");
    }
    total += b.width();
  }
  if (total > d) throw Error(Errc::BlockOverflow, "total block width exceeds d");
}

// tau templates of the given width at pairwise distance >= separation.
RowMatrixXd draw_templates(int tau, int width, double separation, Rng& rng) {
  RowMatrixXd templates(tau, width);
  double spread = separation / std::sqrt(static_cast<double>(width));
  int failures = 0;
  for (int t = 0; t < tau;) {
    for (int c = 0; c < width; ++c) templates(t, c) = spread * rng.normal();
    bool ok = true;
    for (int s = 0; s < t && ok; ++s) ok = (templates.row(t) - templates.row(s)).norm() >= separation;
    if (ok) {
      ++t;
    } else if (++failures % 64 == 0) {
      spread *= 1.05;
    }
  }
  return templates;
}

}  // namespace

RowMatrixXd generate_planted(const PlantedSpec& spec) {
  if (spec.n_scenes < 1 || spec.d < 1) throw Error(Errc::InvalidArgument, "synthetic data needs N >= 1 and d >= 1");
  if (!(spec.noise_sigma >= 0.0)) throw Error(Errc::InvalidArgument, "noise_sigma must be >= 0");
  if (!(spec.separation > 0.0)) throw Error(Errc::InvalidArgument, "separation must be > 0");
  std::vector<ColumnBlock> blocks;
  for (const auto& p : spec.patterns) {
    if (p.tau < 1 || p.stride < 1 || p.restart < 0) throw Error(Errc::InvalidArgument, "invalid planted pattern");
    blocks.push_back(p.block);
  }
  check_blocks(blocks, spec.d);

  RowMatrixXd out = RowMatrixXd::Zero(spec.n_scenes, spec.d);
  for (std::size_t j = 0; j < spec.patterns.size(); ++j) {
    const auto& p = spec.patterns[j];
    Rng rng = Rng::substream(spec.seed, j);
    const RowMatrixXd templates = draw_templates(p.tau, p.block.width(), spec.separation, rng);
    for (SceneIndex i = 1; i <= spec.n_scenes; ++i) {
      out.row(i - 1).segment(p.block.begin, p.block.width()) = templates.row(p.label(i) - 1);
    }
  }
  if (spec.noise_sigma > 0.0) {
    Rng noise = Rng::substream(spec.noise_seed.value_or(spec.seed), 0x6E6F697365ULL);
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
      for (Eigen::Index c = 0; c < out.cols(); ++c) out(r, c) += spec.noise_sigma * noise.normal();
    }
  }
  return out;
}

std::vector<ColumnBlock> default_blocks(int d, int k, double fraction) {
  if (k < 1 || d < k) throw Error(Errc::BlockOverflow, "cannot fit " + std::to_string(k) + " blocks in d=" + std::to_string(d));
  int width = std::max(1, static_cast<int>(std::lround(fraction * d)));
  width = std::min(width, d / k);
  std::vector<ColumnBlock> blocks;
  for (int j = 0; j < k; ++j) blocks.push_back({j * width, (j + 1) * width});
  return blocks;
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  const auto& config = spec.config;
  std::vector<ColumnBlock> blocks = spec.blocks.empty() ? default_blocks(spec.d, config.k()) : spec.blocks;
  if (static_cast<int>(blocks.size()) != config.k()) {
    throw Error(Errc::BlockOverflow, "need one block per pattern (" + std::to_string(config.k()) + ")");
  }
  PlantedSpec planted;
  planted.n_scenes = config.n_scenes();
  planted.d = spec.d;
  planted.separation = spec.separation;
  planted.noise_sigma = spec.noise_sigma;
  planted.seed = spec.seed;
  planted.noise_seed = spec.noise_seed;
  for (int j = 0; j < config.k(); ++j) {
    planted.patterns.push_back({config.strides()[static_cast<std::size_t>(j)], config.tau(j), 0,
                                blocks[static_cast<std::size_t>(j)]});
  }
  SyntheticData data;
  data.features.values = generate_planted(planted);
  data.labels = assign_labels(config);
  for (const auto& b : blocks) {
    std::vector<int> cols(static_cast<std::size_t>(b.width()));
    for (int c = 0; c < b.width(); ++c) cols[static_cast<std::size_t>(c)] = b.begin + c;
    data.truth_masks.emplace_back(spec.d, std::move(cols));
  }
  return data;
}

std::vector<PlantedPattern> planted_grid_patterns(std::span<const SceneIndex> n_grid, std::span<const int> ks,
                                                  int block_width, int first_column) {
  std::set<std::pair<SceneIndex, int>> seen;
  std::vector<PlantedPattern> out;
  int column = first_column;
  for (SceneIndex n : n_grid) {
    for (int k : ks) {
      if (n < 2 || integer_root(n, k) < 2) continue;
      const CycleConfig config = plan_cycles(n, k);
      for (int j = 0; j < k; ++j) {
        const auto key = std::make_pair(config.strides()[static_cast<std::size_t>(j)], config.tau(j));
        if (!seen.insert(key).second) continue;
        out.push_back({key.first, key.second, 0, {column, column + block_width}});
        column += block_width;
      }
    }
  }
  return out;
}

std::vector<PlantedPattern> planted_sequential_patterns(std::span<const std::vector<int>> tau_sets, int block_width,
                                                        int first_column) {
  std::set<int> seen;
  std::vector<PlantedPattern> out;
  int column = first_column;
  for (const auto& taus : tau_sets) {
    for (int tau : taus) {
      if (!seen.insert(tau).second) continue;
      out.push_back({1, tau, 0, {column, column + block_width}});
      column += block_width;
    }
  }
  return out;
}

}  // namespace sublinear
