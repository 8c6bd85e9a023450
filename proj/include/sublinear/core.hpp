#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "sublinear/error.hpp"

namespace sublinear {

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMatrixXd = RowMatrix<double>;
using LabelMatrix = RowMatrix<std::int32_t>;

// Scene indices are 1-based in the model layer.
using SceneIndex = std::int64_t;

// Per-column z-score statistics recorded at ingestion.
struct Normalization {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;

  bool operator==(const Normalization& other) const {
    return mean.size() == other.mean.size() && scale.size() == other.scale.size() &&
           mean == other.mean && scale == other.scale;
  }
};

// N x d scene descriptors, one scene per row.
struct FeatureMatrix {
  RowMatrixXd values;
  std::optional<Normalization> normalization;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
};

// Cycle lengths tau_1..tau_k for k patterns over n_scenes real scenes.
// Scenes n_scenes+1..capacity are virtual.
class CycleConfig {
 public:
  CycleConfig() = default;
  // Throws InvalidConfig unless every tau >= 2 and 1 <= n_scenes <= prod(taus).
  CycleConfig(std::vector<int> taus, SceneIndex n_scenes);

  int k() const { return static_cast<int>(taus_.size()); }
  const std::vector<int>& taus() const { return taus_; }
  int tau(int j) const { return taus_[static_cast<std::size_t>(j)]; }
  SceneIndex capacity() const { return capacity_; }
  SceneIndex n_scenes() const { return n_scenes_; }
  // strides()[j] = capacity / (tau_1 * ... * tau_{j+1}); the last stride is 1.
  const std::vector<SceneIndex>& strides() const { return strides_; }
  int tau_sum() const;

  bool operator==(const CycleConfig&) const = default;

 private:
  std::vector<int> taus_;
  std::vector<SceneIndex> strides_;
  SceneIndex capacity_ = 0;
  SceneIndex n_scenes_ = 0;
};

// Label of scene i (1-based) under pattern j (0-based), in 1..tau_j.
inline int phase_label(const CycleConfig& config, SceneIndex scene, int pattern) {
  const auto stride = config.strides()[static_cast<std::size_t>(pattern)];
  return static_cast<int>(((scene - 1) / stride) % config.tau(pattern)) + 1;
}

// n_scenes x k table of hierarchical phase labels.
LabelMatrix assign_labels(const CycleConfig& config);

// Closed-form inverse of assign_labels. Throws LabelOutOfRange or
// IndexBeyondDatabase.
SceneIndex reconstruct_index(std::span<const int> labels, const CycleConfig& config);

// Non-throwing variant used on the query path; nullopt for a virtual scene
// or an out-of-range label.
std::optional<SceneIndex> try_reconstruct_index(std::span<const int> labels,
                                                const CycleConfig& config) noexcept;

// Cycle lengths near the k-th root of n_scenes with minimal slack.
CycleConfig plan_cycles(SceneIndex n_scenes, int k);

// Largest f with f^k <= n.
std::int64_t integer_root(std::int64_t n, int k);

}  // namespace sublinear
