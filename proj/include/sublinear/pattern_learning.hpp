#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sublinear/core.hpp"

namespace sublinear {

// Between-cluster sum of squares per column for a fixed grouping:
//
//   a_j = (1/N) sum_{p,q in S} (p_j - q_j)^2 - sum_i (1/|S_i|) sum_{p,q in S_i} (p_j - q_j)^2
//
// evaluated through sum_{p,q in G} (p_j - q_j)^2 = 2|G| sum_{p in G} (p_j - mean_G)^2,
// i.e. a_j = 2 (total scatter - within-class scatter). Labels are 1..tau.
template <typename Derived>
Eigen::VectorXd bcss_scores(const Eigen::MatrixBase<Derived>& rows, std::span<const int> labels,
                            int tau) {
  const Eigen::Index n = rows.rows();
  const Eigen::Index d = rows.cols();
  if (static_cast<Eigen::Index>(labels.size()) != n) {
    throw Error(Errc::DimensionMismatch, "bcss_scores: " + std::to_string(labels.size()) +
                                             " labels for " + std::to_string(n) + " rows");
  }
  if (tau < 1) throw Error(Errc::InvalidArgument, "bcss_scores: tau must be >= 1");

  Eigen::MatrixXd class_sum = Eigen::MatrixXd::Zero(tau, d);
  std::vector<std::int64_t> count(static_cast<std::size_t>(tau), 0);
  for (Eigen::Index r = 0; r < n; ++r) {
    const int l = labels[static_cast<std::size_t>(r)];
    if (l < 1 || l > tau) {
      throw Error(Errc::LabelOutOfRange, "bcss_scores: label " + std::to_string(l) + " outside 1.." +
                                             std::to_string(tau));
    }
    class_sum.row(l - 1) += rows.row(r).template cast<double>();
    ++count[static_cast<std::size_t>(l - 1)];
  }
  for (int c = 0; c < tau; ++c) {
    if (count[static_cast<std::size_t>(c)] == 0) {
      throw Error(Errc::EmptyClass, "bcss_scores: phase " + std::to_string(c + 1) + " has no rows");
    }
  }
  const Eigen::RowVectorXd mean = class_sum.colwise().sum() / static_cast<double>(n);
  Eigen::MatrixXd class_mean = class_sum;
  for (int c = 0; c < tau; ++c) class_mean.row(c) /= static_cast<double>(count[static_cast<std::size_t>(c)]);

  Eigen::ArrayXd total = Eigen::ArrayXd::Zero(d);
  Eigen::ArrayXd within = Eigen::ArrayXd::Zero(d);
  for (Eigen::Index r = 0; r < n; ++r) {
    const int l = labels[static_cast<std::size_t>(r)];
    const Eigen::RowVectorXd row = rows.row(r).template cast<double>();
    total += (row - mean).array().square().transpose();
    within += (row - class_mean.row(l - 1)).array().square().transpose();
  }
  return (2.0 * (total - within)).matrix();
}

// Brute-force O(N^2 d) evaluation of the same score. Test oracle.
Eigen::VectorXd bcss_scores_pairwise(const Eigen::Ref<const RowMatrixXd>& rows,
                                     std::span<const int> labels, int tau);

struct FeatureWeights {
  Eigen::VectorXd w;
  double gamma = 0.0;
  Eigen::VectorXd bcss;
  // False when no unit-norm soft-thresholded vector meets the l1 budget
  // (gamma < sqrt(#tied maxima)). w is then the rescaled optimum with
  // ||w||_1 = gamma and ||w||_2 < 1.
  bool gamma_feasible = true;
  // Threshold applied to max(a, 0).
  double threshold = 0.0;

  double objective() const { return w.dot(bcss); }
};

inline constexpr double kL1Tolerance = 1e-6;
inline constexpr int kMaxBisection = 200;

// Maximizes sum_j w_j a_j subject to ||w||_2 <= 1, ||w||_1 <= gamma, w >= 0
// by soft-thresholding max(a, 0) and bisecting the threshold.
FeatureWeights solve_weights(const Eigen::Ref<const Eigen::VectorXd>& scores, double gamma);

// Column subset with a fixed size d'.
class FeatureMask {
 public:
  FeatureMask() = default;
  // Throws InvalidArgument unless indices are strictly increasing and < d.
  FeatureMask(int d, std::vector<int> selected);

  static FeatureMask from_bits(int d, std::span<const std::uint8_t> packed);

  int d() const { return d_; }
  int size() const { return static_cast<int>(selected_.size()); }
  const std::vector<int>& selected() const { return selected_; }
  bool contains(int column) const;

  // ceil(d / 8) bytes, column j at bit (j % 8) of byte j / 8.
  std::vector<std::uint8_t> packed_bits() const;
  static std::size_t packed_size(int d) { return static_cast<std::size_t>((d + 7) / 8); }

  // Gathers the selected entries of a full d-vector.
  template <typename Derived>
  Eigen::VectorXd apply(const Eigen::MatrixBase<Derived>& x) const {
    Eigen::VectorXd out(size());
    for (int t = 0; t < size(); ++t) out(t) = x(selected_[static_cast<std::size_t>(t)]);
    return out;
  }

  RowMatrixXd apply_rows(const Eigen::Ref<const RowMatrixXd>& rows) const;

  bool operator==(const FeatureMask&) const = default;

 private:
  int d_ = 0;
  std::vector<int> selected_;
};

// Top d' columns by weight, ties to the lower index; zero-weight columns
// fill by ascending index so the mask size is always d'.
FeatureMask select_columns(const FeatureWeights& weights, int d_prime);

// d' = round(rho * d), clamped to 1..d.
int masked_width(int d, double rho);

struct PatternSelection {
  FeatureWeights weights;
  FeatureMask mask;
};

// bcss_scores -> solve_weights -> select_columns for one grouping.
PatternSelection learn_pattern_mask(const Eigen::Ref<const RowMatrixXd>& rows,
                                    std::span<const int> labels, int tau, double gamma,
                                    int d_prime);

}  // namespace sublinear
