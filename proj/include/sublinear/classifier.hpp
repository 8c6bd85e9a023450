#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "sublinear/core.hpp"

namespace sublinear {

// tau one-vs-rest decision functions h_c . x + b_c over d' inputs.
struct LinearModel {
  RowMatrixXd hyperplanes;  // n_classes x dim
  Eigen::VectorXd biases;   // n_classes
  double reg_strength = 1.0;
  std::uint64_t seed = 0;

  int n_classes() const { return static_cast<int>(hyperplanes.rows()); }
  int dim() const { return static_cast<int>(hyperplanes.cols()); }
  // Stored reals: n_classes * (dim + 1).
  std::int64_t parameter_count() const {
    return static_cast<std::int64_t>(n_classes()) * (dim() + 1);
  }

  bool operator==(const LinearModel& other) const;
};

struct TrainOptions {
  // Hinge-loss penalty C of the L2-regularized primal
  // 0.5 ||w||^2 + C sum_i max(0, 1 - y_i (w . x_i + b)).
  double reg_strength = 1.0;
  std::uint64_t seed = 42;
  // Stop when an epoch lowers the dual objective by less than this fraction.
  double tolerance = 1e-4;
  int max_epochs = 1000;
  unsigned jobs = 1;
};

// Per-class dual objective after each epoch (minimization form
// 0.5 ||w||^2 - sum alpha), for solver diagnostics.
struct TrainTrace {
  std::vector<std::vector<double>> dual_objective;
};

// Trains one-vs-rest L2-regularized hinge-loss classifiers by dual coordinate
// descent. The bias is learned as the weight of a constant unit feature. Row
// order per epoch is a permutation drawn from (seed, class), so results do
// not depend on `jobs`.
LinearModel train_classifier(const Eigen::Ref<const RowMatrixXd>& rows, std::span<const int> labels,
                             int n_classes, const TrainOptions& options = {},
                             TrainTrace* trace = nullptr);

// Label in 1..n_classes maximizing h_c . x + b_c; ties go to the smaller class.
int predict(const LinearModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);

// Row-wise predict; identical to calling predict on each row.
std::vector<int> predict_batch(const LinearModel& model, const Eigen::Ref<const RowMatrixXd>& rows);

// Rounds every parameter to the nearest binary32 value (32-bit storage mode).
void quantize_to_float(LinearModel& model);

}  // namespace sublinear
