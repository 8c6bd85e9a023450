#pragma once

#include "sublinear/core.hpp"

namespace sublinear {

// Per-column z-score with the sample (N - 1) standard deviation. Constant
// columns are centered and keep scale 1. The statistics are attached so
// queries can be transformed identically.
FeatureMatrix normalize(const FeatureMatrix& raw);

// Throws NonFinite naming the first NaN/Inf entry.
void check_finite(const Eigen::Ref<const RowMatrixXd>& values);

}  // namespace sublinear
