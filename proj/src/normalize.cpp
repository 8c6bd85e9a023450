#include "sublinear/normalize.hpp"

#include <cmath>
#include <string>

namespace sublinear {

void check_finite(const Eigen::Ref<const RowMatrixXd>& values) {
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      if (!std::isfinite(values(r, c))) {
        throw Error(Errc::NonFinite, "row " + std::to_string(r + 1) + ", column " + std::to_string(c + 1));
      }
    }
  }
}

FeatureMatrix normalize(const FeatureMatrix& raw) {
  check_finite(raw.values);
  const Eigen::Index n = raw.rows();
  const Eigen::Index d = raw.cols();
  Normalization stats;
  stats.mean = Eigen::VectorXd::Zero(d);
  stats.scale = Eigen::VectorXd::Ones(d);
  if (n > 0) {
    stats.mean = raw.values.colwise().mean().transpose();
    const Eigen::RowVectorXd lo = raw.values.colwise().minCoeff();
    const Eigen::RowVectorXd hi = raw.values.colwise().maxCoeff();
    for (Eigen::Index c = 0; c < d; ++c) {
      if (n < 2 || lo(c) == hi(c)) {
        stats.mean(c) = raw.values(0, c);
        continue;
      }
      const double ss = (raw.values.col(c).array() - stats.mean(c)).square().sum();
      const double sd = std::sqrt(ss / static_cast<double>(n - 1));
      if (sd > 0.0) stats.scale(c) = sd;
    }
  }
  FeatureMatrix out;
  out.values = raw.values.rowwise() - stats.mean.transpose();
  out.values.array().rowwise() /= stats.scale.transpose().array();
  out.normalization = std::move(stats);
  return out;
}

}  // namespace sublinear
