#include "sublinear/pattern_learning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace sublinear {

Eigen::VectorXd bcss_scores_pairwise(const Eigen::Ref<const RowMatrixXd>& rows,
                                     std::span<const int> labels, int tau) {
  const Eigen::Index n = rows.rows();
  Eigen::VectorXd total = Eigen::VectorXd::Zero(rows.cols());
  for (Eigen::Index p = 0; p < n; ++p) {
    for (Eigen::Index q = 0; q < n; ++q) total += (rows.row(p) - rows.row(q)).array().square().matrix().transpose();
  }
  Eigen::VectorXd out = total / static_cast<double>(n);
  for (int c = 1; c <= tau; ++c) {
    std::vector<Eigen::Index> members;
    for (Eigen::Index r = 0; r < n; ++r) {
      if (labels[static_cast<std::size_t>(r)] == c) members.push_back(r);
    }
    if (members.empty()) throw Error(Errc::EmptyClass, "phase " + std::to_string(c) + " has no rows");
    Eigen::VectorXd within = Eigen::VectorXd::Zero(rows.cols());
    for (auto p : members) {
      for (auto q : members) within += (rows.row(p) - rows.row(q)).array().square().matrix().transpose();
    }
    out -= within / static_cast<double>(members.size());
  }
  return out;
}

namespace {

// Normalized soft-threshold of a nonnegative vector; zero when nothing survives.
Eigen::VectorXd normalized_soft(const Eigen::VectorXd& positive, double threshold) {
  Eigen::VectorXd s = (positive.array() - threshold).max(0.0).matrix();
  const double norm = s.norm();
  if (norm > 0.0) s /= norm;
  return s;
}

}  // namespace

FeatureWeights solve_weights(const Eigen::Ref<const Eigen::VectorXd>& scores, double gamma) {
  if (!(gamma > 0.0)) throw Error(Errc::InvalidArgument, "solve_weights: gamma must be > 0");
  FeatureWeights out;
  out.gamma = gamma;
  out.bcss = scores;
  const Eigen::VectorXd positive = scores.array().max(0.0).matrix();
  const double top = positive.size() ? positive.maxCoeff() : 0.0;
  if (!(top > 0.0)) {
    out.w = Eigen::VectorXd::Zero(scores.size());
    return out;
  }

  out.w = normalized_soft(positive, 0.0);
  if (out.w.lpNorm<1>() <= gamma) return out;

  // As the threshold approaches the maximum only the tied maxima survive, so
  // the smallest reachable l1 norm on the unit sphere is sqrt(#ties).
  const auto ties = (positive.array() == top).count();
  const double limit_l1 = std::sqrt(static_cast<double>(ties));
  if (limit_l1 >= gamma) {
    const Eigen::VectorXd indicator = (positive.array() == top).cast<double>().matrix();
    out.threshold = top;
    out.gamma_feasible = limit_l1 <= gamma + kL1Tolerance;
    // Outside the unit sphere's reach the l1 ball is the binding constraint and
    // gamma/#ties on each tied maximum attains gamma * max(a).
    out.w = indicator * std::min(gamma / static_cast<double>(ties), 1.0 / limit_l1);
    return out;
  }

  // ||w(threshold)||_1 is nonincreasing in the threshold.
  double lo = 0.0;  // l1(lo) > gamma
  double hi = top;  // l1(hi) <= gamma, hi == top meaning the tie limit
  Eigen::VectorXd feasible = (positive.array() == top).cast<double>().matrix() / limit_l1;
  for (int iter = 0; iter < kMaxBisection; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (!(mid > lo && mid < hi)) break;
    Eigen::VectorXd w = normalized_soft(positive, mid);
    const double l1 = w.lpNorm<1>();
    if (l1 > gamma) {
      lo = mid;
    } else {
      hi = mid;
      feasible = std::move(w);
    }
    if (std::abs(l1 - gamma) <= kL1Tolerance && l1 <= gamma) break;
  }
  out.threshold = hi;
  out.w = std::move(feasible);
  return out;
}

FeatureMask::FeatureMask(int d, std::vector<int> selected) : d_(d), selected_(std::move(selected)) {
  if (d_ < 0) throw Error(Errc::InvalidArgument, "mask width must be >= 0");
  for (std::size_t t = 0; t < selected_.size(); ++t) {
    const int c = selected_[t];
    if (c < 0 || c >= d_ || (t > 0 && c <= selected_[t - 1])) {
      throw Error(Errc::InvalidArgument, "mask indices must be strictly increasing and < d");
    }
  }
}

FeatureMask FeatureMask::from_bits(int d, std::span<const std::uint8_t> packed) {
  if (packed.size() != packed_size(d)) {
    throw Error(Errc::CorruptPayload, "mask needs " + std::to_string(packed_size(d)) + " bytes");
  }
  std::vector<int> selected;
  for (int j = 0; j < d; ++j) {
    if (packed[static_cast<std::size_t>(j / 8)] & (1u << (j % 8))) selected.push_back(j);
  }
  // Padding bits past d must be clear.
  for (int j = d; j < static_cast<int>(packed.size()) * 8; ++j) {
    if (packed[static_cast<std::size_t>(j / 8)] & (1u << (j % 8))) {
      throw Error(Errc::CorruptPayload, "mask padding bit set");
    }
  }
  return FeatureMask(d, std::move(selected));
}

bool FeatureMask::contains(int column) const {
  return std::binary_search(selected_.begin(), selected_.end(), column);
}

std::vector<std::uint8_t> FeatureMask::packed_bits() const {
  std::vector<std::uint8_t> out(packed_size(d_), 0);
  for (int c : selected_) out[static_cast<std::size_t>(c / 8)] |= static_cast<std::uint8_t>(1u << (c % 8));
  return out;
}

RowMatrixXd FeatureMask::apply_rows(const Eigen::Ref<const RowMatrixXd>& rows) const {
  if (rows.cols() != d_) {
    throw Error(Errc::DimensionMismatch, "rows have " + std::to_string(rows.cols()) +
                                             " columns, mask expects " + std::to_string(d_));
  }
  return rows(Eigen::all, selected_);
}

FeatureMask select_columns(const FeatureWeights& weights, int d_prime) {
  const int d = static_cast<int>(weights.w.size());
  if (d_prime < 1 || d_prime > d) {
    throw Error(Errc::InvalidArgument, "d' = " + std::to_string(d_prime) + " outside 1.." + std::to_string(d));
  }
  std::vector<int> order(static_cast<std::size_t>(d));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return weights.w(a) > weights.w(b); });
  order.resize(static_cast<std::size_t>(d_prime));
  std::sort(order.begin(), order.end());
  return FeatureMask(d, std::move(order));
}

int masked_width(int d, double rho) {
  const auto width = static_cast<int>(std::lround(rho * d));
  return std::clamp(width, 1, std::max(d, 1));
}

PatternSelection learn_pattern_mask(const Eigen::Ref<const RowMatrixXd>& rows,
                                    std::span<const int> labels, int tau, double gamma,
                                    int d_prime) {
  PatternSelection out;
  out.weights = solve_weights(bcss_scores(rows, labels, tau), gamma);
  out.mask = select_columns(out.weights, d_prime);
  return out;
}

}  // namespace sublinear
