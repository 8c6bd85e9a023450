#include "sublinear/core.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace sublinear {

namespace {

// a * b, or nullopt on overflow.
std::optional<std::int64_t> checked_mul(std::int64_t a, std::int64_t b) {
  std::int64_t out = 0;
  if (__builtin_mul_overflow(a, b, &out)) return std::nullopt;
  return out;
}

// base^exp saturated at max + 1.
std::int64_t saturating_pow(std::int64_t base, int exp, std::int64_t max) {
  std::int64_t acc = 1;
  for (int i = 0; i < exp; ++i) {
    auto next = checked_mul(acc, base);
    if (!next || *next > max) return max + 1;
    acc = *next;
  }
  return acc;
}

}  // namespace

CycleConfig::CycleConfig(std::vector<int> taus, SceneIndex n_scenes)
    : taus_(std::move(taus)), n_scenes_(n_scenes) {
  if (taus_.empty()) throw Error(Errc::InvalidConfig, "at least one cyclic pattern is required");
  std::int64_t capacity = 1;
  for (int tau : taus_) {
    if (tau < 2) throw Error(Errc::InvalidConfig, "cycle length " + std::to_string(tau) + " < 2");
    auto next = checked_mul(capacity, tau);
    if (!next) throw Error(Errc::InvalidConfig, "product of cycle lengths overflows");
    capacity = *next;
  }
  capacity_ = capacity;
  if (n_scenes_ < 1 || n_scenes_ > capacity_) {
    throw Error(Errc::InvalidConfig, "n_scenes " + std::to_string(n_scenes_) +
                                         " outside 1.." + std::to_string(capacity_));
  }
  strides_.resize(taus_.size());
  SceneIndex stride = capacity_;
  for (std::size_t j = 0; j < taus_.size(); ++j) {
    stride /= taus_[j];
    strides_[j] = stride;
  }
}

int CycleConfig::tau_sum() const { return std::accumulate(taus_.begin(), taus_.end(), 0); }

LabelMatrix assign_labels(const CycleConfig& config) {
  LabelMatrix labels(config.n_scenes(), config.k());
  for (SceneIndex i = 1; i <= config.n_scenes(); ++i) {
    for (int j = 0; j < config.k(); ++j) labels(i - 1, j) = phase_label(config, i, j);
  }
  return labels;
}

std::optional<SceneIndex> try_reconstruct_index(std::span<const int> labels,
                                                const CycleConfig& config) noexcept {
  if (static_cast<int>(labels.size()) != config.k()) return std::nullopt;
  SceneIndex index = 1;
  for (int j = 0; j < config.k(); ++j) {
    const int l = labels[static_cast<std::size_t>(j)];
    if (l < 1 || l > config.tau(j)) return std::nullopt;
    index += static_cast<SceneIndex>(l - 1) * config.strides()[static_cast<std::size_t>(j)];
  }
  if (index > config.n_scenes()) return std::nullopt;
  return index;
}

SceneIndex reconstruct_index(std::span<const int> labels, const CycleConfig& config) {
  if (static_cast<int>(labels.size()) != config.k()) {
    throw Error(Errc::DimensionMismatch, "expected " + std::to_string(config.k()) + " labels, got " +
                                             std::to_string(labels.size()));
  }
  SceneIndex index = 1;
  for (int j = 0; j < config.k(); ++j) {
    const int l = labels[static_cast<std::size_t>(j)];
    if (l < 1 || l > config.tau(j)) {
      throw Error(Errc::LabelOutOfRange, "label " + std::to_string(l) + " for pattern " +
                                             std::to_string(j + 1) + " outside 1.." +
                                             std::to_string(config.tau(j)));
    }
    index += static_cast<SceneIndex>(l - 1) * config.strides()[static_cast<std::size_t>(j)];
  }
  if (index > config.n_scenes()) {
    throw Error(Errc::IndexBeyondDatabase, "labels decode to virtual scene " + std::to_string(index) +
                                               " > " + std::to_string(config.n_scenes()));
  }
  return index;
}

std::int64_t integer_root(std::int64_t n, int k) {
  if (n < 1 || k < 1) throw Error(Errc::InvalidArgument, "integer_root needs n >= 1, k >= 1");
  auto f = static_cast<std::int64_t>(std::floor(std::pow(static_cast<double>(n), 1.0 / k)));
  f = std::max<std::int64_t>(f, 1);
  while (saturating_pow(f, k, n) > n) --f;
  while (saturating_pow(f + 1, k, n) <= n) ++f;
  return f;
}

CycleConfig plan_cycles(SceneIndex n_scenes, int k) {
  if (n_scenes < 1 || k < 1) throw Error(Errc::InvalidArgument, "plan_cycles needs N >= 1 and k >= 1");
  const std::int64_t lo = integer_root(n_scenes, k);
  if (lo < 2) {
    throw Error(Errc::InfeasibleK, "N^(1/k) < 2 for N=" + std::to_string(n_scenes) +
                                       ", k=" + std::to_string(k));
  }
  if (lo > std::numeric_limits<int>::max() - 1) throw Error(Errc::InvalidArgument, "N too large");
  const std::int64_t hi = lo + 1;
  // Smallest count m of ceil-valued taus, placed first, reaching capacity >= N.
  for (int m = 0; m <= k; ++m) {
    std::int64_t capacity = saturating_pow(hi, m, n_scenes);
    if (capacity <= n_scenes) {
      auto rest = saturating_pow(lo, k - m, n_scenes);
      auto prod = checked_mul(capacity, rest);
      capacity = prod ? *prod : n_scenes + 1;
    }
    if (capacity >= n_scenes) {
      std::vector<int> taus(static_cast<std::size_t>(k), static_cast<int>(lo));
      for (int j = 0; j < m; ++j) taus[static_cast<std::size_t>(j)] = static_cast<int>(hi);
      return CycleConfig(std::move(taus), n_scenes);
    }
  }
  throw Error(Errc::InfeasibleK, "no feasible plan");  // unreachable: hi^k > N
}

}  // namespace sublinear
