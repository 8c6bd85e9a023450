#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "doctest.h"
#include "sublinear/core.hpp"
#include "test_support.hpp"

using namespace sublinear;
using testing_support::random_config;

namespace {

// Recursive partition: level j splits each block into tau_j equal contiguous
// sub-blocks labelled 1..tau_j.
void partition(const std::vector<int>& taus, std::size_t level, SceneIndex first, SceneIndex length,
               std::vector<std::vector<int>>& table) {
  if (level == taus.size()) return;
  const SceneIndex sub = length / taus[level];
  for (int l = 0; l < taus[level]; ++l) {
    for (SceneIndex i = first + l * sub; i < first + (l + 1) * sub; ++i) table[static_cast<std::size_t>(i)][level] = l + 1;
    partition(taus, level + 1, first + l * sub, sub, table);
  }
}

std::vector<std::vector<int>> partition_table(const std::vector<int>& taus) {
  SceneIndex capacity = 1;
  for (int t : taus) capacity *= t;
  std::vector<std::vector<int>> table(static_cast<std::size_t>(capacity), std::vector<int>(taus.size(), 0));
  partition(taus, 0, 0, capacity, table);
  return table;
}

// Exhaustive search over {f, f + 1}^k: minimal capacity >= n, larger values first.
std::vector<int> plan_oracle(SceneIndex n, int k) {
  auto f = static_cast<int>(std::floor(std::pow(static_cast<long double>(n), 1.0L / k)));
  while (std::pow(static_cast<long double>(f + 1), k) <= n) ++f;
  while (std::pow(static_cast<long double>(f), k) > n) --f;
  std::vector<int> best;
  long double best_capacity = 0;
  for (int mask = 0; mask < (1 << k); ++mask) {
    std::vector<int> taus;
    long double capacity = 1;
    for (int j = 0; j < k; ++j) {
      taus.push_back(f + ((mask >> j) & 1));
      capacity *= taus.back();
    }
    if (capacity < n) continue;
    std::sort(taus.rbegin(), taus.rend());
    if (best.empty() || capacity < best_capacity) {
      best = taus;
      best_capacity = capacity;
    }
  }
  return best;
}

std::vector<int> row(const LabelMatrix& labels, Eigen::Index i) {
  std::vector<int> out;
  for (Eigen::Index j = 0; j < labels.cols(); ++j) out.push_back(labels(i, j));
  return out;
}

}  // namespace

TEST_CASE("labels of the 12-frame, three-pattern example") {
  const CycleConfig config({2, 2, 3}, 12);
  const LabelMatrix labels = assign_labels(config);
  REQUIRE(labels.rows() == 12);
  CHECK(row(labels, 0) == std::vector<int>{1, 1, 1});
  CHECK(row(labels, 11) == std::vector<int>{2, 2, 3});
  const auto oracle = partition_table({2, 2, 3});
  for (Eigen::Index i = 0; i < 12; ++i) CHECK(row(labels, i) == oracle[static_cast<std::size_t>(i)]);
}

TEST_CASE("single scene takes the first label") {
  const LabelMatrix labels = assign_labels(CycleConfig({2}, 1));
  REQUIRE(labels.rows() == 1);
  CHECK(labels(0, 0) == 1);
}

TEST_CASE("labels match the recursive partition for random configs") {
  Rng rng(11);
  for (int trial = 0; trial < 60; ++trial) {
    const CycleConfig config = random_config(rng, 1, 4, 4000);
    const auto oracle = partition_table(config.taus());
    const LabelMatrix labels = assign_labels(config);
    REQUIRE(labels.rows() == config.n_scenes());
    for (Eigen::Index i = 0; i < labels.rows(); ++i) REQUIRE(row(labels, i) == oracle[static_cast<std::size_t>(i)]);
  }
}

TEST_CASE("reconstruct_index examples") {
  const CycleConfig config({2, 2, 3}, 12);
  std::map<std::vector<int>, SceneIndex> inverse;
  const auto table = partition_table({2, 2, 3});
  for (std::size_t i = 0; i < table.size(); ++i) inverse[table[i]] = static_cast<SceneIndex>(i) + 1;

  const std::vector<int> first{1, 1, 1}, last{2, 2, 3}, mid{1, 2, 1};
  CHECK(reconstruct_index(first, config) == 1);
  CHECK(reconstruct_index(last, config) == 12);
  CHECK(reconstruct_index(mid, config) == 4);
  CHECK(inverse.at(mid) == 4);
  for (const auto& [labels, index] : inverse) CHECK(reconstruct_index(labels, config) == index);
}

TEST_CASE("reconstruct_index errors") {
  const CycleConfig config({2, 2, 3}, 10);
  const std::vector<int> too_big{1, 3, 1};
  const std::vector<int> zero{0, 1, 1};
  const std::vector<int> virtual_scene{2, 2, 3};
  const std::vector<int> short_row{1, 1};
  CHECK_THROWS_WITH_AS(reconstruct_index(too_big, config), doctest::Contains("LabelOutOfRange"), Error);
  CHECK_THROWS_AS(reconstruct_index(zero, config), Error);
  try {
    reconstruct_index(virtual_scene, config);
    FAIL("expected IndexBeyondDatabase");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::IndexBeyondDatabase);
  }
  CHECK_THROWS_AS(reconstruct_index(short_row, config), Error);
  CHECK_FALSE(try_reconstruct_index(virtual_scene, config).has_value());
  CHECK_FALSE(try_reconstruct_index(too_big, config).has_value());
  CHECK(try_reconstruct_index(std::vector<int>{2, 1, 1}, config) == 7);
}

TEST_CASE("CycleConfig validation") {
  CHECK_NOTHROW(CycleConfig({2, 2, 3}, 12));
  CHECK_NOTHROW(CycleConfig({4, 6}, 24));
  const CycleConfig c({2, 2, 3}, 7);
  CHECK(c.capacity() == 12);
  CHECK(c.strides() == std::vector<SceneIndex>{6, 3, 1});
  CHECK(c.tau_sum() == 7);
  auto code_of = [](auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.code();
    }
    return Errc::IoError;
  };
  CHECK(code_of([] { CycleConfig({}, 1); }) == Errc::InvalidConfig);
  CHECK(code_of([] { CycleConfig({1, 4}, 2); }) == Errc::InvalidConfig);
  CHECK(code_of([] { CycleConfig({2, 2}, 5); }) == Errc::InvalidConfig);
  CHECK(code_of([] { CycleConfig({2, 2}, 0); }) == Errc::InvalidConfig);
  CHECK(code_of([] { CycleConfig({1 << 30, 1 << 30, 1 << 30}, 1); }) == Errc::InvalidConfig);
}

TEST_CASE("assign_labels and reconstruct_index are inverse") {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const CycleConfig config = random_config(rng, 1, 5, 100000);
    const LabelMatrix labels = assign_labels(config);
    std::set<std::vector<int>> seen;
    for (SceneIndex i = 1; i <= config.n_scenes(); ++i) {
      const auto r = row(labels, i - 1);
      REQUIRE(reconstruct_index(r, config) == i);
      REQUIRE(seen.insert(r).second);
    }
  }
}

TEST_CASE("label table structure") {
  Rng rng(17);
  for (int trial = 0; trial < 40; ++trial) {
    CycleConfig random = random_config(rng, 2, 4, 20000);
    const CycleConfig config(random.taus(), random.capacity());
    const LabelMatrix labels = assign_labels(config);
    const int k = config.k();
    const SceneIndex block = config.capacity() / config.tau(0);
    for (SceneIndex i = 0; i < config.n_scenes(); ++i) {
      // Last pattern is purely cyclic with period tau_k.
      REQUIRE(labels(i, k - 1) == static_cast<int>(i % config.tau(k - 1)) + 1);
      // First pattern is constant on blocks of capacity / tau_1.
      REQUIRE(labels(i, 0) == static_cast<int>(i / block) + 1);
    }
  }
}

TEST_CASE("plan_cycles examples") {
  CHECK(plan_cycles(12, 3).taus() == std::vector<int>{3, 2, 2});
  CHECK(plan_cycles(12, 3).capacity() == 12);
  CHECK(plan_cycles(8, 3).taus() == std::vector<int>{2, 2, 2});
  CHECK(plan_cycles(1000, 3).taus() == std::vector<int>{10, 10, 10});
  CHECK(plan_cycles(12, 3).taus() == plan_oracle(12, 3));
  try {
    plan_cycles(3, 2);
    FAIL("expected InfeasibleK");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::InfeasibleK);
  }
  CHECK_THROWS_AS(plan_cycles(1, 1), Error);
  CHECK(plan_cycles(2, 1).taus() == std::vector<int>{2});
}

TEST_CASE("plan_cycles properties") {
  Rng rng(23);
  for (int trial = 0; trial < 2000; ++trial) {
    const int k = 1 + static_cast<int>(rng.below(5));
    const SceneIndex n = 2 + static_cast<SceneIndex>(rng.below(2000000));
    if (std::pow(static_cast<double>(n), 1.0 / k) < 2.0 - 1e-12) continue;
    const CycleConfig config = plan_cycles(n, k);
    REQUIRE(config.capacity() >= n);
    REQUIRE(config.n_scenes() == n);
    const double root = std::pow(static_cast<double>(n), 1.0 / k);
    const int min_tau = *std::min_element(config.taus().begin(), config.taus().end());
    for (int t : config.taus()) REQUIRE(std::abs(t - std::round(root)) <= 1);
    REQUIRE(config.capacity() - n < config.capacity() / min_tau);
    REQUIRE(std::is_sorted(config.taus().rbegin(), config.taus().rend()));
    if (k <= 4) REQUIRE(config.taus() == plan_oracle(n, k));
  }
}

TEST_CASE("integer_root is exact at power boundaries") {
  for (int k = 1; k <= 6; ++k) {
    for (std::int64_t f = 1; f <= 200; ++f) {
      std::int64_t p = 1;
      for (int j = 0; j < k; ++j) p *= f;
      if (p > (std::int64_t{1} << 60)) break;
      CHECK(integer_root(p, k) == f);
      if (p > 1) CHECK(integer_root(p - 1, k) == f - 1);
    }
  }
  CHECK(integer_root(std::numeric_limits<std::int64_t>::max(), 2) == 3037000499LL);
}
