#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "doctest.h"
#include "json.hpp"
#include "sublinear/evaluation.hpp"
#include "test_support.hpp"

using namespace sublinear;
using testing_support::identity_truth;

namespace {

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::IoError;
}

std::vector<Prediction> shifted(const std::vector<SceneIndex>& truth, SceneIndex by) {
  std::vector<Prediction> out;
  for (SceneIndex t : truth) out.emplace_back(t + by);
  return out;
}

// Raw rows with sequential (stride-1) planted patterns for the given taus.
RowMatrixXd sequential_scenes(const std::vector<int>& taus, SceneIndex n, int d, double noise, std::uint64_t seed,
                              std::optional<std::uint64_t> noise_seed = std::nullopt) {
  PlantedSpec spec;
  spec.n_scenes = n;
  spec.d = d;
  spec.noise_sigma = noise;
  spec.seed = seed;
  spec.noise_seed = noise_seed;
  const std::vector<std::vector<int>> sets{taus};
  spec.patterns = planted_sequential_patterns(sets, 6);
  return generate_planted(spec);
}

}  // namespace

TEST_CASE("precision examples") {
  const auto truth = identity_truth(50);
  const auto exact = shifted(truth, 0);
  for (SceneIndex tol : {0, 1, 5, 25}) CHECK(precision_at(exact, truth, tol) == 1.0);
  const auto off = shifted(truth, 3);
  CHECK(precision_at(off, truth, 5) == 1.0);
  CHECK(precision_at(off, truth, 2) == 0.0);
  std::vector<Prediction> half = exact;
  for (std::size_t q = 0; q < half.size(); q += 2) half[q] = std::nullopt;
  CHECK(precision_at(half, truth, 100) == 0.5);
  CHECK(precision_at(std::vector<Prediction>{}, std::vector<SceneIndex>{}, 5) == 0.0);
  CHECK(code_of([&] { precision_at(half, identity_truth(3), 5); }) == Errc::DimensionMismatch);
}

TEST_CASE("random predictions match the analytic hit rate") {
  const SceneIndex n = 1000, tol = 5;
  // Expected hits of a uniform guess: sum_t |[t - tol, t + tol] intersect [1, N]| / N^2.
  double expected = 0.0;
  for (SceneIndex t = 1; t <= n; ++t) expected += static_cast<double>(std::min(n, t + tol) - std::max<SceneIndex>(1, t - tol) + 1);
  expected /= static_cast<double>(n * n);
  CHECK(expected == doctest::Approx(11.0 / 1000.0).epsilon(0.01));

  Rng rng(8);
  const auto truth = identity_truth(n);
  std::vector<SceneIndex> perm = truth;
  double total = 0.0;
  const int trials = 400;
  for (int r = 0; r < trials; ++r) {
    rng.shuffle(perm);
    std::vector<Prediction> pred(perm.begin(), perm.end());
    total += precision_at(pred, truth, tol);
  }
  // Per-trial standard deviation is about sqrt(p / N); 4 sigma over the mean.
  const double sigma = std::sqrt(expected / static_cast<double>(n) / trials);
  CHECK(std::abs(total / trials - expected) <= 4.0 * sigma);
}

TEST_CASE("precision curve is monotone and agrees with precision_at") {
  Rng rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const SceneIndex n = 1 + static_cast<SceneIndex>(rng.below(200));
    const auto truth = identity_truth(n);
    std::vector<Prediction> pred;
    for (SceneIndex t : truth) {
      if (rng.below(5) == 0) {
        pred.emplace_back(std::nullopt);
      } else {
        pred.emplace_back(t + static_cast<SceneIndex>(rng.below(61)) - 30);
      }
    }
    const auto curve = precision_curve(pred, truth, 25);
    REQUIRE(curve.size() == 26);
    for (SceneIndex t = 0; t <= 25; ++t) {
      REQUIRE(curve[static_cast<std::size_t>(t)] == precision_at(pred, truth, t));
      REQUIRE(curve[static_cast<std::size_t>(t)] >= 0.0);
      REQUIRE(curve[static_cast<std::size_t>(t)] <= 1.0);
      if (t > 0) REQUIRE(curve[static_cast<std::size_t>(t)] >= curve[static_cast<std::size_t>(t - 1)]);
    }
  }
}

TEST_CASE("exponent fit examples") {
  const std::vector<double> sizes{1000, 2000, 4000, 8000, 16000};
  const auto linear = fit_sublinear_exponent(sizes, sizes);
  CHECK(linear.a == doctest::Approx(1.0));
  CHECK(linear.residual == doctest::Approx(0.0).epsilon(1e-12));
  std::vector<double> roots;
  for (double s : sizes) roots.push_back(std::sqrt(s));
  const auto half = fit_sublinear_exponent(sizes, roots);
  CHECK(half.a == doctest::Approx(0.5));
  CHECK(half.a_through_origin == doctest::Approx(0.5));
  CHECK(half.intercept == doctest::Approx(0.0).epsilon(1e-9));

  Rng rng(10);
  std::vector<double> noisy;
  for (double s : sizes) noisy.push_back(37.0 * std::pow(s, 0.48) * (1.0 + 0.01 * rng.normal()));
  const auto fit = fit_sublinear_exponent(sizes, noisy);
  CHECK(fit.a >= 0.45);
  CHECK(fit.a <= 0.51);
  CHECK(fit.points == 5);

  const std::vector<double> two{1, 2};
  CHECK(code_of([&] { fit_sublinear_exponent(two, two); }) == Errc::InvalidArgument);
  const std::vector<double> unsorted{1, 3, 2};
  CHECK(code_of([&] { fit_sublinear_exponent(unsorted, unsorted); }) == Errc::InvalidArgument);
  const std::vector<double> zero{0, 1, 2};
  CHECK(code_of([&] { fit_sublinear_exponent(zero, zero); }) == Errc::InvalidArgument);
}

TEST_CASE("co-prime planning") {
  CHECK(pairwise_coprime(std::vector<int>{3, 4, 5}));
  CHECK_FALSE(pairwise_coprime(std::vector<int>{4, 6}));
  CHECK(plan_coprime(12, 2) == std::vector<int>{3, 4});
  Rng rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const int k = 1 + static_cast<int>(rng.below(5));
    const SceneIndex n = 1 + static_cast<SceneIndex>(rng.below(200000));
    const auto taus = plan_coprime(n, k);
    REQUIRE(taus.size() == static_cast<std::size_t>(k));
    REQUIRE(pairwise_coprime(taus));
    long double product = 1;
    for (int t : taus) {
      REQUIRE(t >= 2);
      product *= t;
    }
    REQUIRE(product >= n);
    REQUIRE(std::is_sorted(taus.begin(), taus.end()));
  }
  const std::vector<int> taus{3, 4};
  const auto labels = coprime_labels(taus, 12);
  CHECK(labels(0, 0) == 1);
  CHECK(labels(4, 0) == 2);
  CHECK(labels(4, 1) == 1);
  CHECK(labels(11, 1) == 4);
}

TEST_CASE("co-prime baseline recovers scenes and decodes like the CRT") {
  const std::vector<int> taus{3, 4};
  const auto rows = sequential_scenes(taus, 12, 20, 0.0, 3);
  FeatureMatrix raw;
  raw.values = rows;
  const auto train = normalize(raw);
  EncoderParams params;
  const auto model = train_coprime(train.values, taus, 10, params);
  const auto found = query_coprime_batch(model, train.values);
  for (SceneIndex i = 1; i <= 12; ++i) CHECK(found[static_cast<std::size_t>(i - 1)] == i);

  // Every label pair names exactly one residue class mod 12.
  std::set<SceneIndex> seen;
  for (int a = 1; a <= 3; ++a) {
    for (int b = 1; b <= 4; ++b) {
      const auto i = decode_coprime(model, std::vector<int>{a, b});
      REQUIRE(i.has_value());
      CHECK((*i - 1) % 3 + 1 == a);
      CHECK((*i - 1) % 4 + 1 == b);
      seen.insert(*i);
    }
  }
  CHECK(seen.size() == 12);
  CHECK_FALSE(decode_coprime(model, std::vector<int>{4, 1}).has_value());

  const auto report = coprime_baseline(train, rows, identity_truth(12), taus, 10, params);
  CHECK(report.precision[0] == 1.0);
  CHECK(report.storage_bytes == storage_formula_bytes(taus, 20, 10));
}

TEST_CASE("co-prime decoding over a partial cycle") {
  const std::vector<int> taus{3, 5};
  const auto rows = sequential_scenes(taus, 11, 20, 0.0, 4);
  FeatureMatrix raw;
  raw.values = rows;
  const auto model = train_coprime(normalize(raw).values, taus, 10, EncoderParams{});
  for (int a = 1; a <= 3; ++a) {
    for (int b = 1; b <= 5; ++b) {
      std::optional<SceneIndex> oracle;
      for (SceneIndex i = 1; i <= 11; ++i) {
        if ((i - 1) % 3 + 1 == a && (i - 1) % 5 + 1 == b) oracle = i;
      }
      CHECK(decode_coprime(model, std::vector<int>{a, b}) == oracle);
    }
  }
}

TEST_CASE("co-prime errors") {
  const RowMatrixXd rows = sequential_scenes({4, 6}, 24, 20, 0.1, 5);
  CHECK(code_of([&] { train_coprime(rows, std::vector<int>{4, 6}, 5, EncoderParams{}); }) == Errc::NotCoprime);
  CHECK(code_of([&] { train_coprime(rows, std::vector<int>{3, 5}, 5, EncoderParams{}); }) == Errc::InvalidConfig);
  CHECK(code_of([&] { train_coprime(rows, std::vector<int>{5, 7}, 0, EncoderParams{}); }) == Errc::InvalidArgument);
}

TEST_CASE("matched d' is the largest that fits the budget") {
  Rng rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    const int k = 1 + static_cast<int>(rng.below(4));
    const auto taus = plan_coprime(2 + static_cast<SceneIndex>(rng.below(5000)), k);
    const int d = 1 + static_cast<int>(rng.below(300));
    const std::int64_t budget = static_cast<std::int64_t>(rng.below(200000));
    const int dp = matched_d_prime(taus, d, budget);
    REQUIRE(dp >= 1);
    REQUIRE(dp <= d);
    if (storage_formula_bytes(taus, d, dp) > budget) {
      REQUIRE(dp == 1);
    } else if (dp < d) {
      REQUIRE(storage_formula_bytes(taus, d, dp + 1) > budget);
    }
  }
}

TEST_CASE("storage sweep on noise-free data") {
  const std::vector<SceneIndex> grid{16, 32, 64, 128};
  const std::vector<int> ks{2, 3};
  PlantedSpec spec;
  spec.n_scenes = 128;
  spec.patterns = planted_grid_patterns(grid, ks, 8);
  spec.d = spec.patterns.back().block.end + 4;
  spec.seed = 6;
  const RowMatrixXd data = generate_planted(spec);

  SweepOptions options;
  options.n_grid = grid;
  options.targets = {1.0, 0.0};
  options.ks = ks;
  options.tolerance = 0;
  options.baseline = true;
  options.jobs = 2;
  const auto series = sweep_storage_vs_n(data, data, options);
  REQUIRE(series.size() == 4);
  CHECK(series[0].method == "hierarchical");
  CHECK(series[2].method == "coprime");
  const int d = spec.d;
  for (const auto& s : series) {
    REQUIRE(s.points.size() == grid.size());
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const auto& p = s.points[g];
      CHECK(p.n == grid[g]);
      if (s.target == 1.0 && s.method == "hierarchical") CHECK(p.reached);
      if (!p.reached) continue;
      CHECK(p.precision >= s.target);
      CHECK(p.storage_bytes == storage_formula_bytes(p.taus, d, p.d_prime));
    }
  }
  // Target 0: the cheapest candidate of the search grid.
  for (std::size_t g = 0; g < grid.size(); ++g) {
    std::int64_t cheapest = std::numeric_limits<std::int64_t>::max();
    for (int k : ks) {
      if (integer_root(grid[g], k) < 2) continue;
      for (double rho : options.rhos) {
        cheapest = std::min(cheapest, storage_formula_bytes(plan_cycles(grid[g], k).taus(), d, masked_width(d, rho)));
      }
    }
    CHECK(series[1].points[g].storage_bytes == cheapest);
  }
  REQUIRE(series[0].fit);
  CHECK(series[0].fit->a < 1.0);

  options.jobs = 1;
  const auto serial = sweep_storage_vs_n(data, data, options);
  for (std::size_t s = 0; s < series.size(); ++s) {
    for (std::size_t g = 0; g < grid.size(); ++g) {
      CHECK(serial[s].points[g].storage_bytes == series[s].points[g].storage_bytes);
    }
  }
}

TEST_CASE("unreachable targets become gap points") {
  Rng rng(13);
  const RowMatrixXd noise = testing_support::random_matrix(rng, 40, 10);
  SweepOptions options;
  options.n_grid = {20, 40};
  options.targets = {1.0};
  options.ks = {2};
  options.rhos = {0.5};
  options.tolerance = 0;
  const auto series = sweep_storage_vs_n(noise, testing_support::random_matrix(rng, 40, 10), options);
  REQUIRE(series.size() == 1);
  for (const auto& p : series[0].points) CHECK_FALSE(p.reached);
  CHECK_FALSE(series[0].fit);

  options.n_grid.clear();
  CHECK(code_of([&] { sweep_storage_vs_n(noise, noise, options); }) == Errc::InvalidArgument);
  options.n_grid = {80};
  CHECK(code_of([&] { sweep_storage_vs_n(noise, noise, options); }) == Errc::DimensionMismatch);
}

TEST_CASE("pattern-count sweep matches storage") {
  const SceneIndex n = 60;
  PlantedSpec spec;
  spec.n_scenes = n;
  const std::vector<SceneIndex> grid{n};
  const std::vector<int> ks{2, 3};
  auto patterns = planted_grid_patterns(grid, ks, 10);
  const std::vector<std::vector<int>> sets{plan_coprime(n, 2), plan_coprime(n, 3)};
  const auto seq = planted_sequential_patterns(sets, 10, patterns.back().block.end);
  patterns.insert(patterns.end(), seq.begin(), seq.end());
  spec.patterns = patterns;
  spec.d = patterns.back().block.end;
  spec.seed = 14;
  const RowMatrixXd data = generate_planted(spec);
  const auto points = sweep_pattern_count(data, data, ks, 0.5, 0, EncoderParams{}, 2);
  REQUIRE(points.size() == 2);
  for (const auto& p : points) {
    CHECK(p.coprime_bytes <= p.hierarchical_bytes);
    CHECK(pairwise_coprime(p.coprime_taus));
    CHECK(p.hierarchical_precision == 1.0);
  }
}

TEST_CASE("reports") {
  const CycleConfig config({3, 3}, 9);
  const auto data = testing_support::planted(config, 20, 0.0, 15);
  EncoderParams p;
  p.taus = config.taus();
  const Model model = train_database(data.normalized, p);
  EvalReport report = evaluate_model(model, data.raw.features.values, identity_truth(9), 5);
  CHECK(report.precision == std::vector<double>(6, 1.0));
  CHECK(report.queries == 9);
  CHECK(report.no_match == 0);
  CHECK(report.storage_bytes == storage_formula_bytes(std::get<EncodedDatabase>(model)));
  report.config = {{"k", "2"}, {"seed", "42"}};
  report.train_seconds = 1.5;

  const auto csv = report_csv(report);
  CHECK(csv.find("# config\nkey,value\nk,2\nseed,42\n") == 0);
  CHECK(csv.find("# precision\ntolerance,precision\n0,1\n") != std::string::npos);
  CHECK(csv.find("seconds") == std::string::npos);

  const auto json = nlohmann::json::parse(report_json(report));
  CHECK(json["config"]["seed"] == "42");
  CHECK(json["precision"].size() == 6);
  CHECK(json["storage_bytes"] == report.storage_bytes);
  CHECK_FALSE(json.contains("train_seconds"));
  CHECK(nlohmann::json::parse(timing_json(report))["train_seconds"] == 1.5);

  const auto svg = precision_chart(report);
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(storage_chart(report).empty());
  CHECK(k_chart(report).empty());

  ChartSpec chart;
  chart.title = "a < b & c";
  chart.log_x = chart.log_y = true;
  chart.series = {{"s", {{1, 1}, {10, 100}, {100, 10000}}}};
  const auto text = svg_line_chart(chart);
  CHECK(text.find("a &lt; b &amp; c") != std::string::npos);
}
