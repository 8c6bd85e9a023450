#include "sublinear/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <string>
#include <tuple>

#include "sublinear/normalize.hpp"
#include "sublinear/parallel.hpp"

namespace sublinear {

double precision_at(std::span<const Prediction> predictions, std::span<const SceneIndex> truth, SceneIndex tolerance) {
  if (predictions.size() != truth.size()) {
    throw Error(Errc::DimensionMismatch, std::to_string(predictions.size()) + " predictions for " +
                                             std::to_string(truth.size()) + " ground-truth indices");
  }
  if (tolerance < 0) throw Error(Errc::InvalidArgument, "tolerance must be >= 0");
  if (truth.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t q = 0; q < truth.size(); ++q) {
    if (predictions[q] && std::llabs(*predictions[q] - truth[q]) <= tolerance) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

std::vector<double> precision_curve(std::span<const Prediction> predictions, std::span<const SceneIndex> truth,
                                    SceneIndex max_tolerance) {
  if (predictions.size() != truth.size()) {
    throw Error(Errc::DimensionMismatch, std::to_string(predictions.size()) + " predictions for " +
                                             std::to_string(truth.size()) + " ground-truth indices");
  }
  if (max_tolerance < 0) throw Error(Errc::InvalidArgument, "tolerance must be >= 0");
  // Histogram of errors, then a running sum: one pass regardless of the curve length.
  std::vector<std::size_t> at(static_cast<std::size_t>(max_tolerance) + 1, 0);
  for (std::size_t q = 0; q < truth.size(); ++q) {
    if (!predictions[q]) continue;
    const SceneIndex err = std::llabs(*predictions[q] - truth[q]);
    if (err <= max_tolerance) ++at[static_cast<std::size_t>(err)];
  }
  std::vector<double> curve(at.size(), 0.0);
  std::size_t running = 0;
  for (std::size_t t = 0; t < at.size(); ++t) {
    running += at[t];
    curve[t] = truth.empty() ? 0.0 : static_cast<double>(running) / static_cast<double>(truth.size());
  }
  return curve;
}

ExponentFit fit_sublinear_exponent(std::span<const double> sizes, std::span<const double> storages) {
  if (sizes.size() != storages.size()) {
    throw Error(Errc::DimensionMismatch, "sizes and storages differ in length");
  }
  if (sizes.size() < 3) throw Error(Errc::InvalidArgument, "exponent fit needs at least 3 points");
  const std::size_t n = sizes.size();
  std::vector<double> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(sizes[i] > 0.0) || !(storages[i] > 0.0)) throw Error(Errc::InvalidArgument, "sizes and storages must be > 0");
    if (i > 0 && !(sizes[i] > sizes[i - 1])) throw Error(Errc::InvalidArgument, "sizes must be increasing");
    x[i] = std::log(sizes[i]);
    y[i] = std::log(storages[i]);
  }
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0, xx = 0.0, xy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    xx += x[i] * x[i];
    xy += x[i] * y[i];
  }
  ExponentFit fit;
  fit.points = static_cast<int>(n);
  fit.a = sxy / sxx;
  fit.intercept = my - fit.a * mx;
  fit.a_through_origin = xy / xx;
  double ss = 0.0, ss0 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - (fit.a * x[i] + fit.intercept);
    const double r0 = y[i] - fit.a_through_origin * x[i];
    ss += r * r;
    ss0 += r0 * r0;
  }
  fit.residual = std::sqrt(ss / static_cast<double>(n));
  fit.residual_through_origin = std::sqrt(ss0 / static_cast<double>(n));
  return fit;
}

// ---- co-prime baseline -------------------------------------------------------

bool pairwise_coprime(std::span<const int> taus) {
  for (std::size_t a = 0; a < taus.size(); ++a) {
    for (std::size_t b = a + 1; b < taus.size(); ++b) {
      if (std::gcd(taus[a], taus[b]) != 1) return false;
    }
  }
  return true;
}

namespace {

// prod(taus) capped at `cap` to avoid overflow.
SceneIndex capped_product(std::span<const int> taus, SceneIndex cap) {
  SceneIndex p = 1;
  for (int t : taus) {
    if (p > cap / t) return cap;
    p *= t;
  }
  return p;
}

void validate_coprime(std::span<const int> taus, SceneIndex n_scenes) {
  if (taus.empty()) throw Error(Errc::InvalidConfig, "at least one cycle length is required");
  for (int t : taus) {
    if (t < 2) throw Error(Errc::InvalidConfig, "cycle lengths must be >= 2");
  }
  if (!pairwise_coprime(taus)) {
    std::string list;
    for (int t : taus) list += (list.empty() ? "" : ",") + std::to_string(t);
    throw Error(Errc::NotCoprime, "cycle lengths [" + list + "] are not pairwise co-prime");
  }
  if (capped_product(taus, n_scenes) < n_scenes) {
    throw Error(Errc::InvalidConfig, "product of cycle lengths is below N=" + std::to_string(n_scenes));
  }
}

}  // namespace

std::vector<int> plan_coprime(SceneIndex n_scenes, int k) {
  if (n_scenes < 1) throw Error(Errc::InvalidConfig, "N must be >= 1");
  if (k < 1) throw Error(Errc::InvalidConfig, "k must be >= 1");
  for (std::int64_t start = std::max<std::int64_t>(2, integer_root(n_scenes, k));; ++start) {
    std::vector<int> taus;
    for (std::int64_t c = start; static_cast<int>(taus.size()) < k; ++c) {
      bool ok = true;
      for (int t : taus) ok = ok && std::gcd(static_cast<std::int64_t>(t), c) == 1;
      if (ok) taus.push_back(static_cast<int>(c));
    }
    if (capped_product(taus, n_scenes) >= n_scenes) return taus;
  }
}

LabelMatrix coprime_labels(std::span<const int> taus, SceneIndex n_scenes) {
  LabelMatrix labels(n_scenes, static_cast<Eigen::Index>(taus.size()));
  for (SceneIndex i = 0; i < n_scenes; ++i) {
    for (std::size_t j = 0; j < taus.size(); ++j) {
      labels(i, static_cast<Eigen::Index>(j)) = static_cast<std::int32_t>(i % taus[j]) + 1;
    }
  }
  return labels;
}

CoprimeModel train_coprime(const Eigen::Ref<const RowMatrixXd>& rows, std::span<const int> taus, int d_prime,
                           const EncoderParams& params) {
  const auto n = static_cast<SceneIndex>(rows.rows());
  validate_coprime(taus, n);
  CoprimeModel model;
  model.taus.assign(taus.begin(), taus.end());
  model.n_scenes = n;
  model.d = static_cast<int>(rows.cols());
  if (d_prime < 1 || d_prime > model.d) throw Error(Errc::InvalidArgument, "d' must be in 1..d");
  model.d_prime = d_prime;
  model.real_width = params.real_width;
  const LabelMatrix labels = coprime_labels(taus, n);
  const std::size_t k = taus.size();
  model.patterns.resize(k);
  model.residues.resize(k);
  parallel_for(k, params.jobs, [&](std::size_t j) {
    const int tau = taus[j];
    std::vector<int> column(static_cast<std::size_t>(n));
    for (SceneIndex i = 0; i < n; ++i) column[static_cast<std::size_t>(i)] = labels(i, static_cast<Eigen::Index>(j));
    const PatternSelection selection = learn_pattern_mask(rows, column, tau, params.gamma, d_prime);
    TrainOptions options;
    options.reg_strength = params.reg_strength;
    options.seed = pattern_seed(params.seed, static_cast<int>(j));
    options.tolerance = params.tolerance;
    options.max_epochs = params.max_epochs;
    PatternModel& pattern = model.patterns[j];
    pattern.tau = tau;
    pattern.mask = selection.mask;
    pattern.encoder = train_classifier(selection.mask.apply_rows(rows), column, tau, options);
    if (params.real_width == 4) quantize_to_float(pattern.encoder);
    auto& lists = model.residues[j];
    lists.resize(static_cast<std::size_t>(tau));
    for (SceneIndex i = 1; i <= n; ++i) lists[static_cast<std::size_t>((i - 1) % tau)].push_back(i);
  });
  return model;
}

Prediction decode_coprime(const CoprimeModel& model, std::span<const int> labels) {
  if (labels.size() != model.taus.size()) {
    throw Error(Errc::DimensionMismatch, std::to_string(labels.size()) + " labels for " +
                                             std::to_string(model.taus.size()) + " patterns");
  }
  std::vector<SceneIndex> candidates;
  std::vector<SceneIndex> next;
  for (std::size_t j = 0; j < labels.size(); ++j) {
    const int l = labels[j];
    if (l < 1 || l > model.taus[j]) return std::nullopt;
    const auto& list = model.residues[j][static_cast<std::size_t>(l - 1)];
    if (j == 0) {
      candidates = list;
    } else {
      next.clear();
      std::set_intersection(candidates.begin(), candidates.end(), list.begin(), list.end(), std::back_inserter(next));
      candidates.swap(next);
    }
    if (candidates.empty()) return std::nullopt;
  }
  return candidates.front();
}

std::vector<int> predict_coprime_phases(const CoprimeModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (x.size() != model.d) {
    throw Error(Errc::DimensionMismatch, "query has " + std::to_string(x.size()) + " values, model expects " +
                                             std::to_string(model.d));
  }
  std::vector<int> phases(model.patterns.size());
  for (std::size_t j = 0; j < phases.size(); ++j) {
    phases[j] = predict(model.patterns[j].encoder, model.patterns[j].mask.apply(x));
  }
  return phases;
}

std::vector<Prediction> query_coprime_batch(const CoprimeModel& model, const Eigen::Ref<const RowMatrixXd>& rows) {
  if (rows.cols() != model.d) {
    throw Error(Errc::DimensionMismatch, "queries have " + std::to_string(rows.cols()) + " columns, model expects " +
                                             std::to_string(model.d));
  }
  const auto m = static_cast<std::size_t>(rows.rows());
  const std::size_t k = model.patterns.size();
  std::vector<int> phases(m * k);
  for (std::size_t j = 0; j < k; ++j) {
    const auto labels = predict_batch(model.patterns[j].encoder, model.patterns[j].mask.apply_rows(rows));
    for (std::size_t r = 0; r < m; ++r) phases[r * k + j] = labels[r];
  }
  std::vector<Prediction> out(m);
  for (std::size_t r = 0; r < m; ++r) out[r] = decode_coprime(model, std::span<const int>(phases.data() + r * k, k));
  return out;
}

std::int64_t coprime_storage_bytes(const CoprimeModel& model) {
  return storage_formula_bytes(model.taus, model.d, model.d_prime, model.real_width);
}

int matched_d_prime(std::span<const int> taus, int d, std::int64_t budget, int real_width) {
  int best = 1;
  for (int dp = 1; dp <= d; ++dp) {
    if (storage_formula_bytes(taus, d, dp, real_width) <= budget) best = dp;
  }
  return best;
}

// ---- reports -------------------------------------------------------------------

namespace {

std::vector<SceneIndex> one_based(SceneIndex n) {
  std::vector<SceneIndex> truth(static_cast<std::size_t>(n));
  std::iota(truth.begin(), truth.end(), SceneIndex{1});
  return truth;
}

void fill_curve(EvalReport& report, const std::vector<Prediction>& predictions, std::span<const SceneIndex> truth,
                SceneIndex max_tolerance) {
  report.precision = precision_curve(predictions, truth, max_tolerance);
  report.queries = static_cast<SceneIndex>(truth.size());
  report.no_match = static_cast<SceneIndex>(std::count(predictions.begin(), predictions.end(), std::nullopt));
}

std::string join(std::span<const int> values) {
  std::string out;
  for (int v : values) out += (out.empty() ? "" : ",") + std::to_string(v);
  return out;
}

struct Candidate {
  int k = 0;
  double rho = 0.0;
  int d_prime = 0;
  std::vector<int> taus;
  std::int64_t bytes = 0;
};

}  // namespace

EvalReport evaluate_model(const Model& model, const Eigen::Ref<const RowMatrixXd>& raw_queries,
                          std::span<const SceneIndex> truth, SceneIndex max_tolerance) {
  EvalReport report;
  const auto predictions = query_model_batch(model, raw_queries);
  fill_curve(report, predictions, truth, max_tolerance);
  report.storage_bytes = model_storage_bytes(model);
  return report;
}

EvalReport coprime_baseline(const FeatureMatrix& train, const Eigen::Ref<const RowMatrixXd>& raw_queries,
                            std::span<const SceneIndex> truth, std::span<const int> taus, int d_prime,
                            const EncoderParams& params, SceneIndex max_tolerance) {
  if (!train.normalization) throw Error(Errc::NotNormalized, "feature matrix has no normalization metadata");
  CoprimeModel model = train_coprime(train.values, taus, d_prime, params);
  model.normalization = train.normalization;
  const auto predictions = query_coprime_batch(model, normalize_rows(train.normalization, raw_queries));
  EvalReport report;
  report.config = {{"method", "coprime"}, {"taus", join(taus)}, {"d_prime", std::to_string(d_prime)}};
  fill_curve(report, predictions, truth, max_tolerance);
  report.storage_bytes = coprime_storage_bytes(model);
  return report;
}

std::vector<SweepSeries> sweep_storage_vs_n(const Eigen::Ref<const RowMatrixXd>& train,
                                            const Eigen::Ref<const RowMatrixXd>& test, const SweepOptions& options) {
  if (options.n_grid.empty()) throw Error(Errc::InvalidArgument, "sweep grid is empty");
  if (options.targets.empty()) throw Error(Errc::InvalidArgument, "no target precision given");
  if (options.ks.empty() || options.rhos.empty()) throw Error(Errc::InvalidArgument, "empty (k, rho) search grid");
  for (double t : options.targets) {
    if (!(t >= 0.0 && t <= 1.0)) throw Error(Errc::InvalidArgument, "target precision must be in [0, 1]");
  }
  std::vector<SceneIndex> grid = options.n_grid;
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  if (grid.front() < 2) throw Error(Errc::InvalidArgument, "sweep sizes must be >= 2");
  if (train.cols() != test.cols()) throw Error(Errc::DimensionMismatch, "train and test widths differ");
  if (grid.back() > train.rows() || grid.back() > test.rows()) {
    throw Error(Errc::DimensionMismatch, "data has " + std::to_string(std::min(train.rows(), test.rows())) +
                                             " rows, sweep needs " + std::to_string(grid.back()));
  }
  const int d = static_cast<int>(train.cols());
  const std::vector<std::string> methods = options.baseline ? std::vector<std::string>{"hierarchical", "coprime"}
                                                            : std::vector<std::string>{"hierarchical"};
  const std::size_t n_targets = options.targets.size();
  // result[point][method][target]
  std::vector<std::vector<std::vector<SweepPoint>>> result(grid.size());
  const unsigned inner = inner_jobs(options.jobs, grid.size());

  parallel_for(grid.size(), options.jobs, [&](std::size_t g) {
    const SceneIndex n = grid[g];
    FeatureMatrix raw;
    raw.values = train.topRows(n);
    const FeatureMatrix s = normalize(raw);
    const RowMatrixXd queries = normalize_rows(s.normalization, test.topRows(n));
    const auto truth = one_based(n);
    EncoderParams params = options.params;
    params.jobs = inner;
    params.taus.clear();
    result[g].resize(methods.size());
    for (std::size_t m = 0; m < methods.size(); ++m) {
      const bool coprime = methods[m] == "coprime";
      std::vector<Candidate> candidates;
      for (int k : options.ks) {
        if (k < 1) continue;
        std::vector<int> taus;
        if (coprime) {
          taus = plan_coprime(n, k);
        } else {
          if (integer_root(n, k) < 2) continue;
          taus = plan_cycles(n, k).taus();
        }
        for (double rho : options.rhos) {
          const int dp = masked_width(d, rho);
          candidates.push_back({k, rho, dp, taus, storage_formula_bytes(taus, d, dp, params.real_width)});
        }
      }
      std::stable_sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        return std::tie(a.bytes, a.k, a.rho) < std::tie(b.bytes, b.k, b.rho);
      });
      auto& points = result[g][m];
      points.assign(n_targets, SweepPoint{});
      for (auto& p : points) p.n = n;
      std::size_t open = n_targets;
      for (const Candidate& c : candidates) {
        if (open == 0) break;
        std::vector<Prediction> predictions;
        if (coprime) {
          predictions = query_coprime_batch(train_coprime(s.values, c.taus, c.d_prime, params), queries);
        } else {
          params.k = c.k;
          params.rho = c.rho;
          predictions = query_batch(train_database_rows(s.values, params), queries);
        }
        const double precision = precision_at(predictions, truth, options.tolerance);
        for (std::size_t t = 0; t < n_targets; ++t) {
          if (points[t].reached || precision < options.targets[t]) continue;
          points[t] = {n, true, c.k, c.rho, c.d_prime, c.taus, c.bytes, precision};
          --open;
        }
      }
    }
  });

  std::vector<SweepSeries> series;
  for (std::size_t m = 0; m < methods.size(); ++m) {
    for (std::size_t t = 0; t < n_targets; ++t) {
      SweepSeries s;
      s.method = methods[m];
      s.target = options.targets[t];
      std::vector<double> sizes, bytes;
      for (std::size_t g = 0; g < grid.size(); ++g) {
        const SweepPoint& p = result[g][m][t];
        s.points.push_back(p);
        if (p.reached) {
          sizes.push_back(static_cast<double>(p.n));
          bytes.push_back(static_cast<double>(p.storage_bytes));
        }
      }
      if (sizes.size() >= 3) s.fit = fit_sublinear_exponent(sizes, bytes);
      series.push_back(std::move(s));
    }
  }
  return series;
}

std::vector<KSweepPoint> sweep_pattern_count(const Eigen::Ref<const RowMatrixXd>& train,
                                             const Eigen::Ref<const RowMatrixXd>& test, std::span<const int> ks,
                                             double rho, SceneIndex tolerance, const EncoderParams& params,
                                             unsigned jobs) {
  if (ks.empty()) throw Error(Errc::InvalidArgument, "pattern-count grid is empty");
  if (train.rows() != test.rows() || train.cols() != test.cols()) {
    throw Error(Errc::DimensionMismatch, "train and test shapes differ");
  }
  const auto n = static_cast<SceneIndex>(train.rows());
  const int d = static_cast<int>(train.cols());
  FeatureMatrix raw;
  raw.values = train;
  const FeatureMatrix s = normalize(raw);
  const RowMatrixXd queries = normalize_rows(s.normalization, test);
  const auto truth = one_based(n);
  std::vector<KSweepPoint> out(ks.size());
  EncoderParams inner = params;
  inner.taus.clear();
  inner.rho = rho;
  inner.jobs = inner_jobs(jobs, ks.size());
  parallel_for(ks.size(), jobs, [&](std::size_t i) {
    KSweepPoint& p = out[i];
    p.k = ks[i];
    EncoderParams local = inner;
    local.k = p.k;
    const EncodedDatabase db = train_database_rows(s.values, local);
    p.hierarchical_taus = db.config.taus();
    p.hierarchical_d_prime = db.d_prime;
    p.hierarchical_bytes = storage_formula_bytes(db);
    p.hierarchical_precision = precision_at(query_batch(db, queries), truth, tolerance);
    p.coprime_taus = plan_coprime(n, p.k);
    p.coprime_d_prime = matched_d_prime(p.coprime_taus, d, p.hierarchical_bytes, params.real_width);
    const CoprimeModel baseline = train_coprime(s.values, p.coprime_taus, p.coprime_d_prime, local);
    p.coprime_bytes = coprime_storage_bytes(baseline);
    p.coprime_precision = precision_at(query_coprime_batch(baseline, queries), truth, tolerance);
  });
  return out;
}

double median_seconds(const std::function<void()>& fn, int repeats) {
  std::vector<double> times;
  for (int r = 0; r < std::max(1, repeats); ++r) {
    const auto start = std::chrono::steady_clock::now();
    fn();
    times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  }
  std::sort(times.begin(), times.end());
  return times[times.size() / 2];
}

Timing time_train_query(const FeatureMatrix& train, const Eigen::Ref<const RowMatrixXd>& queries,
                        const EncoderParams& params) {
  EncoderParams serial = params;
  serial.jobs = 1;
  EncodedDatabase db;
  Timing timing;
  timing.train_seconds = median_seconds([&] { db = train_database(train, serial); });
  volatile SceneIndex sink = 0;
  timing.query_seconds = median_seconds([&] {
    SceneIndex acc = 0;
    for (Eigen::Index r = 0; r < queries.rows(); ++r) acc += query(db, queries.row(r).transpose()).value_or(0);
    sink = acc;
  });
  (void)sink;
  return timing;
}

}  // namespace sublinear
