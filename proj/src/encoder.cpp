#include "sublinear/encoder.hpp"

#include <string>

#include "sublinear/parallel.hpp"
#include "sublinear/random.hpp"

namespace sublinear {

std::uint64_t pattern_seed(std::uint64_t run_seed, int pattern) {
  return Rng::substream(run_seed, static_cast<std::uint64_t>(pattern)).next();
}

namespace {

void validate_params(const EncoderParams& params) {
  if (!(params.rho > 0.0 && params.rho <= 1.0)) throw Error(Errc::InvalidArgument, "rho must be in (0, 1]");
  if (!(params.gamma > 0.0)) throw Error(Errc::InvalidArgument, "gamma must be > 0");
  if (params.real_width != 4 && params.real_width != 8) {
    throw Error(Errc::InvalidArgument, "real width must be 4 or 8 bytes");
  }
}

// A single scene: one binary pattern whose encoder always answers phase 1.
EncodedDatabase single_scene_database(int d, const EncoderParams& params) {
  EncodedDatabase db;
  db.config = CycleConfig({2}, 1);
  db.d = d;
  db.d_prime = masked_width(d, params.rho);
  db.rho = params.rho;
  db.gamma = params.gamma;
  db.reg_strength = params.reg_strength;
  db.seed = params.seed;
  db.real_width = params.real_width;
  PatternModel pattern;
  pattern.tau = 2;
  std::vector<int> first(static_cast<std::size_t>(db.d_prime));
  for (int t = 0; t < db.d_prime; ++t) first[static_cast<std::size_t>(t)] = t;
  pattern.mask = FeatureMask(d, std::move(first));
  pattern.encoder.hyperplanes = RowMatrixXd::Zero(2, db.d_prime);
  pattern.encoder.biases = Eigen::Vector2d(1.0, 0.0);
  pattern.encoder.reg_strength = params.reg_strength;
  pattern.encoder.seed = pattern_seed(params.seed, 0);
  db.patterns.push_back(std::move(pattern));
  return db;
}

}  // namespace

EncodedDatabase train_database_rows(const Eigen::Ref<const RowMatrixXd>& rows,
                                    const EncoderParams& params,
                                    std::vector<PatternSelection>* selections) {
  validate_params(params);
  const auto n = static_cast<SceneIndex>(rows.rows());
  const int d = static_cast<int>(rows.cols());
  if (n < 1 || d < 1) throw Error(Errc::InvalidArgument, "training needs at least one row and column");
  if (n == 1 && params.taus.empty()) {
    if (selections) selections->clear();
    return single_scene_database(d, params);
  }

  EncodedDatabase db;
  db.config = params.taus.empty() ? plan_cycles(n, params.k) : CycleConfig(params.taus, n);
  db.d = d;
  db.d_prime = masked_width(d, params.rho);
  db.rho = params.rho;
  db.gamma = params.gamma;
  db.reg_strength = params.reg_strength;
  db.seed = params.seed;
  db.real_width = params.real_width;

  const LabelMatrix labels = assign_labels(db.config);
  const int k = db.config.k();
  db.patterns.resize(static_cast<std::size_t>(k));
  std::vector<PatternSelection> chosen(static_cast<std::size_t>(k));
  const unsigned per_pattern = inner_jobs(params.jobs, static_cast<std::size_t>(k));

  parallel_for(static_cast<std::size_t>(k), params.jobs, [&](std::size_t j) {
    const int tau = db.config.tau(static_cast<int>(j));
    std::vector<int> column(static_cast<std::size_t>(n));
    for (SceneIndex i = 0; i < n; ++i) column[static_cast<std::size_t>(i)] = labels(i, static_cast<Eigen::Index>(j));

    PatternSelection selection = learn_pattern_mask(rows, column, tau, params.gamma, db.d_prime);
    TrainOptions options;
    options.reg_strength = params.reg_strength;
    options.seed = pattern_seed(params.seed, static_cast<int>(j));
    options.tolerance = params.tolerance;
    options.max_epochs = params.max_epochs;
    options.jobs = per_pattern;
    const RowMatrixXd masked = selection.mask.apply_rows(rows);

    PatternModel& pattern = db.patterns[j];
    pattern.tau = tau;
    pattern.mask = selection.mask;
    try {
      pattern.encoder = train_classifier(masked, column, tau, options);
    } catch (const Error& e) {
      if (e.code() != Errc::EmptyClass) throw;
      throw Error(Errc::EmptyClass, "pattern " + std::to_string(j + 1) + ": " + e.what());
    }
    if (params.real_width == 4) quantize_to_float(pattern.encoder);
    chosen[j] = std::move(selection);
  });
  if (selections) *selections = std::move(chosen);
  return db;
}

EncodedDatabase train_database(const FeatureMatrix& features, const EncoderParams& params,
                               std::vector<PatternSelection>* selections) {
  if (!features.normalization) {
    throw Error(Errc::NotNormalized, "feature matrix has no normalization metadata");
  }
  EncodedDatabase db = train_database_rows(features.values, params, selections);
  db.normalization = features.normalization;
  return db;
}

std::vector<int> predict_phases(const EncodedDatabase& db, const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (x.size() != db.d) {
    throw Error(Errc::DimensionMismatch, "query has " + std::to_string(x.size()) +
                                             " values, database expects " + std::to_string(db.d));
  }
  std::vector<int> phases(db.patterns.size());
  for (std::size_t j = 0; j < db.patterns.size(); ++j) {
    const PatternModel& pattern = db.patterns[j];
    phases[j] = predict(pattern.encoder, pattern.mask.apply(x));
  }
  return phases;
}

std::optional<SceneIndex> query(const EncodedDatabase& db, const Eigen::Ref<const Eigen::VectorXd>& x) {
  const auto phases = predict_phases(db, x);
  return try_reconstruct_index(phases, db.config);
}

std::vector<std::optional<SceneIndex>> query_batch(const EncodedDatabase& db,
                                                   const Eigen::Ref<const RowMatrixXd>& rows) {
  if (rows.cols() != db.d) {
    throw Error(Errc::DimensionMismatch, "queries have " + std::to_string(rows.cols()) +
                                             " columns, database expects " + std::to_string(db.d));
  }
  const auto m = static_cast<std::size_t>(rows.rows());
  const std::size_t k = db.patterns.size();
  std::vector<int> phases(m * k);
  for (std::size_t j = 0; j < k; ++j) {
    const PatternModel& pattern = db.patterns[j];
    const auto labels = predict_batch(pattern.encoder, pattern.mask.apply_rows(rows));
    for (std::size_t r = 0; r < m; ++r) phases[r * k + j] = labels[r];
  }
  std::vector<std::optional<SceneIndex>> out(m);
  for (std::size_t r = 0; r < m; ++r) {
    out[r] = try_reconstruct_index(std::span<const int>(phases.data() + r * k, k), db.config);
  }
  return out;
}

std::int64_t storage_formula_bytes(std::span<const int> taus, int d, int d_prime, int real_width) {
  std::int64_t tau_sum = 0;
  for (int t : taus) tau_sum += t;
  return static_cast<std::int64_t>(real_width) * (d_prime + 1) * tau_sum +
         static_cast<std::int64_t>(taus.size()) * static_cast<std::int64_t>(FeatureMask::packed_size(d));
}

std::int64_t storage_formula_bytes(const EncodedDatabase& db) {
  return storage_formula_bytes(db.config.taus(), db.d, db.d_prime, db.real_width);
}

std::int64_t measured_storage_bytes(const EncodedDatabase& db) {
  std::int64_t bytes = 0;
  for (const auto& pattern : db.patterns) {
    bytes += static_cast<std::int64_t>(pattern.mask.packed_bits().size());
    bytes += db.real_width * (pattern.encoder.hyperplanes.size() + pattern.encoder.biases.size());
  }
  return bytes;
}

Eigen::VectorXd normalize_query(const std::optional<Normalization>& stats,
                                const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (!stats) return x;
  if (x.size() != stats->mean.size()) {
    throw Error(Errc::DimensionMismatch, "query has " + std::to_string(x.size()) +
                                             " values, statistics cover " + std::to_string(stats->mean.size()));
  }
  return ((x - stats->mean).array() / stats->scale.array()).matrix();
}

RowMatrixXd normalize_rows(const std::optional<Normalization>& stats,
                           const Eigen::Ref<const RowMatrixXd>& rows) {
  if (!stats) return rows;
  if (rows.cols() != stats->mean.size()) {
    throw Error(Errc::DimensionMismatch, "rows have " + std::to_string(rows.cols()) +
                                             " columns, statistics cover " + std::to_string(stats->mean.size()));
  }
  RowMatrixXd out = rows.rowwise() - stats->mean.transpose();
  out.array().rowwise() /= stats->scale.transpose().array();
  return out;
}

}  // namespace sublinear
