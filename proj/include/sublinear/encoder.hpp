#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "sublinear/classifier.hpp"
#include "sublinear/core.hpp"
#include "sublinear/pattern_learning.hpp"

namespace sublinear {

struct PatternModel {
  int tau = 0;
  FeatureMask mask;
  LinearModel encoder;

  bool operator==(const PatternModel&) const = default;
};

struct EncoderParams {
  int k = 3;
  // Overrides plan_cycles when non-empty.
  std::vector<int> taus;
  double rho = 0.5;
  double gamma = 10.0;
  double reg_strength = 1.0;
  std::uint64_t seed = 42;
  // Bytes per stored real: 8, or 4 for the 32-bit storage mode.
  int real_width = 8;
  double tolerance = 1e-4;
  int max_epochs = 1000;
  unsigned jobs = 1;
};

struct EncodedDatabase {
  CycleConfig config;
  std::vector<PatternModel> patterns;
  int d = 0;
  int d_prime = 0;
  double rho = 0.5;
  double gamma = 10.0;
  double reg_strength = 1.0;
  std::uint64_t seed = 42;
  int real_width = 8;
  std::optional<Normalization> normalization;

  int k() const { return config.k(); }
  bool operator==(const EncodedDatabase&) const = default;
};

// Seed used for pattern j's phase encoder.
std::uint64_t pattern_seed(std::uint64_t run_seed, int pattern);

// plan_cycles -> assign_labels -> per pattern: bcss_scores -> solve_weights
// -> select_columns -> train_classifier. Patterns train concurrently.
// Throws NotNormalized when S carries no normalization metadata. `selections`
// receives the per-pattern weights and masks when non-null.
EncodedDatabase train_database(const FeatureMatrix& features, const EncoderParams& params,
                               std::vector<PatternSelection>* selections = nullptr);

// Same pipeline over already-normalized rows; used for chunks and sweeps.
EncodedDatabase train_database_rows(const Eigen::Ref<const RowMatrixXd>& rows,
                                    const EncoderParams& params,
                                    std::vector<PatternSelection>* selections = nullptr);

// Decoded 1-based scene index, or nullopt (NoMatch) when the predicted phases
// address a virtual scene. x must be normalized with the database statistics.
std::optional<SceneIndex> query(const EncodedDatabase& db, const Eigen::Ref<const Eigen::VectorXd>& x);

// Per-row query over a block of normalized rows.
std::vector<std::optional<SceneIndex>> query_batch(const EncodedDatabase& db,
                                                   const Eigen::Ref<const RowMatrixXd>& rows);

// Predicted phase labels only (no decoding).
std::vector<int> predict_phases(const EncodedDatabase& db, const Eigen::Ref<const Eigen::VectorXd>& x);

// width * (d' + 1) * (tau_1 + ... + tau_k) + k * ceil(d / 8)
std::int64_t storage_formula_bytes(std::span<const int> taus, int d, int d_prime, int real_width = 8);
std::int64_t storage_formula_bytes(const EncodedDatabase& db);

// Bytes of the stored masks and parameters, counted from the model arrays.
std::int64_t measured_storage_bytes(const EncodedDatabase& db);

// (x - mean) / scale with the recorded statistics; identity when absent.
Eigen::VectorXd normalize_query(const std::optional<Normalization>& stats,
                                const Eigen::Ref<const Eigen::VectorXd>& x);
RowMatrixXd normalize_rows(const std::optional<Normalization>& stats,
                           const Eigen::Ref<const RowMatrixXd>& rows);

}  // namespace sublinear
