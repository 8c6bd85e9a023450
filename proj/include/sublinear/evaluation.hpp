#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sublinear/core.hpp"
#include "sublinear/encoder.hpp"
#include "sublinear/io.hpp"

namespace sublinear {

using Prediction = std::optional<SceneIndex>;

inline constexpr SceneIndex kDefaultTolerance = 5;
inline constexpr SceneIndex kMaxCurveTolerance = 25;

// Fraction of queries with |pred - truth| <= tolerance; NoMatch is a miss.
// Empty input gives 0.
double precision_at(std::span<const Prediction> predictions, std::span<const SceneIndex> truth, SceneIndex tolerance);

// precision_at for tolerance 0..max_tolerance.
std::vector<double> precision_curve(std::span<const Prediction> predictions, std::span<const SceneIndex> truth,
                                    SceneIndex max_tolerance = kMaxCurveTolerance);

// log(storage) = a log(N) + b by least squares. The through-origin fit
// log(storage) = a0 log(N) is reported alongside.
struct ExponentFit {
  double a = 0.0;
  double intercept = 0.0;
  double residual = 0.0;  // RMS of log residuals
  double a_through_origin = 0.0;
  double residual_through_origin = 0.0;
  int points = 0;
};

// Throws InvalidArgument for fewer than 3 points, non-increasing sizes or
// non-positive values.
ExponentFit fit_sublinear_exponent(std::span<const double> sizes, std::span<const double> storages);

// ---- co-prime baseline -------------------------------------------------------

bool pairwise_coprime(std::span<const int> taus);

// k pairwise co-prime cycle lengths >= 2 with product >= n_scenes, chosen
// greedily from the smallest start that reaches the product.
std::vector<int> plan_coprime(SceneIndex n_scenes, int k);

// Sequential cyclic labels l_j(i) = ((i - 1) mod tau_j) + 1.
LabelMatrix coprime_labels(std::span<const int> taus, SceneIndex n_scenes);

struct CoprimeModel {
  std::vector<int> taus;
  SceneIndex n_scenes = 0;
  int d = 0;
  int d_prime = 0;
  int real_width = 8;
  std::vector<PatternModel> patterns;
  // residues[j][l - 1]: ascending scenes whose pattern-j label is l.
  std::vector<std::vector<std::vector<SceneIndex>>> residues;
  std::optional<Normalization> normalization;
};

// Same mask-and-classifier pipeline as the hierarchical encoder with
// sequential labels. Throws NotCoprime, or InvalidConfig when
// prod(taus) < N.
CoprimeModel train_coprime(const Eigen::Ref<const RowMatrixXd>& rows, std::span<const int> taus, int d_prime,
                           const EncoderParams& params);

// Intersection of the residue classes named by the labels; NoMatch when empty.
Prediction decode_coprime(const CoprimeModel& model, std::span<const int> labels);
std::vector<int> predict_coprime_phases(const CoprimeModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);
std::vector<Prediction> query_coprime_batch(const CoprimeModel& model, const Eigen::Ref<const RowMatrixXd>& rows);
std::int64_t coprime_storage_bytes(const CoprimeModel& model);

// Largest d' in 1..d whose storage with these taus is <= budget (1 if none).
int matched_d_prime(std::span<const int> taus, int d, std::int64_t budget, int real_width = 8);

// ---- reports -------------------------------------------------------------------

struct SweepPoint {
  SceneIndex n = 0;
  bool reached = false;
  int k = 0;
  double rho = 0.0;
  int d_prime = 0;
  std::vector<int> taus;
  std::int64_t storage_bytes = 0;
  double precision = 0.0;
};

struct SweepSeries {
  std::string method;  // "hierarchical" or "coprime"
  double target = 0.0;
  std::vector<SweepPoint> points;
  std::optional<ExponentFit> fit;  // over reached points; absent below 3
};

struct KSweepPoint {
  int k = 0;
  std::vector<int> hierarchical_taus;
  std::vector<int> coprime_taus;
  int hierarchical_d_prime = 0;
  int coprime_d_prime = 0;
  std::int64_t hierarchical_bytes = 0;
  std::int64_t coprime_bytes = 0;
  double hierarchical_precision = 0.0;
  double coprime_precision = 0.0;
};

struct EvalReport {
  std::vector<std::pair<std::string, std::string>> config;
  std::vector<double> precision;  // index = tolerance in frames
  SceneIndex queries = 0;
  SceneIndex no_match = 0;
  std::int64_t storage_bytes = 0;
  std::vector<SweepSeries> sweeps;
  std::vector<KSweepPoint> k_sweep;
  // Timing lives in its own file; never part of the deterministic report.
  std::optional<double> train_seconds;
  std::optional<double> query_seconds;
};

// Queries raw rows against a model and fills the precision curve.
EvalReport evaluate_model(const Model& model, const Eigen::Ref<const RowMatrixXd>& raw_queries,
                          std::span<const SceneIndex> truth, SceneIndex max_tolerance = kMaxCurveTolerance);

// Trains the co-prime baseline on normalized training data and scores raw
// queries normalized with the training statistics.
EvalReport coprime_baseline(const FeatureMatrix& train, const Eigen::Ref<const RowMatrixXd>& raw_queries,
                            std::span<const SceneIndex> truth, std::span<const int> taus, int d_prime,
                            const EncoderParams& params, SceneIndex max_tolerance = kMaxCurveTolerance);

struct SweepOptions {
  std::vector<SceneIndex> n_grid;
  std::vector<double> targets{0.9, 0.8};
  std::vector<int> ks{2, 3, 4, 5};
  std::vector<double> rhos{0.4, 0.5, 0.6};
  SceneIndex tolerance = kDefaultTolerance;
  EncoderParams params;
  bool baseline = false;
  unsigned jobs = 1;
};

// For each N: the first N rows of `train` (normalized on those rows) and the
// first N rows of `test` as queries with truth 1..N. Candidates (k, rho) are
// tried in order of formula storage; each target records the first candidate
// reaching it, or a gap point. Throws InvalidArgument for an empty grid and
// DimensionMismatch when the data does not cover max(n_grid).
std::vector<SweepSeries> sweep_storage_vs_n(const Eigen::Ref<const RowMatrixXd>& train,
                                            const Eigen::Ref<const RowMatrixXd>& test, const SweepOptions& options);

// Precision at `tolerance` for both methods per k at matched storage: the
// hierarchical model uses d' = round(rho d) and the baseline gets the largest
// d' that fits in the same byte budget.
std::vector<KSweepPoint> sweep_pattern_count(const Eigen::Ref<const RowMatrixXd>& train,
                                             const Eigen::Ref<const RowMatrixXd>& test, std::span<const int> ks,
                                             double rho, SceneIndex tolerance, const EncoderParams& params,
                                             unsigned jobs = 1);

// Median wall-clock seconds of `repeats` calls.
double median_seconds(const std::function<void()>& fn, int repeats = 3);

struct Timing {
  double train_seconds = 0.0;
  double query_seconds = 0.0;
};

// Median-of-3 serial train and full query sweep of `queries` (normalized).
Timing time_train_query(const FeatureMatrix& train, const Eigen::Ref<const RowMatrixXd>& queries,
                        const EncoderParams& params);

// Report emission. Timing fields are excluded from csv/json.
std::string report_csv(const EvalReport& report);
std::string report_json(const EvalReport& report);
std::string timing_json(const EvalReport& report);

struct ChartSeries {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

struct ChartSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  bool log_y = false;
  std::vector<ChartSeries> series;
};

std::string svg_line_chart(const ChartSpec& chart);

// Standard charts for a report; empty string when the report has no data
// for that chart.
std::string precision_chart(const EvalReport& report);
std::string storage_chart(const EvalReport& report);
std::string k_chart(const EvalReport& report);

}  // namespace sublinear
