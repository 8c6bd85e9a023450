#include "sublinear/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "sublinear/parallel.hpp"
#include "sublinear/random.hpp"

namespace sublinear {

bool LinearModel::operator==(const LinearModel& other) const {
  return hyperplanes.rows() == other.hyperplanes.rows() &&
         hyperplanes.cols() == other.hyperplanes.cols() && hyperplanes == other.hyperplanes &&
         biases == other.biases && reg_strength == other.reg_strength && seed == other.seed;
}

namespace {

struct BinarySolution {
  Eigen::VectorXd w;
  double bias = 0.0;
};

// min_alpha 0.5 a'Qa - e'a, 0 <= a_i <= C, Q_ij = y_i y_j (x_i . x_j + 1).
BinarySolution solve_binary(const Eigen::Ref<const RowMatrixXd>& rows,
                            const Eigen::VectorXd& diag, const std::vector<signed char>& y,
                            double cost, Rng rng, const TrainOptions& options,
                            std::vector<double>* objective_trace) {
  const Eigen::Index n = rows.rows();
  BinarySolution sol{Eigen::VectorXd::Zero(rows.cols()), 0.0};
  std::vector<double> alpha(static_cast<std::size_t>(n), 0.0);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  double alpha_sum = 0.0;
  double previous = 0.0;

  for (int epoch = 0; epoch < options.max_epochs; ++epoch) {
    rng.shuffle(order);
    for (Eigen::Index i : order) {
      const double yi = y[static_cast<std::size_t>(i)];
      double& a = alpha[static_cast<std::size_t>(i)];
      const double grad = yi * (rows.row(i).dot(sol.w) + sol.bias) - 1.0;
      double projected = grad;
      if (a == 0.0) {
        projected = std::min(grad, 0.0);
      } else if (a == cost) {
        projected = std::max(grad, 0.0);
      }
      if (std::abs(projected) <= 1e-12) continue;
      const double old = a;
      a = std::clamp(a - grad / diag(i), 0.0, cost);
      const double step = (a - old) * yi;
      if (step == 0.0) continue;
      sol.w.noalias() += step * rows.row(i).transpose();
      sol.bias += step;
      alpha_sum += a - old;
    }
    const double objective = 0.5 * (sol.w.squaredNorm() + sol.bias * sol.bias) - alpha_sum;
    if (objective_trace) objective_trace->push_back(objective);
    const double decrease = previous - objective;
    if (epoch > 0 && decrease <= options.tolerance * std::max(std::abs(objective), 1e-12)) break;
    previous = objective;
  }
  return sol;
}

}  // namespace

LinearModel train_classifier(const Eigen::Ref<const RowMatrixXd>& rows, std::span<const int> labels,
                             int n_classes, const TrainOptions& options, TrainTrace* trace) {
  const Eigen::Index n = rows.rows();
  if (static_cast<Eigen::Index>(labels.size()) != n) {
    throw Error(Errc::DimensionMismatch, "train: " + std::to_string(labels.size()) + " labels for " +
                                             std::to_string(n) + " rows");
  }
  if (n_classes < 1) throw Error(Errc::InvalidArgument, "train: n_classes must be >= 1");
  if (!(options.reg_strength > 0.0)) throw Error(Errc::InvalidArgument, "train: reg_strength must be > 0");
  std::vector<std::int64_t> count(static_cast<std::size_t>(n_classes), 0);
  for (int l : labels) {
    if (l < 1 || l > n_classes) {
      throw Error(Errc::LabelOutOfRange, "train: label " + std::to_string(l) + " outside 1.." +
                                             std::to_string(n_classes));
    }
    ++count[static_cast<std::size_t>(l - 1)];
  }
  for (int c = 0; c < n_classes; ++c) {
    if (count[static_cast<std::size_t>(c)] == 0) {
      throw Error(Errc::EmptyClass, "train: class " + std::to_string(c + 1) + " has no rows");
    }
  }

  const Eigen::VectorXd diag = (rows.rowwise().squaredNorm().array() + 1.0).matrix();
  LinearModel model;
  model.hyperplanes.resize(n_classes, rows.cols());
  model.biases.resize(n_classes);
  model.reg_strength = options.reg_strength;
  model.seed = options.seed;
  if (trace) trace->dual_objective.assign(static_cast<std::size_t>(n_classes), {});

  parallel_for(static_cast<std::size_t>(n_classes), options.jobs, [&](std::size_t c) {
    std::vector<signed char> y(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
      y[static_cast<std::size_t>(i)] = labels[static_cast<std::size_t>(i)] == static_cast<int>(c) + 1 ? 1 : -1;
    }
    auto sol = solve_binary(rows, diag, y, options.reg_strength, Rng::substream(options.seed, c),
                            options, trace ? &trace->dual_objective[c] : nullptr);
    model.hyperplanes.row(static_cast<Eigen::Index>(c)) = sol.w.transpose();
    model.biases(static_cast<Eigen::Index>(c)) = sol.bias;
  });
  return model;
}

namespace {

int argmax_lowest(const Eigen::VectorXd& scores) {
  int best = 0;
  for (Eigen::Index c = 1; c < scores.size(); ++c) {
    if (scores(c) > scores(best)) best = static_cast<int>(c);
  }
  return best + 1;
}

}  // namespace

int predict(const LinearModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (x.size() != model.dim()) {
    throw Error(Errc::DimensionMismatch, "predict: input has " + std::to_string(x.size()) +
                                             " values, model expects " + std::to_string(model.dim()));
  }
  const Eigen::VectorXd input = x;
  Eigen::VectorXd scores = model.biases;
  scores.noalias() += model.hyperplanes * input;
  return argmax_lowest(scores);
}

std::vector<int> predict_batch(const LinearModel& model, const Eigen::Ref<const RowMatrixXd>& rows) {
  if (rows.cols() != model.dim()) {
    throw Error(Errc::DimensionMismatch, "predict_batch: rows have " + std::to_string(rows.cols()) +
                                             " columns, model expects " + std::to_string(model.dim()));
  }
  std::vector<int> out(static_cast<std::size_t>(rows.rows()));
  Eigen::VectorXd input(rows.cols());
  Eigen::VectorXd scores(model.n_classes());
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    input = rows.row(r).transpose();
    scores = model.biases;
    scores.noalias() += model.hyperplanes * input;
    out[static_cast<std::size_t>(r)] = argmax_lowest(scores);
  }
  return out;
}

void quantize_to_float(LinearModel& model) {
  model.hyperplanes = model.hyperplanes.cast<float>().cast<double>();
  model.biases = model.biases.cast<float>().cast<double>();
}

}  // namespace sublinear
