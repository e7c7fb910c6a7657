#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "ciphen/labels.hpp"
#include "ciphen/tfidf.hpp"

namespace ciphen {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// Classes that take part in the fit. A class with no training rows is
// inactive: its score is pinned to -inf and its parameters stay zero.
using ClassMask = std::array<bool, kNumClasses>;
inline constexpr ClassMask kAllClassesActive{true, true, true};

// Row-wise softmax of an n x K score matrix, honouring the class mask.
template <typename Derived>
MatrixX<typename Derived::Scalar> softmax_rows(const Eigen::MatrixBase<Derived>& scores,
                                               const ClassMask& mask = kAllClassesActive) {
  using Scalar = typename Derived::Scalar;
  MatrixX<Scalar> p(scores.rows(), scores.cols());
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    Scalar top = -std::numeric_limits<Scalar>::infinity();
    for (Eigen::Index k = 0; k < scores.cols(); ++k) {
      if (mask[static_cast<std::size_t>(k)]) top = std::max(top, scores(i, k));
    }
    Scalar sum = 0;
    for (Eigen::Index k = 0; k < scores.cols(); ++k) {
      p(i, k) = mask[static_cast<std::size_t>(k)] ? std::exp(scores(i, k) - top) : Scalar(0);
      sum += p(i, k);
    }
    p.row(i) /= sum;
  }
  return p;
}

// Mean multinomial negative log-likelihood of integer labels under `scores`.
template <typename Derived>
typename Derived::Scalar mean_nll(const Eigen::MatrixBase<Derived>& scores,
                                  const std::vector<int>& labels,
                                  const ClassMask& mask = kAllClassesActive) {
  using Scalar = typename Derived::Scalar;
  Scalar total = 0;
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    Scalar top = -std::numeric_limits<Scalar>::infinity();
    for (Eigen::Index k = 0; k < scores.cols(); ++k) {
      if (mask[static_cast<std::size_t>(k)]) top = std::max(top, scores(i, k));
    }
    Scalar sum = 0;
    for (Eigen::Index k = 0; k < scores.cols(); ++k) {
      if (mask[static_cast<std::size_t>(k)]) sum += std::exp(scores(i, k) - top);
    }
    total += top + std::log(sum) - scores(i, labels[static_cast<std::size_t>(i)]);
  }
  return total / static_cast<Scalar>(scores.rows());
}

// Scores X W + 1 b^T for a dense or sparse design matrix.
template <typename XType, typename Scalar>
MatrixX<Scalar> linear_scores(const XType& X, const MatrixX<Scalar>& W, const VectorX<Scalar>& b) {
  MatrixX<Scalar> s = X * W;
  s.rowwise() += b.transpose();
  return s;
}

// Smooth part of the objective and its gradient with respect to W (d x K)
// and b (K).
template <typename XType, typename Scalar>
Scalar smooth_objective(const XType& X, const std::vector<int>& labels, const MatrixX<Scalar>& W,
                        const VectorX<Scalar>& b, const ClassMask& mask = kAllClassesActive) {
  return mean_nll(linear_scores(X, W, b), labels, mask);
}

template <typename XType, typename Scalar>
void smooth_gradient(const XType& X, const std::vector<int>& labels, const MatrixX<Scalar>& W,
                     const VectorX<Scalar>& b, MatrixX<Scalar>& grad_W, VectorX<Scalar>& grad_b,
                     const ClassMask& mask = kAllClassesActive) {
  MatrixX<Scalar> r = softmax_rows(linear_scores(X, W, b), mask);
  for (Eigen::Index i = 0; i < r.rows(); ++i) r(i, labels[static_cast<std::size_t>(i)]) -= 1;
  r /= static_cast<Scalar>(r.rows());
  grad_W = X.transpose() * r;
  grad_b = r.colwise().sum().transpose();
}

// Soft-thresholding operator, elementwise.
template <typename Derived>
auto soft_threshold(const Eigen::MatrixBase<Derived>& v, typename Derived::Scalar tau) {
  using Scalar = typename Derived::Scalar;
  return v.unaryExpr([tau](Scalar x) {
    return x > tau ? x - tau : (x < -tau ? x + tau : Scalar(0));
  });
}

/// Multinomial logistic regression over the selected TF-IDF columns.
/// weights is classes x features, rows in Label order (Yes, No, Neither).
struct LinearModel {
  Eigen::MatrixXd weights;
  Eigen::VectorXd intercepts = Eigen::VectorXd::Zero(kNumClasses);
  double lambda = 0.0;
  double decision_threshold = 0.5;
  ClassMask active = kAllClassesActive;

  Eigen::Index features() const { return weights.cols(); }
  Eigen::Index nonzero_weights() const { return (weights.array() != 0.0).count(); }

  nlohmann::json to_json() const;
  static LinearModel from_json(const nlohmann::json& j);
};

// newton_cd: block proximal Newton with coordinate descent (default).
// fista / ista: proximal gradient with a backtracked Lipschitz step.
enum class Solver { newton_cd, fista, ista };

struct FitOptions {
  double tolerance = 1e-7;
  std::size_t max_iterations = 20000;
  Solver solver = Solver::newton_cd;
  bool record_history = false;
  const LinearModel* warm_start = nullptr;
};

struct FitResult {
  LinearModel model;
  double objective = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<double> objective_history;  // objective after each iteration
};

std::vector<int> label_indices(const std::vector<Label>& labels);

/// Minimises mean NLL + lambda * sum|W| (intercepts unpenalised), from zero
/// unless warm-started. Each iteration never increases the objective.
FitResult fit(const SparseMatrix& X, const std::vector<Label>& labels, double lambda,
              const FitOptions& options = {});
FitResult fit(const Eigen::MatrixXd& X, const std::vector<Label>& labels, double lambda,
              const FitOptions& options = {});

// Full objective for an arbitrary parameter set (W is classes x features).
double objective_value(const SparseMatrix& X, const std::vector<Label>& labels,
                       const LinearModel& model);

Eigen::Vector3d predict_proba(const LinearModel& model, const Eigen::VectorXd& x);
Eigen::MatrixXd predict_proba(const LinearModel& model, const SparseMatrix& X);

struct ThresholdChoice {
  double threshold = 0.5;
  double accuracy = 0.0;
};

// Accuracy-maximising cutoff on Yes scores (predict Yes iff score >=
// threshold). Candidates are midpoints between consecutive distinct scores;
// ties go to the lowest candidate.
ThresholdChoice tune_decision_threshold(const std::vector<double>& scores,
                                        const std::vector<bool>& positive);

}  // namespace ciphen
