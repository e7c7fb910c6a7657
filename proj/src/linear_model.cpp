#include "ciphen/linear_model.hpp"

#include <algorithm>
#include <limits>

#include <Eigen/Eigenvalues>

#include "ciphen/util.hpp"

namespace ciphen {

namespace {

constexpr Eigen::Index K = kNumClasses;
constexpr Eigen::Index kExactEigenLimit = 400;

template <typename XType>
bool all_finite(const XType& X) {
  if constexpr (std::is_same_v<XType, SparseMatrix>) {
    for (Eigen::Index i = 0; i < X.nonZeros(); ++i) {
      if (!std::isfinite(X.valuePtr()[i])) return false;
    }
    return true;
  } else {
    return X.allFinite();
  }
}

// Largest eigenvalue of [X 1]^T [X 1].
template <typename XType>
double gram_spectral_norm(const XType& X) {
  const Eigen::Index n = X.rows(), d = X.cols();
  const Eigen::VectorXd colsum = X.transpose() * Eigen::VectorXd::Ones(n);
  if (d + 1 <= kExactEigenLimit) {
    Eigen::MatrixXd G(d + 1, d + 1);
    G.topLeftCorner(d, d) = Eigen::MatrixXd(X.transpose() * X);
    G.topRightCorner(d, 1) = colsum;
    G.bottomLeftCorner(1, d) = colsum.transpose();
    G(d, d) = static_cast<double>(n);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(G, Eigen::EigenvaluesOnly);
    return solver.eigenvalues().maxCoeff();
  }
  // Power iteration from a fixed start; the solver backtracks if this
  // estimate turns out to be low.
  Eigen::VectorXd v = Eigen::VectorXd::Ones(d + 1).normalized();
  double lambda = 0.0;
  for (int it = 0; it < 300; ++it) {
    const Eigen::VectorXd xv = X * v.head(d) + Eigen::VectorXd::Constant(n, v(d));
    Eigen::VectorXd w(d + 1);
    w.head(d) = X.transpose() * xv;
    w(d) = xv.sum();
    const double next = w.norm();
    if (next == 0.0) return 0.0;
    v = w / next;
    if (std::abs(next - lambda) <= 1e-10 * next) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  return lambda * 1.02;
}

ClassMask class_mask(const std::vector<int>& y) {
  ClassMask mask{false, false, false};
  for (int c : y) mask[static_cast<std::size_t>(c)] = true;
  return mask;
}


using ColumnMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor>;

ColumnMatrix to_columns(const SparseMatrix& X) { return ColumnMatrix(X); }
ColumnMatrix to_columns(const Eigen::MatrixXd& X) { return X.sparseView(1.0, 0.0); }

double full_objective(const Eigen::MatrixXd& S, const std::vector<int>& y, const ClassMask& mask,
                      double lambda, const Eigen::MatrixXd& W) {
  return mean_nll(S, y, mask) + lambda * W.cwiseAbs().sum();
}

// Block proximal Newton: one class at a time, the weighted lasso for the
// exact per-class Hessian is solved by coordinate descent, then an Armijo
// line search on the full objective sets the step.
FitResult newton_cd(const ColumnMatrix& X, const std::vector<int>& y, const ClassMask& mask,
                    double lambda, Eigen::MatrixXd W, Eigen::VectorXd b, const FitOptions& options) {
  const Eigen::Index n = X.rows(), d = X.cols();
  const double inv_n = 1.0 / static_cast<double>(n);
  const double inner_tolerance = 0.1 * options.tolerance;
  constexpr int kMaxSweeps = 1000;
  constexpr int kMaxHalvings = 50;
  constexpr double kArmijo = 1e-4;

  Eigen::MatrixXd S = X * W;
  S.rowwise() += b.transpose();
  double F = full_objective(S, y, mask, lambda, W);

  FitResult result;
  Eigen::VectorXd wt(n), r(n), g(n), h(d), delta(d), ds(n);
  Eigen::MatrixXd S_try;
  for (std::size_t iter = 1; iter <= options.max_iterations; ++iter) {
    double max_change = 0.0;
    for (Eigen::Index k = 0; k < K; ++k) {
      if (!mask[static_cast<std::size_t>(k)]) continue;
      const Eigen::MatrixXd P = softmax_rows(S, mask);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double p = P(i, k);
        wt(i) = std::max(p * (1.0 - p), 1e-12) * inv_n;
        g(i) = (p - (y[static_cast<std::size_t>(i)] == k ? 1.0 : 0.0)) * inv_n;
      }
      for (Eigen::Index j = 0; j < d; ++j) {
        double hj = 0.0;
        for (ColumnMatrix::InnerIterator it(X, j); it; ++it) hj += wt(it.row()) * it.value() * it.value();
        h(j) = hj;
      }
      const double hb = wt.sum();

      // Coordinate descent on the local quadratic model; r is its gradient
      // with respect to the scores.
      r = g;
      delta.setZero();
      double db = 0.0;
      bool full = true;
      for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        double max_step = 0.0;
        const double step_b = -r.sum() / hb;
        db += step_b;
        r += wt * step_b;
        max_step = std::abs(step_b);
        for (Eigen::Index j = 0; j < d; ++j) {
          if (h(j) <= 0.0) continue;
          const double cur = W(j, k) + delta(j);
          if (!full && cur == 0.0) continue;
          double gj = 0.0;
          for (ColumnMatrix::InnerIterator it(X, j); it; ++it) gj += it.value() * r(it.row());
          const double target = cur - gj / h(j);
          const double tau = lambda / h(j);
          const double next = target > tau ? target - tau : (target < -tau ? target + tau : 0.0);
          const double step = next - cur;
          if (step == 0.0) continue;
          delta(j) += step;
          for (ColumnMatrix::InnerIterator it(X, j); it; ++it) {
            r(it.row()) += wt(it.row()) * it.value() * step;
          }
          max_step = std::max(max_step, std::abs(step));
        }
        if (max_step < inner_tolerance) {
          if (full) break;
          full = true;
        } else {
          full = false;
        }
      }

      ds = X * delta;
      ds.array() += db;
      const double l1_old = W.col(k).cwiseAbs().sum();
      const double l1_new = (W.col(k) + delta).cwiseAbs().sum();
      const double decrease = g.dot(ds) + lambda * (l1_new - l1_old);
      if (!(decrease < 0.0)) continue;
      double alpha = 1.0;
      for (int halving = 0; halving < kMaxHalvings; ++halving, alpha *= 0.5) {
        S_try = S;
        S_try.col(k) += alpha * ds;
        const double l1_try = (W.col(k) + alpha * delta).cwiseAbs().sum();
        const double F_try =
            mean_nll(S_try, y, mask) + lambda * (W.cwiseAbs().sum() - l1_old + l1_try);
        if (F_try <= F + kArmijo * alpha * decrease) {
          W.col(k) += alpha * delta;
          b(k) += alpha * db;
          S.swap(S_try);
          F = F_try;
          double change = std::abs(alpha * db);
          if (d > 0) change = std::max(change, alpha * delta.cwiseAbs().maxCoeff());
          max_change = std::max(max_change, change);
          break;
        }
      }
    }
    if (options.record_history) result.objective_history.push_back(F);
    result.iterations = iter;
    if (max_change < options.tolerance) {
      result.converged = true;
      break;
    }
  }

  result.model.weights = W.transpose();
  result.model.intercepts = b;
  result.model.lambda = lambda;
  result.model.active = mask;
  result.objective = full_objective(S, y, mask, lambda, W);
  return result;
}

template <typename XType>
FitResult fit_impl(const XType& X, const std::vector<Label>& labels, double lambda,
                   const FitOptions& options) {
  if (static_cast<Eigen::Index>(labels.size()) != X.rows()) {
    throw Error("label count does not match feature rows");
  }
  if (labels.empty()) throw Error("cannot fit on zero rows");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw Error("lambda must be finite and >= 0");
  if (!all_finite(X)) throw Error("feature matrix contains non-finite values");
  const std::vector<int> y = label_indices(labels);
  const ClassMask mask = class_mask(y);
  if (std::count(mask.begin(), mask.end(), true) < 2) {
    throw Error("fitting needs at least two classes present");
  }

  const Eigen::Index n = X.rows(), d = X.cols();
  Eigen::MatrixXd Wx = Eigen::MatrixXd::Zero(d, K);
  Eigen::VectorXd bx = Eigen::VectorXd::Zero(K);
  if (options.warm_start != nullptr && options.warm_start->weights.cols() == d) {
    Wx = options.warm_start->weights.transpose();
    bx = options.warm_start->intercepts;
    for (Eigen::Index k = 0; k < K; ++k) {
      if (!mask[static_cast<std::size_t>(k)]) {
        Wx.col(k).setZero();
        bx(k) = 0.0;
      }
    }
  }

  if (options.solver == Solver::newton_cd) {
    return newton_cd(to_columns(X), y, mask, lambda, std::move(Wx), std::move(bx), options);
  }

  // Lipschitz bound of the smooth part; backtracking doubles it whenever
  // the quadratic model is violated.
  double L = std::max(0.5 * gram_spectral_norm(X) / static_cast<double>(n), 1e-12);

  const auto full_objective = [&](double smooth, const Eigen::MatrixXd& W) {
    return smooth + lambda * W.cwiseAbs().sum();
  };

  Eigen::MatrixXd Sx = linear_scores(X, Wx, bx);
  double Fx = full_objective(mean_nll(Sx, y, mask), Wx);
  Eigen::MatrixXd Wy = Wx, Sy = Sx;
  Eigen::VectorXd by = bx;
  double t = 1.0;

  FitResult result;
  Eigen::MatrixXd Wz, Sz, R, GW;
  Eigen::VectorXd bz, Gb;
  for (std::size_t iter = 1; iter <= options.max_iterations; ++iter) {
    R = softmax_rows(Sy, mask);
    for (Eigen::Index i = 0; i < n; ++i) R(i, y[static_cast<std::size_t>(i)]) -= 1.0;
    R /= static_cast<double>(n);
    GW.noalias() = X.transpose() * R;
    Gb = R.colwise().sum().transpose();
    const double fy = mean_nll(Sy, y, mask);

    double fz = 0.0;
    for (;;) {
      Wz = soft_threshold(Wy - GW / L, lambda / L);
      bz = by - Gb / L;
      for (Eigen::Index k = 0; k < K; ++k) {
        if (!mask[static_cast<std::size_t>(k)]) {
          Wz.col(k).setZero();
          bz(k) = 0.0;
        }
      }
      Sz = linear_scores(X, Wz, bz);
      fz = mean_nll(Sz, y, mask);
      const double dW2 = (Wz - Wy).squaredNorm() + (bz - by).squaredNorm();
      const double model = fy + ((Wz - Wy).cwiseProduct(GW)).sum() + (bz - by).dot(Gb) +
                           0.5 * L * dW2;
      if (fz <= model + 1e-12 * (1.0 + std::abs(fy))) break;
      L *= 2.0;
    }
    const double Fz = full_objective(fz, Wz);
    double change = (bz - by).cwiseAbs().maxCoeff();
    if (Wz.size() > 0) change = std::max(change, (Wz - Wy).cwiseAbs().maxCoeff());

    if (options.solver == Solver::ista) {
      Wx = Wz;
      bx = bz;
      Sx = Sz;
      Fx = Fz;
      Wy = Wx;
      by = bx;
      Sy = Sx;
    } else if (Fz <= Fx) {
      // Accelerated step from the accepted point.
      const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      const double c = (t - 1.0) / t_next;
      Wy = Wz + c * (Wz - Wx);
      by = bz + c * (bz - bx);
      Sy = Sz + c * (Sz - Sx);
      Wx = Wz;
      bx = bz;
      Sx = Sz;
      Fx = Fz;
      t = t_next;
    } else {
      // The objective went up: keep the previous iterate and restart the
      // momentum from it.
      Wy = Wx;
      by = bx;
      Sy = Sx;
      t = 1.0;
    }
    if (options.record_history) result.objective_history.push_back(Fx);
    result.iterations = iter;
    if (change < options.tolerance) {
      result.converged = true;
      break;
    }
  }

  result.model.weights = Wx.transpose();
  result.model.intercepts = bx;
  result.model.lambda = lambda;
  result.model.active = mask;
  result.objective = Fx;
  return result;
}

}  // namespace

std::vector<int> label_indices(const std::vector<Label>& labels) {
  std::vector<int> y;
  y.reserve(labels.size());
  for (Label l : labels) y.push_back(static_cast<int>(index_of(l)));
  return y;
}

FitResult fit(const SparseMatrix& X, const std::vector<Label>& labels, double lambda,
              const FitOptions& options) {
  return fit_impl(X, labels, lambda, options);
}

FitResult fit(const Eigen::MatrixXd& X, const std::vector<Label>& labels, double lambda,
              const FitOptions& options) {
  return fit_impl(X, labels, lambda, options);
}

double objective_value(const SparseMatrix& X, const std::vector<Label>& labels,
                       const LinearModel& model) {
  const Eigen::MatrixXd W = model.weights.transpose();
  return smooth_objective(X, label_indices(labels), W, Eigen::VectorXd(model.intercepts),
                          model.active) +
         model.lambda * model.weights.cwiseAbs().sum();
}

Eigen::Vector3d predict_proba(const LinearModel& model, const Eigen::VectorXd& x) {
  if (x.size() != model.features()) {
    throw Error("feature vector has length " + std::to_string(x.size()) + ", model expects " +
                std::to_string(model.features()));
  }
  const Eigen::RowVectorXd s = (model.weights * x + model.intercepts).transpose();
  return softmax_rows(s, model.active).row(0).transpose();
}

Eigen::MatrixXd predict_proba(const LinearModel& model, const SparseMatrix& X) {
  if (X.cols() != model.features()) {
    throw Error("feature matrix has " + std::to_string(X.cols()) + " columns, model expects " +
                std::to_string(model.features()));
  }
  Eigen::MatrixXd s = X * model.weights.transpose();
  s.rowwise() += model.intercepts.transpose();
  return softmax_rows(s, model.active);
}

nlohmann::json LinearModel::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index k = 0; k < weights.rows(); ++k) {
    std::vector<double> row(static_cast<std::size_t>(weights.cols()));
    for (Eigen::Index j = 0; j < weights.cols(); ++j) row[static_cast<std::size_t>(j)] = weights(k, j);
    rows.push_back(row);
  }
  return {{"classes", {"Yes", "No", "Neither"}},
          {"weights", rows},
          {"intercepts", std::vector<double>(intercepts.data(), intercepts.data() + intercepts.size())},
          {"active", active},
          {"lambda", lambda},
          {"decision_threshold", decision_threshold}};
}

LinearModel LinearModel::from_json(const nlohmann::json& j) {
  LinearModel m;
  const auto rows = j.at("weights").get<std::vector<std::vector<double>>>();
  if (rows.size() != static_cast<std::size_t>(K)) throw Error("model must have three weight rows");
  const std::size_t d = rows[0].size();
  m.weights.resize(K, static_cast<Eigen::Index>(d));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k].size() != d) throw Error("ragged weight matrix");
    for (std::size_t c = 0; c < d; ++c) {
      m.weights(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(c)) = rows[k][c];
    }
  }
  const auto b = j.at("intercepts").get<std::vector<double>>();
  if (b.size() != static_cast<std::size_t>(K)) throw Error("model must have three intercepts");
  m.intercepts = Eigen::Map<const Eigen::VectorXd>(b.data(), K);
  m.active = j.at("active").get<ClassMask>();
  m.lambda = j.at("lambda").get<double>();
  m.decision_threshold = j.at("decision_threshold").get<double>();
  return m;
}

ThresholdChoice tune_decision_threshold(const std::vector<double>& scores,
                                        const std::vector<bool>& positive) {
  if (scores.size() != positive.size()) throw Error("scores and labels differ in length");
  const auto n_pos = static_cast<std::size_t>(std::count(positive.begin(), positive.end(), true));
  if (n_pos == 0 || n_pos == scores.size()) {
    throw Error("threshold tuning needs both positive and negative examples");
  }
  std::vector<std::size_t> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Sweep ascending: below the cutoff everything is predicted negative.
  const double n = static_cast<double>(scores.size());
  std::size_t neg_below = 0, pos_below = 0;
  ThresholdChoice best{scores[order[0]], -1.0};
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (positive[order[j]] ? pos_below : neg_below) += 1;
      ++j;
    }
    if (j == order.size()) break;
    const double cut = 0.5 * (scores[order[i]] + scores[order[j]]);
    const double acc = static_cast<double>(neg_below + (n_pos - pos_below)) / n;
    if (acc > best.accuracy) best = {cut, acc};
    i = j;
  }
  if (best.accuracy < 0.0) {
    // Every score is equal: the single value predicts all positive.
    best = {scores[order[0]], static_cast<double>(n_pos) / n};
  }
  return best;
}

}  // namespace ciphen
