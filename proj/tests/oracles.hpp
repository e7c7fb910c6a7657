#pragma once

// Independent reference computations used by the unit tests and the
// acceptance suite. Nothing here calls into the library's numerics; every
// value is recomputed from its defining formula with plain loops.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

// AUC by counting every (positive, negative) pair.
inline double auc_pairs(const std::vector<double>& scores, const std::vector<bool>& positive) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!positive[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (positive[j]) continue;
      pairs += 1.0;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  return wins / pairs;
}

// Tokens: maximal runs of [A-Za-z0-9] or bytes >= 0x80, lower-cased, kept
// when at least two bytes long.
inline std::vector<std::string> tokens(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  const auto flush = [&] {
    if (cur.size() >= 2) out.push_back(cur);
    cur.clear();
  };
  for (unsigned char c : text) {
    const bool letter = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
    const bool digit = c >= '0' && c <= '9';
    if (letter || digit || c >= 0x80) {
      cur.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c + 32) : static_cast<char>(c));
    } else {
      flush();
    }
  }
  flush();
  return out;
}

struct Tfidf {
  std::vector<std::string> vocabulary;
  std::vector<double> idf;
  Eigen::MatrixXd rows;  // documents x vocabulary, L2-normalised
};

// Smoothed idf: ln((1 + N) / (1 + df)) + 1; tf is the raw count.
inline Tfidf tfidf(const std::vector<std::string>& docs) {
  std::set<std::string> vocab;
  std::vector<std::vector<std::string>> toks;
  for (const auto& d : docs) {
    toks.push_back(tokens(d));
    vocab.insert(toks.back().begin(), toks.back().end());
  }
  Tfidf out;
  out.vocabulary.assign(vocab.begin(), vocab.end());
  const std::size_t V = out.vocabulary.size(), N = docs.size();
  out.idf.resize(V);
  for (std::size_t v = 0; v < V; ++v) {
    double df = 0;
    for (const auto& t : toks) df += std::count(t.begin(), t.end(), out.vocabulary[v]) > 0 ? 1 : 0;
    out.idf[v] = std::log((1.0 + static_cast<double>(N)) / (1.0 + df)) + 1.0;
  }
  out.rows = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(V));
  for (std::size_t i = 0; i < N; ++i) {
    double norm2 = 0.0;
    for (std::size_t v = 0; v < V; ++v) {
      const double tf = static_cast<double>(std::count(toks[i].begin(), toks[i].end(), out.vocabulary[v]));
      const double w = tf * out.idf[v];
      out.rows(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(v)) = w;
      norm2 += w * w;
    }
    if (norm2 > 0) out.rows.row(static_cast<Eigen::Index>(i)) /= std::sqrt(norm2);
  }
  return out;
}

// Sample Pearson correlation by the two-pass definition; NaN when either
// vector is constant.
inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0 || syy == 0) return std::numeric_limits<double>::quiet_NaN();
  return sxy / std::sqrt(sxx * syy);
}

// Multinomial L1 problem on a dense design: W is K x d, b has K entries.
struct L1Problem {
  Eigen::MatrixXd X;
  std::vector<int> y;
  int K = 3;
  double lambda = 0.0;
};

inline double objective(const L1Problem& p, const Eigen::MatrixXd& W, const Eigen::VectorXd& b) {
  const auto n = p.X.rows();
  double nll = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<double> s(static_cast<std::size_t>(p.K));
    double top = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < p.K; ++k) {
      double v = b(k);
      for (Eigen::Index j = 0; j < p.X.cols(); ++j) v += W(k, j) * p.X(i, j);
      s[static_cast<std::size_t>(k)] = v;
      top = std::max(top, v);
    }
    double z = 0.0;
    for (double v : s) z += std::exp(v - top);
    nll += top + std::log(z) - s[static_cast<std::size_t>(p.y[static_cast<std::size_t>(i)])];
  }
  double l1 = 0.0;
  for (Eigen::Index k = 0; k < W.rows(); ++k)
    for (Eigen::Index j = 0; j < W.cols(); ++j) l1 += std::abs(W(k, j));
  return nll / static_cast<double>(n) + p.lambda * l1;
}

// Minimum of the L1 problem by cyclic exact coordinate minimisation. Each
// one-dimensional subproblem is convex; its minimiser is found by bisection
// on the (sub)derivative. Intercepts are unpenalised.
inline double minimize(const L1Problem& p, int max_sweeps = 20000) {
  const auto n = p.X.rows(), d = p.X.cols();
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(p.K, d);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(p.K);
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(n, p.K);  // current scores

  // Derivative of the smooth part along parameter (k, column j) when the
  // parameter moves by `delta`; column j == d means the intercept.
  const auto derivative = [&](int k, Eigen::Index j, double delta) {
    double g = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double xij = j == d ? 1.0 : p.X(i, j);
      if (xij == 0.0) continue;
      double top = -std::numeric_limits<double>::infinity();
      std::vector<double> s(static_cast<std::size_t>(p.K));
      for (int c = 0; c < p.K; ++c) {
        s[static_cast<std::size_t>(c)] = S(i, c) + (c == k ? xij * delta : 0.0);
        top = std::max(top, s[static_cast<std::size_t>(c)]);
      }
      double z = 0.0;
      for (double v : s) z += std::exp(v - top);
      const double pk = std::exp(s[static_cast<std::size_t>(k)] - top) / z;
      g += xij * (pk - (p.y[static_cast<std::size_t>(i)] == k ? 1.0 : 0.0));
    }
    return g / static_cast<double>(n);
  };

  const auto solve_1d = [&](int k, Eigen::Index j) {
    const bool penalised = j != d;
    const double cur = penalised ? W(k, j) : b(k);
    const double lam = penalised ? p.lambda : 0.0;
    // phi'(u) for the new value u = cur + delta.
    const auto dphi = [&](double delta, double sign) { return derivative(k, j, delta) + lam * sign; };
    double target;
    if (penalised && std::abs(derivative(k, j, -cur)) <= lam) {
      target = 0.0;
    } else {
      // Direction: the side where the subgradient crosses zero.
      double sign;
      if (penalised) sign = derivative(k, j, -cur) < -lam ? 1.0 : -1.0;
      else sign = derivative(k, j, 0.0) < 0.0 ? 1.0 : -1.0;
      double lo = penalised ? 0.0 : cur, hi = lo;
      double step = 1.0;
      for (int it = 0; it < 200; ++it) {
        hi = lo + sign * step;
        if (sign * dphi(hi - cur, sign) > 0.0) break;
        lo = hi;
        step *= 2.0;
      }
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        if (sign * dphi(mid - cur, sign) > 0.0) hi = mid;
        else lo = mid;
      }
      target = 0.5 * (lo + hi);
    }
    const double delta = target - cur;
    for (Eigen::Index i = 0; i < n; ++i) S(i, k) += (j == d ? 1.0 : p.X(i, j)) * delta;
    if (penalised) W(k, j) = target;
    else b(k) = target;
  };

  double best = objective(p, W, b);
  int quiet = 0;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    for (int k = 0; k < p.K; ++k) {
      solve_1d(k, d);
      for (Eigen::Index j = 0; j < d; ++j) solve_1d(k, j);
    }
    const double f = objective(p, W, b);
    quiet = (best - f < 1e-15) ? quiet + 1 : 0;
    best = std::min(best, f);
    if (quiet >= 5) break;
  }
  return best;
}

// Accuracy-maximising cutoff over every midpoint between distinct scores;
// the lowest cutoff wins ties.
struct Cutoff {
  double threshold;
  double accuracy;
};
inline Cutoff best_cutoff(const std::vector<double>& scores, const std::vector<bool>& positive) {
  std::set<double> distinct(scores.begin(), scores.end());
  std::vector<double> v(distinct.begin(), distinct.end());
  Cutoff best{v.front(), -1.0};
  for (std::size_t i = 0; i + 1 < v.size(); ++i) {
    const double c = 0.5 * (v[i] + v[i + 1]);
    std::size_t correct = 0;
    for (std::size_t k = 0; k < scores.size(); ++k) correct += (scores[k] >= c) == positive[k];
    const double acc = static_cast<double>(correct) / static_cast<double>(scores.size());
    if (acc > best.accuracy) best = {c, acc};
  }
  return best;
}

}  // namespace oracle
