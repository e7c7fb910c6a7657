#include "ciphen/cross_validation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <thread>

#include "ciphen/metrics.hpp"
#include "ciphen/util.hpp"

namespace ciphen {

std::string to_string(AucMode mode) {
  return mode == AucMode::yes_vs_rest ? "yes_vs_rest" : "binary_merged";
}

AucMode parse_auc_mode(const std::string& text) {
  if (text == "yes_vs_rest") return AucMode::yes_vs_rest;
  if (text == "binary_merged") return AucMode::binary_merged;
  throw Error("unknown AUC mode: " + text);
}

std::vector<double> default_lambda_grid() {
  std::vector<double> grid;
  for (int i = 0; i < 10; ++i) grid.push_back(std::pow(10.0, 1.0 - 5.0 * i / 9.0));
  return grid;
}

std::vector<double> default_corr_grid() { return {0.0, 0.05, 0.1, 0.15, 0.2}; }

std::vector<Label> training_labels(const std::vector<LabeledDoc>& docs, AucMode mode) {
  std::vector<Label> labels;
  labels.reserve(docs.size());
  for (const auto& d : docs) {
    labels.push_back(mode == AucMode::binary_merged && d.label != Label::yes ? Label::no : d.label);
  }
  return labels;
}

std::vector<std::size_t> assign_folds(const std::vector<LabeledDoc>& docs, std::size_t folds,
                                      std::uint64_t seed) {
  if (folds < 2) throw Error("cross-validation needs at least two folds");
  std::map<std::string, std::size_t> size;
  for (const auto& d : docs) ++size[d.patient_id];
  if (size.size() < folds) {
    throw Error("cross-validation needs at least as many patients as folds (" +
                std::to_string(size.size()) + " < " + std::to_string(folds) + ")");
  }
  std::vector<std::pair<std::string, std::size_t>> patients(size.begin(), size.end());
  std::mt19937_64 rng(seed);
  std::shuffle(patients.begin(), patients.end(), rng);
  std::stable_sort(patients.begin(), patients.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  std::vector<std::size_t> load(folds, 0);
  std::map<std::string, std::size_t> fold_of_patient;
  for (const auto& [patient, count] : patients) {
    const auto f = static_cast<std::size_t>(std::min_element(load.begin(), load.end()) - load.begin());
    load[f] += count;
    fold_of_patient[patient] = f;
  }
  std::vector<std::size_t> fold_of;
  fold_of.reserve(docs.size());
  for (const auto& d : docs) fold_of.push_back(fold_of_patient[d.patient_id]);
  return fold_of;
}

namespace {

struct FoldOutcome {
  bool skipped = false;
  std::string warning;
  std::vector<double> auc;              // per cell
  std::vector<Eigen::Index> nonzero;    // per cell
  std::vector<Eigen::Index> features;   // per cell
  std::vector<std::vector<double>> val_scores;  // per cell, per validation doc
  std::vector<std::size_t> val_rows;
  std::vector<std::string> vocabulary;
};

FoldOutcome run_fold(std::size_t fold, const std::vector<LabeledDoc>& docs,
                     const std::vector<TermCounts>& counts, const std::vector<Label>& labels,
                     const std::vector<std::size_t>& fold_of, const TokenizerConfig& tokenizer,
                     const CvPlan& plan) {
  FoldOutcome out;
  std::vector<std::size_t> train_rows;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    (fold_of[i] == fold ? out.val_rows : train_rows).push_back(i);
  }
  const auto has_yes = [&](const std::vector<std::size_t>& rows) {
    return std::any_of(rows.begin(), rows.end(), [&](std::size_t i) { return docs[i].label == Label::yes; });
  };
  const auto has_rest = [&](const std::vector<std::size_t>& rows) {
    return std::any_of(rows.begin(), rows.end(), [&](std::size_t i) { return docs[i].label != Label::yes; });
  };
  if (!has_yes(out.val_rows) || !has_rest(out.val_rows) || !has_yes(train_rows) ||
      !has_rest(train_rows)) {
    out.skipped = true;
    out.warning = "fold " + std::to_string(fold + 1) + " skipped: Yes class missing on one side";
    return out;
  }

  std::vector<const TermCounts*> train_counts, val_counts;
  std::vector<Label> train_labels;
  std::vector<Label> train_truth;
  std::vector<bool> val_positive;
  for (std::size_t i : train_rows) {
    train_counts.push_back(&counts[i]);
    train_labels.push_back(labels[i]);
    train_truth.push_back(docs[i].label);
  }
  for (std::size_t i : out.val_rows) {
    val_counts.push_back(&counts[i]);
    val_positive.push_back(docs[i].label == Label::yes);
  }

  const TfidfModel tfidf = TfidfModel::fit_counts(train_counts, tokenizer);
  if (plan.keep_fold_vocabularies) out.vocabulary = tfidf.vocabulary();
  const SparseMatrix X_train = tfidf.transform_counts(train_counts);
  const SparseMatrix X_val = tfidf.transform_counts(val_counts);
  const Eigen::VectorXd r = pearson_correlations(X_train, binarize_yes(train_truth));

  const std::size_t cells = plan.corr_grid.size() * plan.lambda_grid.size();
  out.auc.resize(cells);
  out.nonzero.resize(cells);
  out.features.resize(cells);
  out.val_scores.resize(cells);

  for (std::size_t ci = 0; ci < plan.corr_grid.size(); ++ci) {
    std::vector<std::size_t> columns;
    for (const auto& s : select_by_threshold(r, plan.corr_grid[ci])) columns.push_back(s.column);
    const SparseMatrix Xt = select_columns(X_train, columns);
    const SparseMatrix Xv = select_columns(X_val, columns);

    // Warm starts along the descending lambda path.
    LinearModel previous;
    bool have_previous = false;
    std::vector<std::size_t> lambda_order(plan.lambda_grid.size());
    std::iota(lambda_order.begin(), lambda_order.end(), 0);
    std::stable_sort(lambda_order.begin(), lambda_order.end(), [&](std::size_t a, std::size_t b) {
      return plan.lambda_grid[a] > plan.lambda_grid[b];
    });
    for (std::size_t li : lambda_order) {
      FitOptions options = plan.fit;
      options.warm_start = have_previous ? &previous : nullptr;
      FitResult fitted = fit(Xt, train_labels, plan.lambda_grid[li], options);
      const Eigen::MatrixXd p = predict_proba(fitted.model, Xv);
      const std::size_t cell = ci * plan.lambda_grid.size() + li;
      out.val_scores[cell].assign(p.col(0).data(), p.col(0).data() + p.rows());
      out.auc[cell] = roc_auc(out.val_scores[cell], val_positive);
      out.nonzero[cell] = fitted.model.nonzero_weights();
      out.features[cell] = Xt.cols();
      previous = std::move(fitted.model);
      have_previous = true;
    }
  }
  return out;
}

}  // namespace

CvResult cross_validate(const std::vector<LabeledDoc>& docs, const TokenizerConfig& tokenizer,
                        const CvPlan& plan) {
  if (plan.lambda_grid.empty() || plan.corr_grid.empty()) throw Error("CV grids must be non-empty");
  for (double l : plan.lambda_grid) {
    if (!(l >= 0.0)) throw Error("lambda grid values must be >= 0");
  }
  CvResult result;
  result.fold_of = assign_folds(docs, plan.folds, plan.seed);
  const std::vector<Label> labels = training_labels(docs, plan.auc_mode);

  std::vector<TermCounts> counts(docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) counts[i] = count_terms(docs[i].text, tokenizer);

  std::vector<FoldOutcome> outcomes(plan.folds);
  const std::size_t workers = std::max<std::size_t>(1, std::min(plan.workers, plan.folds));
  {
    std::vector<std::jthread> threads;
    for (std::size_t w = 0; w < workers; ++w) {
      threads.emplace_back([&, w] {
        for (std::size_t f = w; f < plan.folds; f += workers) {
          outcomes[f] = run_fold(f, docs, counts, labels, result.fold_of, tokenizer, plan);
        }
      });
    }
  }

  result.skipped_fold.resize(plan.folds);
  std::size_t used = 0;
  for (std::size_t f = 0; f < plan.folds; ++f) {
    result.skipped_fold[f] = outcomes[f].skipped;
    if (outcomes[f].skipped) {
      result.warnings.push_back(outcomes[f].warning);
    } else {
      ++used;
    }
    if (plan.keep_fold_vocabularies) result.fold_vocabularies.push_back(outcomes[f].vocabulary);
  }
  if (used == 0) throw Error("every cross-validation fold was skipped");

  for (std::size_t ci = 0; ci < plan.corr_grid.size(); ++ci) {
    for (std::size_t li = 0; li < plan.lambda_grid.size(); ++li) {
      const std::size_t cell = ci * plan.lambda_grid.size() + li;
      CvCell c;
      c.lambda = plan.lambda_grid[li];
      c.corr_threshold = plan.corr_grid[ci];
      double nz = 0.0, feats = 0.0;
      for (const auto& o : outcomes) {
        if (o.skipped) continue;
        c.fold_auc.push_back(o.auc[cell]);
        nz += static_cast<double>(o.nonzero[cell]);
        feats += static_cast<double>(o.features[cell]);
      }
      c.mean_auc = std::accumulate(c.fold_auc.begin(), c.fold_auc.end(), 0.0) /
                   static_cast<double>(used);
      c.mean_nonzero = nz / static_cast<double>(used);
      c.mean_features = feats / static_cast<double>(used);
      result.table.push_back(std::move(c));
    }
  }

  // Best mean AUC; ties prefer the sparser model.
  for (std::size_t i = 1; i < result.table.size(); ++i) {
    const CvCell& a = result.table[i];
    const CvCell& b = result.table[result.best];
    if (a.mean_auc > b.mean_auc ||
        (a.mean_auc == b.mean_auc &&
         (a.lambda > b.lambda || (a.lambda == b.lambda && a.corr_threshold > b.corr_threshold)))) {
      result.best = i;
    }
  }

  result.oof_scores.assign(docs.size(), std::numeric_limits<double>::quiet_NaN());
  for (const auto& o : outcomes) {
    if (o.skipped) continue;
    for (std::size_t k = 0; k < o.val_rows.size(); ++k) {
      result.oof_scores[o.val_rows[k]] = o.val_scores[result.best][k];
    }
  }
  return result;
}

nlohmann::json to_json(const CvCell& cell) {
  return {{"lambda", cell.lambda},
          {"corr_threshold", cell.corr_threshold},
          {"mean_auc", cell.mean_auc},
          {"mean_nonzero", cell.mean_nonzero},
          {"mean_features", cell.mean_features},
          {"fold_auc", cell.fold_auc}};
}

}  // namespace ciphen
