#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ciphen/labels.hpp"
#include "ciphen/linear_model.hpp"
#include "ciphen/tfidf.hpp"

namespace ciphen {

// How the sequence classifier is trained and scored during tuning.
//   yes_vs_rest:   3-class model, AUC of P(Yes) against No + Neither.
//   binary_merged: No and Neither merged before training.
enum class AucMode { yes_vs_rest, binary_merged };

std::string to_string(AucMode mode);
AucMode parse_auc_mode(const std::string& text);

std::vector<double> default_lambda_grid();  // 10 log-spaced values, 10 .. 1e-4
std::vector<double> default_corr_grid();    // 0, .05, .1, .15, .2

struct CvPlan {
  std::size_t folds = 10;
  std::vector<double> lambda_grid = default_lambda_grid();
  std::vector<double> corr_grid = default_corr_grid();
  std::uint64_t seed = 0;
  AucMode auc_mode = AucMode::yes_vs_rest;
  std::size_t workers = 1;
  FitOptions fit;
  bool keep_fold_vocabularies = false;
};

struct LabeledDoc {
  std::string id;
  std::string patient_id;
  std::string text;
  Label label = Label::neither;
};

// Labels as the chosen mode trains on them.
std::vector<Label> training_labels(const std::vector<LabeledDoc>& docs, AucMode mode);

// Patient-grouped fold index per document, balanced by document count.
std::vector<std::size_t> assign_folds(const std::vector<LabeledDoc>& docs, std::size_t folds,
                                      std::uint64_t seed);

struct CvCell {
  double lambda = 0.0;
  double corr_threshold = 0.0;
  double mean_auc = 0.0;
  double mean_nonzero = 0.0;  // average nonzero weights over folds
  double mean_features = 0.0;
  std::vector<double> fold_auc;  // folds that were not skipped
};

struct CvResult {
  std::vector<CvCell> table;  // corr-major, lambda in grid order
  std::size_t best = 0;
  std::vector<std::size_t> fold_of;
  std::vector<bool> skipped_fold;
  // Out-of-fold P(Yes) of the best cell; NaN for documents in skipped folds.
  std::vector<double> oof_scores;
  std::vector<std::string> warnings;
  std::vector<std::vector<std::string>> fold_vocabularies;

  const CvCell& best_cell() const { return table[best]; }
};

CvResult cross_validate(const std::vector<LabeledDoc>& docs, const TokenizerConfig& tokenizer,
                        const CvPlan& plan);

nlohmann::json to_json(const CvCell& cell);

}  // namespace ciphen
