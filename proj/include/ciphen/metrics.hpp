#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ciphen/labels.hpp"

namespace ciphen {

// Mann-Whitney U / (n_pos * n_neg), ties counted as one half.
double roc_auc(const std::vector<double>& scores, const std::vector<bool>& positive);

using ConfusionMatrix = std::array<std::array<std::size_t, kNumClasses>, kNumClasses>;

struct ClassificationMetrics {
  double accuracy = 0.0;
  double sensitivity = 0.0;  // recall of Yes
  double specificity = 0.0;  // recall of not-Yes
  double micro_f1 = 0.0;
  double macro_f1 = 0.0;
  double weighted_f1 = 0.0;
  std::array<double, kNumClasses> per_class_f1{};
  ConfusionMatrix confusion{};  // rows = truth, columns = prediction
  std::size_t n = 0;
};

ClassificationMetrics classification_metrics(const std::vector<Label>& predicted,
                                             const std::vector<Label>& truth);

struct BinaryRates {
  double sensitivity = 0.0;
  double specificity = 0.0;
};
BinaryRates binary_rates(const std::vector<bool>& predicted, const std::vector<bool>& truth);

struct HoldoutReport {
  std::string model_name = "TF-IDF";
  double auc = 0.0;
  double decision_threshold = 0.5;
  ClassificationMetrics argmax;  // 3-class metrics from argmax
  BinaryRates thresholded;       // Yes vs rest at the decision threshold
  std::size_t n = 0;
};

nlohmann::json to_json(const ClassificationMetrics& m);
nlohmann::json to_json(const HoldoutReport& r);
// Table row in the same column order as the usual model comparison table,
// followed by the confusion matrix.
std::string format_report_table(const HoldoutReport& r);

}  // namespace ciphen
