#include "ciphen/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include "ciphen/util.hpp"

namespace ciphen {

double roc_auc(const std::vector<double>& scores, const std::vector<bool>& positive) {
  if (scores.size() != positive.size()) throw Error("scores and labels differ in length");
  const auto n_pos = static_cast<std::size_t>(std::count(positive.begin(), positive.end(), true));
  const std::size_t n_neg = scores.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw Error("AUC needs both positive and negative examples");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Twice U, kept integral so the result is exact up to the final division.
  unsigned long long twice_u = 0;
  std::size_t neg_below = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i, pos = 0, neg = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (positive[order[j]] ? pos : neg) += 1;
      ++j;
    }
    twice_u += 2ULL * pos * neg_below + static_cast<unsigned long long>(pos) * neg;
    neg_below += neg;
    i = j;
  }
  return static_cast<double>(twice_u) / (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

ClassificationMetrics classification_metrics(const std::vector<Label>& predicted,
                                             const std::vector<Label>& truth) {
  if (predicted.size() != truth.size()) throw Error("prediction and truth differ in length");
  if (truth.empty()) throw Error("metrics need at least one item");
  ClassificationMetrics m;
  m.n = truth.size();
  for (std::size_t i = 0; i < truth.size(); ++i) ++m.confusion[index_of(truth[i])][index_of(predicted[i])];

  std::size_t correct = 0;
  for (std::size_t k = 0; k < kNumClasses; ++k) correct += m.confusion[k][k];
  const double n = static_cast<double>(m.n);
  m.accuracy = static_cast<double>(correct) / n;

  // Micro F1 from pooled counts: every error is one FP and one FN.
  const double tp = static_cast<double>(correct), err = n - tp;
  m.micro_f1 = 2.0 * tp / (2.0 * tp + 2.0 * err);

  double macro = 0.0, weighted = 0.0;
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    std::size_t support = 0, predicted_k = 0;
    for (std::size_t j = 0; j < kNumClasses; ++j) {
      support += m.confusion[k][j];
      predicted_k += m.confusion[j][k];
    }
    const double denom = static_cast<double>(support + predicted_k);
    const double f1 = denom > 0.0 ? 2.0 * static_cast<double>(m.confusion[k][k]) / denom : 0.0;
    m.per_class_f1[k] = f1;
    macro += f1;
    weighted += f1 * static_cast<double>(support);
  }
  m.macro_f1 = macro / static_cast<double>(kNumClasses);
  m.weighted_f1 = weighted / n;

  const std::size_t yes = index_of(Label::yes);
  std::size_t yes_support = 0, rest_support = 0, rest_correct = 0;
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    for (std::size_t j = 0; j < kNumClasses; ++j) {
      if (k == yes) {
        yes_support += m.confusion[k][j];
      } else {
        rest_support += m.confusion[k][j];
        if (j != yes) rest_correct += m.confusion[k][j];
      }
    }
  }
  m.sensitivity = yes_support ? static_cast<double>(m.confusion[yes][yes]) / static_cast<double>(yes_support) : 0.0;
  m.specificity = rest_support ? static_cast<double>(rest_correct) / static_cast<double>(rest_support) : 0.0;
  return m;
}

BinaryRates binary_rates(const std::vector<bool>& predicted, const std::vector<bool>& truth) {
  if (predicted.size() != truth.size()) throw Error("prediction and truth differ in length");
  std::size_t tp = 0, pos = 0, tn = 0, neg = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i]) {
      ++pos;
      tp += predicted[i];
    } else {
      ++neg;
      tn += !predicted[i];
    }
  }
  return {pos ? static_cast<double>(tp) / static_cast<double>(pos) : 0.0,
          neg ? static_cast<double>(tn) / static_cast<double>(neg) : 0.0};
}

nlohmann::json to_json(const ClassificationMetrics& m) {
  return {{"n", m.n},
          {"accuracy", m.accuracy},
          {"sensitivity", m.sensitivity},
          {"specificity", m.specificity},
          {"micro_f1", m.micro_f1},
          {"macro_f1", m.macro_f1},
          {"weighted_f1", m.weighted_f1},
          {"per_class_f1", m.per_class_f1},
          {"confusion_matrix", m.confusion}};
}

nlohmann::json to_json(const HoldoutReport& r) {
  return {{"model", r.model_name},
          {"n", r.n},
          {"auc", r.auc},
          {"decision_threshold", r.decision_threshold},
          {"accuracy", r.argmax.accuracy},
          {"sensitivity", r.thresholded.sensitivity},
          {"specificity", r.thresholded.specificity},
          {"micro_f1", r.argmax.micro_f1},
          {"macro_f1", r.argmax.macro_f1},
          {"weighted_f1", r.argmax.weighted_f1},
          {"three_class", to_json(r.argmax)}};
}

std::string format_report_table(const HoldoutReport& r) {
  char line[256];
  std::string out;
  std::snprintf(line, sizeof(line), "%-10s %6s %9s %12s %12s %9s %9s %12s\n", "Model", "AUC",
                "Accuracy", "Sensitivity", "Specificity", "Micro F1", "Macro F1", "Weighted F1");
  out += line;
  std::snprintf(line, sizeof(line), "%-10s %6.3f %9.3f %12.3f %12.3f %9.3f %9.3f %12.3f\n",
                r.model_name.c_str(), r.auc, r.argmax.accuracy, r.thresholded.sensitivity,
                r.thresholded.specificity, r.argmax.micro_f1, r.argmax.macro_f1,
                r.argmax.weighted_f1);
  out += line;
  out += "\nConfusion matrix (rows = truth, columns = prediction)\n";
  std::snprintf(line, sizeof(line), "%-10s %8s %8s %8s\n", "", "Yes", "No", "Neither");
  out += line;
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    std::snprintf(line, sizeof(line), "%-10s %8zu %8zu %8zu\n",
                  std::string(to_string(kAllLabels[k])).c_str(), r.argmax.confusion[k][0],
                  r.argmax.confusion[k][1], r.argmax.confusion[k][2]);
    out += line;
  }
  return out;
}

}  // namespace ciphen
