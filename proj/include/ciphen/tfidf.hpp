#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <nlohmann/json.hpp>

#include "ciphen/labels.hpp"

namespace ciphen {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct TokenizerConfig {
  bool lowercase = true;
  std::size_t min_length = 2;

  bool operator==(const TokenizerConfig&) const = default;
};

// Tokens are maximal runs of ASCII letters and digits; bytes >= 0x80 count
// as letters so UTF-8 words stay whole.
std::vector<std::string> tokenize(std::string_view text, const TokenizerConfig& config = {});

// Sorted (token, count) pairs for one document.
using TermCounts = std::vector<std::pair<std::string, std::uint32_t>>;
TermCounts count_terms(std::string_view text, const TokenizerConfig& config = {});

struct SelectedFeature {
  std::size_t column = 0;
  double correlation = 0.0;
};

/// Vocabulary + smoothed idf, fitted once:
///   tf = raw count, idf = ln((1 + N) / (1 + df)) + 1, rows L2-normalised.
/// Columns follow the lexicographically sorted vocabulary.
class TfidfModel {
 public:
  static TfidfModel fit(const std::vector<std::string>& documents,
                        const TokenizerConfig& config = {});
  static TfidfModel fit_counts(const std::vector<const TermCounts*>& documents,
                               const TokenizerConfig& config = {});

  SparseMatrix transform(const std::vector<std::string>& documents) const;
  SparseMatrix transform_counts(const std::vector<const TermCounts*>& documents) const;

  // Same rows restricted to the selected columns, in selection order. Rows
  // are normalised over the full vocabulary before the restriction.
  SparseMatrix transform_selected(const std::vector<std::string>& documents) const;

  std::size_t size() const { return vocabulary_.size(); }
  const std::vector<std::string>& vocabulary() const { return vocabulary_; }
  const Eigen::VectorXd& idf() const { return idf_; }
  const TokenizerConfig& tokenizer() const { return config_; }
  std::optional<std::size_t> column_of(std::string_view token) const;

  void set_selection(std::vector<SelectedFeature> selected, double threshold);
  const std::vector<SelectedFeature>& selected() const { return selected_; }
  double selection_threshold() const { return threshold_; }

  nlohmann::json to_json() const;
  static TfidfModel from_json(const nlohmann::json& j);

 private:
  void build_index();

  TokenizerConfig config_;
  std::vector<std::string> vocabulary_;
  Eigen::VectorXd idf_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<SelectedFeature> selected_;
  double threshold_ = 0.0;
};

// Keeps only `columns` of X, in the given order.
SparseMatrix select_columns(const SparseMatrix& X, const std::vector<std::size_t>& columns);

// Yes -> 1, No / Neither -> 0.
Eigen::VectorXd binarize_yes(const std::vector<Label>& labels);

// Pearson r of every column of X with y. Constant columns yield NaN.
// Throws Error if y is constant.
Eigen::VectorXd pearson_correlations(const SparseMatrix& X, const Eigen::VectorXd& y);

// Non-constant columns with |r| >= threshold, in column order.
std::vector<SelectedFeature> select_by_threshold(const Eigen::VectorXd& correlations,
                                                 double threshold);

inline std::vector<SelectedFeature> pearson_select(const SparseMatrix& X, const Eigen::VectorXd& y,
                                                   double threshold) {
  return select_by_threshold(pearson_correlations(X, y), threshold);
}

// Top-k selected tokens by |r| descending, ties by token.
std::vector<std::pair<std::string, double>> feature_report(const TfidfModel& model,
                                                           std::size_t top_k = 20);

}  // namespace ciphen
