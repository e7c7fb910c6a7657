#include "ciphen/tfidf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "ciphen/util.hpp"

namespace ciphen {

namespace {

bool is_token_byte(unsigned char c) { return is_ascii_alnum(c) || c >= 0x80; }

}  // namespace

std::vector<std::string> tokenize(std::string_view text, const TokenizerConfig& config) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!is_token_byte(static_cast<unsigned char>(text[i]))) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && is_token_byte(static_cast<unsigned char>(text[j]))) ++j;
    if (j - i >= config.min_length) {
      std::string token(text.substr(i, j - i));
      if (config.lowercase) token = ascii_lower(token);
      tokens.push_back(std::move(token));
    }
    i = j;
  }
  return tokens;
}

TermCounts count_terms(std::string_view text, const TokenizerConfig& config) {
  std::vector<std::string> tokens = tokenize(text, config);
  std::sort(tokens.begin(), tokens.end());
  TermCounts counts;
  for (auto& t : tokens) {
    if (!counts.empty() && counts.back().first == t) {
      ++counts.back().second;
    } else {
      counts.emplace_back(std::move(t), 1);
    }
  }
  return counts;
}

TfidfModel TfidfModel::fit(const std::vector<std::string>& documents,
                           const TokenizerConfig& config) {
  std::vector<TermCounts> counts;
  counts.reserve(documents.size());
  for (const auto& d : documents) counts.push_back(count_terms(d, config));
  std::vector<const TermCounts*> ptrs;
  for (const auto& c : counts) ptrs.push_back(&c);
  return fit_counts(ptrs, config);
}

TfidfModel TfidfModel::fit_counts(const std::vector<const TermCounts*>& documents,
                                  const TokenizerConfig& config) {
  if (documents.empty()) throw Error("TF-IDF needs at least one document");
  std::map<std::string, std::size_t> df;
  for (const TermCounts* doc : documents) {
    for (const auto& [token, count] : *doc) ++df[token];
  }
  if (df.empty()) throw Error("TF-IDF vocabulary is empty: no document contains a token");

  TfidfModel model;
  model.config_ = config;
  model.vocabulary_.reserve(df.size());
  model.idf_.resize(static_cast<Eigen::Index>(df.size()));
  const double n = static_cast<double>(documents.size());
  Eigen::Index col = 0;
  for (const auto& [token, count] : df) {
    model.vocabulary_.push_back(token);
    model.idf_(col++) = std::log((1.0 + n) / (1.0 + static_cast<double>(count))) + 1.0;
  }
  model.build_index();
  return model;
}

void TfidfModel::build_index() {
  index_.clear();
  index_.reserve(vocabulary_.size());
  for (std::size_t i = 0; i < vocabulary_.size(); ++i) index_.emplace(vocabulary_[i], i);
}

std::optional<std::size_t> TfidfModel::column_of(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

SparseMatrix TfidfModel::transform(const std::vector<std::string>& documents) const {
  std::vector<TermCounts> counts;
  counts.reserve(documents.size());
  for (const auto& d : documents) counts.push_back(count_terms(d, config_));
  std::vector<const TermCounts*> ptrs;
  for (const auto& c : counts) ptrs.push_back(&c);
  return transform_counts(ptrs);
}

SparseMatrix TfidfModel::transform_counts(const std::vector<const TermCounts*>& documents) const {
  std::vector<Eigen::Triplet<double>> triplets;
  std::vector<std::pair<std::size_t, double>> row;
  for (std::size_t r = 0; r < documents.size(); ++r) {
    row.clear();
    double norm2 = 0.0;
    for (const auto& [token, count] : *documents[r]) {
      auto it = index_.find(token);
      if (it == index_.end()) continue;
      const double v = static_cast<double>(count) * idf_(static_cast<Eigen::Index>(it->second));
      row.emplace_back(it->second, v);
      norm2 += v * v;
    }
    const double inv = norm2 > 0.0 ? 1.0 / std::sqrt(norm2) : 0.0;
    for (const auto& [c, v] : row) {
      triplets.emplace_back(static_cast<int>(r), static_cast<int>(c), v * inv);
    }
  }
  SparseMatrix X(static_cast<Eigen::Index>(documents.size()),
                 static_cast<Eigen::Index>(vocabulary_.size()));
  X.setFromTriplets(triplets.begin(), triplets.end());
  return X;
}

SparseMatrix TfidfModel::transform_selected(const std::vector<std::string>& documents) const {
  std::vector<std::size_t> columns;
  columns.reserve(selected_.size());
  for (const auto& s : selected_) columns.push_back(s.column);
  return select_columns(transform(documents), columns);
}

void TfidfModel::set_selection(std::vector<SelectedFeature> selected, double threshold) {
  for (const auto& s : selected) {
    if (s.column >= vocabulary_.size()) throw Error("selected column outside the vocabulary");
  }
  selected_ = std::move(selected);
  threshold_ = threshold;
}

nlohmann::json TfidfModel::to_json() const {
  nlohmann::json selected = nlohmann::json::array();
  for (const auto& s : selected_) selected.push_back({{"column", s.column}, {"r", s.correlation}});
  return {{"tokenizer", {{"lowercase", config_.lowercase}, {"min_length", config_.min_length}}},
          {"vocabulary", vocabulary_},
          {"idf", std::vector<double>(idf_.data(), idf_.data() + idf_.size())},
          {"selection_threshold", threshold_},
          {"selected", selected}};
}

TfidfModel TfidfModel::from_json(const nlohmann::json& j) {
  TfidfModel model;
  model.config_.lowercase = j.at("tokenizer").at("lowercase").get<bool>();
  model.config_.min_length = j.at("tokenizer").at("min_length").get<std::size_t>();
  model.vocabulary_ = j.at("vocabulary").get<std::vector<std::string>>();
  const auto idf = j.at("idf").get<std::vector<double>>();
  if (idf.size() != model.vocabulary_.size()) throw Error("idf length does not match vocabulary");
  if (!std::is_sorted(model.vocabulary_.begin(), model.vocabulary_.end())) {
    throw Error("vocabulary is not sorted");
  }
  model.idf_ = Eigen::Map<const Eigen::VectorXd>(idf.data(), static_cast<Eigen::Index>(idf.size()));
  model.build_index();
  std::vector<SelectedFeature> selected;
  for (const auto& s : j.at("selected")) {
    selected.push_back({s.at("column").get<std::size_t>(), s.at("r").get<double>()});
  }
  model.set_selection(std::move(selected), j.at("selection_threshold").get<double>());
  return model;
}

SparseMatrix select_columns(const SparseMatrix& X, const std::vector<std::size_t>& columns) {
  std::vector<Eigen::Index> target(static_cast<std::size_t>(X.cols()), -1);
  for (std::size_t k = 0; k < columns.size(); ++k) {
    if (columns[k] >= target.size()) throw Error("column index out of range");
    target[columns[k]] = static_cast<Eigen::Index>(k);
  }
  std::vector<Eigen::Triplet<double>> triplets;
  for (Eigen::Index r = 0; r < X.outerSize(); ++r) {
    for (SparseMatrix::InnerIterator it(X, r); it; ++it) {
      const Eigen::Index c = target[static_cast<std::size_t>(it.col())];
      if (c >= 0) triplets.emplace_back(static_cast<int>(r), static_cast<int>(c), it.value());
    }
  }
  SparseMatrix out(X.rows(), static_cast<Eigen::Index>(columns.size()));
  out.setFromTriplets(triplets.begin(), triplets.end());
  return out;
}

Eigen::VectorXd binarize_yes(const std::vector<Label>& labels) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(labels.size()));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    y(static_cast<Eigen::Index>(i)) = labels[i] == Label::yes ? 1.0 : 0.0;
  }
  return y;
}

Eigen::VectorXd pearson_correlations(const SparseMatrix& X, const Eigen::VectorXd& y) {
  if (y.size() != X.rows()) throw Error("label vector length does not match matrix rows");
  if (y.size() < 2 || (y.array() == y(0)).all()) {
    throw Error("all labels are identical; correlation is undefined");
  }
  const Eigen::Index n = X.rows();
  const double dn = static_cast<double>(n);
  const Eigen::VectorXd yc = y.array() - y.mean();
  const double syy = yc.squaredNorm();

  const Eigen::SparseMatrix<double, Eigen::ColMajor> Xc = X;
  Eigen::VectorXd r(X.cols());
  for (Eigen::Index j = 0; j < Xc.outerSize(); ++j) {
    Eigen::Index nnz = 0;
    double sum = 0.0;
    bool all_equal = true;
    double first = 0.0;
    for (decltype(Xc)::InnerIterator it(Xc, j); it; ++it) {
      if (nnz == 0) first = it.value();
      all_equal = all_equal && it.value() == first;
      sum += it.value();
      ++nnz;
    }
    if (nnz == 0 || (nnz == n && all_equal)) {
      r(j) = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    // Centred sums; implicit zeros contribute (0 - mean)^2 each.
    const double mean = sum / dn;
    double sxx = static_cast<double>(n - nnz) * mean * mean;
    double sxy = 0.0;
    for (decltype(Xc)::InnerIterator it(Xc, j); it; ++it) {
      const double d = it.value() - mean;
      sxx += d * d;
      sxy += it.value() * yc(it.row());
    }
    r(j) = sxy / std::sqrt(sxx * syy);
  }
  return r;
}

std::vector<SelectedFeature> select_by_threshold(const Eigen::VectorXd& correlations,
                                                 double threshold) {
  std::vector<SelectedFeature> out;
  for (Eigen::Index j = 0; j < correlations.size(); ++j) {
    const double r = correlations(j);
    if (std::isnan(r) || std::abs(r) < threshold) continue;
    out.push_back({static_cast<std::size_t>(j), r});
  }
  return out;
}

std::vector<std::pair<std::string, double>> feature_report(const TfidfModel& model,
                                                           std::size_t top_k) {
  std::vector<std::pair<std::string, double>> rows;
  for (const auto& s : model.selected()) rows.emplace_back(model.vocabulary()[s.column], s.correlation);
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    const double fa = std::abs(a.second), fb = std::abs(b.second);
    return fa != fb ? fa > fb : a.first < b.first;
  });
  if (rows.size() > top_k) rows.resize(top_k);
  return rows;
}

}  // namespace ciphen
