#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "ciphen/util.hpp"
#include "ciphen/cross_validation.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace ciphen;

namespace {

// Yes documents lean on a few cue words; the rest use others.
std::vector<LabeledDoc> labeled_docs(std::uint64_t seed, std::size_t patients) {
  std::mt19937_64 rng(seed);
  std::vector<LabeledDoc> docs;
  static const std::vector<std::string> yes_cues{"dementia", "loss", "impaired", "forgetful"};
  static const std::vector<std::string> no_cues{"intact", "normal", "grossly", "limits"};
  for (std::size_t p = 0; p < patients; ++p) {
    const std::size_t k = 1 + rng() % 3;
    for (std::size_t j = 0; j < k; ++j) {
      LabeledDoc d;
      d.id = "S" + std::to_string(docs.size());
      d.patient_id = "P" + std::to_string(p);
      d.label = kAllLabels[rng() % 3];
      d.text = testing_support::random_text(rng, 5);
      const auto& cues = d.label == Label::yes ? yes_cues : no_cues;
      if (rng() % 10 < 8) d.text += " " + cues[rng() % cues.size()];
      if (rng() % 10 == 0) d.text += " only" + std::to_string(docs.size());
      docs.push_back(std::move(d));
    }
  }
  return docs;
}

CvPlan small_plan() {
  CvPlan plan;
  plan.folds = 5;
  plan.lambda_grid = {0.3, 0.03, 0.003};
  plan.corr_grid = {0.0, 0.1};
  plan.seed = 9;
  return plan;
}

}  // namespace

TEST(Grids, Defaults) {
  const auto g = default_lambda_grid();
  ASSERT_EQ(g.size(), 10u);
  EXPECT_DOUBLE_EQ(g.front(), 10.0);
  EXPECT_NEAR(g.back(), 1e-4, 1e-18);
  for (std::size_t i = 1; i < g.size(); ++i) EXPECT_NEAR(std::log10(g[i - 1] / g[i]), 5.0 / 9.0, 1e-12);
  EXPECT_EQ(default_corr_grid(), (std::vector<double>{0.0, 0.05, 0.1, 0.15, 0.2}));
  EXPECT_EQ(parse_auc_mode("binary_merged"), AucMode::binary_merged);
  EXPECT_THROW(parse_auc_mode("ovr"), Error);
}

TEST(Folds, PatientGroupedBalancedDeterministic) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const auto docs = labeled_docs(rng(), 20 + rng() % 80);
    const std::size_t folds = 2 + rng() % 9;
    const auto f = assign_folds(docs, folds, 3);
    EXPECT_EQ(f, assign_folds(docs, folds, 3));
    std::map<std::string, std::size_t> fold_of_patient;
    std::vector<std::size_t> load(folds, 0);
    for (std::size_t i = 0; i < docs.size(); ++i) {
      ASSERT_LT(f[i], folds);
      const auto [it, inserted] = fold_of_patient.emplace(docs[i].patient_id, f[i]);
      EXPECT_EQ(it->second, f[i]);
      ++load[f[i]];
    }
    // No patient has more than three documents.
    EXPECT_LE(*std::max_element(load.begin(), load.end()) - *std::min_element(load.begin(), load.end()), 3u);
  }
  EXPECT_THROW(assign_folds(labeled_docs(1, 3), 5, 0), Error);
  EXPECT_THROW(assign_folds(labeled_docs(1, 30), 1, 0), Error);
}

TEST(TrainingLabels, BinaryMergedFoldsNeitherIntoNo) {
  const std::vector<LabeledDoc> docs{{"a", "p", "", Label::yes}, {"b", "p", "", Label::neither}, {"c", "p", "", Label::no}};
  EXPECT_EQ(training_labels(docs, AucMode::binary_merged), (std::vector<Label>{Label::yes, Label::no, Label::no}));
  EXPECT_EQ(training_labels(docs, AucMode::yes_vs_rest), (std::vector<Label>{Label::yes, Label::neither, Label::no}));
}

TEST(CrossValidate, TableShapeAndBestCell) {
  const auto docs = labeled_docs(5, 80);
  const CvResult r = cross_validate(docs, {}, small_plan());
  ASSERT_EQ(r.table.size(), 6u);
  EXPECT_EQ(r.table[1].lambda, 0.03);
  EXPECT_EQ(r.table[4].corr_threshold, 0.1);
  for (const auto& c : r.table) EXPECT_LE(c.mean_auc, r.best_cell().mean_auc);
  EXPECT_GT(r.best_cell().mean_auc, 0.8);
  // Out-of-fold scores recompute the best cell's fold AUCs.
  std::size_t used = 0;
  for (std::size_t f = 0; f < 5; ++f) {
    if (r.skipped_fold[f]) continue;
    std::vector<double> s;
    std::vector<bool> pos;
    for (std::size_t i = 0; i < docs.size(); ++i) {
      if (r.fold_of[i] != f) continue;
      s.push_back(r.oof_scores[i]);
      pos.push_back(docs[i].label == Label::yes);
    }
    EXPECT_NEAR(oracle::auc_pairs(s, pos), r.best_cell().fold_auc[used], 1e-12);
    ++used;
  }
}

TEST(CrossValidate, Deterministic) {
  const auto docs = labeled_docs(6, 60);
  CvPlan plan = small_plan();
  const CvResult a = cross_validate(docs, {}, plan);
  plan.workers = 3;
  const CvResult b = cross_validate(docs, {}, plan);
  ASSERT_EQ(a.table.size(), b.table.size());
  for (std::size_t i = 0; i < a.table.size(); ++i) {
    EXPECT_EQ(to_json(a.table[i]).dump(), to_json(b.table[i]).dump());
  }
  EXPECT_EQ(a.best, b.best);
}

TEST(CrossValidate, NonzeroCountShrinksWithLambda) {
  const auto docs = labeled_docs(7, 80);
  CvPlan plan = small_plan();
  plan.lambda_grid = {1.0, 0.3, 0.1, 0.03, 0.01, 0.003, 0.001};
  const CvResult r = cross_validate(docs, {}, plan);
  const std::size_t L = plan.lambda_grid.size();
  for (std::size_t ci = 0; ci < plan.corr_grid.size(); ++ci) {
    for (std::size_t li = 1; li < L; ++li) {
      EXPECT_LE(r.table[ci * L + li - 1].mean_nonzero, r.table[ci * L + li].mean_nonzero)
          << "corr " << plan.corr_grid[ci] << " lambda " << plan.lambda_grid[li];
    }
  }
  EXPECT_EQ(r.table[0].mean_nonzero, 0.0);
}

// Each fold's vocabulary comes from its training documents only.
TEST(CrossValidate, NoVocabularyLeakage) {
  const auto docs = labeled_docs(8, 60);
  CvPlan plan = small_plan();
  plan.keep_fold_vocabularies = true;
  const CvResult r = cross_validate(docs, {}, plan);
  ASSERT_EQ(r.fold_vocabularies.size(), plan.folds);
  std::size_t checked = 0;
  for (std::size_t f = 0; f < plan.folds; ++f) {
    if (r.skipped_fold[f]) continue;
    std::set<std::string> expected;
    for (std::size_t i = 0; i < docs.size(); ++i) {
      if (r.fold_of[i] == f) continue;
      for (const auto& t : oracle::tokens(docs[i].text)) expected.insert(t);
    }
    EXPECT_EQ(r.fold_vocabularies[f], std::vector<std::string>(expected.begin(), expected.end()));
    ++checked;
  }
  EXPECT_GT(checked, 0u);
}

TEST(CrossValidate, SkipsFoldsWithoutYes) {
  std::vector<LabeledDoc> docs;
  for (int p = 0; p < 10; ++p) {
    docs.push_back({"S" + std::to_string(p), "P" + std::to_string(p), p < 2 ? "dementia loss" : "intact normal",
                    p < 2 ? Label::yes : Label::no});
  }
  CvPlan plan = small_plan();
  const CvResult r = cross_validate(docs, {}, plan);
  const auto skipped = std::count(r.skipped_fold.begin(), r.skipped_fold.end(), true);
  EXPECT_GE(skipped, 3);
  EXPECT_EQ(r.warnings.size(), static_cast<std::size_t>(skipped));
  for (std::size_t i = 0; i < docs.size(); ++i) EXPECT_EQ(std::isnan(r.oof_scores[i]), static_cast<bool>(r.skipped_fold[r.fold_of[i]]));
}
