#include <cmath>
#include <map>
#include <random>

#include <gtest/gtest.h>

#include "ciphen/util.hpp"
#include "ciphen/aggregation.hpp"

using namespace ciphen;

namespace {

struct Cohort {
  std::vector<PatientRecord> patients;
  std::vector<SequencePrediction> predictions;
};

Cohort random_cohort(std::mt19937_64& rng, std::size_t n) {
  Cohort c;
  static const std::array<Apoe, 4> alleles{Apoe::e2, Apoe::e3, Apoe::e4, Apoe::unknown};
  for (std::size_t i = 0; i < n; ++i) {
    const std::string id = "P" + std::to_string(i);
    c.patients.push_back({id, 60.0 + static_cast<double>(rng() % 30), Gender::other, alleles[rng() % 4], rng() % 3 == 0});
    const std::size_t seqs = rng() % 14;
    for (std::size_t s = 0; s < seqs; ++s) {
      c.predictions.push_back({id + "_" + std::to_string(s), id, kAllLabels[rng() % 3]});
    }
  }
  return c;
}

}  // namespace

TEST(Aggregate, CountsAndThreshold) {
  const std::vector<PatientRecord> patients{{"A", 70, Gender::male, Apoe::e3, true},
                                            {"B", 71, Gender::female, Apoe::e4, false},
                                            {"C", 72, Gender::female, Apoe::e2, false}};
  const std::vector<SequencePrediction> preds{{"1", "A", Label::yes}, {"2", "A", Label::yes},
                                              {"3", "A", Label::no}, {"4", "B", Label::yes}};
  const auto a = aggregate_patients(preds, patients, {2, false});
  ASSERT_EQ(a.size(), 3u);
  EXPECT_EQ(a[0], (PatientAssignment{"A", 2, 3, true}));
  EXPECT_EQ(a[1], (PatientAssignment{"B", 1, 1, false}));
  EXPECT_EQ(a[2], (PatientAssignment{"C", 0, 0, false}));
  EXPECT_FALSE(aggregate_patients(preds, patients, {2, true})[0].assigned_yes);
  EXPECT_THROW(aggregate_patients(preds, patients, {0, false}), Error);
  EXPECT_THROW(aggregate_patients({{"9", "Z", Label::yes}}, patients, {1, false}), Error);
}

TEST(Aggregate, YesSetShrinksAsThresholdGrows) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const Cohort c = random_cohort(rng, 50);
    for (bool strict : {false, true}) {
      for (std::size_t t = 1; t < 12; ++t) {
        const auto lo = aggregate_patients(c.predictions, c.patients, {t, strict});
        const auto hi = aggregate_patients(c.predictions, c.patients, {t + 1, strict});
        for (std::size_t i = 0; i < lo.size(); ++i) EXPECT_TRUE(!hi[i].assigned_yes || lo[i].assigned_yes);
      }
    }
  }
}

// Recomputes every threshold's score from the raw predictions.
TEST(TuneThreshold, EqualsExhaustiveRecomputation) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const Cohort c = random_cohort(rng, 60);
    const auto tuning = tune_threshold(c.predictions, c.patients);
    std::map<std::string, std::size_t> yes_count;
    for (const auto& p : c.predictions) yes_count[p.patient_id] += p.predicted == Label::yes;

    double best_score = INFINITY;
    std::size_t best_t = 0;
    ASSERT_EQ(tuning.table.size(), 10u);
    for (std::size_t t = 1; t <= 10; ++t) {
      double score = 0.0;
      for (Apoe a : {Apoe::e2, Apoe::e3, Apoe::e4}) {
        double n = 0, yes = 0, flagged = 0;
        for (const auto& p : c.patients) {
          if (p.apoe != a) continue;
          n += 1;
          yes += yes_count[p.patient_id] >= t;
          flagged += p.med_icd_flag;
        }
        if (n > 0) score += std::abs(yes / n - flagged / n);
      }
      EXPECT_NEAR(tuning.table[t - 1].score, score, 1e-12);
      if (score < best_score - 1e-12) {
        best_score = score;
        best_t = t;
      }
    }
    EXPECT_EQ(tuning.table[tuning.best].threshold, best_t) << "trial " << trial;
  }
}

TEST(TuneThreshold, MissingStratumWarnsAndUnknownIgnored) {
  std::vector<PatientRecord> patients{{"A", 70, Gender::male, Apoe::e3, true},
                                      {"B", 70, Gender::male, Apoe::e3, false},
                                      {"C", 70, Gender::male, Apoe::unknown, true}};
  const std::vector<SequencePrediction> preds{{"1", "A", Label::yes}, {"2", "C", Label::yes}};
  const auto t = tune_threshold(preds, patients, 1, 3);
  EXPECT_EQ(t.strata, (std::vector<Apoe>{Apoe::e3}));
  EXPECT_EQ(t.warnings.size(), 2u);
  EXPECT_EQ(t.table[0].score, 0.0);
  EXPECT_EQ(t.table[t.best].threshold, 1u);
  patients = {{"C", 70, Gender::male, Apoe::unknown, true}};
  EXPECT_THROW(tune_threshold({}, patients), Error);
  EXPECT_THROW(tune_threshold({}, patients, 3, 2), Error);
}

TEST(CompareToCodes, FractionsSumToOne) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const Cohort c = random_cohort(rng, 40);
    const auto assignments = aggregate_patients(c.predictions, c.patients, {1 + rng() % 4, false});
    const auto cmp = compare_to_codes(assignments, c.patients);
    std::size_t total = 0;
    for (const auto& row : cmp.rows) {
      EXPECT_NEAR(row.yes_fraction + row.no_fraction, 1.0, 1e-15);
      total += row.count;
    }
    EXPECT_EQ(total, c.patients.size());
    std::size_t discovery = 0;
    for (std::size_t i = 0; i < c.patients.size(); ++i) discovery += assignments[i].assigned_yes && !c.patients[i].med_icd_flag;
    EXPECT_EQ(cmp.discovery.size(), discovery);
  }
}

TEST(CompareToCodes, TableMentionsAlleles) {
  const std::vector<PatientRecord> patients{{"A", 70, Gender::male, Apoe::e4, true}};
  const auto cmp = compare_to_codes({{"A", 3, 3, true}}, patients);
  ASSERT_EQ(cmp.rows.size(), 1u);
  EXPECT_EQ(cmp.rows[0].yes_fraction, 1.0);
  EXPECT_NE(format_comparison_table(cmp).find("e4"), std::string::npos);
  EXPECT_TRUE(cmp.discovery.empty());
}
