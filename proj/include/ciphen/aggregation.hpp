#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ciphen/corpus.hpp"
#include "ciphen/labels.hpp"

namespace ciphen {

struct SequencePrediction {
  std::string sequence_id;
  std::string patient_id;
  Label predicted = Label::neither;
};

struct PatientAssignment {
  std::string patient_id;
  std::size_t positive_sequence_count = 0;
  std::size_t total_sequence_count = 0;
  bool assigned_yes = false;

  bool operator==(const PatientAssignment&) const = default;
};

struct AggregationRule {
  std::size_t threshold = 2;
  bool strict = false;  // count > t instead of count >= t

  bool is_yes(std::size_t count) const { return strict ? count > threshold : count >= threshold; }
};

// One assignment per patient in the table, in patient-table order. Patients
// without sequences are No/Ntr.
std::vector<PatientAssignment> aggregate_patients(const std::vector<SequencePrediction>& predictions,
                                                  const std::vector<PatientRecord>& patients,
                                                  const AggregationRule& rule);

struct ThresholdRow {
  std::size_t threshold = 0;
  std::vector<double> predicted_fraction;  // per stratum
  double score = 0.0;
};

struct ThresholdTuning {
  std::size_t best = 0;
  std::vector<Apoe> strata;        // allele strata that have patients
  std::vector<double> med_icd_fraction;  // per stratum
  std::vector<ThresholdRow> table;
  std::vector<std::string> warnings;
};

// Scans t in [t_min, t_max], scoring sum over e2/e3/e4 strata of
// |predicted Yes fraction - Med/ICD fraction|; ties go to the smaller t.
ThresholdTuning tune_threshold(const std::vector<SequencePrediction>& predictions,
                               const std::vector<PatientRecord>& patients, std::size_t t_min = 1,
                               std::size_t t_max = 10, bool strict = false);

struct AlleleRow {
  Apoe apoe = Apoe::unknown;
  std::size_t count = 0;
  double yes_fraction = 0.0;
  double no_fraction = 0.0;
  double med_icd_fraction = 0.0;
};

struct CodeComparison {
  std::vector<AlleleRow> rows;  // e2, e3, e4, unknown; empty strata omitted
  std::vector<std::string> discovery;  // assigned Yes without the Med/ICD flag
};

CodeComparison compare_to_codes(const std::vector<PatientAssignment>& assignments,
                                const std::vector<PatientRecord>& patients);

nlohmann::json to_json(const PatientAssignment& a);
nlohmann::json to_json(const ThresholdTuning& t);
nlohmann::json to_json(const CodeComparison& c);
std::string format_comparison_table(const CodeComparison& c);

}  // namespace ciphen
