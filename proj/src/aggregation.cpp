#include "ciphen/aggregation.hpp"

#include <cmath>
#include <cstdio>
#include <unordered_map>

#include "ciphen/util.hpp"

namespace ciphen {

namespace {

constexpr std::array<Apoe, 3> kAlleles{Apoe::e2, Apoe::e3, Apoe::e4};

// Per-patient (positive, total) counts in patient-table order.
std::vector<std::pair<std::size_t, std::size_t>> count_by_patient(
    const std::vector<SequencePrediction>& predictions, const std::vector<PatientRecord>& patients) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < patients.size(); ++i) index.emplace(patients[i].patient_id, i);
  std::vector<std::pair<std::size_t, std::size_t>> counts(patients.size(), {0, 0});
  for (const auto& p : predictions) {
    auto it = index.find(p.patient_id);
    if (it == index.end()) throw Error("prediction for unknown patient: " + p.patient_id);
    ++counts[it->second].second;
    if (p.predicted == Label::yes) ++counts[it->second].first;
  }
  return counts;
}

}  // namespace

std::vector<PatientAssignment> aggregate_patients(const std::vector<SequencePrediction>& predictions,
                                                  const std::vector<PatientRecord>& patients,
                                                  const AggregationRule& rule) {
  if (rule.threshold < 1) throw Error("patient threshold must be >= 1");
  const auto counts = count_by_patient(predictions, patients);
  std::vector<PatientAssignment> out;
  out.reserve(patients.size());
  for (std::size_t i = 0; i < patients.size(); ++i) {
    out.push_back({patients[i].patient_id, counts[i].first, counts[i].second,
                   rule.is_yes(counts[i].first)});
  }
  return out;
}

ThresholdTuning tune_threshold(const std::vector<SequencePrediction>& predictions,
                               const std::vector<PatientRecord>& patients, std::size_t t_min,
                               std::size_t t_max, bool strict) {
  if (t_min < 1 || t_min > t_max) throw Error("threshold range must satisfy 1 <= min <= max");
  const auto counts = count_by_patient(predictions, patients);

  ThresholdTuning tuning;
  std::vector<std::vector<std::size_t>> members;
  for (Apoe a : kAlleles) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < patients.size(); ++i) {
      if (patients[i].apoe == a) rows.push_back(i);
    }
    if (rows.empty()) {
      tuning.warnings.push_back("APOE stratum " + std::string(to_string(a)) +
                                " has no patients; excluded from tuning");
      continue;
    }
    std::size_t flagged = 0;
    for (std::size_t i : rows) flagged += patients[i].med_icd_flag;
    tuning.strata.push_back(a);
    tuning.med_icd_fraction.push_back(static_cast<double>(flagged) / static_cast<double>(rows.size()));
    members.push_back(std::move(rows));
  }
  if (members.empty()) throw Error("no patient has a known APOE allele; cannot tune threshold");

  for (std::size_t t = t_min; t <= t_max; ++t) {
    const AggregationRule rule{t, strict};
    ThresholdRow row;
    row.threshold = t;
    for (std::size_t s = 0; s < members.size(); ++s) {
      std::size_t yes = 0;
      for (std::size_t i : members[s]) yes += rule.is_yes(counts[i].first);
      const double frac = static_cast<double>(yes) / static_cast<double>(members[s].size());
      row.predicted_fraction.push_back(frac);
      row.score += std::abs(frac - tuning.med_icd_fraction[s]);
    }
    if (tuning.table.empty() || row.score < tuning.table[tuning.best].score) {
      tuning.best = tuning.table.size();
    }
    tuning.table.push_back(std::move(row));
  }
  return tuning;
}

CodeComparison compare_to_codes(const std::vector<PatientAssignment>& assignments,
                                const std::vector<PatientRecord>& patients) {
  std::unordered_map<std::string, const PatientAssignment*> by_id;
  for (const auto& a : assignments) by_id.emplace(a.patient_id, &a);

  CodeComparison out;
  for (Apoe allele : {Apoe::e2, Apoe::e3, Apoe::e4, Apoe::unknown}) {
    AlleleRow row;
    row.apoe = allele;
    std::size_t yes = 0, flagged = 0;
    for (const auto& p : patients) {
      if (p.apoe != allele) continue;
      auto it = by_id.find(p.patient_id);
      if (it == by_id.end()) throw Error("no assignment for patient " + p.patient_id);
      ++row.count;
      yes += it->second->assigned_yes;
      flagged += p.med_icd_flag;
    }
    if (row.count == 0) continue;
    const double n = static_cast<double>(row.count);
    row.yes_fraction = static_cast<double>(yes) / n;
    row.no_fraction = static_cast<double>(row.count - yes) / n;
    row.med_icd_fraction = static_cast<double>(flagged) / n;
    out.rows.push_back(row);
  }
  for (const auto& p : patients) {
    if (by_id.at(p.patient_id)->assigned_yes && !p.med_icd_flag) out.discovery.push_back(p.patient_id);
  }
  return out;
}

nlohmann::json to_json(const PatientAssignment& a) {
  return {{"patient_id", a.patient_id},
          {"positive_sequence_count", a.positive_sequence_count},
          {"total_sequence_count", a.total_sequence_count},
          {"assigned", a.assigned_yes ? "Yes" : "No/Ntr"}};
}

nlohmann::json to_json(const ThresholdTuning& t) {
  nlohmann::json strata = nlohmann::json::array();
  for (Apoe a : t.strata) strata.push_back(std::string(to_string(a)));
  nlohmann::json table = nlohmann::json::array();
  for (const auto& row : t.table) {
    table.push_back({{"threshold", row.threshold},
                     {"predicted_fraction", row.predicted_fraction},
                     {"score", row.score}});
  }
  return {{"best_threshold", t.table.at(t.best).threshold},
          {"strata", strata},
          {"med_icd_fraction", t.med_icd_fraction},
          {"table", table},
          {"warnings", t.warnings}};
}

nlohmann::json to_json(const CodeComparison& c) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : c.rows) {
    rows.push_back({{"apoe", std::string(to_string(r.apoe))},
                    {"count", r.count},
                    {"yes", r.yes_fraction},
                    {"no_ntr", r.no_fraction},
                    {"med_icd", r.med_icd_fraction}});
  }
  return {{"rows", rows}, {"discovery", c.discovery}};
}

std::string format_comparison_table(const CodeComparison& c) {
  char line[160];
  std::string out;
  std::snprintf(line, sizeof(line), "%-8s %8s %8s %8s %8s\n", "APOE", "Count", "Yes", "No/Ntr",
                "Med/ICD");
  out += line;
  for (const auto& r : c.rows) {
    std::snprintf(line, sizeof(line), "%-8s %8zu %8.2f %8.2f %8.2f\n",
                  std::string(to_string(r.apoe)).c_str(), r.count, r.yes_fraction, r.no_fraction,
                  r.med_icd_fraction);
    out += line;
  }
  std::snprintf(line, sizeof(line), "\nYes without Med/ICD indicator: %zu patients\n",
                c.discovery.size());
  out += line;
  return out;
}

}  // namespace ciphen
