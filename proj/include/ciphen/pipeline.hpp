#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ciphen/aggregation.hpp"
#include "ciphen/annotation.hpp"
#include "ciphen/artifact.hpp"
#include "ciphen/cross_validation.hpp"
#include "ciphen/metrics.hpp"
#include "ciphen/protocol.hpp"
#include "ciphen/synth.hpp"

namespace ciphen {

struct TrainConfig {
  std::uint64_t seed = 1;
  double train_fraction = 0.9;
  TokenizerConfig tokenizer;
  CvPlan cv;  // cv.seed is derived from `seed`
};

std::string train_config_hash(const TrainConfig& config, const std::string& sequences_config_hash);

struct TrainOutcome {
  ModelArtifact artifact;
  CvResult cv;
  Split split;
  std::vector<std::string> warnings;
};

/// Split, cross-validate, tune the decision threshold on out-of-fold
/// scores and refit on the whole train side.
TrainOutcome train_pipeline(const AnnotationStore& store, const std::string& sequences_config_hash,
                            const TrainConfig& config);

// Labeled documents for the given ids; throws if an id is unannotated.
std::vector<LabeledDoc> labeled_docs(const AnnotationStore& store,
                                     const std::vector<std::string>& ids);

/// Labeled JSONL exports for external models. Validation is one
/// patient-grouped fold of the train split; test is the holdout side.
/// Record: {"id", "label", "patient_id", "provenance", "text"}.
struct SplitExport {
  std::string train;
  std::string val;
  std::string test;
};

SplitExport export_split(const AnnotationStore& store, const Split& split, std::size_t val_folds,
                         std::uint64_t seed);

// Yes if p_yes >= threshold, otherwise the likelier of No and Neither.
Label decide(const ClassDistribution& p, double threshold);
Label argmax_label(const ClassDistribution& p);

HoldoutReport build_report(const std::vector<ClassDistribution>& probs,
                           const std::vector<Label>& truth, double threshold, AucMode mode);

// Scores the artifact's test ids with its own model.
HoldoutReport evaluate_holdout(const ModelArtifact& artifact, const AnnotationStore& store);

/// Synthetic annotation session: manual gold labels for the sequences of a
/// random subset of patients, then always patterns propagated over every
/// sequence. Timestamps come from a deterministic clock.
struct AnnotationSimulation {
  double manual_patient_fraction = 0.4;
  bool add_patterns = true;
};

struct SimulatedPattern {
  std::string regex;
  Label label;
};
const std::vector<SimulatedPattern>& synthetic_patterns();

std::string simulate_annotation_log(const std::vector<Sequence>& sequences,
                                    const std::map<std::string, Label>& gold,
                                    const AnnotationSimulation& config, std::uint64_t seed);

nlohmann::json prediction_record(const ScoredItem& item, const std::string& patient_id,
                                 double threshold);

}  // namespace ciphen
