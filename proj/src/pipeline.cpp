#include "ciphen/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "ciphen/util.hpp"

namespace ciphen {

std::string train_config_hash(const TrainConfig& config, const std::string& sequences_config_hash) {
  const nlohmann::json j{{"seed", config.seed},
                         {"train_fraction", config.train_fraction},
                         {"tokenizer", {config.tokenizer.lowercase, config.tokenizer.min_length}},
                         {"folds", config.cv.folds},
                         {"lambda_grid", config.cv.lambda_grid},
                         {"corr_grid", config.cv.corr_grid},
                         {"auc_mode", to_string(config.cv.auc_mode)},
                         {"tolerance", config.cv.fit.tolerance},
                         {"max_iterations", config.cv.fit.max_iterations},
                         {"sequences", sequences_config_hash}};
  return hex64(fnv1a64(j.dump()));
}

std::vector<LabeledDoc> labeled_docs(const AnnotationStore& store,
                                     const std::vector<std::string>& ids) {
  std::vector<LabeledDoc> docs;
  docs.reserve(ids.size());
  for (const auto& id : ids) {
    const SequenceRef* seq = store.find_sequence(id);
    const Annotation* a = store.find(id);
    if (seq == nullptr) throw NotFoundError("unknown sequence: " + id);
    if (a == nullptr) throw Error("sequence is not annotated: " + id);
    docs.push_back({id, seq->patient_id, seq->text, a->label});
  }
  return docs;
}

namespace {

std::string export_line(const AnnotationStore& store, const std::string& id) {
  const SequenceRef* seq = store.find_sequence(id);
  const Annotation* a = store.find(id);
  if (seq == nullptr) throw NotFoundError("unknown sequence: " + id);
  if (a == nullptr) throw Error("sequence is not annotated: " + id);
  const char* provenance = a->provenance.kind == ProvenanceKind::manual ? "manual" : "always_pattern";
  return nlohmann::json{{"id", id},
                        {"patient_id", seq->patient_id},
                        {"text", seq->text},
                        {"label", to_string(a->label)},
                        {"provenance", provenance}}
             .dump() +
         "\n";
}

}  // namespace

SplitExport export_split(const AnnotationStore& store, const Split& split, std::size_t val_folds,
                         std::uint64_t seed) {
  SplitExport out;
  const std::vector<LabeledDoc> docs = labeled_docs(store, split.train);
  std::set<std::string> patients;
  for (const auto& d : docs) patients.insert(d.patient_id);
  std::vector<std::size_t> fold(docs.size(), 1);
  if (patients.size() >= 2) fold = assign_folds(docs, std::clamp<std::size_t>(val_folds, 2, patients.size()), seed);
  for (std::size_t i = 0; i < docs.size(); ++i) {
    (fold[i] == 0 ? out.val : out.train) += export_line(store, docs[i].id);
  }
  for (const auto& id : split.test) out.test += export_line(store, id);
  return out;
}

TrainOutcome train_pipeline(const AnnotationStore& store, const std::string& sequences_config_hash,
                            const TrainConfig& config) {
  TrainOutcome out;
  out.split = stratified_split(store, config.train_fraction, derive_seed(config.seed, "split"));
  out.warnings = out.split.warnings;
  if (out.split.train.empty()) throw Error("no annotated sequences to train on");

  const std::vector<LabeledDoc> docs = labeled_docs(store, out.split.train);
  CvPlan plan = config.cv;
  plan.seed = derive_seed(config.seed, "cv");
  out.cv = cross_validate(docs, config.tokenizer, plan);
  out.warnings.insert(out.warnings.end(), out.cv.warnings.begin(), out.cv.warnings.end());
  const CvCell& best = out.cv.best_cell();

  std::vector<double> oof;
  std::vector<bool> positive;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    if (std::isnan(out.cv.oof_scores[i])) continue;
    oof.push_back(out.cv.oof_scores[i]);
    positive.push_back(docs[i].label == Label::yes);
  }
  const double threshold = tune_decision_threshold(oof, positive).threshold;

  std::vector<std::string> texts;
  std::vector<Label> truth;
  for (const auto& d : docs) {
    texts.push_back(d.text);
    truth.push_back(d.label);
  }
  TfidfModel tfidf = TfidfModel::fit(texts, config.tokenizer);
  const SparseMatrix X = tfidf.transform(texts);
  tfidf.set_selection(pearson_select(X, binarize_yes(truth), best.corr_threshold),
                      best.corr_threshold);
  std::vector<std::size_t> columns;
  for (const auto& s : tfidf.selected()) columns.push_back(s.column);
  FitResult fitted = fit(select_columns(X, columns), training_labels(docs, config.cv.auc_mode),
                         best.lambda, config.cv.fit);
  if (!fitted.converged) {
    out.warnings.push_back("final fit stopped at the iteration cap without converging");
  }

  ModelArtifact& a = out.artifact;
  a.config_hash = train_config_hash(config, sequences_config_hash);
  a.sequences_config_hash = sequences_config_hash;
  a.seed = config.seed;
  a.auc_mode = config.cv.auc_mode;
  a.tfidf = std::move(tfidf);
  a.model = std::move(fitted.model);
  a.model.decision_threshold = threshold;
  a.cv_table = out.cv.table;
  a.cv_best = out.cv.best;
  a.train_ids = out.split.train;
  a.test_ids = out.split.test;
  a.warnings = out.warnings;
  return out;
}

Label argmax_label(const ClassDistribution& p) {
  return kAllLabels[static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin())];
}

Label decide(const ClassDistribution& p, double threshold) {
  if (p[index_of(Label::yes)] >= threshold) return Label::yes;
  return p[index_of(Label::neither)] > p[index_of(Label::no)] ? Label::neither : Label::no;
}

HoldoutReport build_report(const std::vector<ClassDistribution>& probs,
                           const std::vector<Label>& truth, double threshold, AucMode mode) {
  if (probs.empty()) throw Error("cannot evaluate an empty test set");
  if (probs.size() != truth.size()) throw Error("scores and truth differ in length");
  HoldoutReport r;
  r.n = probs.size();
  r.decision_threshold = threshold;
  std::vector<double> yes_scores;
  std::vector<bool> is_yes, said_yes;
  std::vector<Label> predicted, reference;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    yes_scores.push_back(probs[i][index_of(Label::yes)]);
    is_yes.push_back(truth[i] == Label::yes);
    said_yes.push_back(yes_scores.back() >= threshold);
    predicted.push_back(argmax_label(probs[i]));
    reference.push_back(mode == AucMode::binary_merged && truth[i] != Label::yes ? Label::no
                                                                                  : truth[i]);
  }
  r.auc = roc_auc(yes_scores, is_yes);
  r.argmax = classification_metrics(predicted, reference);
  r.thresholded = binary_rates(said_yes, is_yes);
  return r;
}

HoldoutReport evaluate_holdout(const ModelArtifact& artifact, const AnnotationStore& store) {
  const std::vector<LabeledDoc> docs = labeled_docs(store, artifact.test_ids);
  if (docs.empty()) throw Error("the held-out test set is empty");
  std::vector<ScoreRequest> requests;
  std::vector<Label> truth;
  for (const auto& d : docs) {
    requests.push_back({d.id, d.text});
    truth.push_back(d.label);
  }
  std::vector<ClassDistribution> probs;
  for (const auto& item : score_with_internal(artifact, requests)) probs.push_back(*item.probs);
  return build_report(probs, truth, artifact.model.decision_threshold, artifact.auc_mode);
}

const std::vector<SimulatedPattern>& synthetic_patterns() {
  static const std::vector<SimulatedPattern> patterns = {
      {"grossly intact", Label::no},
      {"within normal limits", Label::no},
      {"information sheet on the", Label::neither},
      {"caregiver for (wife|husband)", Label::neither},
      {"0/3 recall", Label::yes},
  };
  return patterns;
}

std::string simulate_annotation_log(const std::vector<Sequence>& sequences,
                                    const std::map<std::string, Label>& gold,
                                    const AnnotationSimulation& config, std::uint64_t seed) {
  AnnotationStore store(to_refs(sequences));
  std::size_t tick = 0;
  store.set_clock([&tick] {
    char buf[32];
    const std::size_t s = tick++;
    std::snprintf(buf, sizeof(buf), "2024-01-01T%02zu:%02zu:%02zuZ", (s / 3600) % 24, (s / 60) % 60,
                  s % 60);
    return std::string(buf);
  });

  std::set<std::string> patients;
  for (const auto& s : sequences) patients.insert(s.patient_id);
  std::vector<std::string> order(patients.begin(), patients.end());
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_manual = static_cast<std::size_t>(
      std::llround(config.manual_patient_fraction * static_cast<double>(order.size())));
  const std::set<std::string> manual(order.begin(),
                                     order.begin() + static_cast<std::ptrdiff_t>(std::min(n_manual, order.size())));

  for (const auto& s : sequences) {
    if (!manual.contains(s.patient_id)) continue;
    auto it = gold.find(s.sequence_id);
    if (it != gold.end()) store.annotate(s.sequence_id, it->second, "expert1");
  }
  if (config.add_patterns) {
    for (const auto& p : synthetic_patterns()) store.add_always_pattern(p.regex, p.label, "expert1");
  }
  return store.serialize_log();
}

nlohmann::json prediction_record(const ScoredItem& item, const std::string& patient_id,
                                 double threshold) {
  nlohmann::json j{{"sequence_id", item.id}, {"patient_id", patient_id}};
  if (item.ok()) {
    j["probs"] = *item.probs;
    j["predicted"] = std::string(to_string(decide(*item.probs, threshold)));
  } else {
    j["error"] = item.error;
  }
  return j;
}

}  // namespace ciphen
