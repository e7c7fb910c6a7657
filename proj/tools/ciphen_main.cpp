// ciphen: command-line entry point for every pipeline stage.

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "ciphen/aggregation.hpp"
#include "ciphen/annotation.hpp"
#include "ciphen/artifact.hpp"
#include "ciphen/corpus.hpp"
#include "ciphen/extract.hpp"
#include "ciphen/lexicon.hpp"
#include "ciphen/pipeline.hpp"
#include "ciphen/protocol.hpp"
#include "ciphen/service.hpp"
#include "ciphen/synth.hpp"

// After Eigen: resolv.h, pulled in here, defines a macro named _res.
#include <httplib.h>

namespace fs = std::filesystem;
using namespace ciphen;

namespace {

struct Common {
  std::uint64_t seed = 1;
  std::size_t workers = 1;
  bool force = false;
};

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size()) throw CLI::ValidationError("grid", "not a number: " + item);
    out.push_back(v);
  }
  if (out.empty()) throw CLI::ValidationError("grid", "grid must not be empty");
  return out;
}

std::pair<std::size_t, std::size_t> parse_range(const std::string& text) {
  const auto dots = text.find("..");
  if (dots == std::string::npos) throw CLI::ValidationError("threshold-range", "expected MIN..MAX");
  try {
    const auto lo = std::stoul(text.substr(0, dots));
    const auto hi = std::stoul(text.substr(dots + 2));
    if (lo < 1 || lo > hi) throw CLI::ValidationError("threshold-range", "need 1 <= MIN <= MAX");
    return {lo, hi};
  } catch (const std::logic_error&) {
    throw CLI::ValidationError("threshold-range", "expected MIN..MAX");
  }
}

void require_file(const std::string& path, const std::string& what) {
  if (path.empty() || !fs::exists(path)) {
    throw MissingInputError("missing input: " + what + (path.empty() ? "" : " (" + path + ")"));
  }
}

Lexicon lexicon_from(const std::string& path) {
  if (path.empty()) return default_lexicon();
  require_file(path, "lexicon");
  return load_lexicon(path);
}

AnnotationStore load_store(const SequencesFile& seqs, const std::string& annotations) {
  AnnotationStore store(to_refs(seqs.sequences));
  if (!annotations.empty()) {
    require_file(annotations, "annotations log");
    replay_log(store, read_file(annotations));
  }
  return store;
}

void check_hash(const std::string& expected, const std::string& actual, const std::string& what,
                bool force) {
  if (expected == actual) return;
  if (force) {
    std::cerr << "warning: " << what << " config hash mismatch (" << actual << " vs " << expected
              << "), continuing because --force was given\n";
    return;
  }
  throw Error(what + " was produced with config " + actual + " but the model expects " + expected +
              "; rerun the upstream stage or pass --force");
}

std::vector<std::pair<std::string, nlohmann::json>> read_records(const std::string& path) {
  std::vector<std::pair<std::string, nlohmann::json>> out;
  std::size_t line_no = 0;
  for (const auto& line : split_lines(read_file(path))) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw Error(path + ":" + std::to_string(line_no) + ": invalid JSON");
    if (j.contains("_meta")) continue;
    out.emplace_back(std::to_string(line_no), std::move(j));
  }
  return out;
}

std::vector<SequencePrediction> load_predictions(const std::string& path) {
  std::vector<SequencePrediction> out;
  for (const auto& [line, j] : read_records(path)) {
    if (!j.contains("predicted")) continue;  // errored items carry no prediction
    const auto label = parse_label(j.at("predicted").get<std::string>());
    if (!label) throw Error(path + ":" + line + ": invalid predicted label");
    out.push_back({j.at("sequence_id").get<std::string>(), j.at("patient_id").get<std::string>(), *label});
  }
  return out;
}

// ---------------------------------------------------------------------------

void run_ingest(const std::string& patients, const std::string& notes, const std::string& out_dir) {
  require_file(patients, "patients file");
  require_file(notes, "notes file");
  IngestResult r = ingest_corpus(patients, notes);
  const fs::path dir(out_dir);
  write_file(dir / "patients.jsonl", serialize_patients(r.corpus.patients()));
  write_file(dir / "notes.jsonl", serialize_notes(r.corpus.notes()));
  nlohmann::json rejected = nlohmann::json::array();
  for (const auto& issue : r.rejected) {
    rejected.push_back({{"source", issue.source}, {"line", issue.line}, {"message", issue.message}});
  }
  const nlohmann::json report{{"patients", r.corpus.patients().size()},
                              {"notes", r.corpus.notes().size()},
                              {"rejected", rejected}};
  write_file(dir / "ingest_report.json", report.dump(1) + "\n");
  std::cout << "ingested " << r.corpus.patients().size() << " patients, " << r.corpus.notes().size()
            << " notes; rejected " << r.rejected.size() << " records\n";
}

void run_extract(const std::string& patients, const std::string& notes, const std::string& lexicon_path,
                 std::size_t window, bool keep_duplicates, const std::string& out,
                 const std::string& report_path, const Common& common) {
  require_file(patients, "patients file");
  require_file(notes, "notes file");
  if (window < 1) throw Error("window must be >= 1");
  IngestResult r = ingest_corpus(patients, notes);
  for (const auto& issue : r.rejected) {
    std::cerr << "rejected " << issue.source << ":" << issue.line << ": " << issue.message << "\n";
  }
  const Lexicon lexicon = lexicon_from(lexicon_path);
  std::vector<Sequence> seqs = extract_sequences(r.corpus, lexicon, window, common.workers);
  if (!keep_duplicates) seqs = dedupe_overlapping(std::move(seqs));
  const std::string hash = extraction_config_hash(lexicon, window);
  write_file(out, serialize_sequences(seqs, hash));
  write_manifest(out, "extract", {{"patients", patients}, {"notes", notes}, {"lexicon", lexicon_path}},
                 common.seed, hash, {{"window", window}, {"dedupe", !keep_duplicates}});

  nlohmann::json counts = nlohmann::json::array();
  for (const auto& [kw, n] : extraction_report(seqs)) counts.push_back({{"keyword", kw}, {"count", n}});
  if (!report_path.empty()) write_file(report_path, counts.dump(1) + "\n");
  std::cout << "extracted " << seqs.size() << " sequences from " << r.corpus.notes().size() << " notes\n";
}

void run_synth(std::size_t n_patients, double ci_fraction, double confounder_rate, double manual_fraction,
               const std::string& out_dir, const Common& common) {
  SynthConfig config;
  config.patients = n_patients;
  config.ci_fraction = ci_fraction;
  config.confounder_rate = confounder_rate;
  const SynthCorpus synth = generate_synthetic_corpus(config, derive_seed(common.seed, "synth"));
  const fs::path dir(out_dir);
  write_file(dir / "patients.jsonl", serialize_patients(synth.corpus.patients()));
  write_file(dir / "notes.jsonl", serialize_notes(synth.corpus.notes()));

  std::string gold_lines;
  for (const auto& m : synth.planted) {
    gold_lines += nlohmann::json{{"note_id", m.note_id},
                                 {"offset", m.offset},
                                 {"keyword", m.keyword},
                                 {"label", std::string(to_string(m.label))},
                                 {"confounder", m.confounder}}
                      .dump() +
                  "\n";
  }
  write_file(dir / "gold.jsonl", gold_lines);

  const std::vector<Sequence> seqs =
      dedupe_overlapping(extract_sequences(synth.corpus, default_lexicon(), kDefaultWindow, common.workers));
  AnnotationSimulation sim;
  sim.manual_patient_fraction = manual_fraction;
  write_file(dir / "annotations.jsonl",
             simulate_annotation_log(seqs, gold_labels(synth, seqs), sim,
                                     derive_seed(common.seed, "annotate")));
  const nlohmann::json params{{"patients", n_patients},
                              {"ci_fraction", ci_fraction},
                              {"confounder_rate", confounder_rate},
                              {"manual_fraction", manual_fraction}};
  const std::string hash = hex64(fnv1a64(params.dump()));
  for (const char* name : {"patients.jsonl", "notes.jsonl", "gold.jsonl", "annotations.jsonl"}) {
    write_manifest(dir / name, "synth", {}, common.seed, hash, params);
  }
  std::cout << "synthesized " << synth.corpus.patients().size() << " patients, "
            << synth.corpus.notes().size() << " notes, " << synth.planted.size()
            << " planted keyword matches\n";
}

void run_serve(const std::string& sequences, const std::string& annotations, const std::string& probs_path,
               const std::string& addr) {
  require_file(sequences, "sequences file");
  AnnotationService service(load_sequences(sequences).sequences);
  if (annotations.empty()) throw Error("--annotations is required for serve");
  service.attach_log(annotations);
  if (!probs_path.empty()) {
    require_file(probs_path, "probabilities file");
    std::map<std::string, ClassDistribution> probs;
    for (const auto& [line, j] : read_records(probs_path)) {
      if (j.contains("probs")) probs[j.at("sequence_id").get<std::string>()] = j.at("probs").get<ClassDistribution>();
    }
    service.set_probabilities(probs);
  }
  const auto colon = addr.rfind(':');
  if (colon == std::string::npos) throw Error("--serve-addr must be host:port");
  const std::string host = addr.substr(0, colon);
  const int port = std::stoi(addr.substr(colon + 1));
  httplib::Server server;
  service.mount(server);
  std::cerr << "serving annotation API on " << host << ":" << port << "\n";
  if (!server.listen(host, port)) throw Error("could not listen on " + addr);
}

void run_train(const std::string& sequences, const std::string& annotations, const std::string& out,
               double train_fraction, const std::string& lambda_grid, const std::string& corr_grid,
               std::size_t folds, const std::string& auc_mode, std::size_t max_iterations,
               const std::string& export_dir, const Common& common) {
  require_file(sequences, "sequences file");
  require_file(annotations, "annotations log");
  const SequencesFile seqs = load_sequences(sequences);
  const AnnotationStore store = load_store(seqs, annotations);

  TrainConfig config;
  config.seed = common.seed;
  config.train_fraction = train_fraction;
  if (!lambda_grid.empty()) config.cv.lambda_grid = parse_grid(lambda_grid);
  if (!corr_grid.empty()) config.cv.corr_grid = parse_grid(corr_grid);
  config.cv.folds = folds;
  config.cv.auc_mode = parse_auc_mode(auc_mode);
  config.cv.workers = common.workers;
  config.cv.fit.max_iterations = max_iterations;

  const TrainOutcome outcome = train_pipeline(store, seqs.config_hash, config);
  for (const auto& w : outcome.warnings) std::cerr << "warning: " << w << "\n";
  save_artifact(out, outcome.artifact);
  write_manifest(out, "train", {{"sequences", sequences}, {"annotations", annotations}}, common.seed,
                 outcome.artifact.config_hash);
  if (!export_dir.empty()) {
    const SplitExport ex = export_split(store, outcome.split, folds, derive_seed(common.seed, "export"));
    const std::filesystem::path dir(export_dir);
    std::filesystem::create_directories(dir);
    for (const auto& [name, body] : {std::pair{"train.jsonl", &ex.train}, {"val.jsonl", &ex.val}, {"test.jsonl", &ex.test}}) {
      write_file(dir / name, *body);
      write_manifest(dir / name, "train", {{"sequences", sequences}, {"annotations", annotations}}, common.seed,
                     outcome.artifact.config_hash);
    }
  }
  const CvCell& best = outcome.cv.best_cell();
  std::printf("train: %zu sequences, test: %zu; best lambda %.6g, corr threshold %.3g, CV AUC %.4f\n",
              outcome.split.train.size(), outcome.split.test.size(), best.lambda, best.corr_threshold,
              best.mean_auc);
}

void run_evaluate(const std::string& model, const std::string& sequences, const std::string& annotations,
                  const std::string& out, const std::string& table, const Common& common) {
  require_file(model, "model artifact");
  require_file(sequences, "sequences file");
  require_file(annotations, "annotations log");
  const ModelArtifact artifact = load_artifact(model);
  const SequencesFile seqs = load_sequences(sequences);
  check_hash(artifact.sequences_config_hash, seqs.config_hash, "sequences file", common.force);
  const AnnotationStore store = load_store(seqs, annotations);
  const HoldoutReport report = evaluate_holdout(artifact, store);
  nlohmann::json j = to_json(report);
  j["config_hash"] = artifact.config_hash;
  const std::string text = format_report_table(report);
  if (!out.empty()) {
    write_file(out, j.dump(1) + "\n");
    write_manifest(out, "evaluate", {{"model", model}, {"sequences", sequences}, {"annotations", annotations}},
                   common.seed, artifact.config_hash);
  }
  if (!table.empty()) write_file(table, text);
  std::cout << text;
}

void run_predict(const std::string& model, const std::string& sequences, const std::string& out,
                 const std::string& external_cmd, const std::string& external_url, long timeout_ms,
                 double threshold_flag, const Common& common) {
  require_file(sequences, "sequences file");
  const SequencesFile seqs = load_sequences(sequences);
  const std::vector<ScoreRequest> requests = to_requests(seqs.sequences);
  std::vector<ScoredItem> items;
  std::string config_hash;
  double threshold = threshold_flag;
  std::vector<ManifestInput> inputs{{"sequences", sequences}};
  if (!external_cmd.empty() || !external_url.empty()) {
    ExternalEndpoint endpoint{external_cmd, external_url, std::chrono::milliseconds(timeout_ms)};
    PairingResult paired = score_with_external(endpoint, requests);
    if (paired.unattributed_lines > 0) {
      std::cerr << "warning: " << paired.unattributed_lines << " response lines could not be matched\n";
    }
    items = std::move(paired.items);
    config_hash = hex64(fnv1a64("external:" + external_cmd + external_url + ":" + seqs.config_hash));
    if (!model.empty()) {
      require_file(model, "model artifact");
      if (threshold_flag < 0) threshold = load_artifact(model).model.decision_threshold;
    }
  } else {
    require_file(model, "model artifact");
    const ModelArtifact artifact = load_artifact(model);
    check_hash(artifact.sequences_config_hash, seqs.config_hash, "sequences file", common.force);
    items = score_with_internal(artifact, requests);
    config_hash = artifact.config_hash;
    if (threshold_flag < 0) threshold = artifact.model.decision_threshold;
    inputs.push_back({"model", model});
  }
  if (threshold < 0) threshold = 0.5;

  std::string lines = nlohmann::json{{"_meta", {{"kind", "predictions"}, {"config_hash", config_hash},
                                                {"decision_threshold", threshold}}}}
                          .dump() +
                      "\n";
  std::size_t errors = 0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    errors += !items[i].ok();
    lines += prediction_record(items[i], seqs.sequences[i].patient_id, threshold).dump() + "\n";
  }
  write_file(out, lines);
  write_manifest(out, "predict", inputs, common.seed, config_hash);
  std::cout << "scored " << items.size() - errors << " of " << items.size() << " sequences\n";
}

void run_aggregate(const std::string& predictions, const std::string& patients, const std::string& out,
                   std::size_t threshold, bool strict, bool tune, const std::string& range,
                   const std::string& tuning_out, const Common& common) {
  require_file(predictions, "predictions file");
  require_file(patients, "patients file");
  const auto preds = load_predictions(predictions);
  const auto table = load_patients(patients);
  if (tune) {
    const auto [lo, hi] = parse_range(range);
    const ThresholdTuning tuning = tune_threshold(preds, table, lo, hi, strict);
    for (const auto& w : tuning.warnings) std::cerr << "warning: " << w << "\n";
    threshold = tuning.table[tuning.best].threshold;
    if (!tuning_out.empty()) write_file(tuning_out, to_json(tuning).dump(1) + "\n");
    std::cout << "tuned patient threshold: " << threshold << "\n";
  }
  const auto assignments = aggregate_patients(preds, table, {threshold, strict});
  std::string lines;
  std::size_t yes = 0;
  for (const auto& a : assignments) {
    yes += a.assigned_yes;
    lines += to_json(a).dump() + "\n";
  }
  write_file(out, lines);
  write_manifest(out, "aggregate", {{"predictions", predictions}, {"patients", patients}}, common.seed,
                 hex64(fnv1a64(std::to_string(threshold) + (strict ? ">" : ">="))),
                 {{"threshold", threshold}, {"strict", strict}});
  std::cout << yes << " of " << assignments.size() << " patients assigned Yes (t = " << threshold << ")\n";
}

void run_compare(const std::string& assignments_path, const std::string& patients, const std::string& out,
                 const std::string& table_out, const Common& common) {
  require_file(assignments_path, "assignments file");
  require_file(patients, "patients file");
  std::vector<PatientAssignment> assignments;
  for (const auto& [line, j] : read_records(assignments_path)) {
    assignments.push_back({j.at("patient_id").get<std::string>(),
                           j.at("positive_sequence_count").get<std::size_t>(),
                           j.at("total_sequence_count").get<std::size_t>(),
                           j.at("assigned").get<std::string>() == "Yes"});
  }
  const CodeComparison c = compare_to_codes(assignments, load_patients(patients));
  const std::string text = format_comparison_table(c);
  if (!out.empty()) {
    write_file(out, to_json(c).dump(1) + "\n");
    write_manifest(out, "compare", {{"assignments", assignments_path}, {"patients", patients}}, common.seed,
                   hex64(fnv1a64(read_file(assignments_path))));
  }
  if (!table_out.empty()) write_file(table_out, text);
  std::cout << text;
}

void run_report(const std::string& model, const std::string& sequences, std::size_t top_k) {
  require_file(model, "model artifact");
  const ModelArtifact artifact = load_artifact(model);
  std::printf("Top %zu features by |r|\n", top_k);
  for (const auto& [token, r] : feature_report(artifact.tfidf, top_k)) {
    std::printf("  %-20s %8.4f\n", token.c_str(), r);
  }
  std::printf("\nCross-validation (mean Yes-vs-rest AUC)\n%10s %8s %10s %10s\n", "lambda", "corr", "AUC",
              "nonzero");
  for (std::size_t i = 0; i < artifact.cv_table.size(); ++i) {
    const CvCell& c = artifact.cv_table[i];
    std::printf("%10.3g %8.3g %10.4f %10.1f%s\n", c.lambda, c.corr_threshold, c.mean_auc, c.mean_nonzero,
                i == artifact.cv_best ? "  *" : "");
  }
  std::printf("\ndecision threshold on P(Yes): %.6f\n", artifact.model.decision_threshold);
  if (!sequences.empty()) {
    require_file(sequences, "sequences file");
    std::printf("\nKeyword counts\n");
    for (const auto& [kw, n] : extraction_report(load_sequences(sequences).sequences)) {
      std::printf("  %-22s %zu\n", kw.c_str(), n);
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cognitive-impairment phenotyping toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));
  Common common;
  std::string stage;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", common.seed, "Root random seed")->capture_default_str();
    sub->add_option("--workers", common.workers, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  };

  std::string patients, notes, lexicon, out, sequences, annotations, model, predictions, assignments;
  std::string table, report_path, lambda_grid, corr_grid, auc_mode = "yes_vs_rest", export_dir, external_cmd,
                                                          external_url, serve_addr = "127.0.0.1:8080",
                                                          probs, range = "1..10", tuning_out;
  std::size_t window = kDefaultWindow, n_patients = 200, folds = 10, patient_threshold = 2, top_k = 20,
              max_iterations = 20000;
  double train_fraction = 0.9, ci_fraction = 0.2, confounder_rate = 0.15, manual_fraction = 0.4,
         decision_threshold = -1.0;
  long timeout_ms = 120000;
  bool keep_duplicates = false, strict = false, tune = false;

  auto* ingest = app.add_subcommand("ingest", "Validate and normalise patients and notes");
  ingest->add_option("--patients", patients)->required();
  ingest->add_option("--notes", notes)->required();
  ingest->add_option("--out", out, "Output directory")->required();

  auto* extract = app.add_subcommand("extract", "Extract keyword-anchored sequences");
  extract->add_option("--patients", patients)->required();
  extract->add_option("--notes", notes)->required();
  extract->add_option("--lexicon", lexicon, "Lexicon override file");
  extract->add_option("--window", window)->capture_default_str();
  extract->add_flag("--keep-duplicates", keep_duplicates, "Skip identical-window deduplication");
  extract->add_option("--out", out)->required();
  extract->add_option("--report", report_path, "Per-keyword count report (JSON)");
  add_common(extract);

  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus with gold labels");
  synth->add_option("--n-patients", n_patients)->capture_default_str()->check(CLI::PositiveNumber);
  synth->add_option("--ci-fraction", ci_fraction)->capture_default_str()->check(CLI::Range(0.0, 1.0));
  synth->add_option("--confounder-rate", confounder_rate)->capture_default_str()->check(CLI::Range(0.0, 1.0));
  synth->add_option("--manual-fraction", manual_fraction, "Fraction of patients labeled by hand")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  synth->add_option("--out", out, "Output directory")->required();
  add_common(synth);

  auto* serve = app.add_subcommand("serve", "Serve the annotation API");
  serve->add_option("--sequences", sequences)->required();
  serve->add_option("--annotations", annotations, "Event log (created if absent)")->required();
  serve->add_option("--probs", probs, "Predictions file for uncertainty ranking");
  serve->add_option("--serve-addr", serve_addr)->capture_default_str();

  auto* train = app.add_subcommand("train", "Split, cross-validate and fit the sequence classifier");
  train->add_option("--sequences", sequences)->required();
  train->add_option("--annotations", annotations)->required();
  train->add_option("--out", out)->required();
  train->add_option("--train-fraction", train_fraction)->capture_default_str()->check(CLI::Range(0.0, 1.0));
  train->add_option("--lambda-grid", lambda_grid, "Comma-separated lambda values");
  train->add_option("--corr-grid", corr_grid, "Comma-separated correlation thresholds");
  train->add_option("--folds", folds)->capture_default_str()->check(CLI::Range(2, 100));
  train->add_option("--auc-mode", auc_mode)->capture_default_str()->check(
      CLI::IsMember({"yes_vs_rest", "binary_merged"}));
  train->add_option("--max-iterations", max_iterations)->capture_default_str()->check(CLI::PositiveNumber);
  train->add_option("--export-dir", export_dir, "Write train/val/test JSONL exports for external models");
  add_common(train);

  auto* evaluate = app.add_subcommand("evaluate", "Score the held-out test set");
  evaluate->add_option("--model", model);
  evaluate->add_option("--sequences", sequences)->required();
  evaluate->add_option("--annotations", annotations)->required();
  evaluate->add_option("--out", out, "Machine-readable report (JSON)");
  evaluate->add_option("--table", table, "Text table report");
  evaluate->add_flag("--force", common.force, "Accept mismatched upstream config hashes");
  add_common(evaluate);

  auto* predict = app.add_subcommand("predict", "Score sequences with the internal or an external model");
  predict->add_option("--model", model);
  predict->add_option("--sequences", sequences)->required();
  predict->add_option("--out", out)->required();
  predict->add_option("--external-cmd", external_cmd, "External scorer command (stdio protocol)");
  predict->add_option("--external-url", external_url, "External scorer base URL (HTTP protocol)");
  predict->add_option("--timeout-ms", timeout_ms)->capture_default_str()->check(CLI::PositiveNumber);
  predict->add_option("--decision-threshold", decision_threshold, "Override the Yes cutoff");
  predict->add_flag("--force", common.force, "Accept mismatched upstream config hashes");
  add_common(predict);

  auto* aggregate = app.add_subcommand("aggregate", "Roll sequence predictions up to patients");
  aggregate->add_option("--predictions", predictions)->required();
  aggregate->add_option("--patients", patients)->required();
  aggregate->add_option("--out", out)->required();
  aggregate->add_option("--patient-threshold", patient_threshold)->capture_default_str()->check(CLI::PositiveNumber);
  aggregate->add_flag("--strict", strict, "Require count > threshold instead of >=");
  aggregate->add_flag("--tune", tune, "Tune the threshold against Med/ICD prevalence by APOE");
  aggregate->add_option("--threshold-range", range)->capture_default_str();
  aggregate->add_option("--tuning-out", tuning_out, "Per-threshold tuning table (JSON)");
  add_common(aggregate);

  auto* compare = app.add_subcommand("compare", "Compare patient assignments with Med/ICD indicators");
  compare->add_option("--assignments", assignments)->required();
  compare->add_option("--patients", patients)->required();
  compare->add_option("--out", out, "Machine-readable report (JSON)");
  compare->add_option("--table", table, "Text table report");
  add_common(compare);

  auto* report = app.add_subcommand("report", "Feature, CV and keyword summary of a model");
  report->add_option("--model", model);
  report->add_option("--sequences", sequences);
  report->add_option("--top-k", top_k)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*ingest) {
      stage = "ingest";
      run_ingest(patients, notes, out);
    } else if (*extract) {
      stage = "extract";
      run_extract(patients, notes, lexicon, window, keep_duplicates, out, report_path, common);
    } else if (*synth) {
      stage = "synth";
      run_synth(n_patients, ci_fraction, confounder_rate, manual_fraction, out, common);
    } else if (*serve) {
      stage = "serve";
      run_serve(sequences, annotations, probs, serve_addr);
    } else if (*train) {
      stage = "train";
      run_train(sequences, annotations, out, train_fraction, lambda_grid, corr_grid, folds, auc_mode,
                max_iterations, export_dir, common);
    } else if (*evaluate) {
      stage = "evaluate";
      run_evaluate(model, sequences, annotations, out, table, common);
    } else if (*predict) {
      stage = "predict";
      run_predict(model, sequences, out, external_cmd, external_url, timeout_ms, decision_threshold, common);
    } else if (*aggregate) {
      stage = "aggregate";
      run_aggregate(predictions, patients, out, patient_threshold, strict, tune, range, tuning_out, common);
    } else if (*compare) {
      stage = "compare";
      run_compare(assignments, patients, out, table, common);
    } else if (*report) {
      stage = "report";
      run_report(model, sequences, top_k);
    }
  } catch (const CLI::ValidationError& e) {
    std::cerr << nlohmann::json{{"error", {{"stage", stage}, {"kind", "usage"}, {"message", e.what()}}}}.dump()
              << "\n";
    return 2;
  } catch (const MissingInputError& e) {
    std::cerr << nlohmann::json{{"error", {{"stage", stage}, {"kind", "missing_input"}, {"message", e.what()}}}}
                     .dump()
              << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << nlohmann::json{{"error", {{"stage", stage}, {"kind", "failure"}, {"message", e.what()}}}}.dump()
              << "\n";
    return 1;
  }
  return 0;
}
