#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include "test_support.hpp"

using testing_support::quote;
using testing_support::run;
using nlohmann::json;

namespace {

const std::string kCli = CIPHEN_CLI;
const std::string kStub = CIPHEN_STUB;

class CliPipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new testing_support::TempDir("cli");
    const auto d = dir_->path();
    ASSERT_EQ(run(kCli + " synth --n-patients 200 --seed 3 --out " + quote(d)).exit_code, 0);
    ASSERT_EQ(run(kCli + " extract --patients " + quote(d / "patients.jsonl") + " --notes " + quote(d / "notes.jsonl") +
                  " --out " + quote(d / "sequences.jsonl") + " --report " + quote(d / "keywords.json"))
                  .exit_code,
              0);
    const auto train = run(kCli + " train --sequences " + quote(d / "sequences.jsonl") + " --annotations " +
                           quote(d / "annotations.jsonl") + " --out " + quote(d / "model.json") +
                           " --folds 3 --lambda-grid 0.1,0.01,0.001 --corr-grid 0,0.1 --seed 3 --export-dir " +
                           quote(d / "export"));
    ASSERT_EQ(train.exit_code, 0) << train.err;
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }
  static std::filesystem::path at(const std::string& name) { return dir_->path() / name; }
  static std::string files() {
    return " --sequences " + quote(at("sequences.jsonl")) + " --annotations " + quote(at("annotations.jsonl"));
  }

  static testing_support::TempDir* dir_;
};

testing_support::TempDir* CliPipeline::dir_ = nullptr;

}  // namespace

TEST_F(CliPipeline, StagesWriteManifests) {
  for (const char* f : {"patients.jsonl", "notes.jsonl", "annotations.jsonl", "sequences.jsonl", "model.json"}) {
    EXPECT_TRUE(std::filesystem::exists(at(std::string(f) + ".manifest.json"))) << f;
  }
  const json m = json::parse(ciphen::read_file(at("model.json.manifest.json")));
  EXPECT_EQ(m["stage"], "train");
  EXPECT_EQ(m["seed"], 3);
  const json kw = json::parse(ciphen::read_file(at("keywords.json")));
  EXPECT_FALSE(kw.empty());
}

TEST_F(CliPipeline, EvaluateWritesReportAndTable) {
  const auto r = run(kCli + " evaluate --model " + quote(at("model.json")) + files() + " --out " +
                     quote(at("report.json")) + " --table " + quote(at("report.txt")));
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_NE(r.out.find("TF-IDF"), std::string::npos);
  const json j = json::parse(ciphen::read_file(at("report.json")));
  EXPECT_GT(j["auc"].get<double>(), 0.8);
  EXPECT_EQ(ciphen::read_file(at("report.txt")), r.out);
}

TEST_F(CliPipeline, PredictAggregateCompare) {
  auto r = run(kCli + " predict --model " + quote(at("model.json")) + " --sequences " + quote(at("sequences.jsonl")) +
               " --out " + quote(at("pred.jsonl")));
  ASSERT_EQ(r.exit_code, 0) << r.err;
  r = run(kCli + " aggregate --predictions " + quote(at("pred.jsonl")) + " --patients " + quote(at("patients.jsonl")) +
          " --tune --threshold-range 1..5 --tuning-out " + quote(at("tuning.json")) + " --out " +
          quote(at("assign.jsonl")));
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_NE(r.out.find("tuned patient threshold"), std::string::npos);
  EXPECT_EQ(json::parse(ciphen::read_file(at("tuning.json")))["table"].size(), 5u);
  r = run(kCli + " compare --assignments " + quote(at("assign.jsonl")) + " --patients " + quote(at("patients.jsonl")) +
          " --out " + quote(at("compare.json")));
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const json c = json::parse(ciphen::read_file(at("compare.json")));
  for (const auto& row : c["rows"]) {
    EXPECT_NEAR(row["yes"].get<double>() + row["no_ntr"].get<double>(), 1.0, 1e-12);
  }
}

TEST_F(CliPipeline, PredictWithExternalStub) {
  const auto r = run(kCli + " predict --sequences " + quote(at("sequences.jsonl")) + " --external-cmd " +
                     quote(kStub + " --mode keyword") + " --out " + quote(at("ext.jsonl")));
  ASSERT_EQ(r.exit_code, 0) << r.err;
  std::size_t records = 0;
  for (const auto& line : ciphen::split_lines(ciphen::read_file(at("ext.jsonl")))) {
    if (ciphen::trim(line).empty()) continue;
    const json j = json::parse(line);
    if (j.contains("_meta")) continue;
    EXPECT_TRUE(j.contains("probs"));
    ++records;
  }
  EXPECT_GT(records, 0u);
  const auto fail = run(kCli + " predict --sequences " + quote(at("sequences.jsonl")) + " --external-cmd " +
                        quote(kStub + " --exit-code 4") + " --out " + quote(at("ext2.jsonl")));
  EXPECT_EQ(fail.exit_code, 1);
}

TEST_F(CliPipeline, TrainWritesSplitExports) {
  const json model = json::parse(ciphen::read_file(at("model.json")));
  std::size_t train_lines = 0, test_lines = 0;
  for (const char* name : {"train.jsonl", "val.jsonl"}) {
    for (const auto& line : ciphen::split_lines(ciphen::read_file(at("export") / name))) {
      if (ciphen::trim(line).empty()) continue;
      const json j = json::parse(line);
      for (const char* key : {"id", "patient_id", "text", "label", "provenance"}) EXPECT_TRUE(j.contains(key)) << key;
      ++train_lines;
    }
    EXPECT_TRUE(std::filesystem::exists(at("export") / (std::string(name) + ".manifest.json")));
  }
  for (const auto& line : ciphen::split_lines(ciphen::read_file(at("export") / "test.jsonl"))) {
    test_lines += !ciphen::trim(line).empty();
  }
  EXPECT_EQ(train_lines, model["split"]["train"].size());
  EXPECT_EQ(test_lines, model["split"]["test"].size());
}

TEST_F(CliPipeline, ReportListsFeatures) {
  const auto r = run(kCli + " report --model " + quote(at("model.json")) + " --sequences " + quote(at("sequences.jsonl")));
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_FALSE(r.out.empty());
}

TEST_F(CliPipeline, MismatchedSequencesNeedForce) {
  const auto d = dir_->path();
  ASSERT_EQ(run(kCli + " extract --patients " + quote(d / "patients.jsonl") + " --notes " + quote(d / "notes.jsonl") +
                " --window 300 --out " + quote(d / "seq300.jsonl"))
                .exit_code,
            0);
  const std::string cmd = kCli + " predict --model " + quote(at("model.json")) + " --sequences " +
                          quote(d / "seq300.jsonl") + " --out " + quote(d / "p300.jsonl");
  const auto r = run(cmd);
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_NE(r.err.find("--force"), std::string::npos);
  EXPECT_EQ(run(cmd + " --force").exit_code, 0);
}

TEST(Cli, MissingInputAndUsageErrors) {
  testing_support::TempDir tmp("cli_err");
  auto r = run(kCli + " extract --patients /nonexistent/p.jsonl --notes /nonexistent/n.jsonl --out " +
               quote(tmp / "s.jsonl"));
  EXPECT_EQ(r.exit_code, 2);
  const json e = json::parse(r.err);
  EXPECT_EQ(e["error"]["kind"], "missing_input");
  EXPECT_EQ(e["error"]["stage"], "extract");
  EXPECT_EQ(run(kCli + " train --sequences x").exit_code, 2);
  EXPECT_EQ(run(kCli + " synth --n-patients 0 --out " + quote(tmp.path())).exit_code, 2);
  EXPECT_EQ(run(kCli + " --help").exit_code, 0);
}

TEST(Cli, SynthIsByteReproducible) {
  testing_support::TempDir a("synth_a"), b("synth_b");
  ASSERT_EQ(run(kCli + " synth --n-patients 50 --seed 9 --out " + quote(a.path())).exit_code, 0);
  ASSERT_EQ(run(kCli + " synth --n-patients 50 --seed 9 --out " + quote(b.path())).exit_code, 0);
  for (const char* f : {"patients.jsonl", "notes.jsonl", "gold.jsonl", "annotations.jsonl", "notes.jsonl.manifest.json"}) {
    EXPECT_EQ(ciphen::read_file(a / f), ciphen::read_file(b / f)) << f;
  }
}
