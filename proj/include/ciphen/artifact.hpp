#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ciphen/cross_validation.hpp"
#include "ciphen/linear_model.hpp"
#include "ciphen/tfidf.hpp"

namespace ciphen {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr const char* kModelFormat = "ciphen-model/1";

/// Everything needed to score new sequences and to audit how the model was
/// chosen: TF-IDF model with its selection, the linear model with its tuned
/// decision threshold, the CV table and the train/test split.
struct ModelArtifact {
  std::string config_hash;
  std::string sequences_config_hash;
  std::uint64_t seed = 0;
  AucMode auc_mode = AucMode::yes_vs_rest;
  TfidfModel tfidf;
  LinearModel model;
  std::vector<CvCell> cv_table;
  std::size_t cv_best = 0;
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
  std::vector<std::string> warnings;

  nlohmann::json to_json() const;
  static ModelArtifact from_json(const nlohmann::json& j);
};

void save_artifact(const std::filesystem::path& path, const ModelArtifact& artifact);
// Throws MissingInputError if the file is absent, Error if it is invalid.
ModelArtifact load_artifact(const std::filesystem::path& path);

struct ManifestInput {
  std::string role;
  std::filesystem::path path;
};

// Writes <artifact>.manifest.json recording the stage, input files with
// content hashes, seed, config hash and tool version.
void write_manifest(const std::filesystem::path& artifact, const std::string& stage,
                    const std::vector<ManifestInput>& inputs, std::uint64_t seed,
                    const std::string& config_hash, const nlohmann::json& extra = {});

}  // namespace ciphen
