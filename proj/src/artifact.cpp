#include "ciphen/artifact.hpp"

#include <system_error>

#include "ciphen/util.hpp"

namespace ciphen {

nlohmann::json ModelArtifact::to_json() const {
  nlohmann::json table = nlohmann::json::array();
  for (const auto& c : cv_table) table.push_back(ciphen::to_json(c));
  return {{"format", kModelFormat},
          {"tool_version", kToolVersion},
          {"config_hash", config_hash},
          {"sequences_config_hash", sequences_config_hash},
          {"seed", seed},
          {"auc_mode", to_string(auc_mode)},
          {"tfidf", tfidf.to_json()},
          {"model", model.to_json()},
          {"cv", {{"table", table}, {"best", cv_best}}},
          {"split", {{"train", train_ids}, {"test", test_ids}}},
          {"warnings", warnings}};
}

ModelArtifact ModelArtifact::from_json(const nlohmann::json& j) {
  if (j.value("format", "") != kModelFormat) throw Error("not a model artifact");
  ModelArtifact a;
  a.config_hash = j.at("config_hash").get<std::string>();
  a.sequences_config_hash = j.at("sequences_config_hash").get<std::string>();
  a.seed = j.at("seed").get<std::uint64_t>();
  a.auc_mode = parse_auc_mode(j.at("auc_mode").get<std::string>());
  a.tfidf = TfidfModel::from_json(j.at("tfidf"));
  a.model = LinearModel::from_json(j.at("model"));
  if (static_cast<std::size_t>(a.model.features()) != a.tfidf.selected().size()) {
    throw Error("model weights do not match the selected TF-IDF features");
  }
  for (const auto& c : j.at("cv").at("table")) {
    CvCell cell;
    cell.lambda = c.at("lambda").get<double>();
    cell.corr_threshold = c.at("corr_threshold").get<double>();
    cell.mean_auc = c.at("mean_auc").get<double>();
    cell.mean_nonzero = c.at("mean_nonzero").get<double>();
    cell.mean_features = c.at("mean_features").get<double>();
    cell.fold_auc = c.at("fold_auc").get<std::vector<double>>();
    a.cv_table.push_back(std::move(cell));
  }
  a.cv_best = j.at("cv").at("best").get<std::size_t>();
  a.train_ids = j.at("split").at("train").get<std::vector<std::string>>();
  a.test_ids = j.at("split").at("test").get<std::vector<std::string>>();
  a.warnings = j.value("warnings", std::vector<std::string>{});
  return a;
}

void save_artifact(const std::filesystem::path& path, const ModelArtifact& artifact) {
  write_file(path, artifact.to_json().dump(1) + "\n");
}

ModelArtifact load_artifact(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  try {
    return ModelArtifact::from_json(nlohmann::json::parse(text));
  } catch (const nlohmann::json::exception& e) {
    throw Error("invalid model artifact " + path.string() + ": " + e.what());
  }
}

void write_manifest(const std::filesystem::path& artifact, const std::string& stage,
                    const std::vector<ManifestInput>& inputs, std::uint64_t seed,
                    const std::string& config_hash, const nlohmann::json& extra) {
  nlohmann::json in = nlohmann::json::array();
  for (const auto& i : inputs) {
    std::error_code ec;
    const bool exists = std::filesystem::exists(i.path, ec);
    in.push_back({{"role", i.role},
                  {"path", i.path.string()},
                  {"fnv1a64", exists ? hex64(fnv1a64(read_file(i.path))) : ""}});
  }
  nlohmann::json m{{"stage", stage},
                   {"artifact", artifact.filename().string()},
                   {"artifact_fnv1a64", hex64(fnv1a64(read_file(artifact)))},
                   {"inputs", in},
                   {"seed", seed},
                   {"config_hash", config_hash},
                   {"tool_version", kToolVersion},
                   {"eigen_version", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                         std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                         std::to_string(EIGEN_MINOR_VERSION)}};
  if (!extra.is_null()) m["extra"] = extra;
  std::filesystem::path out = artifact;
  out += ".manifest.json";
  write_file(out, m.dump(1) + "\n");
}

}  // namespace ciphen
