#include "ciphen/protocol.hpp"

#include <cmath>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "ciphen/artifact.hpp"
#include "ciphen/labels.hpp"

namespace ciphen {

namespace {

std::optional<std::string> check_distribution(const ClassDistribution& p) {
  double sum = 0.0;
  for (double v : p) {
    if (!std::isfinite(v) || v < 0.0) return "probabilities must be finite and non-negative";
    sum += v;
  }
  if (std::abs(sum - 1.0) > kProbabilityTolerance) return "probabilities do not sum to 1";
  return std::nullopt;
}

}  // namespace

std::string serialize_request(const ScoreRequest& request) {
  return nlohmann::json{{"id", request.id}, {"text", request.text}}.dump();
}

ScoreRequest parse_request(std::string_view line) {
  const auto j = nlohmann::json::parse(line, nullptr, false);
  if (!j.is_object() || !j.contains("id") || !j["id"].is_string() || !j.contains("text") ||
      !j["text"].is_string()) {
    throw ProtocolError("malformed request line");
  }
  return {j["id"].get<std::string>(), j["text"].get<std::string>()};
}

std::string serialize_response(const ScoreResponse& response) {
  nlohmann::json j{{"id", response.id}};
  if (response.probs) {
    j["probs"] = *response.probs;
  } else {
    j["error"] = response.error;
  }
  return j.dump();
}

ScoreResponse parse_response(std::string_view line) {
  const auto j = nlohmann::json::parse(line, nullptr, false);
  if (!j.is_object() || !j.contains("id") || !j["id"].is_string()) {
    throw ProtocolError("response line without a string id");
  }
  ScoreResponse r;
  r.id = j["id"].get<std::string>();
  if (j.contains("probs")) {
    const auto& p = j["probs"];
    if (!p.is_array() || p.size() != kNumClasses ||
        !std::all_of(p.begin(), p.end(), [](const auto& v) { return v.is_number(); })) {
      r.error = "probs must be an array of three numbers";
      return r;
    }
    r.probs = p.get<ClassDistribution>();
  } else if (j.contains("error") && j["error"].is_string()) {
    r.error = j["error"].get<std::string>();
  } else {
    r.error = "response has neither probs nor error";
  }
  return r;
}

std::string serialize_requests(const std::vector<ScoreRequest>& requests) {
  std::string out;
  for (const auto& r : requests) {
    out += serialize_request(r);
    out += '\n';
  }
  return out;
}

PairingResult pair_responses(const std::vector<ScoreRequest>& requests,
                             std::string_view response_stream) {
  PairingResult result;
  std::unordered_map<std::string, std::size_t> index;
  result.items.reserve(requests.size());
  for (std::size_t i = 0; i < requests.size(); ++i) {
    index.emplace(requests[i].id, i);
    result.items.push_back({requests[i].id, std::nullopt, ""});
  }
  std::vector<bool> seen(requests.size(), false);

  for (const auto& line : split_lines(response_stream)) {
    if (trim(line).empty()) continue;
    ScoreResponse r;
    try {
      r = parse_response(line);
    } catch (const ProtocolError&) {
      ++result.unattributed_lines;
      continue;
    }
    auto it = index.find(r.id);
    if (it == index.end()) {
      ++result.unattributed_lines;
      continue;
    }
    ScoredItem& item = result.items[it->second];
    if (seen[it->second]) {
      item.probs.reset();
      item.error = "duplicate response";
      continue;
    }
    seen[it->second] = true;
    if (!r.probs) {
      item.error = r.error.empty() ? "scorer reported an error" : r.error;
    } else if (auto problem = check_distribution(*r.probs)) {
      item.error = *problem;
    } else {
      item.probs = r.probs;
    }
  }
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (!seen[i]) result.items[i].error = "no response";
  }
  return result;
}

std::vector<ScoreRequest> to_requests(const std::vector<Sequence>& sequences) {
  std::vector<ScoreRequest> out;
  out.reserve(sequences.size());
  for (const auto& s : sequences) out.push_back({s.sequence_id, s.text});
  return out;
}

std::vector<ScoredItem> score_with_internal(const ModelArtifact& artifact,
                                            const std::vector<ScoreRequest>& requests) {
  std::vector<ScoredItem> out;
  if (requests.empty()) return out;
  std::vector<std::string> texts;
  texts.reserve(requests.size());
  for (const auto& r : requests) texts.push_back(r.text);
  const Eigen::MatrixXd p = predict_proba(artifact.model, artifact.tfidf.transform_selected(texts));
  out.reserve(requests.size());
  for (std::size_t i = 0; i < requests.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    out.push_back({requests[i].id, ClassDistribution{p(row, 0), p(row, 1), p(row, 2)}, ""});
  }
  return out;
}

}  // namespace ciphen
