#pragma once

#include <chrono>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ciphen/annotation.hpp"
#include "ciphen/corpus.hpp"
#include "ciphen/util.hpp"

namespace ciphen {

struct ModelArtifact;

/// Batch scoring wire protocol (see docs/protocol.md).
///
/// Request line:  {"id": "<sequence id>", "text": "<window text>"}
/// Response line: {"id": "<sequence id>", "probs": [p_yes, p_no, p_neither]}
///            or  {"id": "<sequence id>", "error": "<message>"}
/// One JSON object per line, UTF-8, '\n' terminated.
struct ScoreRequest {
  std::string id;
  std::string text;

  bool operator==(const ScoreRequest&) const = default;
};

struct ScoreResponse {
  std::string id;
  std::optional<ClassDistribution> probs;
  std::string error;

  bool operator==(const ScoreResponse&) const = default;
};

class ProtocolError : public Error {
 public:
  using Error::Error;
};

// Whole-batch failure: transport error, timeout or scorer exit status.
class BatchError : public Error {
 public:
  using Error::Error;
};

inline constexpr double kProbabilityTolerance = 1e-3;

std::string serialize_request(const ScoreRequest& request);
ScoreRequest parse_request(std::string_view line);
std::string serialize_response(const ScoreResponse& response);
// Throws ProtocolError when the line is not a response object.
ScoreResponse parse_response(std::string_view line);

std::string serialize_requests(const std::vector<ScoreRequest>& requests);

/// Per-sequence result, in request order.
struct ScoredItem {
  std::string id;
  std::optional<ClassDistribution> probs;
  std::string error;

  bool ok() const { return probs.has_value(); }
};

struct PairingResult {
  std::vector<ScoredItem> items;
  std::size_t unattributed_lines = 0;  // lines that carried no usable id
};

// Matches response lines to requests by id. Missing, duplicate or invalid
// responses become item errors; the rest of the batch is unaffected.
PairingResult pair_responses(const std::vector<ScoreRequest>& requests,
                             std::string_view response_stream);

std::vector<ScoreRequest> to_requests(const std::vector<Sequence>& sequences);

std::vector<ScoredItem> score_with_internal(const ModelArtifact& artifact,
                                            const std::vector<ScoreRequest>& requests);

struct ExternalEndpoint {
  std::string command;   // stdio mode: run through /bin/sh -c
  std::string http_url;  // http mode: http://host:port, POST /score
  std::chrono::milliseconds timeout{120000};
};

PairingResult score_with_external(const ExternalEndpoint& endpoint,
                                  const std::vector<ScoreRequest>& requests);

// Runs `command` with `input` on stdin and returns its stdout. Throws
// BatchError on timeout, spawn failure or nonzero exit.
std::string run_process(const std::string& command, std::string_view input,
                        std::chrono::milliseconds timeout);

}  // namespace ciphen
