#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "ciphen/annotation.hpp"
#include "ciphen/corpus.hpp"

namespace httplib {
class Server;
}

namespace ciphen {

/// JSON API over an AnnotationStore. Mutations are serialized behind a
/// writer lock; reads share a reader lock and see a consistent state.
///
///   GET    /api/next           next unlabeled sequence (entropy order when
///                              probabilities are loaded, id order otherwise)
///   POST   /api/label          {sequence_id, label, annotator_id, overwrite?}
///   POST   /api/patterns       {regex, label, author}
///   GET    /api/patterns       patterns with labels, authors, match counts
///   DELETE /api/patterns/{id}  retire a pattern
///   GET    /api/progress       counts per class x provenance
class AnnotationService {
 public:
  struct Response {
    int status = 200;
    nlohmann::json body;
  };

  explicit AnnotationService(std::vector<Sequence> sequences);

  // Replays an existing log and appends every new event to `log_path`.
  void attach_log(const std::filesystem::path& log_path);
  void set_clock(AnnotationStore::Clock clock);
  void set_probabilities(const std::map<std::string, ClassDistribution>& probs);

  Response handle(const std::string& method, const std::string& path, const std::string& body);

  // Registers the routes on an httplib server.
  void mount(httplib::Server& server);

  // Snapshot of the store's log, taken under the reader lock.
  std::string serialize_log() const;

 private:
  Response next() const;
  Response label(const nlohmann::json& body);
  Response add_pattern(const nlohmann::json& body);
  Response list_patterns() const;
  Response retire(const std::string& pattern_id);
  Response progress() const;

  mutable std::shared_mutex mutex_;
  std::vector<Sequence> sequences_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::size_t> id_order_;
  AnnotationStore store_;
  std::vector<std::string> ranking_;  // entropy order, empty if no probabilities
  std::optional<std::filesystem::path> log_path_;
};

}  // namespace ciphen
