#include "ciphen/service.hpp"

#include <algorithm>
#include <fstream>
#include <mutex>

#include <httplib.h>

#include "ciphen/pattern.hpp"

namespace ciphen {

namespace {

AnnotationService::Response error_response(int status, const std::string& message) {
  return {status, {{"error", message}}};
}

nlohmann::json annotation_json(const Annotation& a) {
  return {{"sequence_id", a.sequence_id},
          {"label", std::string(to_string(a.label))},
          {"provenance", a.provenance.kind == ProvenanceKind::manual ? "manual" : "always_pattern"},
          {"source_id", a.provenance.source_id},
          {"created_at", a.created_at}};
}

nlohmann::json pattern_json(const AlwaysPattern& p) {
  return {{"pattern_id", p.pattern_id}, {"regex", p.regex}, {"label", std::string(to_string(p.label))},
          {"author", p.author},         {"created_at", p.created_at}, {"retired", p.retired}};
}

Label body_label(const nlohmann::json& body) {
  if (!body.contains("label") || !body["label"].is_string()) throw Error("missing label");
  const auto label = parse_label(body["label"].get<std::string>());
  if (!label) throw Error("invalid label: " + body["label"].get<std::string>());
  return *label;
}

std::string body_string(const nlohmann::json& body, const char* key) {
  if (!body.contains(key) || !body[key].is_string()) throw Error(std::string("missing ") + key);
  return body[key].get<std::string>();
}

}  // namespace

AnnotationService::AnnotationService(std::vector<Sequence> sequences)
    : sequences_(std::move(sequences)), store_(to_refs(sequences_)) {
  for (std::size_t i = 0; i < sequences_.size(); ++i) {
    index_.emplace(sequences_[i].sequence_id, i);
    id_order_.push_back(i);
  }
  std::sort(id_order_.begin(), id_order_.end(), [this](std::size_t a, std::size_t b) {
    return sequences_[a].sequence_id < sequences_[b].sequence_id;
  });
}

void AnnotationService::attach_log(const std::filesystem::path& log_path) {
  std::unique_lock lock(mutex_);
  if (std::filesystem::exists(log_path)) replay_log(store_, read_file(log_path));
  log_path_ = log_path;
  store_.set_event_sink([this](const StoreEvent& e) {
    std::ofstream out(*log_path_, std::ios::app | std::ios::binary);
    out << to_json(e).dump() << '\n';
  });
}

void AnnotationService::set_clock(AnnotationStore::Clock clock) {
  std::unique_lock lock(mutex_);
  store_.set_clock(std::move(clock));
}

void AnnotationService::set_probabilities(const std::map<std::string, ClassDistribution>& probs) {
  std::unique_lock lock(mutex_);
  ranking_ = rank_uncertain(store_, probs);
}

std::string AnnotationService::serialize_log() const {
  std::shared_lock lock(mutex_);
  return store_.serialize_log();
}

AnnotationService::Response AnnotationService::handle(const std::string& method,
                                                      const std::string& path,
                                                      const std::string& body) {
  try {
    nlohmann::json payload;
    if (method == "POST") {
      payload = nlohmann::json::parse(body, nullptr, false);
      if (!payload.is_object()) return error_response(400, "request body must be a JSON object");
    }
    if (method == "GET" && path == "/api/next") return next();
    if (method == "POST" && path == "/api/label") return label(payload);
    if (method == "POST" && path == "/api/patterns") return add_pattern(payload);
    if (method == "GET" && path == "/api/patterns") return list_patterns();
    if (method == "GET" && path == "/api/progress") return progress();
    const std::string prefix = "/api/patterns/";
    if (method == "DELETE" && path.rfind(prefix, 0) == 0 && path.size() > prefix.size()) {
      return retire(path.substr(prefix.size()));
    }
    return error_response(404, "no route for " + method + " " + path);
  } catch (const PatternError& e) {
    return {400, {{"error", e.what()}, {"position", e.position()}}};
  } catch (const NotFoundError& e) {
    return error_response(404, e.what());
  } catch (const ConflictError& e) {
    return error_response(409, e.what());
  } catch (const Error& e) {
    return error_response(400, e.what());
  }
}

AnnotationService::Response AnnotationService::next() const {
  std::shared_lock lock(mutex_);
  const Sequence* pick = nullptr;
  for (const auto& id : ranking_) {
    if (store_.find(id) == nullptr) {
      pick = &sequences_[index_.at(id)];
      break;
    }
  }
  if (pick == nullptr) {
    for (std::size_t idx : id_order_) {
      if (store_.find(sequences_[idx].sequence_id) == nullptr) {
        pick = &sequences_[idx];
        break;
      }
    }
  }
  if (pick == nullptr) return {200, {{"sequence", nullptr}}};
  return {200,
          {{"sequence",
            {{"sequence_id", pick->sequence_id},
             {"patient_id", pick->patient_id},
             {"note_id", pick->note_id},
             {"keyword", pick->keyword},
             {"highlight_start", pick->match_offset - pick->window_start},
             {"highlight_length", pick->match_length},
             {"text", pick->text}}}}};
}

AnnotationService::Response AnnotationService::label(const nlohmann::json& body) {
  const std::string id = body_string(body, "sequence_id");
  const Label l = body_label(body);
  const std::string annotator = body_string(body, "annotator_id");
  const bool overwrite = body.value("overwrite", false);
  std::unique_lock lock(mutex_);
  return {200, annotation_json(store_.annotate(id, l, annotator, overwrite))};
}

AnnotationService::Response AnnotationService::add_pattern(const nlohmann::json& body) {
  const std::string regex = body_string(body, "regex");
  const Label l = body_label(body);
  const std::string author = body_string(body, "author");
  std::unique_lock lock(mutex_);
  const auto result = store_.add_always_pattern(regex, l, author);
  return {201, {{"pattern", pattern_json(result.pattern)},
                {"propagation_count", result.propagation_count}}};
}

AnnotationService::Response AnnotationService::list_patterns() const {
  std::shared_lock lock(mutex_);
  nlohmann::json list = nlohmann::json::array();
  for (const auto& p : store_.patterns()) {
    if (p.retired) continue;
    nlohmann::json j = pattern_json(p);
    j["match_count"] = store_.pattern_match_count(p.pattern_id);
    list.push_back(std::move(j));
  }
  return {200, {{"patterns", list}}};
}

AnnotationService::Response AnnotationService::retire(const std::string& pattern_id) {
  std::unique_lock lock(mutex_);
  return {200, {{"pattern_id", pattern_id}, {"reverted", store_.retire_pattern(pattern_id)}}};
}

AnnotationService::Response AnnotationService::progress() const {
  std::shared_lock lock(mutex_);
  const ProgressStats s = store_.progress();
  nlohmann::json counts = nlohmann::json::object();
  for (Label l : kAllLabels) {
    counts[std::string(to_string(l))] = {{"manual", s.counts[index_of(l)][0]},
                                         {"always_pattern", s.counts[index_of(l)][1]}};
  }
  return {200, {{"counts", counts}, {"unlabeled", s.unlabeled}, {"total", s.total}}};
}

void AnnotationService::mount(httplib::Server& server) {
  const auto bind = [this](const std::string& method) {
    return [this, method](const httplib::Request& req, httplib::Response& res) {
      const Response r = handle(method, req.path, req.body);
      res.status = r.status;
      res.set_content(r.body.dump(), "application/json");
    };
  };
  server.Get("/api/next", bind("GET"));
  server.Get("/api/patterns", bind("GET"));
  server.Get("/api/progress", bind("GET"));
  server.Post("/api/label", bind("POST"));
  server.Post("/api/patterns", bind("POST"));
  server.Delete(R"(/api/patterns/[^/]+)", bind("DELETE"));
}

}  // namespace ciphen
