#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "ciphen/corpus.hpp"
#include "ciphen/labels.hpp"
#include "ciphen/pattern.hpp"

namespace ciphen {

enum class ProvenanceKind { manual, always_pattern };

struct Provenance {
  ProvenanceKind kind = ProvenanceKind::manual;
  std::string source_id;  // annotator id or pattern id

  bool operator==(const Provenance&) const = default;
};

struct Annotation {
  std::string sequence_id;
  Label label = Label::neither;
  Provenance provenance;
  std::string created_at;

  bool operator==(const Annotation&) const = default;
};

struct AlwaysPattern {
  std::string pattern_id;
  std::string regex;
  Label label = Label::neither;
  std::string author;
  std::string created_at;
  bool retired = false;
};

// Raised for requests that are well-formed but clash with existing state
// (overwrite without the flag, conflicting pattern, retired pattern).
class ConflictError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

struct AnnotateEvent {
  std::string sequence_id;
  Label label = Label::neither;
  std::string annotator_id;
  bool overwrite = false;
  std::string at;
};
struct AddPatternEvent {
  std::string pattern_id;
  std::string regex;
  Label label = Label::neither;
  std::string author;
  std::string at;
};
struct RetirePatternEvent {
  std::string pattern_id;
  std::string at;
};
struct PropagateEvent {
  std::string at;
};
using StoreEvent =
    std::variant<AnnotateEvent, AddPatternEvent, RetirePatternEvent, PropagateEvent>;

nlohmann::json to_json(const StoreEvent& event);
StoreEvent event_from_json(const nlohmann::json& j);

/// Minimal view of a sequence needed for labeling.
struct SequenceRef {
  std::string sequence_id;
  std::string patient_id;
  std::string text;
};

struct ProgressStats {
  // counts[label][kind]
  std::array<std::array<std::size_t, 2>, kNumClasses> counts{};
  std::size_t unlabeled = 0;
  std::size_t total = 0;
};

/// Annotation store: an append-only event log plus the derived current
/// labels. Manual labels always win over pattern labels. Not thread-safe;
/// callers serialize mutations (see AnnotationService).
class AnnotationStore {
 public:
  using Clock = std::function<std::string()>;

  explicit AnnotationStore(std::vector<SequenceRef> sequences);

  void set_clock(Clock clock) { clock_ = std::move(clock); }
  // Restrict pattern propagation to these sequence ids (default: all).
  void set_propagation_scope(std::set<std::string> scope);
  // Called with every accepted event, after it has been applied.
  void set_event_sink(std::function<void(const StoreEvent&)> sink) { sink_ = std::move(sink); }

  const Annotation& annotate(const std::string& sequence_id, Label label,
                             const std::string& annotator_id, bool overwrite = false);

  struct PatternResult {
    AlwaysPattern pattern;
    std::size_t propagation_count = 0;
  };
  // Throws PatternError for invalid syntax, ConflictError when an active
  // pattern has the same regex.
  PatternResult add_always_pattern(const std::string& regex, Label label,
                                   const std::string& author);
  std::size_t retire_pattern(const std::string& pattern_id);

  // Applies every active pattern, in creation order, to unlabeled sequences.
  std::size_t propagate();

  // Re-applies a recorded event. Used when loading a log.
  void apply(const StoreEvent& event);

  const std::vector<SequenceRef>& sequences() const { return sequences_; }
  const SequenceRef* find_sequence(std::string_view sequence_id) const;
  const std::map<std::string, Annotation>& annotations() const { return annotations_; }
  const Annotation* find(std::string_view sequence_id) const;
  const std::vector<AlwaysPattern>& patterns() const { return patterns_; }
  const AlwaysPattern* find_pattern(std::string_view pattern_id) const;
  const std::vector<StoreEvent>& events() const { return events_; }

  std::size_t pattern_match_count(const std::string& pattern_id) const;
  ProgressStats progress() const;

  std::string serialize_log() const;

 private:
  const Annotation& do_annotate(const AnnotateEvent& event);
  PatternResult do_add_pattern(const AddPatternEvent& event);
  std::size_t do_retire(const RetirePatternEvent& event);
  std::size_t do_propagate(const std::string& at);
  std::size_t propagate_pattern(std::size_t pattern_index, const std::string& at);
  void record(StoreEvent event);
  std::string now() const { return clock_ ? clock_() : utc_timestamp_now(); }

  std::vector<SequenceRef> sequences_;
  std::unordered_map<std::string, std::size_t> index_;
  std::optional<std::set<std::string>> scope_;
  std::map<std::string, Annotation> annotations_;
  std::vector<AlwaysPattern> patterns_;
  std::vector<Pattern> compiled_;
  std::vector<StoreEvent> events_;
  Clock clock_;
  std::function<void(const StoreEvent&)> sink_;
};

std::vector<SequenceRef> to_refs(const std::vector<Sequence>& sequences);

// Replays a log produced by serialize_log() on top of a fresh store.
void replay_log(AnnotationStore& store, std::string_view log_text);

struct Split {
  std::vector<std::string> train;
  std::vector<std::string> test;
  std::vector<std::string> warnings;
};

/// Patient-disjoint split of the annotated sequences, stratified over
/// (label x provenance kind) cells so that each cell's test share stays
/// within one item of the target. Cells with fewer than two items stay in
/// train.
Split stratified_split(const AnnotationStore& store, double train_fraction, std::uint64_t seed);

using ClassDistribution = std::array<double, kNumClasses>;

double shannon_entropy(const ClassDistribution& p);

// Unlabeled sequences that have a distribution, by descending entropy (ties
// by sequence id). Throws Error if any distribution is off by more than 1e-6.
std::vector<std::string> rank_uncertain(const AnnotationStore& store,
                                        const std::map<std::string, ClassDistribution>& probs);

}  // namespace ciphen
