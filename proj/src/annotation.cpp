#include "ciphen/annotation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>

namespace ciphen {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

Label require_label(const nlohmann::json& j, const char* key) {
  const auto label = parse_label(j.at(key).get<std::string>());
  if (!label) throw Error(std::string("invalid label in field '") + key + "'");
  return *label;
}

}  // namespace

nlohmann::json to_json(const StoreEvent& event) {
  return std::visit(
      overloaded{
          [](const AnnotateEvent& e) -> nlohmann::json {
            return {{"event", "annotate"},         {"sequence_id", e.sequence_id},
                    {"label", to_string(e.label)}, {"annotator_id", e.annotator_id},
                    {"overwrite", e.overwrite},    {"at", e.at}};
          },
          [](const AddPatternEvent& e) -> nlohmann::json {
            return {{"event", "add_pattern"},      {"pattern_id", e.pattern_id},
                    {"regex", e.regex},            {"label", to_string(e.label)},
                    {"author", e.author},          {"at", e.at}};
          },
          [](const RetirePatternEvent& e) -> nlohmann::json {
            return {{"event", "retire"}, {"pattern_id", e.pattern_id}, {"at", e.at}};
          },
          [](const PropagateEvent& e) -> nlohmann::json {
            return {{"event", "propagate"}, {"at", e.at}};
          },
      },
      event);
}

StoreEvent event_from_json(const nlohmann::json& j) {
  const std::string kind = j.at("event").get<std::string>();
  const std::string at = j.value("at", "");
  if (kind == "annotate") {
    return AnnotateEvent{j.at("sequence_id").get<std::string>(), require_label(j, "label"),
                         j.at("annotator_id").get<std::string>(), j.value("overwrite", false),
                         at};
  }
  if (kind == "add_pattern") {
    return AddPatternEvent{j.at("pattern_id").get<std::string>(), j.at("regex").get<std::string>(),
                           require_label(j, "label"), j.at("author").get<std::string>(), at};
  }
  if (kind == "retire") return RetirePatternEvent{j.at("pattern_id").get<std::string>(), at};
  if (kind == "propagate") return PropagateEvent{at};
  throw Error("unknown event kind: " + kind);
}

std::vector<SequenceRef> to_refs(const std::vector<Sequence>& sequences) {
  std::vector<SequenceRef> refs;
  refs.reserve(sequences.size());
  for (const auto& s : sequences) refs.push_back({s.sequence_id, s.patient_id, s.text});
  return refs;
}

AnnotationStore::AnnotationStore(std::vector<SequenceRef> sequences)
    : sequences_(std::move(sequences)) {
  for (std::size_t i = 0; i < sequences_.size(); ++i) {
    if (!index_.emplace(sequences_[i].sequence_id, i).second) {
      throw Error("duplicate sequence id: " + sequences_[i].sequence_id);
    }
  }
}

void AnnotationStore::set_propagation_scope(std::set<std::string> scope) {
  scope_ = std::move(scope);
}

const SequenceRef* AnnotationStore::find_sequence(std::string_view sequence_id) const {
  auto it = index_.find(std::string(sequence_id));
  return it == index_.end() ? nullptr : &sequences_[it->second];
}

const Annotation* AnnotationStore::find(std::string_view sequence_id) const {
  auto it = annotations_.find(std::string(sequence_id));
  return it == annotations_.end() ? nullptr : &it->second;
}

const AlwaysPattern* AnnotationStore::find_pattern(std::string_view pattern_id) const {
  for (const auto& p : patterns_) {
    if (p.pattern_id == pattern_id) return &p;
  }
  return nullptr;
}

void AnnotationStore::record(StoreEvent event) {
  events_.push_back(std::move(event));
  if (sink_) sink_(events_.back());
}

const Annotation& AnnotationStore::annotate(const std::string& sequence_id, Label label,
                                            const std::string& annotator_id, bool overwrite) {
  AnnotateEvent e{sequence_id, label, annotator_id, overwrite, now()};
  const Annotation& result = do_annotate(e);
  record(std::move(e));
  return result;
}

const Annotation& AnnotationStore::do_annotate(const AnnotateEvent& e) {
  if (find_sequence(e.sequence_id) == nullptr) {
    throw NotFoundError("unknown sequence: " + e.sequence_id);
  }
  if (e.annotator_id.empty()) throw Error("annotator id must not be empty");
  auto it = annotations_.find(e.sequence_id);
  if (it != annotations_.end() && it->second.provenance.kind == ProvenanceKind::manual &&
      !e.overwrite) {
    throw ConflictError("sequence " + e.sequence_id + " already has a manual label (" +
                        std::string(to_string(it->second.label)) + "); set overwrite to replace");
  }
  Annotation a{e.sequence_id, e.label, {ProvenanceKind::manual, e.annotator_id}, e.at};
  return annotations_.insert_or_assign(e.sequence_id, std::move(a)).first->second;
}

AnnotationStore::PatternResult AnnotationStore::add_always_pattern(const std::string& regex,
                                                                   Label label,
                                                                   const std::string& author) {
  char id[16];
  std::snprintf(id, sizeof(id), "p%04zu", patterns_.size() + 1);
  AddPatternEvent e{id, regex, label, author, now()};
  PatternResult result = do_add_pattern(e);
  record(std::move(e));
  return result;
}

AnnotationStore::PatternResult AnnotationStore::do_add_pattern(const AddPatternEvent& e) {
  if (e.author.empty()) throw Error("pattern author must not be empty");
  Pattern compiled = Pattern::compile(e.regex);
  for (const auto& p : patterns_) {
    if (p.retired || p.regex != e.regex) continue;
    if (p.label != e.label) {
      throw ConflictError("pattern " + p.pattern_id + " already assigns '" + e.regex + "' to " +
                          std::string(to_string(p.label)) + "; retire it first");
    }
    throw ConflictError("pattern " + p.pattern_id + " already defines '" + e.regex + "'");
  }
  if (find_pattern(e.pattern_id) != nullptr) {
    throw ConflictError("pattern id already used: " + e.pattern_id);
  }
  patterns_.push_back({e.pattern_id, e.regex, e.label, e.author, e.at, false});
  compiled_.push_back(std::move(compiled));
  const std::size_t count = propagate_pattern(patterns_.size() - 1, e.at);
  return {patterns_.back(), count};
}

std::size_t AnnotationStore::propagate_pattern(std::size_t pattern_index, const std::string& at) {
  const AlwaysPattern& pattern = patterns_[pattern_index];
  const Pattern& compiled = compiled_[pattern_index];
  std::size_t count = 0;
  for (const auto& seq : sequences_) {
    if (annotations_.contains(seq.sequence_id)) continue;
    if (scope_ && !scope_->contains(seq.sequence_id)) continue;
    if (!compiled.search(seq.text)) continue;
    annotations_.emplace(seq.sequence_id,
                         Annotation{seq.sequence_id, pattern.label,
                                    {ProvenanceKind::always_pattern, pattern.pattern_id}, at});
    ++count;
  }
  return count;
}

std::size_t AnnotationStore::retire_pattern(const std::string& pattern_id) {
  RetirePatternEvent e{pattern_id, now()};
  const std::size_t reverted = do_retire(e);
  record(std::move(e));
  return reverted;
}

std::size_t AnnotationStore::do_retire(const RetirePatternEvent& e) {
  auto it = std::find_if(patterns_.begin(), patterns_.end(),
                         [&](const AlwaysPattern& p) { return p.pattern_id == e.pattern_id; });
  if (it == patterns_.end()) throw NotFoundError("unknown pattern: " + e.pattern_id);
  if (it->retired) throw ConflictError("pattern already retired: " + e.pattern_id);
  it->retired = true;
  return std::erase_if(annotations_, [&](const auto& kv) {
    const Provenance& p = kv.second.provenance;
    return p.kind == ProvenanceKind::always_pattern && p.source_id == e.pattern_id;
  });
}

std::size_t AnnotationStore::propagate() {
  PropagateEvent e{now()};
  const std::size_t count = do_propagate(e.at);
  record(std::move(e));
  return count;
}

std::size_t AnnotationStore::do_propagate(const std::string& at) {
  std::size_t count = 0;
  for (std::size_t i = 0; i < patterns_.size(); ++i) {
    if (!patterns_[i].retired) count += propagate_pattern(i, at);
  }
  return count;
}

void AnnotationStore::apply(const StoreEvent& event) {
  std::visit(overloaded{
                 [&](const AnnotateEvent& e) { do_annotate(e); },
                 [&](const AddPatternEvent& e) { do_add_pattern(e); },
                 [&](const RetirePatternEvent& e) { do_retire(e); },
                 [&](const PropagateEvent& e) { do_propagate(e.at); },
             },
             event);
  record(event);
}

std::size_t AnnotationStore::pattern_match_count(const std::string& pattern_id) const {
  for (std::size_t i = 0; i < patterns_.size(); ++i) {
    if (patterns_[i].pattern_id != pattern_id) continue;
    return static_cast<std::size_t>(
        std::count_if(sequences_.begin(), sequences_.end(),
                      [&](const SequenceRef& s) { return compiled_[i].search(s.text); }));
  }
  throw NotFoundError("unknown pattern: " + pattern_id);
}

ProgressStats AnnotationStore::progress() const {
  ProgressStats stats;
  stats.total = sequences_.size();
  for (const auto& [id, a] : annotations_) {
    ++stats.counts[index_of(a.label)][a.provenance.kind == ProvenanceKind::manual ? 0 : 1];
  }
  stats.unlabeled = stats.total - annotations_.size();
  return stats;
}

std::string AnnotationStore::serialize_log() const {
  std::string out;
  for (const auto& e : events_) out += to_json(e).dump() + "\n";
  return out;
}

void replay_log(AnnotationStore& store, std::string_view log_text) {
  std::size_t line_no = 0;
  for (const auto& line : split_lines(log_text)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      store.apply(event_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw Error("annotation log line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

// ---------------------------------------------------------------------------
// Split

namespace {

constexpr std::size_t kCells = kNumClasses * 2;
using CellCounts = std::array<long, kCells>;

std::size_t cell_of(const Annotation& a) {
  return index_of(a.label) * 2 + (a.provenance.kind == ProvenanceKind::manual ? 0 : 1);
}

std::string cell_name(std::size_t cell) {
  return std::string(to_string(kAllLabels[cell / 2])) + (cell % 2 == 0 ? "/manual" : "/pattern");
}

}  // namespace

Split stratified_split(const AnnotationStore& store, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction <= 1.0)) {
    throw Error("train fraction must lie in (0, 1]");
  }
  Split split;
  const double test_fraction = 1.0 - train_fraction;

  CellCounts totals{};
  std::map<std::string, CellCounts> by_patient;
  std::map<std::string, std::vector<std::string>> ids_by_patient;
  for (const auto& [id, a] : store.annotations()) {
    const SequenceRef* seq = store.find_sequence(id);
    const std::size_t cell = cell_of(a);
    ++totals[cell];
    auto& counts = by_patient.try_emplace(seq->patient_id, CellCounts{}).first->second;
    ++counts[cell];
    ids_by_patient[seq->patient_id].push_back(id);
  }

  // Each cell's test count must stay in [lo, hi]; target is the rounded ideal.
  CellCounts target{}, lo{}, hi{};
  std::array<bool, kCells> small{};
  for (std::size_t c = 0; c < kCells; ++c) {
    if (totals[c] == 0) continue;
    if (totals[c] < 2) {
      small[c] = true;
      split.warnings.push_back("cell " + cell_name(c) + " has fewer than 2 items; kept in train");
      continue;
    }
    const double ideal = test_fraction * static_cast<double>(totals[c]);
    target[c] = std::lround(ideal);
    lo[c] = std::max(0L, static_cast<long>(std::ceil(ideal - 1.0 - 1e-9)));
    hi[c] = std::min(totals[c], static_cast<long>(std::floor(ideal + 1.0 + 1e-9)));
  }

  struct Group {
    const std::string* patient;
    CellCounts counts;
    bool pinned = false;
    bool in_test = false;
  };
  std::vector<Group> groups;
  for (const auto& [patient, counts] : by_patient) {
    Group g{&patient, counts, false, false};
    for (std::size_t c = 0; c < kCells; ++c) {
      if (small[c] && counts[c] > 0) g.pinned = true;
    }
    groups.push_back(g);
  }
  std::mt19937_64 rng(seed);
  std::shuffle(groups.begin(), groups.end(), rng);

  CellCounts test{};
  const auto violation = [&](const CellCounts& t) {
    long v = 0;
    for (std::size_t c = 0; c < kCells; ++c) v += std::max({0L, lo[c] - t[c], t[c] - hi[c]});
    return v;
  };
  const auto cost_with = [&](const CellCounts& t) {
    long cost = 0;
    for (std::size_t c = 0; c < kCells; ++c) cost += std::labs(t[c] - target[c]);
    return violation(t) * 1'000'000 + cost;
  };
  const auto shifted = [&](const CellCounts& base, const Group& g, long sign) {
    CellCounts t = base;
    for (std::size_t c = 0; c < kCells; ++c) t[c] += sign * g.counts[c];
    return t;
  };

  // Greedy fill without overshooting any cell target.
  for (auto& g : groups) {
    if (g.pinned) continue;
    const CellCounts t = shifted(test, g, +1);
    bool fits = true;
    for (std::size_t c = 0; c < kCells; ++c) fits = fits && t[c] <= target[c];
    if (fits) {
      g.in_test = true;
      test = t;
    }
  }

  // Local search: single toggles, then pairwise swaps.
  const auto local_search = [&] {
    long cost = cost_with(test);
    for (int pass = 0; pass < 50 && cost > 0; ++pass) {
      bool improved = false;
      for (auto& g : groups) {
        if (g.pinned) continue;
        const CellCounts t = shifted(test, g, g.in_test ? -1 : +1);
        const long c = cost_with(t);
        if (c < cost) {
          g.in_test = !g.in_test;
          test = t;
          cost = c;
          improved = true;
        }
      }
      if (cost == 0) break;
      for (auto& a : groups) {
        if (a.pinned || !a.in_test) continue;
        for (auto& b : groups) {
          if (b.pinned || b.in_test || !a.in_test) continue;
          const CellCounts t = shifted(shifted(test, a, -1), b, +1);
          const long c = cost_with(t);
          if (c < cost) {
            a.in_test = false;
            b.in_test = true;
            test = t;
            cost = c;
            improved = true;
          }
        }
      }
      if (!improved) break;
    }
  };
  local_search();

  // Bounded exhaustive search for an assignment inside every cell's bounds.
  if (violation(test) > 0) {
    std::vector<Group*> free;
    for (auto& g : groups) {
      if (!g.pinned) free.push_back(&g);
    }
    std::vector<CellCounts> rest(free.size() + 1, CellCounts{});
    for (std::size_t i = free.size(); i-- > 0;) rest[i] = shifted(rest[i + 1], *free[i], +1);
    std::vector<bool> choice(free.size(), false);
    long budget = 2'000'000;
    const std::function<bool(std::size_t, const CellCounts&)> search = [&](std::size_t i, const CellCounts& t) {
      if (--budget < 0) return false;
      for (std::size_t c = 0; c < kCells; ++c) {
        if (t[c] > hi[c] || t[c] + rest[i][c] < lo[c]) return false;
      }
      if (i == free.size()) return true;
      choice[i] = true;
      if (search(i + 1, shifted(t, *free[i], +1))) return true;
      choice[i] = false;
      return search(i + 1, t);
    };
    if (search(0, CellCounts{})) {
      test = CellCounts{};
      for (std::size_t i = 0; i < free.size(); ++i) {
        free[i]->in_test = choice[i];
        if (choice[i]) test = shifted(test, *free[i], +1);
      }
      local_search();
    }
  }

  for (std::size_t c = 0; c < kCells; ++c) {
    if (totals[c] < 2) continue;
    const double train_count = static_cast<double>(totals[c] - test[c]);
    if (std::abs(train_count - train_fraction * static_cast<double>(totals[c])) > 1.0) {
      split.warnings.push_back("cell " + cell_name(c) +
                               " could not be balanced within one item under patient grouping");
    }
  }

  for (const auto& g : groups) {
    auto& side = g.in_test ? split.test : split.train;
    const auto& ids = ids_by_patient[*g.patient];
    side.insert(side.end(), ids.begin(), ids.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

// ---------------------------------------------------------------------------
// Uncertainty ranking

double shannon_entropy(const ClassDistribution& p) {
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}

std::vector<std::string> rank_uncertain(const AnnotationStore& store,
                                        const std::map<std::string, ClassDistribution>& probs) {
  std::vector<std::pair<double, std::string>> ranked;
  for (const auto& [id, p] : probs) {
    double sum = 0.0;
    for (double v : p) {
      if (!std::isfinite(v) || v < 0.0) throw Error("invalid probability for sequence " + id);
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-6) throw Error("distribution for " + id + " is not normalized");
    if (store.find_sequence(id) == nullptr || store.find(id) != nullptr) continue;
    ranked.emplace_back(shannon_entropy(p), id);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  std::vector<std::string> out;
  out.reserve(ranked.size());
  for (auto& [h, id] : ranked) out.push_back(std::move(id));
  return out;
}

}  // namespace ciphen
