#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "ciphen/labels.hpp"
#include "ciphen/util.hpp"

namespace ciphen {

enum class Gender { male, female, other };
enum class Apoe { e2, e3, e4, unknown };

std::string_view to_string(Gender gender);
std::string_view to_string(Apoe apoe);
std::optional<Gender> parse_gender(std::string_view text);
std::optional<Apoe> parse_apoe(std::string_view text);

struct PatientRecord {
  std::string patient_id;
  double age_years = 0.0;
  Gender gender = Gender::other;
  Apoe apoe = Apoe::unknown;
  bool med_icd_flag = false;

  bool operator==(const PatientRecord&) const = default;
};

struct Note {
  std::string note_id;
  std::string patient_id;
  std::string timestamp;
  std::string text;

  bool operator==(const Note&) const = default;
};

/// A text window around one keyword match. Offsets are byte offsets into
/// the note text.
struct Sequence {
  std::string sequence_id;
  std::string patient_id;
  std::string note_id;
  std::string keyword;
  std::size_t match_offset = 0;
  std::size_t match_length = 0;
  std::size_t window_start = 0;
  std::size_t window_end = 0;
  std::string text;

  bool operator==(const Sequence&) const = default;
};

/// Patients and notes, indexed by id. Immutable once built by ingestion or
/// the synthetic generator.
class Corpus {
 public:
  // Throws Error on duplicate patient_id.
  void add_patient(PatientRecord patient);
  // Throws Error on duplicate note_id, unknown patient or blank text.
  void add_note(Note note);

  const std::vector<PatientRecord>& patients() const { return patients_; }
  const std::vector<Note>& notes() const { return notes_; }
  const PatientRecord* find_patient(std::string_view patient_id) const;
  const Note* find_note(std::string_view note_id) const;

 private:
  std::vector<PatientRecord> patients_;
  std::vector<Note> notes_;
  std::unordered_map<std::string, std::size_t> patient_index_;
  std::unordered_map<std::string, std::size_t> note_index_;
};

struct RecordIssue {
  std::string source;
  std::size_t line = 0;  // 1-based
  std::string message;
};

struct IngestResult {
  Corpus corpus;
  std::vector<RecordIssue> rejected;
};

// Malformed or dangling records are rejected with their line number and
// ingestion continues; a duplicate patient_id is a hard error.
IngestResult ingest_corpus(std::istream& patients, std::istream& notes);
IngestResult ingest_corpus(const std::filesystem::path& patients_path,
                           const std::filesystem::path& notes_path);

nlohmann::json to_json(const PatientRecord& patient);
nlohmann::json to_json(const Note& note);
nlohmann::json to_json(const Sequence& sequence);
PatientRecord patient_from_json(const nlohmann::json& j);
Note note_from_json(const nlohmann::json& j);
Sequence sequence_from_json(const nlohmann::json& j);

std::string serialize_patients(const std::vector<PatientRecord>& patients);
std::string serialize_notes(const std::vector<Note>& notes);

/// Sequences file: a leading metadata record followed by one sequence per
/// line.
struct SequencesFile {
  std::string config_hash;
  std::vector<Sequence> sequences;
};
std::string serialize_sequences(const std::vector<Sequence>& sequences,
                                std::string_view config_hash);
SequencesFile parse_sequences(std::string_view text);
SequencesFile load_sequences(const std::filesystem::path& path);

// Patients file only; used by stages that need the patient table.
std::vector<PatientRecord> load_patients(const std::filesystem::path& path);

}  // namespace ciphen
