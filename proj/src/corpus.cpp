#include "ciphen/corpus.hpp"

#include <fstream>
#include <istream>
#include <sstream>

namespace ciphen {

std::optional<Label> parse_label(std::string_view text) {
  const std::string lower = ascii_lower(text);
  if (lower == "yes") return Label::yes;
  if (lower == "no") return Label::no;
  if (lower == "neither" || lower == "ntr") return Label::neither;
  return std::nullopt;
}

std::string_view to_string(Gender gender) {
  switch (gender) {
    case Gender::male: return "male";
    case Gender::female: return "female";
    case Gender::other: return "other";
  }
  return "other";
}

std::string_view to_string(Apoe apoe) {
  switch (apoe) {
    case Apoe::e2: return "e2";
    case Apoe::e3: return "e3";
    case Apoe::e4: return "e4";
    case Apoe::unknown: return "unknown";
  }
  return "unknown";
}

std::optional<Gender> parse_gender(std::string_view text) {
  const std::string lower = ascii_lower(text);
  if (lower == "male" || lower == "m") return Gender::male;
  if (lower == "female" || lower == "f") return Gender::female;
  if (lower == "other" || lower == "unknown") return Gender::other;
  return std::nullopt;
}

std::optional<Apoe> parse_apoe(std::string_view text) {
  const std::string lower = ascii_lower(text);
  if (lower == "e2") return Apoe::e2;
  if (lower == "e3") return Apoe::e3;
  if (lower == "e4") return Apoe::e4;
  if (lower == "unknown") return Apoe::unknown;
  return std::nullopt;
}

void Corpus::add_patient(PatientRecord patient) {
  if (patient_index_.contains(patient.patient_id)) {
    throw Error("duplicate patient_id: " + patient.patient_id);
  }
  patient_index_.emplace(patient.patient_id, patients_.size());
  patients_.push_back(std::move(patient));
}

void Corpus::add_note(Note note) {
  if (note_index_.contains(note.note_id)) {
    throw Error("duplicate note_id: " + note.note_id);
  }
  if (!patient_index_.contains(note.patient_id)) {
    throw Error("note " + note.note_id + " references unknown patient " +
                note.patient_id);
  }
  if (trim(note.text).empty()) throw Error("note " + note.note_id + " has blank text");
  note_index_.emplace(note.note_id, notes_.size());
  notes_.push_back(std::move(note));
}

const PatientRecord* Corpus::find_patient(std::string_view patient_id) const {
  auto it = patient_index_.find(std::string(patient_id));
  return it == patient_index_.end() ? nullptr : &patients_[it->second];
}

const Note* Corpus::find_note(std::string_view note_id) const {
  auto it = note_index_.find(std::string(note_id));
  return it == note_index_.end() ? nullptr : &notes_[it->second];
}

namespace {

const nlohmann::json& require(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw Error(std::string("missing field '") + key + "'");
  return *it;
}

std::string require_string(const nlohmann::json& j, const char* key) {
  const auto& v = require(j, key);
  if (!v.is_string()) throw Error(std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

}  // namespace

nlohmann::json to_json(const PatientRecord& p) {
  return {{"patient_id", p.patient_id},
          {"age_years", p.age_years},
          {"gender", to_string(p.gender)},
          {"apoe", to_string(p.apoe)},
          {"med_icd_flag", p.med_icd_flag}};
}

nlohmann::json to_json(const Note& n) {
  return {{"note_id", n.note_id},
          {"patient_id", n.patient_id},
          {"timestamp", n.timestamp},
          {"text", n.text}};
}

nlohmann::json to_json(const Sequence& s) {
  return {{"sequence_id", s.sequence_id},   {"patient_id", s.patient_id},
          {"note_id", s.note_id},           {"keyword", s.keyword},
          {"match_offset", s.match_offset}, {"match_length", s.match_length},
          {"window_start", s.window_start}, {"window_end", s.window_end},
          {"text", s.text}};
}

PatientRecord patient_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error("record is not an object");
  PatientRecord p;
  p.patient_id = require_string(j, "patient_id");
  if (p.patient_id.empty()) throw Error("empty patient_id");
  const auto& age = require(j, "age_years");
  if (!age.is_number()) throw Error("field 'age_years' must be a number");
  p.age_years = age.get<double>();
  if (!(p.age_years >= 0.0)) throw Error("age_years must be non-negative");
  const auto gender = parse_gender(require_string(j, "gender"));
  if (!gender) throw Error("unknown gender value");
  p.gender = *gender;
  const auto apoe = parse_apoe(require_string(j, "apoe"));
  if (!apoe) throw Error("apoe must be one of e2, e3, e4, unknown");
  p.apoe = *apoe;
  const auto& flag = require(j, "med_icd_flag");
  if (!flag.is_boolean()) throw Error("field 'med_icd_flag' must be a boolean");
  p.med_icd_flag = flag.get<bool>();
  return p;
}

Note note_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error("record is not an object");
  Note n;
  n.note_id = require_string(j, "note_id");
  if (n.note_id.empty()) throw Error("empty note_id");
  n.patient_id = require_string(j, "patient_id");
  n.timestamp = require_string(j, "timestamp");
  if (!is_iso_date(n.timestamp)) throw Error("timestamp is not an ISO-8601 date");
  n.text = require_string(j, "text");
  if (trim(n.text).empty()) throw Error("note text is blank");
  return n;
}

Sequence sequence_from_json(const nlohmann::json& j) {
  Sequence s;
  s.sequence_id = require_string(j, "sequence_id");
  s.patient_id = require_string(j, "patient_id");
  s.note_id = require_string(j, "note_id");
  s.keyword = require_string(j, "keyword");
  s.match_offset = require(j, "match_offset").get<std::size_t>();
  s.match_length = require(j, "match_length").get<std::size_t>();
  s.window_start = require(j, "window_start").get<std::size_t>();
  s.window_end = require(j, "window_end").get<std::size_t>();
  s.text = require_string(j, "text");
  return s;
}

IngestResult ingest_corpus(std::istream& patients, std::istream& notes) {
  IngestResult result;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(patients, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    PatientRecord record;
    try {
      record = patient_from_json(nlohmann::json::parse(line));
    } catch (const std::exception& e) {
      result.rejected.push_back({"patients", line_no, e.what()});
      continue;
    }
    // Duplicate ids are not recoverable: which record is authoritative is
    // unknowable, so the whole ingestion fails.
    if (result.corpus.find_patient(record.patient_id) != nullptr) {
      throw Error("duplicate patient_id '" + record.patient_id + "' at patients line " +
                  std::to_string(line_no));
    }
    result.corpus.add_patient(std::move(record));
  }
  line_no = 0;
  while (std::getline(notes, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      result.corpus.add_note(note_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      result.rejected.push_back({"notes", line_no, e.what()});
    }
  }
  return result;
}

IngestResult ingest_corpus(const std::filesystem::path& patients_path,
                           const std::filesystem::path& notes_path) {
  std::ifstream patients(patients_path);
  if (!patients) throw MissingInputError("cannot open patients file: " + patients_path.string());
  std::ifstream notes(notes_path);
  if (!notes) throw MissingInputError("cannot open notes file: " + notes_path.string());
  return ingest_corpus(patients, notes);
}

std::string serialize_patients(const std::vector<PatientRecord>& patients) {
  std::string out;
  for (const auto& p : patients) out += to_json(p).dump() + "\n";
  return out;
}

std::string serialize_notes(const std::vector<Note>& notes) {
  std::string out;
  for (const auto& n : notes) out += to_json(n).dump() + "\n";
  return out;
}

std::string serialize_sequences(const std::vector<Sequence>& sequences,
                                std::string_view config_hash) {
  nlohmann::json meta = {{"_meta", {{"kind", "sequences"},
                                    {"config_hash", config_hash},
                                    {"count", sequences.size()}}}};
  std::string out = meta.dump() + "\n";
  for (const auto& s : sequences) out += to_json(s).dump() + "\n";
  return out;
}

SequencesFile parse_sequences(std::string_view text) {
  SequencesFile file;
  std::size_t line_no = 0;
  for (const auto& line : split_lines(text)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      if (j.contains("_meta")) {
        file.config_hash = j["_meta"].value("config_hash", "");
        continue;
      }
      file.sequences.push_back(sequence_from_json(j));
    } catch (const std::exception& e) {
      throw Error("sequences line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return file;
}

SequencesFile load_sequences(const std::filesystem::path& path) {
  return parse_sequences(read_file(path));
}

std::vector<PatientRecord> load_patients(const std::filesystem::path& path) {
  std::vector<PatientRecord> patients;
  std::size_t line_no = 0;
  for (const auto& line : split_lines(read_file(path))) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      patients.push_back(patient_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw Error("patients line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return patients;
}

}  // namespace ciphen
