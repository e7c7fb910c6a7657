#include "ciphen/extract.hpp"

#include <algorithm>
#include <map>
#include <thread>
#include <tuple>

namespace ciphen {

namespace {

bool is_continuation_byte(unsigned char c) { return (c & 0xC0) == 0x80; }

bool canonical_less(const Sequence& a, const Sequence& b) {
  return std::tie(a.note_id, a.match_offset, a.sequence_id) <
         std::tie(b.note_id, b.match_offset, b.sequence_id);
}

std::vector<Sequence> scan_note(const Note& note, const Lexicon& lexicon, std::size_t window) {
  std::vector<Sequence> out;
  for (const auto& m : lexicon.find_matches(note.text)) {
    const Window w = window_around(note.text, m.offset, m.length, window);
    Sequence s;
    s.sequence_id = make_sequence_id(note.note_id, m.offset);
    s.patient_id = note.patient_id;
    s.note_id = note.note_id;
    s.keyword = lexicon.entries()[m.entry].keyword;
    s.match_offset = m.offset;
    s.match_length = m.length;
    s.window_start = w.start;
    s.window_end = w.end;
    s.text = note.text.substr(w.start, w.end - w.start);
    out.push_back(std::move(s));
  }
  // Two entries can match at the same offset; only the first lexicon entry
  // keeps the offset-derived id.
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (out[i].match_offset == out[i - 1].match_offset) {
      out[i].sequence_id += "#" + out[i].keyword;
    }
  }
  return out;
}

}  // namespace

Window window_around(std::string_view text, std::size_t match_offset, std::size_t match_length,
                     std::size_t window) {
  if (window == 0) throw Error("window must be at least 1");
  const std::size_t len = text.size();
  const std::size_t centre = match_offset + match_length / 2;
  const std::size_t half = window / 2;
  std::size_t start = std::min(centre > half ? centre - half : 0, match_offset);
  std::size_t end = std::max(std::min(len, start + window), match_offset + match_length);
  while (start < match_offset && is_continuation_byte(static_cast<unsigned char>(text[start]))) {
    ++start;
  }
  while (end > match_offset + match_length && end < len &&
         is_continuation_byte(static_cast<unsigned char>(text[end]))) {
    --end;
  }
  return {start, end};
}

std::string make_sequence_id(std::string_view note_id, std::size_t match_offset) {
  return std::string(note_id) + ":" + std::to_string(match_offset);
}

std::vector<Sequence> extract_sequences(const Corpus& corpus, const Lexicon& lexicon,
                                        std::size_t window, std::size_t workers) {
  if (window == 0) throw Error("window must be at least 1");
  const auto& notes = corpus.notes();
  std::vector<std::vector<Sequence>> per_note(notes.size());
  const std::size_t n_workers = std::max<std::size_t>(1, std::min(workers, notes.size()));
  if (n_workers <= 1) {
    for (std::size_t i = 0; i < notes.size(); ++i) per_note[i] = scan_note(notes[i], lexicon, window);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < notes.size(); i += n_workers) {
          per_note[i] = scan_note(notes[i], lexicon, window);
        }
      });
    }
  }
  std::vector<Sequence> all;
  for (auto& batch : per_note) {
    std::move(batch.begin(), batch.end(), std::back_inserter(all));
  }
  std::stable_sort(all.begin(), all.end(), canonical_less);
  return all;
}

std::vector<Sequence> dedupe_overlapping(std::vector<Sequence> sequences) {
  std::stable_sort(sequences.begin(), sequences.end(), canonical_less);
  std::vector<Sequence> out;
  out.reserve(sequences.size());
  // keyed per note; input need not have identical windows adjacent
  std::map<std::pair<std::size_t, std::size_t>, bool> seen;
  std::string current_note;
  for (auto& s : sequences) {
    if (out.empty() || s.note_id != current_note) {
      current_note = s.note_id;
      seen.clear();
    }
    if (!seen.emplace(std::make_pair(s.window_start, s.window_end), true).second) continue;
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<std::pair<std::string, std::size_t>> extraction_report(
    const std::vector<Sequence>& sequences) {
  std::map<std::string, std::size_t> counts;
  for (const auto& s : sequences) ++counts[s.keyword];
  std::vector<std::pair<std::string, std::size_t>> table(counts.begin(), counts.end());
  std::stable_sort(table.begin(), table.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  return table;
}

std::string extraction_config_hash(const Lexicon& lexicon, std::size_t window) {
  return hex64(fnv1a64(lexicon.fingerprint() + "|window=" + std::to_string(window)));
}

}  // namespace ciphen
