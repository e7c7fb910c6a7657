#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "ciphen/corpus.hpp"
#include "ciphen/lexicon.hpp"

namespace ciphen {

inline constexpr std::size_t kDefaultWindow = 800;

struct Window {
  std::size_t start = 0;
  std::size_t end = 0;
};

// Window of at most `window` bytes centred on the match and clipped at the
// note boundaries. Boundaries are nudged inward so they never split a UTF-8
// code point. A match longer than `window` is returned whole.
Window window_around(std::string_view text, std::size_t match_offset,
                     std::size_t match_length, std::size_t window);

std::string make_sequence_id(std::string_view note_id, std::size_t match_offset);

/// One sequence per keyword match, in canonical (note_id, offset, lexicon
/// order) order. `workers` > 1 scans notes in parallel; the result is
/// identical for any worker count.
std::vector<Sequence> extract_sequences(const Corpus& corpus, const Lexicon& lexicon,
                                        std::size_t window = kDefaultWindow,
                                        std::size_t workers = 1);

// Collapses sequences of the same note with identical windows, keeping the
// first in canonical order.
std::vector<Sequence> dedupe_overlapping(std::vector<Sequence> sequences);

// Keyword -> count, sorted by count descending then keyword.
std::vector<std::pair<std::string, std::size_t>> extraction_report(
    const std::vector<Sequence>& sequences);

std::string extraction_config_hash(const Lexicon& lexicon, std::size_t window);

}  // namespace ciphen
