#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace ciphen {

enum class MatchMode {
  word_boundary,  // no letter or digit may touch either end of the match
  exact,          // plain substring occurrence
};

struct LexiconEntry {
  std::string keyword;
  MatchMode mode = MatchMode::exact;
  bool case_sensitive = false;
};

struct KeywordMatch {
  std::size_t entry = 0;  // index into Lexicon::entries()
  std::size_t offset = 0;
  std::size_t length = 0;
};

/// Ordered keyword list. A space inside a keyword matches exactly one
/// whitespace character of any kind, so "Cognitive Impairment" also matches
/// across a line break.
class Lexicon {
 public:
  Lexicon() = default;
  // Throws Error on an empty keyword or a duplicate after case folding.
  explicit Lexicon(std::vector<LexiconEntry> entries);

  const std::vector<LexiconEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  // All matches in the text ordered by (offset, entry index).
  std::vector<KeywordMatch> find_matches(std::string_view text) const;

  // Stable digest of the entries and their flags.
  std::string fingerprint() const;

 private:
  std::vector<LexiconEntry> entries_;
};

// Checks that `text[offset, offset + length)` is an occurrence of `entry`
// under its match rules. Independent of the scanning code path.
bool matches_at(const LexiconEntry& entry, std::string_view text, std::size_t offset,
                std::size_t length);

/// The 18 dementia-related keywords. Short all-caps acronyms are matched
/// case-sensitively on word boundaries, everything else as a
/// case-insensitive substring.
Lexicon default_lexicon();

// One keyword per line, optionally followed by a TAB and comma-separated
// flags: `case_sensitive`, `word_boundary`. Blank lines and lines starting
// with '#' are ignored.
Lexicon parse_lexicon(std::string_view text);
Lexicon load_lexicon(const std::filesystem::path& path);
std::string serialize_lexicon(const Lexicon& lexicon);

}  // namespace ciphen
