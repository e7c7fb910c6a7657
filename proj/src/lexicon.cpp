#include "ciphen/lexicon.hpp"

#include <algorithm>
#include <set>

#include "ciphen/util.hpp"

namespace ciphen {

namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool char_matches(char pattern, char actual, bool case_sensitive) {
  if (pattern == ' ') return is_space(actual);
  return case_sensitive ? pattern == actual : ascii_lower(pattern) == ascii_lower(actual);
}

bool body_matches(const LexiconEntry& entry, std::string_view text, std::size_t offset) {
  const std::string& kw = entry.keyword;
  if (offset + kw.size() > text.size()) return false;
  for (std::size_t i = 0; i < kw.size(); ++i) {
    if (!char_matches(kw[i], text[offset + i], entry.case_sensitive)) return false;
  }
  return true;
}

bool boundary_ok(std::string_view text, std::size_t offset, std::size_t length) {
  const auto word_char = [](char c) { return is_ascii_alnum(static_cast<unsigned char>(c)); };
  if (offset > 0 && word_char(text[offset - 1])) return false;
  if (offset + length < text.size() && word_char(text[offset + length])) return false;
  return true;
}

}  // namespace

Lexicon::Lexicon(std::vector<LexiconEntry> entries) : entries_(std::move(entries)) {
  std::set<std::string> seen;
  for (auto& e : entries_) {
    if (trim(e.keyword).empty()) throw Error("lexicon keyword is empty");
    e.keyword = trim(e.keyword);
    if (!seen.insert(ascii_lower(e.keyword)).second) {
      throw Error("duplicate lexicon keyword after case folding: " + e.keyword);
    }
  }
}

std::vector<KeywordMatch> Lexicon::find_matches(std::string_view text) const {
  std::vector<KeywordMatch> matches;
  for (std::size_t idx = 0; idx < entries_.size(); ++idx) {
    const auto& entry = entries_[idx];
    const std::size_t len = entry.keyword.size();
    if (len > text.size()) continue;
    const char first = entry.keyword.front();
    const char first_lower = ascii_lower(first);
    for (std::size_t pos = 0; pos + len <= text.size(); ++pos) {
      const char c = text[pos];
      if (entry.case_sensitive ? c != first : ascii_lower(c) != first_lower) continue;
      if (!body_matches(entry, text, pos)) continue;
      if (entry.mode == MatchMode::word_boundary && !boundary_ok(text, pos, len)) continue;
      matches.push_back({idx, pos, len});
    }
  }
  std::sort(matches.begin(), matches.end(), [](const KeywordMatch& a, const KeywordMatch& b) {
    return a.offset != b.offset ? a.offset < b.offset : a.entry < b.entry;
  });
  return matches;
}

std::string Lexicon::fingerprint() const { return hex64(fnv1a64(serialize_lexicon(*this))); }

bool matches_at(const LexiconEntry& entry, std::string_view text, std::size_t offset,
                std::size_t length) {
  if (length != entry.keyword.size() || offset + length > text.size()) return false;
  const std::string_view found = text.substr(offset, length);
  for (std::size_t i = 0; i < length; ++i) {
    const char want = entry.keyword[i];
    const char got = found[i];
    if (want == ' ') {
      if (!is_space(got)) return false;
    } else if (entry.case_sensitive) {
      if (want != got) return false;
    } else if (ascii_lower(want) != ascii_lower(got)) {
      return false;
    }
  }
  return entry.mode != MatchMode::word_boundary || boundary_ok(text, offset, length);
}

Lexicon default_lexicon() {
  const auto ci = [](const char* kw) {
    return LexiconEntry{kw, MatchMode::exact, false};
  };
  const auto acronym = [](const char* kw) {
    return LexiconEntry{kw, MatchMode::word_boundary, true};
  };
  return Lexicon({
      ci("Memory"),         ci("Cognition"),      ci("Dementia"),
      ci("Cerebral"),       ci("Cerebrovascular"), ci("Cerebellar"),
      ci("Cognitive Impairment"), ci("Alzheimer"), acronym("MOCA"),
      ci("Neurocognitive"), acronym("MCI"),       ci("Amnesia"),
      acronym("AD"),        ci("Lewy"),           acronym("MMSE"),
      acronym("LBD"),       ci("Corticobasal"),   ci("Picks"),
  });
}

Lexicon parse_lexicon(std::string_view text) {
  std::vector<LexiconEntry> entries;
  std::size_t line_no = 0;
  for (const auto& raw : split_lines(text)) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    LexiconEntry entry;
    const auto tab = line.find('\t');
    entry.keyword = trim(line.substr(0, tab));
    if (tab != std::string::npos) {
      std::string flags = line.substr(tab + 1);
      std::size_t start = 0;
      while (start <= flags.size()) {
        auto comma = flags.find(',', start);
        if (comma == std::string::npos) comma = flags.size();
        const std::string flag = trim(std::string_view(flags).substr(start, comma - start));
        if (flag == "case_sensitive") {
          entry.case_sensitive = true;
        } else if (flag == "word_boundary") {
          entry.mode = MatchMode::word_boundary;
        } else if (!flag.empty()) {
          throw Error("lexicon line " + std::to_string(line_no) + ": unknown flag '" + flag +
                      "'");
        }
        start = comma + 1;
      }
    }
    entries.push_back(std::move(entry));
  }
  return Lexicon(std::move(entries));
}

Lexicon load_lexicon(const std::filesystem::path& path) { return parse_lexicon(read_file(path)); }

std::string serialize_lexicon(const Lexicon& lexicon) {
  std::string out;
  for (const auto& e : lexicon.entries()) {
    out += e.keyword;
    std::vector<std::string> flags;
    if (e.case_sensitive) flags.emplace_back("case_sensitive");
    if (e.mode == MatchMode::word_boundary) flags.emplace_back("word_boundary");
    for (std::size_t i = 0; i < flags.size(); ++i) out += (i == 0 ? "\t" : ",") + flags[i];
    out += "\n";
  }
  return out;
}

}  // namespace ciphen
