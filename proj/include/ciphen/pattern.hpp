#pragma once

#include <bitset>
#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "ciphen/util.hpp"

namespace ciphen {

/// Invalid always-pattern syntax; `position` is the 0-based byte offset in
/// the pattern source where parsing failed.
class PatternError : public Error {
 public:
  PatternError(const std::string& message, std::size_t position);
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

/// Always-pattern regular expressions.
///
/// Dialect (a subset of ECMAScript regex, so patterns behave the same in a
/// browser preview):
///   literals, `.` (any byte except newline), escapes `\d \w \s \D \W \S`
///   and escaped punctuation, character classes `[a-z]` / `[^...]`,
///   groups `( )` and `(?: )`, alternation `|`, quantifiers `* + ?`,
///   `{m}`, `{m,}`, `{m,n}` (n <= 100), anchors `^ $` and word boundaries
///   `\b \B`.
/// Matching is unanchored search and ASCII case-insensitive. Runs in time
/// linear in the text length (Pike VM, no backtracking).
class Pattern {
 public:
  static Pattern compile(std::string_view source);

  bool search(std::string_view text) const;
  const std::string& source() const { return source_; }

  struct Inst;

 private:
  std::string source_;
  std::vector<Inst> program_;
  std::vector<std::bitset<256>> classes_;
};

struct Pattern::Inst {
  enum class Op { byte_class, split, jump, assert_bol, assert_eol, word_boundary,
                  not_word_boundary, match };
  Op op = Op::match;
  int x = 0;  // class index, or jump/split target
  int y = 0;  // second split target
};

}  // namespace ciphen
