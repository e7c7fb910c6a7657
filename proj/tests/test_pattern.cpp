#include <random>
#include <regex>
#include <string>

#include <gtest/gtest.h>

#include "ciphen/pattern.hpp"

using namespace ciphen;

namespace {

std::size_t error_position(const std::string& src) {
  try {
    Pattern::compile(src);
  } catch (const PatternError& e) {
    return e.position();
  }
  ADD_FAILURE() << "expected a PatternError for " << src;
  return 0;
}

// Random patterns in the shared dialect over a tiny alphabet.
std::string random_pattern(std::mt19937_64& rng, int depth = 0) {
  std::uniform_int_distribution<int> pick(0, 99);
  std::string out;
  const int pieces = 1 + pick(rng) % 3;
  for (int i = 0; i < pieces; ++i) {
    const int r = pick(rng);
    std::string atom;
    if (r < 40) atom = std::string(1, "abc "[pick(rng) % 4]);
    else if (r < 48) atom = ".";
    else if (r < 56) atom = "[ab]";
    else if (r < 60) atom = "[a-c]";
    else if (r < 65) atom = "\\w";
    else if (r < 69) atom = "\\s";
    else if (r < 72) atom = "\\d";
    else if (r < 76) atom = "\\b";
    else if (r < 78) atom = "^";
    else if (r < 80) atom = "$";
    else if (depth < 2) atom = "(" + random_pattern(rng, depth + 1) + "|" + random_pattern(rng, depth + 1) + ")";
    else atom = "b";
    const bool assertion = atom == "\\b" || atom == "^" || atom == "$";
    const int q = pick(rng);
    if (!assertion) {
      if (q < 10) atom += "*";
      else if (q < 18) atom += "+";
      else if (q < 26) atom += "?";
      else if (q < 30) atom += "{1,2}";
      else if (q < 32) atom += "{2}";
    }
    out += atom;
  }
  return out;
}

std::string random_text(std::mt19937_64& rng) {
  static const std::string alphabet = "abcAB _1";
  std::uniform_int_distribution<std::size_t> len(0, 12), ch(0, alphabet.size() - 1);
  std::string s(len(rng), ' ');
  for (auto& c : s) c = alphabet[ch(rng)];
  return s;
}

}  // namespace

TEST(Pattern, LiteralSearchIsCaseInsensitive) {
  const Pattern p = Pattern::compile("grossly intact");
  EXPECT_TRUE(p.search("Memory GROSSLY INTACT today"));
  EXPECT_FALSE(p.search("grossly  intact"));
}

TEST(Pattern, AlternationClassesAnchors) {
  EXPECT_TRUE(Pattern::compile("caregiver for (wife|husband)").search("is caregiver for Husband"));
  EXPECT_TRUE(Pattern::compile("\\d/3 recall").search("0/3 recall"));
  EXPECT_FALSE(Pattern::compile("^recall").search("poor recall"));
  EXPECT_TRUE(Pattern::compile("recall$").search("poor recall"));
  EXPECT_TRUE(Pattern::compile("\\bAD\\b").search("probable ad."));
  EXPECT_FALSE(Pattern::compile("\\bAD\\b").search("bad"));
  EXPECT_TRUE(Pattern::compile("a{2,3}b").search("xaaab"));
  EXPECT_FALSE(Pattern::compile("^a{2,3}b").search("aaaab"));
  EXPECT_TRUE(Pattern::compile("[^0-9]x").search("ax"));
  EXPECT_TRUE(Pattern::compile("(?:ab)+c").search("ababc"));
}

TEST(Pattern, ErrorsCarryPosition) {
  EXPECT_EQ(error_position("abc("), 3u);
  EXPECT_EQ(error_position("ab)"), 2u);
  EXPECT_EQ(error_position("*a"), 0u);
  EXPECT_EQ(error_position("a[bc"), 1u);
  EXPECT_EQ(error_position("x\\"), 1u);
  EXPECT_EQ(error_position("ab\\q"), 2u);
  EXPECT_EQ(error_position("[z-a]"), 1u);
  EXPECT_EQ(error_position("a{3,1}"), 1u);
  EXPECT_EQ(error_position("(?=a)"), 0u);
  EXPECT_EQ(error_position("a{1,500}"), 1u);
}

TEST(Pattern, LinearTimeOnPathologicalInput) {
  const Pattern p = Pattern::compile("(a|aa)*(a|aa)*b");
  const std::string text(20000, 'a');
  EXPECT_FALSE(p.search(text));
}

// std::regex (ECMAScript, icase) as an independent oracle on the shared
// subset.
TEST(Pattern, AgreesWithEcmascriptRegex) {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 3000; ++trial) {
    const std::string src = random_pattern(rng);
    const Pattern mine = Pattern::compile(src);
    const std::regex ref(src, std::regex::ECMAScript | std::regex::icase);
    for (int t = 0; t < 5; ++t) {
      const std::string text = random_text(rng);
      ASSERT_EQ(mine.search(text), std::regex_search(text, ref)) << "pattern /" << src << "/ text '" << text << "'";
    }
  }
}
