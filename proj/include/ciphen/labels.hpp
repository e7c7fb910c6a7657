#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>

namespace ciphen {

/// Three-class sequence label. The enumerator values are the canonical
/// class order used by every probability vector in the toolkit.
enum class Label : int { yes = 0, no = 1, neither = 2 };

inline constexpr std::size_t kNumClasses = 3;
inline constexpr std::array<Label, kNumClasses> kAllLabels{Label::yes, Label::no,
                                                           Label::neither};

constexpr std::size_t index_of(Label label) { return static_cast<std::size_t>(label); }

constexpr std::string_view to_string(Label label) {
  switch (label) {
    case Label::yes: return "Yes";
    case Label::no: return "No";
    case Label::neither: return "Neither";
  }
  return "?";
}

// Accepts the display names plus lower-case and the "Ntr" abbreviation.
std::optional<Label> parse_label(std::string_view text);

}  // namespace ciphen
