#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ciphen {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A required input file is missing or unreadable.
class MissingInputError : public Error {
 public:
  using Error::Error;
};

// 64-bit FNV-1a. Stable across platforms and runs, used for config and
// content hashes embedded in artifacts.
std::uint64_t fnv1a64(std::string_view data,
                      std::uint64_t basis = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t value);

// Derive an independent stream seed for a named stage from the root seed.
std::uint64_t derive_seed(std::uint64_t root, std::string_view stage);

std::string utc_timestamp_now();
bool is_iso_date(std::string_view text);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);
std::vector<std::string> split_lines(std::string_view text);

inline bool is_ascii_alnum(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') ||
         (c >= 'A' && c <= 'Z');
}
inline char ascii_lower(char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}
std::string ascii_lower(std::string_view text);

std::string trim(std::string_view text);

}  // namespace ciphen
