#pragma once

/**
 * @file util.hpp
 * Shared plumbing: error type, text normalization, hashing, atomic file
 * writes, NDJSON/CSV helpers, civil-date arithmetic, and seeded RNG streams.
 */

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ikp {

/// Toolkit-wide error. Messages carry file/line context where applicable.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// ====== text ======

/// Lowercases ASCII letters, strips ASCII punctuation, collapses runs of
/// whitespace to single spaces, trims. Bytes >= 0x80 pass through untouched.
std::string normalize_text(std::string_view s);

/// Whitespace-token split of an already-normalized string.
std::vector<std::string> split_words(std::string_view s);

bool contains_ci(std::string_view haystack, std::string_view needle);

// ====== hashing ======

/// SHA-256 hex digest (lowercase) of the input bytes.
std::string sha256_hex(std::string_view data);

/// splitmix64 mix; used to derive independent RNG streams from one seed.
std::uint64_t mix64(std::uint64_t x);
std::uint64_t mix64(std::uint64_t a, std::uint64_t b);
std::uint64_t hash_u64(std::string_view s, std::uint64_t seed);

// ====== files ======

std::string read_file(const std::filesystem::path& p);

/// Writes to a sibling temp file then renames into place. The rename is
/// atomic on POSIX, so concurrent writers of the same path cannot interleave.
void atomic_write_file(const std::filesystem::path& p, std::string_view content);

/// Calls fn(line_number, line) for each non-empty line; line numbers are 1-based.
void for_each_line(const std::filesystem::path& p,
                   const std::function<void(std::size_t, const std::string&)>& fn);

// ====== csv ======

/// RFC-4180 quoting: wraps in quotes when the field contains , " or newline.
std::string csv_field(std::string_view s);
std::string csv_num(double v);
/// Splits one CSV record honoring quotes. No multi-line records.
std::vector<std::string> csv_split(const std::string& line);

// ====== dates ======

/// Days since civil 1970-01-01 for a YYYY-MM-DD string. Throws on bad input.
long days_from_civil_str(const std::string& ymd);

/// Fractional months between `ymd` and the 2024-01-01 epoch: exact day
/// difference divided by 30.4375. Negative for earlier dates.
double months_since_epoch(const std::string& ymd);

// ====== misc ======

double quantile_type7(std::vector<double> sorted_or_not, double q);
double median_of(std::vector<double> values);

}  // namespace ikp
