#pragma once

// Text encodings shared by the wire protocol and the session archive.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vocstress/core_model.hpp"

namespace vocstress {

inline constexpr std::string_view kMissingText = "NA";

// Shortest round-trip decimal; "NA" for missing. With forced_decimal an
// integral value keeps one fractional digit ("22.0").
std::string format_real(double v, bool forced_decimal = false);
void append_real(std::string& out, double v, bool forced_decimal = false);

// Strict parse of a finite decimal or "NA". No whitespace, no leading '+'.
std::optional<double> parse_real(std::string_view s) noexcept;
std::optional<std::int64_t> parse_int(std::string_view s) noexcept;

// Comma-joined frame columns in canonical order (no tag, no newline).
std::string format_frame_fields(const SensorFrame& f);
std::string frame_header();

// Parses the 19 comma-separated frame columns. `base_offset` is added to the
// byte offset reported by ParseError.
SensorFrame parse_frame_fields(std::string_view fields, std::size_t base_offset = 0);

// Splits on a delimiter keeping empty fields; returns (field, offset) pairs.
struct FieldRef {
  std::string_view text;
  std::size_t offset;
};
std::vector<FieldRef> split_fields(std::string_view s, char delim);

}  // namespace vocstress
