#include "vocstress/text_codec.hpp"

#include <charconv>
#include <cmath>
#include <system_error>

#include "vocstress/error.hpp"

namespace vocstress {

void append_real(std::string& out, double v, bool forced_decimal) {
  if (is_missing(v)) {
    out += kMissingText;
    return;
  }
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  const std::string_view text(buf, static_cast<std::size_t>(end - buf));
  out += text;
  if (forced_decimal && text.find_first_of(".eEni") == std::string_view::npos) out += ".0";
}

std::string format_real(double v, bool forced_decimal) {
  std::string s;
  append_real(s, v, forced_decimal);
  return s;
}

std::optional<double> parse_real(std::string_view s) noexcept {
  if (s == kMissingText) return kMissing;
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::optional<std::int64_t> parse_int(std::string_view s) noexcept {
  if (s.empty()) return std::nullopt;
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::vector<FieldRef> split_fields(std::string_view s, char delim) {
  std::vector<FieldRef> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(delim, start);
    if (pos == std::string_view::npos) {
      out.push_back({s.substr(start), start});
      return out;
    }
    out.push_back({s.substr(start, pos - start), start});
    start = pos + 1;
  }
}

std::string frame_header() {
  std::string out;
  for (const auto& info : frame_columns()) {
    if (!out.empty()) out += ',';
    out += info.name;
  }
  return out;
}

std::string format_frame_fields(const SensorFrame& f) {
  std::string out;
  out.reserve(160);
  for (const auto& info : frame_columns()) {
    if (info.column != FrameColumn::Timestamp) out += ',';
    switch (info.column) {
      case FrameColumn::Timestamp: out += std::to_string(f.timestamp_ms); break;
      case FrameColumn::RrIntervals:
        if (f.rr_intervals.empty()) {
          out += kMissingText;
        } else {
          for (std::size_t i = 0; i < f.rr_intervals.size(); ++i) {
            if (i > 0) out += ';';
            append_real(out, f.rr_intervals[i]);
          }
        }
        break;
      case FrameColumn::PhaseId: out += std::to_string(phase_number(f.phase)); break;
      default: append_real(out, *scalar_slot(f, info.column), info.forced_decimal); break;
    }
  }
  return out;
}

SensorFrame parse_frame_fields(std::string_view fields, std::size_t base_offset) {
  const auto parts = split_fields(fields, ',');
  if (parts.size() != kFrameColumnCount) {
    throw ParseError(base_offset + fields.size(),
                     "expected " + std::to_string(kFrameColumnCount) + " frame fields, got " +
                         std::to_string(parts.size()));
  }
  SensorFrame f;
  const auto& columns = frame_columns();
  for (std::size_t i = 0; i < kFrameColumnCount; ++i) {
    const FieldRef& field = parts[i];
    const std::size_t at = base_offset + field.offset;
    const auto& info = columns[i];
    switch (info.column) {
      case FrameColumn::Timestamp: {
        const auto t = parse_int(field.text);
        if (!t) throw ParseError(at, "timestamp is not an integer");
        f.timestamp_ms = *t;
        break;
      }
      case FrameColumn::RrIntervals: {
        if (field.text == kMissingText) break;
        for (const auto& rr : split_fields(field.text, ';')) {
          const auto v = parse_real(rr.text);
          if (!v || is_missing(*v)) throw ParseError(at + rr.offset, "bad rr interval");
          f.rr_intervals.push_back(*v);
        }
        break;
      }
      case FrameColumn::PhaseId: {
        const auto n = parse_int(field.text);
        const auto p = n ? phase_from_number(static_cast<int>(*n)) : std::nullopt;
        if (!p) throw ParseError(at, "phase_id must be 1..7");
        f.phase = *p;
        break;
      }
      default: {
        const auto v = parse_real(field.text);
        if (!v) throw ParseError(at, std::string(info.name) + " is not numeric");
        *scalar_slot(f, info.column) = *v;
        break;
      }
    }
  }
  return f;
}

}  // namespace vocstress
