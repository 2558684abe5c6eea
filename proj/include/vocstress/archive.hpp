#pragma once

// Session archive: a UTF-8, LF-terminated text container with META
// (key=value), MARKERS (timestamp_ms,event) and FRAMES (header + CSV rows)
// sections. Reals use shortest round-trip decimals, so read(write(r)) == r.

#include <string>
#include <string_view>

#include "vocstress/core_model.hpp"

namespace vocstress {

inline constexpr std::string_view kArchiveExtension = ".session";

std::string write_archive(const SessionRecord& record);
SessionRecord read_archive(std::string_view text);

void save_archive(const SessionRecord& record, const std::string& path);
SessionRecord load_archive(const std::string& path);

}  // namespace vocstress
