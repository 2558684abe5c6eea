#include "vocstress/archive.hpp"

#include <array>
#include <fstream>
#include <sstream>

#include "vocstress/error.hpp"
#include "vocstress/keyvalue.hpp"
#include "vocstress/text_codec.hpp"

namespace vocstress {

namespace {

constexpr std::string_view kMetaHeader = "[META]";
constexpr std::string_view kMarkersHeader = "[MARKERS]";
constexpr std::string_view kFramesHeader = "[FRAMES]";

void put_stat(KeyValues& kv, const std::string& prefix, const SummaryStat& s) {
  kv.set(prefix + ".mean", format_real(s.mean));
  kv.set(prefix + ".sd", format_real(s.sd));
}

SummaryStat get_stat(const KeyValues& kv, const std::string& prefix) {
  SummaryStat s;
  for (auto [suffix, slot] : {std::pair{".mean", &s.mean}, std::pair{".sd", &s.sd}}) {
    if (auto v = kv.get(prefix + suffix)) {
      auto parsed = parse_real(*v);
      if (!parsed) throw Error(ErrorCode::MalformedLine, "META " + prefix + suffix);
      *slot = *parsed;
    }
  }
  return s;
}

void check_single_line(const std::string& s, const std::string& what) {
  if (s.find_first_of("\r\n") != std::string::npos) {
    throw Error(ErrorCode::InvalidSpec, what + " must not contain line breaks");
  }
}

}  // namespace

std::string write_archive(const SessionRecord& record) {
  const ParticipantMeta& meta = record.meta;
  KeyValues kv;
  check_single_line(meta.id, "participant id");
  kv.set("id", meta.id);
  if (meta.age) kv.set("age", std::to_string(*meta.age));
  kv.set("gender", std::string(gender_name(meta.gender)));
  for (const auto& [key, value] : meta.confounds) {
    check_single_line(key + value, "confound " + key);
    kv.set("confound." + key, value);
  }
  for (const auto& [cp, value] : meta.stress_ratings) {
    kv.set("rating." + std::string(checkpoint_name(cp)), std::to_string(value));
  }
  for (std::size_t m = 0; m < kModalityCount; ++m) {
    kv.set("available." + std::string(modality_name(static_cast<Modality>(m))),
           record.channel_available[m] ? "1" : "0");
  }
  put_stat(kv, "env.temperature", record.environment.temperature);
  put_stat(kv, "env.humidity", record.environment.humidity);
  put_stat(kv, "env.pressure", record.environment.pressure);

  std::string out;
  out.reserve(record.frames.size() * 128 + 1024);
  out += kMetaHeader;
  out += '\n';
  out += kv.serialize();
  out += kMarkersHeader;
  out += '\n';
  for (const auto& m : record.markers) {
    check_single_line(m.event, "marker event");
    out += std::to_string(m.timestamp_ms);
    out += ',';
    out += m.event;
    out += '\n';
  }
  out += kFramesHeader;
  out += '\n';
  out += frame_header();
  out += '\n';
  for (const auto& f : record.frames) {
    out += format_frame_fields(f);
    out += '\n';
  }
  return out;
}

SessionRecord read_archive(std::string_view text) {
  enum class Section { None, Meta, Markers, Frames };
  Section section = Section::None;
  std::string meta_text;
  SessionRecord record;
  bool frame_header_seen = false;
  std::array<bool, 3> seen{};
  std::size_t line_no = 0;

  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    auto where = [&] { return "archive line " + std::to_string(line_no); };

    if (line == kMetaHeader) {
      section = Section::Meta;
      seen[0] = true;
      continue;
    }
    if (line == kMarkersHeader) {
      section = Section::Markers;
      seen[1] = true;
      continue;
    }
    if (line == kFramesHeader) {
      section = Section::Frames;
      seen[2] = true;
      continue;
    }
    switch (section) {
      case Section::None:
        if (!line.empty()) throw Error(ErrorCode::MalformedLine, where() + ": content before [META]");
        break;
      case Section::Meta:
        meta_text.append(line);
        meta_text += '\n';
        break;
      case Section::Markers: {
        if (line.empty()) break;
        const auto comma = line.find(',');
        const auto t = comma == std::string_view::npos ? std::nullopt : parse_int(line.substr(0, comma));
        if (!t) throw Error(ErrorCode::MalformedLine, where() + ": bad marker");
        record.markers.push_back({*t, std::string(line.substr(comma + 1))});
        break;
      }
      case Section::Frames:
        if (line.empty()) break;
        if (!frame_header_seen) {
          if (line != frame_header()) throw Error(ErrorCode::MalformedLine, where() + ": bad frame header");
          frame_header_seen = true;
          break;
        }
        try {
          record.frames.push_back(parse_frame_fields(line));
        } catch (const ParseError& e) {
          throw Error(ErrorCode::MalformedLine, where() + ": " + e.what());
        }
        break;
    }
  }

  if (!seen[0] || !seen[1] || !seen[2] || !frame_header_seen) {
    throw Error(ErrorCode::MalformedLine, "archive is missing a section");
  }
  const KeyValues kv = KeyValues::parse(meta_text);
  ParticipantMeta& meta = record.meta;
  meta.id = kv.get_string("id", "");
  if (kv.contains("age")) meta.age = static_cast<int>(kv.get_int("age", 0));
  const auto gender = gender_from_name(kv.get_string("gender", "unspecified"));
  if (!gender) throw Error(ErrorCode::MalformedLine, "META gender");
  meta.gender = *gender;
  for (const auto& [key, value] : kv.entries()) {
    if (key.rfind("confound.", 0) == 0) {
      meta.confounds[key.substr(9)] = value;
    } else if (key.rfind("rating.", 0) == 0) {
      const auto cp = checkpoint_from_name(key.substr(7));
      const auto v = parse_int(value);
      if (!cp || !v) throw Error(ErrorCode::MalformedLine, "META " + key);
      meta.stress_ratings[*cp] = static_cast<int>(*v);
    }
  }
  for (std::size_t m = 0; m < kModalityCount; ++m) {
    record.channel_available[m] =
        kv.get_bool("available." + std::string(modality_name(static_cast<Modality>(m))), true);
  }
  record.environment.temperature = get_stat(kv, "env.temperature");
  record.environment.humidity = get_stat(kv, "env.humidity");
  record.environment.pressure = get_stat(kv, "env.pressure");
  return record;
}

void save_archive(const SessionRecord& record, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out << write_archive(record);
  if (!out) throw Error(ErrorCode::Io, "write failed: " + path);
}

SessionRecord load_archive(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return read_archive(ss.str());
}

}  // namespace vocstress
