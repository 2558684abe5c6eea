#pragma once

// The key=value text dialect used by archive META sections, cohort specs and
// CLI config files. '#' starts a comment line; blank lines are ignored.

#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace vocstress {

class KeyValues {
 public:
  static KeyValues parse(std::string_view text);
  static KeyValues load(const std::string& path);

  void set(std::string key, std::string value) { entries_[std::move(key)] = std::move(value); }
  bool contains(const std::string& key) const { return entries_.count(key) != 0; }
  std::optional<std::string> get(const std::string& key) const;

  // Typed accessors throw Error(InvalidSpec) on malformed values.
  double get_real(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;

  const std::map<std::string, std::string>& entries() const { return entries_; }
  std::string serialize() const;

 private:
  std::map<std::string, std::string> entries_;
};

}  // namespace vocstress
