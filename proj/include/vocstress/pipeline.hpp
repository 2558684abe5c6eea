#pragma once

// End-to-end run: simulate a cohort, extract features, evaluate all models
// under both regimes, analyze coupling and attribute, with property checks.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "vocstress/simulator.hpp"

namespace vocstress {

struct Check {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct Bundle {
  // Relative path -> file content.
  std::map<std::string, std::string> files;
  std::vector<Check> checks;

  bool passed() const;
  std::string checks_text() const;
};

struct ReproduceOptions {
  std::uint64_t seed = 42;
  std::size_t threads = 1;
  std::size_t n_perm = 1000;
  bool include_archives = true;
};

Bundle reproduce(const CohortSpec& spec, const ReproduceOptions& options);

// Writes every file under dir, creating subdirectories. Throws Io.
void write_bundle(const Bundle& bundle, const std::string& dir);

}  // namespace vocstress
