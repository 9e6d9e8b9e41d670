#pragma once

#include <string>
#include <vector>

namespace treedp {

/// One labelled pass/fail entry produced by a property checker.
struct CheckEntry {
  std::string label;
  bool passed = false;
  std::string witness;  // empty on pass, diagnostic on fail
};

struct CheckReport {
  std::vector<CheckEntry> entries;

  bool all_passed() const {
    for (const auto& e : entries)
      if (!e.passed) return false;
    return true;
  }

  std::size_t failure_count() const {
    std::size_t n = 0;
    for (const auto& e : entries)
      if (!e.passed) ++n;
    return n;
  }

  void add(std::string label, bool passed, std::string witness = {}) {
    entries.push_back({std::move(label), passed, std::move(witness)});
  }

  void merge(const CheckReport& other) {
    entries.insert(entries.end(), other.entries.begin(), other.entries.end());
  }

  std::string to_string() const {
    std::string out;
    for (const auto& e : entries) {
      out += e.passed ? "PASS " : "FAIL ";
      out += e.label;
      if (!e.witness.empty()) {
        out += " : ";
        out += e.witness;
      }
      out += '\n';
    }
    return out;
  }
};

}  // namespace treedp
