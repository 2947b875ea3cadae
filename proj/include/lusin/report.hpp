#pragma once

// Metrics reports: ordered key = value text, and field-by-field comparison.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "lusin/error.hpp"
#include "lusin/field_io.hpp"

namespace lusin::report {

inline constexpr const char* kVersion = "lusin 1.0.0";
inline constexpr const char* kMagic = "LUSIN-METRICS 1";

/// Keys that are never compared (they vary between identical runs).
inline bool volatile_key(const std::string& key) { return key == "wall_clock_seconds"; }

class MetricsReport {
 public:
  void add(const std::string& key, const std::string& value) {
    if (index_.count(key)) fail(ErrorKind::invalid_argument, "duplicate metric '" + key + "'");
    index_[key] = entries_.size();
    entries_.emplace_back(key, value);
  }
  void add(const std::string& key, double value) { add(key, io::format_double(value)); }
  void add(const std::string& key, int value) { add(key, std::to_string(value)); }
  void add(const std::string& key, std::size_t value) { add(key, std::to_string(value)); }
  void add(const std::string& key, bool value) { add(key, std::string(value ? "true" : "false")); }
  void add(const std::string& key, const char* value) { add(key, std::string(value)); }

  void set(const std::string& key, const std::string& value) {
    const auto it = index_.find(key);
    if (it == index_.end()) {
      add(key, value);
    } else {
      entries_[it->second].second = value;
    }
  }

  bool has(const std::string& key) const { return index_.count(key) != 0; }
  const std::string& get(const std::string& key) const {
    const auto it = index_.find(key);
    if (it == index_.end()) fail(ErrorKind::io_error, "missing metric '" + key + "'");
    return entries_[it->second].second;
  }
  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

  void write(std::ostream& os) const {
    os << kMagic << '\n';
    for (const auto& [k, v] : entries_) os << k << " = " << v << '\n';
  }

  static MetricsReport read(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line != kMagic) fail(ErrorKind::io_error, "not a metrics report");
    MetricsReport r;
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      const auto eq = line.find(" = ");
      if (eq == std::string::npos) fail(ErrorKind::io_error, "malformed metrics line '" + line + "'");
      r.add(line.substr(0, eq), line.substr(eq + 3));
    }
    return r;
  }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
  std::map<std::string, std::size_t> index_;
};

inline std::string hex64(std::uint64_t x) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
  return buf;
}

struct Difference {
  std::string key;
  std::string a, b;
  std::string reason;
};

struct Tolerances {
  double default_tol = 1e-12;
  std::map<std::string, double> per_key;
  double of(const std::string& key) const {
    const auto it = per_key.find(key);
    return it == per_key.end() ? default_tol : it->second;
  }
};

inline bool parse_number(const std::string& s, double& out) {
  try {
    out = io::parse_double(s);
    return true;
  } catch (const Error&) {
    return false;
  }
}

/// Differences beyond tolerance; numbers compare with |a - b| <= tol max(1, |a|, |b|).
inline std::vector<Difference> compare(const MetricsReport& a, const MetricsReport& b, const Tolerances& tol = {}) {
  if (!a.has("mode") || !b.has("mode") || a.get("mode") != b.get("mode"))
    fail(ErrorKind::fingerprint_mismatch, "reports are for different modes");
  if (!a.has("input_fingerprint") || !b.has("input_fingerprint") ||
      a.get("input_fingerprint") != b.get("input_fingerprint"))
    fail(ErrorKind::fingerprint_mismatch, "input fingerprints differ");
  std::vector<Difference> out;
  for (const auto& [key, va] : a.entries()) {
    if (volatile_key(key)) continue;
    if (!b.has(key)) {
      out.push_back({key, va, "", "missing in second report"});
      continue;
    }
    const std::string& vb = b.get(key);
    if (va == vb) continue;
    double x, y;
    if (parse_number(va, x) && parse_number(vb, y)) {
      const double scale = std::max({1.0, std::abs(x), std::abs(y)});
      if (std::abs(x - y) <= tol.of(key) * scale) continue;
      out.push_back({key, va, vb, "beyond tolerance"});
    } else {
      out.push_back({key, va, vb, "differs"});
    }
  }
  for (const auto& [key, vb] : b.entries())
    if (!volatile_key(key) && !a.has(key)) out.push_back({key, "", vb, "missing in first report"});
  return out;
}

}  // namespace lusin::report
