#pragma once

// Flat key = value run configuration. `[section]` lines prefix the following
// keys with "section."; '#' starts a comment; unknown keys are errors.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "lusin/error.hpp"
#include "lusin/field_io.hpp"

namespace lusin::config {

/// Every accepted key with its default ("" = unset).
inline const std::map<std::string, std::string>& schema() {
  static const std::map<std::string, std::string> keys = {
      {"mode", ""},
      {"output.dir", "out"},
      {"field.source", "generator"},
      {"field.path", ""},
      {"field.generator", "zero"},
      {"field.amplitude", "1"},
      {"field.radius", "0.35"},
      {"field.center", ""},
      {"field.value", ""},
      {"field.seed", ""},
      {"field.modes", "4"},
      {"grid.dim", "2"},
      {"grid.cells", "64"},
      {"grid.h", ""},
      {"grid.bbox", ""},
      {"budget.eps", "0.1"},
      {"budget.eta", "0.05"},
      {"budget.theta", "0.01"},
      {"schedule.delta", "0.1"},
      {"schedule.kappa", "0.01"},
      {"schedule.eta", "0.05"},
      {"schedule.n_max", "6"},
      {"schedule.s", "0"},
      {"schedule.floor", ""},
      {"rough.max_level", "6"},
      {"rough.oversample", "2"},
      {"rough.sigma", "0"},
      {"rough.sampled_limit", "true"},
      {"rough.sampled_only", "false"},
      {"rough.repair", "0"},
      {"forms.form", "dx1"},
      {"forms.amplitude", "1"},
      {"forms.cells", "128"},
      {"forms.eps", "0.1"},
      {"diagnose.resolution", "128"},
      {"diagnose.axis", "0"},
      {"diagnose.angle", "0.1"},
      {"tolerance.compare", "1e-12"},
  };
  return keys;
}

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

class Config {
 public:
  Config() = default;

  static Config parse(std::istream& is) {
    Config c;
    std::string line, section;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']') fail(ErrorKind::config_error, "line " + std::to_string(lineno) + ": bad section");
        section = trim(line.substr(1, line.size() - 2));
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) fail(ErrorKind::config_error, "line " + std::to_string(lineno) + ": expected key = value");
      std::string key = trim(line.substr(0, eq));
      if (!section.empty()) key = section + "." + key;
      c.set(key, trim(line.substr(eq + 1)));
    }
    return c;
  }

  static Config load(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::config_error, "cannot read config '" + path + "'");
    return parse(in);
  }

  /// "key=value" override.
  void apply(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) fail(ErrorKind::config_error, "override '" + assignment + "' is not key=value");
    set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
  }

  void set(const std::string& key, const std::string& value) {
    if (!schema().count(key)) fail(ErrorKind::config_error, "unknown key '" + key + "'");
    values_[key] = value;
  }

  bool has(const std::string& key) const {
    const auto it = values_.find(key);
    return it != values_.end() && !it->second.empty();
  }

  std::string str(const std::string& key) const {
    const auto it = values_.find(key);
    if (it != values_.end()) return it->second;
    const auto d = schema().find(key);
    if (d == schema().end()) fail(ErrorKind::config_error, "unknown key '" + key + "'");
    return d->second;
  }

  double real(const std::string& key) const {
    try {
      return io::parse_double(str(key));
    } catch (const Error&) {
      fail(ErrorKind::config_error, "key '" + key + "' needs a number");
    }
  }

  int integer(const std::string& key) const {
    try {
      return io::parse_int(str(key));
    } catch (const Error&) {
      fail(ErrorKind::config_error, "key '" + key + "' needs an integer");
    }
  }

  std::uint64_t unsigned64(const std::string& key) const {
    const std::string s = str(key);
    std::uint64_t x = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), x);
    if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size())
      fail(ErrorKind::config_error, "key '" + key + "' needs an unsigned integer");
    return x;
  }

  bool boolean(const std::string& key) const {
    const std::string s = str(key);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    fail(ErrorKind::config_error, "key '" + key + "' needs true or false");
  }

  std::vector<double> reals(const std::string& key) const {
    std::vector<double> out;
    std::stringstream ss(str(key));
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      try {
        out.push_back(io::parse_double(item));
      } catch (const Error&) {
        fail(ErrorKind::config_error, "key '" + key + "' needs a comma separated list of numbers");
      }
    }
    return out;
  }

  /// Explicitly set keys, sorted.
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace lusin::config
