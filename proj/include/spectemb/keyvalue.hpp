// spectemb/keyvalue.hpp

// Copyright 2026  The spectemb Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "spectemb/common.hpp"

namespace spectemb {

inline std::string Trim(const std::string &s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

/// Flat key=value settings. Blank lines and lines starting with '#' are
/// skipped. Getters record which keys were consumed so that callers can
/// reject typos via CheckAllUsed().
class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig Parse(const std::string &text,
                              const std::string &origin = "<string>") {
    KeyValueConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      std::string t = Trim(line);
      if (t.empty() || t[0] == '#') continue;
      auto eq = t.find('=');
      if (eq == std::string::npos)
        throw ConfigError(origin + ":" + std::to_string(lineno) +
                          ": expected key=value, got '" + t + "'");
      std::string key = Trim(t.substr(0, eq));
      if (key.empty())
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
      cfg.values_[key] = Trim(t.substr(eq + 1));
    }
    return cfg;
  }

  static KeyValueConfig Load(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    KeyValueConfig cfg = Parse(ss.str(), path);
    cfg.base_dir_ = std::filesystem::path(path).parent_path().string();
    return cfg;
  }

  bool Has(const std::string &key) const { return values_.count(key) != 0; }

  void Set(const std::string &key, const std::string &value) {
    values_[key] = value;
  }

  /// Directory of the file this config was loaded from ("" otherwise).
  const std::string &BaseDir() const { return base_dir_; }

  std::string GetString(const std::string &key, const std::string &dflt) const {
    used_.insert(key);
    auto it = values_.find(key);
    return it == values_.end() ? dflt : it->second;
  }

  double GetDouble(const std::string &key, double dflt) const {
    used_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return dflt;
    const char *b = it->second.c_str();
    char *e = nullptr;
    double v = std::strtod(b, &e);
    if (e == b || *e != '\0')
      throw ConfigError("key '" + key + "': not a number: '" + it->second + "'");
    return v;
  }

  long long GetInt(const std::string &key, long long dflt) const {
    used_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return dflt;
    long long v = 0;
    const std::string &s = it->second;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
      throw ConfigError("key '" + key + "': not an integer: '" + s + "'");
    return v;
  }

  bool GetBool(const std::string &key, bool dflt) const {
    used_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return dflt;
    const std::string &s = it->second;
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw ConfigError("key '" + key + "': not a boolean: '" + s + "'");
  }

  /// Throws ConfigError naming every key no getter has asked for.
  void CheckAllUsed() const {
    std::vector<std::string> unknown;
    for (const auto &[k, v] : values_)
      if (!used_.count(k)) unknown.push_back(k);
    if (unknown.empty()) return;
    std::string msg = "unknown config key(s):";
    for (const auto &k : unknown) msg += " " + k;
    throw ConfigError(msg);
  }

  const std::map<std::string, std::string> &Values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
  std::string base_dir_;
};

/// 64-bit FNV-1a; stable across platforms, used for config fingerprints.
inline std::uint64_t Fnv1a64(const std::string &s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Decimal text that parses back to the same double.
inline std::string FormatExact(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace spectemb
