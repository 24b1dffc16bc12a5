// spectemb/archive.hpp

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

// Text feature archives.
//
//   #! kind=<name>
//   #! dims=<row length>
//   #! config_hash=<16 hex digits>
//   <key> [
//   v v v ...
//   ...
//   ]
//
// Every entry is a matrix whose rows have length `dims`; values are written
// with 9 significant digits, so write -> read -> write is byte-identical.

#pragma once

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "spectemb/common.hpp"
#include "spectemb/keyvalue.hpp"

namespace spectemb {

inline std::string HashHex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

class FeatureArchive {
 public:
  FeatureArchive() = default;
  FeatureArchive(std::string kind, Eigen::Index dims, std::string config_hash)
      : kind_(std::move(kind)), dims_(dims), config_hash_(std::move(config_hash)) {
    CheckHeader("<archive>");
  }

  const std::string &Kind() const { return kind_; }
  Eigen::Index Dims() const { return dims_; }
  const std::string &ConfigHash() const { return config_hash_; }
  std::size_t Size() const { return entries_.size(); }
  bool Has(const std::string &key) const { return index_.count(key) != 0; }

  const std::vector<std::pair<std::string, Matrix>> &Entries() const { return entries_; }

  const Matrix &Get(const std::string &key) const {
    auto it = index_.find(key);
    if (it == index_.end()) throw DataError("archive has no entry '" + key + "'");
    return entries_[it->second].second;
  }

  /// Adds a matrix whose rows are feature vectors.
  void Add(const std::string &key, Matrix rows) {
    if (key.empty() || key.find_first_of(" \t\n\r[]") != std::string::npos)
      throw ArgumentError("archive key '" + key + "' is empty or contains reserved characters");
    if (Has(key)) throw ArgumentError("duplicate archive key '" + key + "'");
    if (rows.cols() != dims_)
      throw ArgumentError("archive entry '" + key + "' has row length " +
                          std::to_string(rows.cols()) + ", archive dims is " +
                          std::to_string(dims_));
    if (!rows.allFinite()) throw NumericError("archive entry '" + key + "' is not finite");
    index_.emplace(key, entries_.size());
    entries_.emplace_back(key, std::move(rows));
  }

  /// Adds a single vector as a one-row entry.
  void AddVector(const std::string &key, const Vector &v) { Add(key, Matrix(v.transpose())); }

  std::string ToText() const {
    std::string out = "#! kind=" + kind_ + "\n#! dims=" + std::to_string(dims_) +
                      "\n#! config_hash=" + config_hash_ + "\n";
    char buf[32];
    for (const auto &[key, m] : entries_) {
      out += key + " [\n";
      for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
          std::snprintf(buf, sizeof buf, "%.9g", m(i, j));
          if (j) out += ' ';
          out += buf;
        }
        out += '\n';
      }
      out += "]\n";
    }
    return out;
  }

  void Write(const std::string &path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write archive " + path);
    out << ToText();
    if (!out) throw IoError("write failed: " + path);
  }

  static FeatureArchive Parse(const std::string &text, const std::string &origin = "<archive>") {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    auto fail = [&](const std::string &msg) -> void {
      throw FormatError(origin + ":" + std::to_string(lineno) + ": " + msg);
    };
    auto header = [&](const std::string &name) {
      ++lineno;
      if (!std::getline(in, line)) fail("missing '#! " + name + "=' header");
      const std::string prefix = "#! " + name + "=";
      if (line.rfind(prefix, 0) != 0) fail("expected '" + prefix + "...'");
      return line.substr(prefix.size());
    };
    FeatureArchive a;
    a.kind_ = header("kind");
    const std::string dims = header("dims");
    char *end = nullptr;
    const long long d = std::strtoll(dims.c_str(), &end, 10);
    if (dims.empty() || *end != '\0' || d < 1) fail("bad dims '" + dims + "'");
    a.dims_ = d;
    a.config_hash_ = header("config_hash");
    a.CheckHeader(origin);

    while (true) {
      ++lineno;
      if (!std::getline(in, line)) break;
      if (line.size() < 3 || line.compare(line.size() - 2, 2, " [") != 0)
        fail("expected '<key> ['");
      const std::string key = line.substr(0, line.size() - 2);
      std::vector<std::vector<double>> rows;
      bool closed = false;
      while (std::getline(in, line)) {
        ++lineno;
        if (line == "]") {
          closed = true;
          break;
        }
        std::vector<double> row;
        const char *p = line.c_str();
        while (*p) {
          char *e = nullptr;
          const double v = std::strtod(p, &e);
          if (e == p) fail("bad number in entry '" + key + "'");
          row.push_back(v);
          p = e;
          if (*p == ' ') ++p;
          else if (*p) fail("bad separator in entry '" + key + "'");
        }
        if (Eigen::Index(row.size()) != a.dims_)
          fail("entry '" + key + "' row has " + std::to_string(row.size()) + " values, dims is " +
               std::to_string(a.dims_));
        rows.push_back(std::move(row));
      }
      if (!closed) fail("entry '" + key + "' is not closed by ']'");
      Matrix m(Eigen::Index(rows.size()), a.dims_);
      for (std::size_t i = 0; i < rows.size(); ++i)
        for (Eigen::Index j = 0; j < a.dims_; ++j) m(Eigen::Index(i), j) = rows[i][std::size_t(j)];
      try {
        a.Add(key, std::move(m));
      } catch (const Error &err) {
        fail(err.what());
      }
    }
    return a;
  }

  static FeatureArchive Read(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open archive " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return Parse(ss.str(), path);
  }

 private:
  void CheckHeader(const std::string &origin) const {
    auto bad = [](const std::string &s) { return s.find_first_of("\n\r") != std::string::npos; };
    if (kind_.empty() || bad(kind_)) throw FormatError(origin + ": bad archive kind");
    if (dims_ < 1) throw FormatError(origin + ": archive dims must be >= 1");
    if (bad(config_hash_)) throw FormatError(origin + ": bad config hash");
  }

  std::string kind_;
  Eigen::Index dims_ = 0;
  std::string config_hash_;
  std::vector<std::pair<std::string, Matrix>> entries_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace spectemb
