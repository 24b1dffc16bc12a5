// spectemb/manifest.hpp

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

// Corpus manifest: one tab-separated record per line
//   utterance_id  speaker_id  audio_path  severity_label|-  aged|nonaged|-

#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "spectemb/common.hpp"

namespace spectemb {

struct ManifestEntry {
  std::string utterance_id;
  std::string speaker_id;
  std::string audio_path;  // resolved against the manifest's directory
  std::optional<std::string> severity;
  std::optional<bool> aged;
};

struct CorpusManifest {
  std::vector<ManifestEntry> entries;

  /// Sorted distinct speaker ids; position is the speaker index.
  std::vector<std::string> Speakers() const {
    std::set<std::string> s;
    for (const auto &e : entries) s.insert(e.speaker_id);
    return {s.begin(), s.end()};
  }

  /// Sorted distinct severity labels.
  std::vector<std::string> SeverityClasses() const {
    std::set<std::string> s;
    for (const auto &e : entries)
      if (e.severity) s.insert(*e.severity);
    return {s.begin(), s.end()};
  }

  bool HasSeverity() const {
    return !entries.empty() && entries.front().severity.has_value();
  }
  bool HasAge() const {
    return !entries.empty() && entries.front().aged.has_value();
  }

  const ManifestEntry *Find(const std::string &utterance_id) const {
    for (const auto &e : entries)
      if (e.utterance_id == utterance_id) return &e;
    return nullptr;
  }

  /// utterance id -> speaker id
  std::map<std::string, std::string> SpeakerOf() const {
    std::map<std::string, std::string> m;
    for (const auto &e : entries) m[e.utterance_id] = e.speaker_id;
    return m;
  }
};

namespace manifest_detail {

inline std::vector<std::string> SplitTabs(const std::string &line) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  for (;;) {
    auto tab = line.find('\t', pos);
    out.push_back(line.substr(pos, tab == std::string::npos ? tab : tab - pos));
    if (tab == std::string::npos) break;
    pos = tab + 1;
  }
  return out;
}

}  // namespace manifest_detail

/// Parses manifest text. All problems are collected and reported together
/// in one ValidationError, one per line.
inline CorpusManifest ParseManifest(const std::string &text,
                                    const std::string &base_dir = "",
                                    const std::string &origin = "<manifest>") {
  CorpusManifest m;
  std::vector<std::string> problems;
  std::vector<int> line_of;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  auto bad = [&](const std::string &msg) {
    problems.push_back(origin + ":" + std::to_string(lineno) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto f = manifest_detail::SplitTabs(line);
    if (f.size() != 5) {
      bad("expected 5 tab-separated fields, got " + std::to_string(f.size()));
      continue;
    }
    ManifestEntry e;
    e.utterance_id = f[0];
    e.speaker_id = f[1];
    if (e.utterance_id.empty() || e.speaker_id.empty() || f[2].empty()) {
      bad("empty utterance id, speaker id or audio path");
      continue;
    }
    if (!seen.insert(e.utterance_id).second) {
      bad("duplicate utterance id '" + e.utterance_id + "'");
      continue;
    }
    std::filesystem::path p(f[2]);
    e.audio_path = (p.is_relative() && !base_dir.empty())
                       ? (std::filesystem::path(base_dir) / p).string()
                       : p.string();
    if (f[3] != "-") e.severity = f[3];
    if (f[4] == "aged") {
      e.aged = true;
    } else if (f[4] == "nonaged") {
      e.aged = false;
    } else if (f[4] != "-") {
      bad("age label must be aged, nonaged or -, got '" + f[4] + "'");
      continue;
    }
    m.entries.push_back(std::move(e));
    line_of.push_back(lineno);
  }

  // A label column is either filled on every record or on none.
  if (!m.entries.empty()) {
    const bool sev = m.entries.front().severity.has_value();
    const bool age = m.entries.front().aged.has_value();
    for (std::size_t i = 0; i < m.entries.size(); ++i) {
      const auto &e = m.entries[i];
      if (e.severity.has_value() != sev)
        problems.push_back(origin + ":" + std::to_string(line_of[i]) +
                           ": severity label present on some records only");
      if (e.aged.has_value() != age)
        problems.push_back(origin + ":" + std::to_string(line_of[i]) +
                           ": age label present on some records only");
    }
  }
  if (m.entries.empty() && problems.empty())
    problems.push_back(origin + ": no records");

  if (!problems.empty()) {
    std::string msg = "manifest validation failed:";
    for (const auto &p : problems) msg += "\n  " + p;
    throw ValidationError(msg);
  }
  return m;
}

inline CorpusManifest LoadManifest(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read manifest: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ParseManifest(ss.str(),
                       std::filesystem::path(path).parent_path().string(), path);
}

}  // namespace spectemb
