// tests/test_util.hpp

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

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "spectemb/common.hpp"

namespace spectemb::testing {

// Builds a WAV header + payload by hand, independent of the library encoder.
inline std::vector<unsigned char> MakeWavBytes(int format_tag, int channels,
                                               int rate, int bits,
                                               const std::vector<unsigned char> &payload) {
  std::vector<unsigned char> b;
  auto u32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back((v >> (8 * i)) & 0xff);
  };
  auto u16 = [&](std::uint16_t v) {
    b.push_back(v & 0xff);
    b.push_back(v >> 8);
  };
  auto tag = [&](const char *t) { b.insert(b.end(), t, t + 4); };
  tag("RIFF");
  u32(36 + std::uint32_t(payload.size()));
  tag("WAVE");
  tag("fmt ");
  u32(16);
  u16(std::uint16_t(format_tag));
  u16(std::uint16_t(channels));
  u32(std::uint32_t(rate));
  u32(std::uint32_t(rate * channels * bits / 8));
  u16(std::uint16_t(channels * bits / 8));
  u16(std::uint16_t(bits));
  tag("data");
  u32(std::uint32_t(payload.size()));
  b.insert(b.end(), payload.begin(), payload.end());
  return b;
}

inline std::vector<unsigned char> Int16Payload(const std::vector<std::int16_t> &v) {
  std::vector<unsigned char> p;
  for (auto s : v) {
    auto u = std::uint16_t(s);
    p.push_back(u & 0xff);
    p.push_back(u >> 8);
  }
  return p;
}

inline std::vector<unsigned char> Float32Payload(const std::vector<float> &v) {
  std::vector<unsigned char> p(v.size() * 4);
  std::memcpy(p.data(), v.data(), p.size());  // little-endian host
  return p;
}

/// Fresh, empty directory under the system temp dir.
inline std::filesystem::path TempDir(const std::string &name) {
  auto p = std::filesystem::temp_directory_path() / ("spectemb_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline std::string ReadFile(const std::filesystem::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Matrix RandomMatrix(Eigen::Index r, Eigen::Index c, Rng &rng) {
  Matrix m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = rng.Gaussian();
  return m;
}

}  // namespace spectemb::testing
