// spectemb/binary_io.hpp

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

// Little-endian binary containers shared by the model files. Layout:
//   magic (8 bytes) | u32 version | records...
// where a record is a length-prefixed string, a u64, or a named matrix
// (name, i64 rows, i64 cols, rows*cols raw IEEE-754 doubles, column-major).

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "spectemb/common.hpp"

namespace spectemb {

static_assert(std::endian::native == std::endian::little,
              "model containers assume a little-endian host");

class BinaryWriter {
 public:
  BinaryWriter(const char (&magic)[9], std::uint32_t version) {
    buf_.append(magic, 8);
    PutU32(version);
  }

  void PutU32(std::uint32_t v) { Raw(&v, sizeof v); }
  void PutU64(std::uint64_t v) { Raw(&v, sizeof v); }
  void PutI64(std::int64_t v) { Raw(&v, sizeof v); }
  void PutDouble(double v) { Raw(&v, sizeof v); }

  void PutString(const std::string &s) {
    PutU64(s.size());
    buf_.append(s);
  }

  template <class Derived>
  void PutMatrix(const std::string &name, const Eigen::DenseBase<Derived> &m) {
    PutString(name);
    PutI64(m.rows());
    PutI64(m.cols());
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) PutDouble(m(i, j));
  }

  const std::string &Bytes() const { return buf_; }

  void WriteTo(const std::string &path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out.write(buf_.data(), std::streamsize(buf_.size()));
    if (!out) throw IoError("write failed: " + path);
  }

 private:
  void Raw(const void *p, std::size_t n) {
    buf_.append(static_cast<const char *>(p), n);
  }
  std::string buf_;
};

class BinaryReader {
 public:
  BinaryReader(std::string bytes, const char (&magic)[9], std::string origin)
      : buf_(std::move(bytes)), origin_(std::move(origin)) {
    if (buf_.size() < 12 || std::memcmp(buf_.data(), magic, 8) != 0)
      throw FormatError(origin_ + ": bad magic, expected " + std::string(magic, 8));
    pos_ = 8;
    version_ = GetU32();
  }

  static std::string Slurp(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  std::uint32_t Version() const { return version_; }

  std::uint32_t GetU32() { return Get<std::uint32_t>(); }
  std::uint64_t GetU64() { return Get<std::uint64_t>(); }
  std::int64_t GetI64() { return Get<std::int64_t>(); }
  double GetDouble() { return Get<double>(); }

  std::string GetString() {
    const std::uint64_t n = GetU64();
    Need(n);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  /// Reads a named matrix and checks name and shape against expectations.
  Matrix GetMatrix(const std::string &name, Eigen::Index rows, Eigen::Index cols) {
    const std::string got = GetString();
    if (got != name)
      throw FormatError(origin_ + ": expected record '" + name + "', found '" + got + "'");
    const std::int64_t r = GetI64(), c = GetI64();
    if (r != rows || c != cols)
      throw FormatError(origin_ + ": '" + name + "' has shape " + std::to_string(r) +
                        "x" + std::to_string(c) + ", expected " +
                        std::to_string(rows) + "x" + std::to_string(cols));
    Need(std::uint64_t(r * c) * sizeof(double));
    Matrix m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = Get<double>();
    return m;
  }

  void ExpectEnd() const {
    if (pos_ != buf_.size())
      throw FormatError(origin_ + ": trailing bytes after model data");
  }

 private:
  void Need(std::uint64_t n) const {
    if (n > buf_.size() - pos_) throw FormatError(origin_ + ": truncated file");
  }
  template <class T>
  T Get() {
    Need(sizeof(T));
    T v;
    std::memcpy(&v, buf_.data() + pos_, sizeof v);
    pos_ += sizeof v;
    return v;
  }

  std::string buf_;
  std::string origin_;
  std::size_t pos_ = 0;
  std::uint32_t version_ = 0;
};

}  // namespace spectemb
