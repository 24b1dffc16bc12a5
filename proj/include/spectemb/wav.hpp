// spectemb/wav.hpp

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

// Minimal RIFF/WAVE codec: linear PCM (8/16/24/32-bit) and 32-bit IEEE float.

#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "spectemb/common.hpp"

namespace spectemb {

class EmptyAudioError : public FormatError {
 public:
  using FormatError::FormatError;
};

struct WavData {
  std::vector<double> samples;  // mono, in [-1, 1]
  int sample_rate = 0;
  int num_channels = 0;  // of the source file
};

namespace wav_detail {

inline std::uint32_t ReadU32(const unsigned char *p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) |
         (std::uint32_t(p[2]) << 16) | (std::uint32_t(p[3]) << 24);
}

inline std::uint16_t ReadU16(const unsigned char *p) {
  return std::uint16_t(p[0] | (p[1] << 8));
}

inline void PutU32(std::string &out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

inline void PutU16(std::string &out, std::uint16_t v) {
  out.push_back(char(v & 0xff));
  out.push_back(char(v >> 8));
}

inline double DecodeSample(const unsigned char *p, int bits, bool is_float) {
  if (is_float) {
    std::uint32_t u = ReadU32(p);
    float f;
    std::memcpy(&f, &u, sizeof f);
    return f;
  }
  switch (bits) {
    case 8:
      return (double(p[0]) - 128.0) / 128.0;
    case 16:
      return double(std::int16_t(ReadU16(p))) / 32768.0;
    case 24: {
      std::int32_t v = std::int32_t(std::uint32_t(p[0]) << 8 |
                                    std::uint32_t(p[1]) << 16 |
                                    std::uint32_t(p[2]) << 24) >> 8;
      return double(v) / 8388608.0;
    }
    case 32:
      return double(std::int32_t(ReadU32(p))) / 2147483648.0;
  }
  throw FormatError("unsupported bit depth " + std::to_string(bits));
}

}  // namespace wav_detail

/// Decodes a WAV byte buffer; multichannel frames are averaged to mono.
inline WavData DecodeWav(std::span<const unsigned char> bytes,
                         const std::string &name = "<buffer>") {
  using namespace wav_detail;
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw FormatError(name + ": not a RIFF/WAVE file");

  bool have_fmt = false;
  int format_tag = 0, channels = 0, rate = 0, block_align = 0, bits = 0;
  const unsigned char *data = nullptr;
  std::size_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char *chunk = bytes.data() + pos;
    std::size_t size = ReadU32(chunk + 4);
    std::size_t body = pos + 8;
    std::size_t avail = bytes.size() - body;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || size > avail)
        throw FormatError(name + ": truncated fmt chunk");
      const unsigned char *f = bytes.data() + body;
      format_tag = ReadU16(f);
      channels = ReadU16(f + 2);
      rate = int(ReadU32(f + 4));
      block_align = ReadU16(f + 12);
      bits = ReadU16(f + 14);
      if (format_tag == 0xFFFE) {
        if (size < 40) throw FormatError(name + ": truncated extensible fmt");
        format_tag = ReadU16(f + 24);  // first two bytes of the subformat GUID
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.data() + body;
      // Streaming writers sometimes leave the size unset; clamp to the file.
      data_size = std::min(size, avail);
      break;
    }
    pos = body + size + (size & 1);
  }

  if (!have_fmt) throw FormatError(name + ": missing fmt chunk");
  if (data == nullptr) throw FormatError(name + ": missing data chunk");
  const bool is_float = format_tag == 3;
  if (format_tag != 1 && !is_float)
    throw FormatError(name + ": unsupported format tag " +
                      std::to_string(format_tag));
  if (is_float && bits != 32)
    throw FormatError(name + ": only 32-bit float is supported");
  if (!is_float && bits != 8 && bits != 16 && bits != 24 && bits != 32)
    throw FormatError(name + ": unsupported bit depth " + std::to_string(bits));
  if (channels < 1 || rate <= 0)
    throw FormatError(name + ": bad channel count or sample rate");
  const int bytes_per_sample = bits / 8;
  if (block_align != bytes_per_sample * channels)
    throw FormatError(name + ": inconsistent block alignment");

  std::size_t frames = data_size / std::size_t(block_align);
  if (frames == 0) throw EmptyAudioError(name + ": no audio samples");

  WavData out;
  out.sample_rate = rate;
  out.num_channels = channels;
  out.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    const unsigned char *frame = data + i * std::size_t(block_align);
    double acc = 0.0;
    for (int c = 0; c < channels; ++c)
      acc += DecodeSample(frame + c * bytes_per_sample, bits, is_float);
    out.samples[i] = acc / channels;
  }
  return out;
}

inline WavData ReadWav(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return DecodeWav(bytes, path);
}

/// Encodes mono or interleaved multichannel samples as 16-bit PCM.
/// Samples are clipped to [-1, 1) before quantization.
inline std::string EncodeWav16(std::span<const double> interleaved,
                               int sample_rate, int channels = 1) {
  using namespace wav_detail;
  const std::uint32_t data_bytes = std::uint32_t(interleaved.size() * 2);
  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  PutU32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  PutU32(out, 16);
  PutU16(out, 1);
  PutU16(out, std::uint16_t(channels));
  PutU32(out, std::uint32_t(sample_rate));
  PutU32(out, std::uint32_t(sample_rate * channels * 2));
  PutU16(out, std::uint16_t(channels * 2));
  PutU16(out, 16);
  out += "data";
  PutU32(out, data_bytes);
  for (double s : interleaved) {
    double q = std::round(std::clamp(s, -1.0, 1.0) * 32768.0);
    q = std::clamp(q, -32768.0, 32767.0);
    PutU16(out, std::uint16_t(std::int16_t(q)));
  }
  return out;
}

inline void WriteWav16(const std::string &path, std::span<const double> samples,
                       int sample_rate, int channels = 1) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  const std::string bytes = EncodeWav16(samples, sample_rate, channels);
  out.write(bytes.data(), std::streamsize(bytes.size()));
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace spectemb
