// spectemb/synth.hpp

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

// Synthetic voiced audio for demos and tests: harmonic "vowels" with a
// speaker-specific pitch and spectral slope, separated by short pauses and
// padded with low-level noise.

#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include "spectemb/common.hpp"
#include "spectemb/wav.hpp"

namespace spectemb {

struct SynthVoice {
  double f0 = 120.0;         // Hz
  double slope_db = -6.0;    // per harmonic octave
  double rate = 1.0;         // syllables are 1/rate times as long
};

inline std::vector<double> SynthesizeUtterance(const SynthVoice &voice, int syllables,
                                               int sample_rate, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> x;
  auto pad = [&](double seconds) {
    const std::size_t n = std::size_t(seconds * sample_rate);
    for (std::size_t i = 0; i < n; ++i) x.push_back(1e-4 * rng.Gaussian());
  };
  pad(0.2);
  for (int s = 0; s < syllables; ++s) {
    const double dur = rng.Uniform(0.15, 0.3) / voice.rate;
    const std::size_t n = std::size_t(dur * sample_rate);
    const double f0 = voice.f0 * rng.Uniform(0.9, 1.1);
    const double formant = rng.Uniform(400.0, 2500.0);
    double phase = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double env = std::sin(std::numbers::pi * double(i) / double(n));
      phase += 2.0 * std::numbers::pi * f0 / sample_rate;
      double v = 0.0;
      for (int h = 1; f0 * h < 0.45 * sample_rate; ++h) {
        const double hz = f0 * h;
        const double gain_db = voice.slope_db * std::log2(double(h)) -
                               12.0 * std::pow((hz - formant) / 800.0, 2);
        v += std::pow(10.0, gain_db / 20.0) * std::sin(h * phase);
      }
      x.push_back(0.2 * env * v + 1e-3 * rng.Gaussian());
    }
    pad(rng.Uniform(0.03, 0.08));
  }
  pad(0.2);
  double peak = 0;
  for (double v : x) peak = std::max(peak, std::abs(v));
  if (peak > 0.9)
    for (double &v : x) v *= 0.9 / peak;
  return x;
}

struct SynthUtteranceSpec {
  std::string utterance_id;
  std::string speaker_id;
  std::string severity;  // may be empty
  std::string age;       // "aged", "nonaged" or empty for "-"
  SynthVoice voice;
  int syllables = 6;
  std::uint64_t seed = 1;
};

/// Writes one WAV per spec plus a tab-separated manifest
/// "utt spk path severity age" into `dir`. Returns the manifest path.
inline std::string WriteSynthCorpus(const std::filesystem::path &dir,
                                    const std::vector<SynthUtteranceSpec> &specs,
                                    int sample_rate = 16000) {
  std::filesystem::create_directories(dir / "wav");
  std::string manifest = "# utterance_id\tspeaker_id\taudio_path\tseverity\tage\n";
  for (const auto &s : specs) {
    const std::string rel = "wav/" + s.utterance_id + ".wav";
    WriteWav16((dir / rel).string(),
               SynthesizeUtterance(s.voice, s.syllables, sample_rate, s.seed), sample_rate, 1);
    manifest += s.utterance_id + "\t" + s.speaker_id + "\t" + rel + "\t" +
                (s.severity.empty() ? "-" : s.severity) + "\t" + (s.age.empty() ? "-" : s.age) + "\n";
  }
  const std::string path = (dir / "manifest.tsv").string();
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << manifest;
  return path;
}

/// A small corpus: `speakers` speakers with `per_speaker` utterances,
/// alternating severity "mild"/"severe" and age "nonaged"/"aged".
inline std::vector<SynthUtteranceSpec> DemoCorpusSpecs(int speakers, int per_speaker,
                                                       std::uint64_t seed = 7) {
  std::vector<SynthUtteranceSpec> out;
  Rng rng(seed);
  for (int s = 0; s < speakers; ++s) {
    SynthVoice v;
    v.f0 = (s % 2 ? 190.0 : 110.0) * rng.Uniform(0.9, 1.1);
    v.slope_db = s % 2 ? rng.Uniform(-10.0, -7.0) : rng.Uniform(-5.0, -2.0);
    v.rate = s % 2 ? rng.Uniform(0.6, 0.8) : rng.Uniform(1.0, 1.3);
    char spk[16];
    std::snprintf(spk, sizeof spk, "S%02d", s + 1);
    for (int u = 0; u < per_speaker; ++u) {
      SynthUtteranceSpec sp;
      sp.speaker_id = spk;
      sp.utterance_id = std::string(spk) + "_U" + std::to_string(u + 1);
      sp.severity = s % 2 ? "severe" : "mild";
      sp.age = s % 2 ? "aged" : "nonaged";
      sp.voice = v;
      sp.syllables = 4 + int(rng.Index(4));
      sp.seed = rng.NextBits();
      out.push_back(sp);
    }
  }
  return out;
}

}  // namespace spectemb
