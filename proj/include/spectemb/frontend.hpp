// spectemb/frontend.hpp

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

// Audio ingestion, energy-based silence trimming and log mel filter-bank
// spectrograms (channels x frames).

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "spectemb/common.hpp"
#include "spectemb/keyvalue.hpp"
#include "spectemb/wav.hpp"

namespace spectemb {

struct AudioClip {
  std::vector<double> samples;
  int sample_rate = 0;
  std::string utterance_id;
  std::string speaker_id;
};

/// Log mel energies, one row per channel and one column per frame.
struct MelSpectrogram {
  Matrix values;
  std::string utterance_id;
  std::string speaker_id;
  double frame_length_ms = 25.0;
  double frame_shift_ms = 10.0;

  Eigen::Index Channels() const { return values.rows(); }
  Eigen::Index Frames() const { return values.cols(); }
};

class TooShortError : public ArgumentError {
 public:
  using ArgumentError::ArgumentError;
};

struct FrontendConfig {
  double frame_length_ms = 25.0;
  double frame_shift_ms = 10.0;
  int channels = 40;
  double preemphasis = 0.97;
  double low_freq = 20.0;
  double high_freq = 0.0;  // <= 0 means Nyquist
  double energy_floor = 1e-10;
  // Silence trimming.
  double vad_margin_db = 9.0;
  double vad_noise_percentile = 10.0;
  // Clips whose loudest frame is below this level are reported as silent.
  double vad_silence_db = -120.0;

  static FrontendConfig FromKeyValue(const KeyValueConfig &kv) {
    FrontendConfig c;
    c.frame_length_ms = kv.GetDouble("frame_length_ms", c.frame_length_ms);
    c.frame_shift_ms = kv.GetDouble("frame_shift_ms", c.frame_shift_ms);
    c.channels = int(kv.GetInt("channels", c.channels));
    c.preemphasis = kv.GetDouble("preemphasis", c.preemphasis);
    c.low_freq = kv.GetDouble("low_freq", c.low_freq);
    c.high_freq = kv.GetDouble("high_freq", c.high_freq);
    c.energy_floor = kv.GetDouble("energy_floor", c.energy_floor);
    c.vad_margin_db = kv.GetDouble("vad_margin_db", c.vad_margin_db);
    c.vad_noise_percentile =
        kv.GetDouble("vad_noise_percentile", c.vad_noise_percentile);
    c.vad_silence_db = kv.GetDouble("vad_silence_db", c.vad_silence_db);
    c.Validate();
    return c;
  }

  void Validate() const {
    if (!(frame_length_ms > 0) || !(frame_shift_ms > 0))
      throw ConfigError("frame length and shift must be positive");
    if (channels < 1) throw ConfigError("channels must be >= 1");
    if (!(preemphasis >= 0 && preemphasis < 1))
      throw ConfigError("preemphasis must be in [0, 1)");
    if (!(energy_floor > 0)) throw ConfigError("energy_floor must be > 0");
    if (!(low_freq >= 0)) throw ConfigError("low_freq must be >= 0");
    if (!(vad_margin_db >= 0)) throw ConfigError("vad_margin_db must be >= 0");
    if (!(vad_noise_percentile >= 0 && vad_noise_percentile <= 100))
      throw ConfigError("vad_noise_percentile must be in [0, 100]");
  }

  /// Canonical text of every field, for fingerprinting.
  std::string Canonical() const {
    return "frame_length_ms=" + FormatExact(frame_length_ms) +
           "\nframe_shift_ms=" + FormatExact(frame_shift_ms) +
           "\nchannels=" + std::to_string(channels) +
           "\npreemphasis=" + FormatExact(preemphasis) +
           "\nlow_freq=" + FormatExact(low_freq) +
           "\nhigh_freq=" + FormatExact(high_freq) +
           "\nenergy_floor=" + FormatExact(energy_floor) +
           "\nvad_margin_db=" + FormatExact(vad_margin_db) +
           "\nvad_noise_percentile=" + FormatExact(vad_noise_percentile) +
           "\nvad_silence_db=" + FormatExact(vad_silence_db) + "\n";
  }
};

struct Framing {
  std::size_t length = 0;  // samples per frame
  std::size_t shift = 0;   // samples between frame starts

  static Framing For(const FrontendConfig &cfg, int sample_rate) {
    Framing f;
    f.length = std::size_t(std::lround(sample_rate * cfg.frame_length_ms / 1000.0));
    f.shift = std::size_t(std::lround(sample_rate * cfg.frame_shift_ms / 1000.0));
    if (f.length == 0 || f.shift == 0)
      throw ConfigError("frame length/shift round to zero samples at " +
                        std::to_string(sample_rate) + " Hz");
    return f;
  }

  /// floor((n - length) / shift) + 1, or 0 when n < length.
  std::size_t NumFrames(std::size_t n) const {
    return n < length ? 0 : (n - length) / shift + 1;
  }
};

inline AudioClip LoadAudio(const std::string &path,
                           const std::string &utterance_id = "",
                           const std::string &speaker_id = "") {
  WavData w = ReadWav(path);
  return AudioClip{std::move(w.samples), w.sample_rate, utterance_id, speaker_id};
}

inline double MelScale(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

inline double InverseMelScale(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

/// Triangular filter weight of channel `c` (0-based) at frequency `hz`.
/// Triangles are linear on the mel axis with centers equally spaced
/// between low_freq and high_freq.
inline double MelFilterWeight(int c, double hz, int channels, double low_freq,
                              double high_freq) {
  const double mel_lo = MelScale(low_freq), mel_hi = MelScale(high_freq);
  const double delta = (mel_hi - mel_lo) / (channels + 1);
  const double left = mel_lo + c * delta, center = left + delta,
               right = center + delta;
  const double m = MelScale(hz);
  if (m <= left || m >= right) return 0.0;
  return m <= center ? (m - left) / (center - left) : (right - m) / (right - center);
}

inline double EffectiveHighFreq(const FrontendConfig &cfg, int sample_rate) {
  const double nyquist = 0.5 * sample_rate;
  return cfg.high_freq > 0 ? std::min(cfg.high_freq, nyquist) : nyquist;
}

inline std::size_t FftSizeFor(std::size_t frame_length) {
  std::size_t n = 1;
  while (n < frame_length) n <<= 1;
  return n;
}

/// channels x (fft_size/2 + 1) weights applied to the power spectrum.
inline Matrix MelFilterBank(const FrontendConfig &cfg, int sample_rate,
                            std::size_t fft_size) {
  const double hi = EffectiveHighFreq(cfg, sample_rate);
  if (!(cfg.low_freq < hi))
    throw ConfigError("low_freq must be below the upper band edge");
  const std::size_t bins = fft_size / 2 + 1;
  Matrix w(cfg.channels, Eigen::Index(bins));
  const double bin_hz = double(sample_rate) / double(fft_size);
  for (int c = 0; c < cfg.channels; ++c)
    for (std::size_t k = 0; k < bins; ++k)
      w(c, Eigen::Index(k)) =
          MelFilterWeight(c, double(k) * bin_hz, cfg.channels, cfg.low_freq, hi);
  return w;
}

/// Symmetric Hamming taper of length n.
inline std::vector<double> HammingWindow(std::size_t n) {
  std::vector<double> w(n, 1.0);
  if (n == 1) return w;
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * double(i) / double(n - 1));
  return w;
}

/// Mean-square energy of each frame.
inline std::vector<double> FrameMeanSquare(const std::vector<double> &x,
                                           const Framing &f) {
  std::size_t n = f.NumFrames(x.size());
  // A clip shorter than a frame is scored as a single frame.
  if (n == 0) {
    double acc = 0;
    for (double v : x) acc += v * v;
    return {x.empty() ? 0.0 : acc / double(x.size())};
  }
  std::vector<double> out(n);
  for (std::size_t t = 0; t < n; ++t) {
    double acc = 0;
    for (std::size_t i = 0; i < f.length; ++i) {
      double v = x[t * f.shift + i];
      acc += v * v;
    }
    out[t] = acc / double(f.length);
  }
  return out;
}

struct TrimResult {
  AudioClip clip;
  bool all_silent = false;
  std::size_t begin = 0;  // kept sample range of the input, [begin, end)
  std::size_t end = 0;
};

namespace frontend_detail {

inline double FrameDb(double mean_square) {
  return 10.0 * std::log10(std::max(mean_square, 1e-20));
}

// One trimming pass over `x`. Returns false when every frame is below the
// absolute silence level.
inline bool TrimPass(const std::vector<double> &x, const Framing &f,
                     const FrontendConfig &cfg, std::size_t *begin,
                     std::size_t *end) {
  std::vector<double> db = FrameMeanSquare(x, f);
  for (double &v : db) v = FrameDb(v);
  const double max_db = *std::max_element(db.begin(), db.end());
  if (max_db < cfg.vad_silence_db) return false;

  std::vector<double> sorted = db;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t rank = std::size_t(
      std::floor(cfg.vad_noise_percentile / 100.0 * double(sorted.size() - 1)));
  const double floor_db = sorted[rank];
  // Capped so that the loudest frame always survives and a clip of uniform
  // energy has nothing to trim.
  const double threshold =
      std::min(floor_db + cfg.vad_margin_db, max_db - cfg.vad_margin_db);

  std::size_t first = 0, last = db.size() - 1;
  while (db[first] < threshold) ++first;
  while (db[last] < threshold) --last;

  const std::size_t n = x.size();
  const std::size_t half = std::min(f.length, n) / 2;
  // Interior cut points sit at the centre of the outermost voiced frames.
  *begin = first == 0 ? 0 : first * f.shift + half;
  *end = last + 1 == db.size() ? n : last * f.shift + half + 1;
  if (*end - *begin < f.length) {
    const std::size_t len = std::min(f.length, n);
    const std::size_t mid = (*begin + *end) / 2;
    *begin = mid >= len / 2 ? mid - len / 2 : 0;
    *begin = std::min(*begin, n - len);
    *end = *begin + len;
  }
  return true;
}

}  // namespace frontend_detail

/// Removes leading and trailing low-energy frames. The noise floor is the
/// configured percentile of frame energies in dB; frames below
/// min(floor + margin, loudest - margin) count as silence. Passes repeat
/// until nothing changes, so the result is a fixed point of trimming.
inline TrimResult TrimSilence(const AudioClip &clip, const FrontendConfig &cfg) {
  if (clip.samples.empty()) throw EmptyAudioError("cannot trim an empty clip");
  const Framing f = Framing::For(cfg, clip.sample_rate);

  TrimResult r;
  r.begin = 0;
  r.end = clip.samples.size();
  std::vector<double> cur = clip.samples;
  bool first_pass = true;
  for (;;) {
    std::size_t b = 0, e = 0;
    if (!frontend_detail::TrimPass(cur, f, cfg, &b, &e)) {
      r.all_silent = first_pass;
      break;
    }
    first_pass = false;
    if (b == 0 && e == cur.size()) break;
    cur = std::vector<double>(cur.begin() + std::ptrdiff_t(b),
                              cur.begin() + std::ptrdiff_t(e));
    r.end = r.begin + e;
    r.begin += b;
  }
  r.clip = clip;
  r.clip.samples = std::move(cur);
  return r;
}

/// Log mel filter-bank spectrogram: pre-emphasis and a Hamming taper per
/// frame, power spectrum, triangular mel filters, log(max(energy, floor)).
inline MelSpectrogram ComputeMelSpectrogram(const AudioClip &clip,
                                            const FrontendConfig &cfg) {
  if (clip.sample_rate <= 0) throw ArgumentError("sample rate must be positive");
  const Framing f = Framing::For(cfg, clip.sample_rate);
  const std::size_t num_frames = f.NumFrames(clip.samples.size());
  if (num_frames == 0)
    throw TooShortError("clip '" + clip.utterance_id + "' has " +
                        std::to_string(clip.samples.size()) +
                        " samples, fewer than one frame (" +
                        std::to_string(f.length) + ")");

  const std::size_t nfft = FftSizeFor(f.length);
  const std::size_t bins = nfft / 2 + 1;
  const Matrix bank = MelFilterBank(cfg, clip.sample_rate, nfft);
  const std::vector<double> window = HammingWindow(f.length);

  Matrix power(static_cast<Eigen::Index>(bins),
               static_cast<Eigen::Index>(num_frames));
  Eigen::FFT<double> fft;
  std::vector<double> frame(nfft);
  std::vector<std::complex<double>> spectrum;
  for (std::size_t t = 0; t < num_frames; ++t) {
    const double *src = clip.samples.data() + t * f.shift;
    std::fill(frame.begin(), frame.end(), 0.0);
    for (std::size_t i = f.length; i-- > 1;)
      frame[i] = src[i] - cfg.preemphasis * src[i - 1];
    frame[0] = src[0] - cfg.preemphasis * src[0];
    for (std::size_t i = 0; i < f.length; ++i) frame[i] *= window[i];
    fft.fwd(spectrum, frame);
    for (std::size_t k = 0; k < bins; ++k)
      power(Eigen::Index(k), Eigen::Index(t)) = std::norm(spectrum[k]);
  }

  MelSpectrogram out;
  out.utterance_id = clip.utterance_id;
  out.speaker_id = clip.speaker_id;
  out.frame_length_ms = cfg.frame_length_ms;
  out.frame_shift_ms = cfg.frame_shift_ms;
  out.values = (bank * power).array().max(cfg.energy_floor).log().matrix();
  if (!out.values.allFinite())
    throw NumericError("non-finite mel energies for '" + clip.utterance_id + "'");
  return out;
}

}  // namespace spectemb
