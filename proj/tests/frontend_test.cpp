// tests/frontend_test.cpp

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

#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "spectemb/frontend.hpp"
#include "spectemb/manifest.hpp"
#include "test_util.hpp"

namespace spectemb {
namespace {

using testing::Float32Payload;
using testing::Int16Payload;
using testing::MakeWavBytes;

std::vector<double> Sine(double hz, int rate, std::size_t n, double amp = 1.0) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i)
    x[i] = amp * std::sin(2.0 * std::numbers::pi * hz * double(i) / rate);
  return x;
}

AudioClip Clip(std::vector<double> x, int rate = 16000) {
  return AudioClip{std::move(x), rate, "utt", "spk"};
}

TEST(WavTest, Int16ScalesByTwoToFifteen) {
  auto bytes = MakeWavBytes(1, 1, 16000, 16, Int16Payload({0, 16384, -16384}));
  WavData w = DecodeWav(bytes);
  ASSERT_EQ(w.samples.size(), 3u);
  EXPECT_EQ(w.samples[0], 0.0);
  EXPECT_EQ(w.samples[1], 0.5);
  EXPECT_EQ(w.samples[2], -0.5);
  EXPECT_EQ(w.sample_rate, 16000);
}

TEST(WavTest, StereoIsAveragedToMono) {
  auto bytes = MakeWavBytes(3, 2, 16000, 32, Float32Payload({1.0f, 0.0f}));
  WavData w = DecodeWav(bytes);
  ASSERT_EQ(w.samples.size(), 1u);
  EXPECT_EQ(w.samples[0], 0.5);
  EXPECT_EQ(w.num_channels, 2);
}

TEST(WavTest, HeaderSampleRateIsEchoed) {
  auto bytes = MakeWavBytes(1, 1, 8000, 16,
                            Int16Payload(std::vector<std::int16_t>(8000, 7)));
  WavData w = DecodeWav(bytes);
  EXPECT_EQ(w.sample_rate, 8000);
  EXPECT_EQ(w.samples.size(), 8000u);
}

TEST(WavTest, OtherBitDepths) {
  // 8-bit is unsigned with a 128 offset.
  auto b8 = MakeWavBytes(1, 1, 8000, 8, {128, 192, 64});
  WavData w8 = DecodeWav(b8);
  EXPECT_EQ(w8.samples[0], 0.0);
  EXPECT_EQ(w8.samples[1], 0.5);
  EXPECT_EQ(w8.samples[2], -0.5);
  // 24-bit: 0x400000 = 2^22 -> 0.5, 0xC00000 -> -0.5
  auto b24 = MakeWavBytes(1, 1, 8000, 24, {0x00, 0x00, 0x40, 0x00, 0x00, 0xC0});
  WavData w24 = DecodeWav(b24);
  EXPECT_EQ(w24.samples[0], 0.5);
  EXPECT_EQ(w24.samples[1], -0.5);
  // 32-bit int: 2^30 -> 0.5
  auto b32 = MakeWavBytes(1, 1, 8000, 32, {0x00, 0x00, 0x00, 0x40});
  EXPECT_EQ(DecodeWav(b32).samples[0], 0.5);
}

TEST(WavTest, MalformedHeaderIsFormatError) {
  std::vector<unsigned char> junk = {'R', 'I', 'F', 'X', 0, 0, 0, 0, 'W', 'A', 'V', 'E'};
  EXPECT_THROW(DecodeWav(junk), FormatError);
  auto bad_tag = MakeWavBytes(2, 1, 8000, 16, Int16Payload({1, 2}));
  EXPECT_THROW(DecodeWav(bad_tag), FormatError);
  auto truncated = MakeWavBytes(1, 1, 8000, 16, Int16Payload({1, 2}));
  truncated.resize(30);
  EXPECT_THROW(DecodeWav(truncated), FormatError);
}

TEST(WavTest, ZeroLengthPayloadIsEmptyAudioError) {
  auto bytes = MakeWavBytes(1, 1, 8000, 16, {});
  EXPECT_THROW(DecodeWav(bytes), EmptyAudioError);
}

TEST(WavTest, EncoderRoundTripsThroughFile) {
  auto dir = testing::TempDir("wav");
  std::vector<double> x = {0.0, 0.25, -0.75, 0.5};
  WriteWav16((dir / "a.wav").string(), x, 22050);
  AudioClip c = LoadAudio((dir / "a.wav").string(), "u", "s");
  EXPECT_EQ(c.sample_rate, 22050);
  ASSERT_EQ(c.samples.size(), x.size());
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(c.samples[i], x[i]);
  EXPECT_THROW(LoadAudio((dir / "missing.wav").string()), IoError);
}

TEST(TrimSilenceTest, RemovesSilenceAroundSine) {
  const int rate = 16000;
  std::vector<double> x(8000, 0.0);
  auto s = Sine(440.0, rate, 16000);
  x.insert(x.end(), s.begin(), s.end());
  x.insert(x.end(), 8000, 0.0);
  TrimResult r = TrimSilence(Clip(x), FrontendConfig{});
  EXPECT_FALSE(r.all_silent);
  const long hop = 160;
  EXPECT_LE(std::labs(long(r.begin) - 8000), hop);
  EXPECT_LE(std::labs(long(r.end) - 24000), hop);
  EXPECT_EQ(r.clip.samples.size(), r.end - r.begin);
  EXPECT_EQ(r.clip.samples[0], x[r.begin]);
}

TEST(TrimSilenceTest, AllZerosIsFlaggedAndReturnedUnchanged) {
  std::vector<double> x(16000, 0.0);
  TrimResult r = TrimSilence(Clip(x), FrontendConfig{});
  EXPECT_TRUE(r.all_silent);
  EXPECT_EQ(r.clip.samples, x);
}

TEST(TrimSilenceTest, UniformWhiteNoiseIsUnchanged) {
  Rng rng(7);
  std::vector<double> x(32000);
  for (auto &v : x) v = rng.Uniform(-0.3, 0.3);
  FrontendConfig cfg;
  TrimResult r = TrimSilence(Clip(x), cfg);
  EXPECT_FALSE(r.all_silent);
  EXPECT_EQ(r.clip.samples, x);

  // Oracle: scan frame energies directly and confirm that none falls below
  // the trimming threshold.
  const std::size_t len = 400, hop = 160;
  std::vector<double> db;
  for (std::size_t t = 0; t + len <= x.size(); t += hop) {
    double e = 0;
    for (std::size_t i = 0; i < len; ++i) e += x[t + i] * x[t + i];
    db.push_back(10.0 * std::log10(e / len));
  }
  std::vector<double> sorted = db;
  std::sort(sorted.begin(), sorted.end());
  double floor_db = sorted[std::size_t(0.1 * double(sorted.size() - 1))];
  double max_db = sorted.back();
  double threshold = std::min(floor_db + cfg.vad_margin_db, max_db - cfg.vad_margin_db);
  for (double d : db) EXPECT_GE(d, threshold);
}

TEST(TrimSilenceTest, IsIdempotentOnRandomBursts) {
  Rng rng(11);
  FrontendConfig cfg;
  for (int trial = 0; trial < 20; ++trial) {
    std::size_t lead = rng.Index(12000), body = 2000 + rng.Index(20000),
                tail = rng.Index(12000);
    std::vector<double> x(lead, 0.0);
    for (std::size_t i = 0; i < lead; ++i) x[i] = 1e-4 * rng.Gaussian();
    for (std::size_t i = 0; i < body; ++i)
      x.push_back(rng.Uniform(0.1, 0.9) * std::sin(0.05 * double(i)) +
                  0.05 * rng.Gaussian());
    for (std::size_t i = 0; i < tail; ++i) x.push_back(1e-4 * rng.Gaussian());
    TrimResult once = TrimSilence(Clip(x), cfg);
    TrimResult twice = TrimSilence(once.clip, cfg);
    EXPECT_EQ(once.clip.samples, twice.clip.samples) << "trial " << trial;
    EXPECT_FALSE(once.clip.samples.empty());
  }
}

TEST(MelSpectrogramTest, FramingArithmetic) {
  MelSpectrogram m = ComputeMelSpectrogram(Clip(Sine(300, 16000, 16000)), {});
  EXPECT_EQ(m.Frames(), 98);
  EXPECT_EQ(m.Channels(), 40);

  Rng rng(3);
  Framing f = Framing::For(FrontendConfig{}, 16000);
  for (int i = 0; i < 30; ++i) {
    std::size_t n = 400 + rng.Index(5000);
    std::vector<double> x(n);
    for (auto &v : x) v = rng.Uniform(-1, 1);
    auto spec = ComputeMelSpectrogram(Clip(x), {});
    EXPECT_EQ(std::size_t(spec.Frames()), (n - 400) / 160 + 1);
    EXPECT_EQ(std::size_t(spec.Frames()), f.NumFrames(n));
    EXPECT_TRUE(spec.values.allFinite());
  }
}

TEST(MelSpectrogramTest, SilenceSitsAtTheFloor) {
  FrontendConfig cfg;
  MelSpectrogram m = ComputeMelSpectrogram(Clip(std::vector<double>(4000, 0.0)), cfg);
  EXPECT_LE((m.values.array() - std::log(cfg.energy_floor)).abs().maxCoeff(), 1e-12);
}

TEST(MelSpectrogramTest, SinePeaksInTheChannelContainingItsFrequency) {
  FrontendConfig cfg;
  const int rate = 16000;
  MelSpectrogram m = ComputeMelSpectrogram(Clip(Sine(440.0, rate, rate)), cfg);
  // Oracle: evaluate each triangular filter at 440 Hz directly.
  int expected = -1;
  double best = -1.0;
  for (int c = 0; c < cfg.channels; ++c) {
    double w = MelFilterWeight(c, 440.0, cfg.channels, cfg.low_freq, rate / 2.0);
    if (w > best) {
      best = w;
      expected = c;
    }
  }
  Eigen::Index got = 0;
  m.values.rowwise().mean().maxCoeff(&got);
  EXPECT_EQ(got, expected);
}

TEST(MelSpectrogramTest, GainShiftsLogEnergyByLogGainSquared) {
  Rng rng(5);
  std::vector<double> x(8000);
  for (auto &v : x) v = 0.1 * rng.Gaussian();
  const double g = 3.0;
  std::vector<double> y = x;
  for (auto &v : y) v *= g;
  FrontendConfig cfg;
  Matrix a = ComputeMelSpectrogram(Clip(x), cfg).values;
  Matrix b = ComputeMelSpectrogram(Clip(y), cfg).values;
  const double floor = std::log(cfg.energy_floor);
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a(i) <= floor) continue;
    EXPECT_NEAR(b(i) - a(i), std::log(g * g), 1e-9);
  }
}

TEST(MelSpectrogramTest, ShorterThanOneFrameIsRejected) {
  EXPECT_THROW(ComputeMelSpectrogram(Clip(std::vector<double>(399, 0.1)), {}),
               TooShortError);
}

TEST(MelSpectrogramTest, ConfigOverridesAreHonoured) {
  auto kv = KeyValueConfig::Parse("channels=24\nframe_length_ms=20\nframe_shift_ms=5\n");
  FrontendConfig cfg = FrontendConfig::FromKeyValue(kv);
  kv.CheckAllUsed();
  MelSpectrogram m = ComputeMelSpectrogram(Clip(Sine(1000, 8000, 8000), 8000), cfg);
  EXPECT_EQ(m.Channels(), 24);
  EXPECT_EQ(m.Frames(), (8000 - 160) / 40 + 1);
  EXPECT_THROW(FrontendConfig::FromKeyValue(KeyValueConfig::Parse("channels=0")),
               ConfigError);
  auto typo = KeyValueConfig::Parse("chanels=40");
  FrontendConfig::FromKeyValue(typo);
  EXPECT_THROW(typo.CheckAllUsed(), ConfigError);
}

TEST(ManifestTest, ParsesRecordsAndSkipsComments) {
  std::string text =
      "# utt\tspk\tpath\tsev\tage\n"
      "u1\tA\ta.wav\thigh\taged\n"
      "u2\tB\t/abs/b.wav\tlow\tnonaged\n";
  CorpusManifest m = ParseManifest(text, "/data");
  ASSERT_EQ(m.entries.size(), 2u);
  EXPECT_EQ(m.entries[0].audio_path, "/data/a.wav");
  EXPECT_EQ(m.entries[1].audio_path, "/abs/b.wav");
  EXPECT_EQ(*m.entries[0].severity, "high");
  EXPECT_TRUE(*m.entries[0].aged);
  EXPECT_FALSE(*m.entries[1].aged);
  EXPECT_EQ(m.Speakers(), (std::vector<std::string>{"A", "B"}));
  EXPECT_EQ(m.SeverityClasses(), (std::vector<std::string>{"high", "low"}));
}

TEST(ManifestTest, ReportsEveryBadLine) {
  std::string text =
      "u1\tA\ta.wav\thigh\t-\n"
      "u1\tA\tb.wav\thigh\t-\n"         // duplicate id
      "u3\tA\tc.wav\n"                  // too few fields
      "u4\tB\td.wav\tlow\told\n";       // bad age label
  try {
    ParseManifest(text);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError &e) {
    std::string msg = e.what();
    EXPECT_NE(msg.find(":2:"), std::string::npos);
    EXPECT_NE(msg.find(":3:"), std::string::npos);
    EXPECT_NE(msg.find(":4:"), std::string::npos);
  }
  EXPECT_THROW(ParseManifest("u1\tA\ta.wav\thigh\t-\nu2\tA\tb.wav\t-\t-\n"),
               ValidationError);
  EXPECT_THROW(ParseManifest("# only comments\n"), ValidationError);
}

}  // namespace
}  // namespace spectemb
