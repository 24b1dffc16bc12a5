// spectemb/toy.hpp

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

// Small synthetic speaker-adaptation experiment.
//
// A corpus of log-mel "utterances" is generated from shared frame-class
// templates. Each speaker applies its own spectral tilt (a linear ramp
// over channels) and tempo (segment-length factor); the sign of the tilt
// separates two severity groups. Speaker embeddings are extracted from the
// training utterances with the regular pipeline and then two identical
// softmax-regression frame classifiers are trained, one on the acoustic
// frames and one on frames with the speaker embedding appended. Frame
// error rates are measured on held-out utterances of the same speakers.

#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "spectemb/common.hpp"
#include "spectemb/keyvalue.hpp"
#include "spectemb/pipeline.hpp"

namespace spectemb {

struct ToyConfig {
  int speakers = 8;
  int utterances_per_speaker = 12;
  int test_utterances_per_speaker = 4;
  int classes = 5;
  int segments_per_utterance = 12;
  int segment_frames = 6;
  int channels = 40;
  double tilt_min = 1.0;
  double tilt_max = 4.0;
  double tempo_spread = 0.3;
  double noise = 2.0;
  bool speaker_variation = true;
  int seeds = 5;
  std::uint64_t seed = 1;
  int classifier_iterations = 300;
  double classifier_learning_rate = 0.5;
  PipelineConfig pipeline = DefaultPipeline();

  static PipelineConfig DefaultPipeline() {
    PipelineConfig p;
    p.feature_kind = FeatureKind::kSpectral;
    p.d_s = 2;
    p.validation_fraction = 0.0;
    p.network.hidden_dims = {64, 64, 64, kBottleneckDim};
    p.network.bottleneck_proj_dim = 16;
    p.network.dropout_rate = 0.1;
    p.network.use_speaker_task = true;
    p.network.mtl_weight = 0.5;
    p.network.learning_rate = 0.01;
    p.network.batch_size = 16;
    p.network.epochs = 40;
    return p;
  }

  /// Reads toy_* keys; any pipeline keys present override the toy pipeline
  /// defaults.
  static ToyConfig FromKeyValue(const KeyValueConfig &kv) {
    ToyConfig c;
    c.speakers = int(kv.GetInt("toy_speakers", c.speakers));
    c.utterances_per_speaker = int(kv.GetInt("toy_utterances_per_speaker", c.utterances_per_speaker));
    c.test_utterances_per_speaker =
        int(kv.GetInt("toy_test_utterances_per_speaker", c.test_utterances_per_speaker));
    c.classes = int(kv.GetInt("toy_classes", c.classes));
    c.segments_per_utterance = int(kv.GetInt("toy_segments_per_utterance", c.segments_per_utterance));
    c.segment_frames = int(kv.GetInt("toy_segment_frames", c.segment_frames));
    c.channels = int(kv.GetInt("toy_channels", c.channels));
    c.tilt_min = kv.GetDouble("toy_tilt_min", c.tilt_min);
    c.tilt_max = kv.GetDouble("toy_tilt_max", c.tilt_max);
    c.tempo_spread = kv.GetDouble("toy_tempo_spread", c.tempo_spread);
    c.noise = kv.GetDouble("toy_noise", c.noise);
    c.speaker_variation = kv.GetBool("toy_speaker_variation", c.speaker_variation);
    c.seeds = int(kv.GetInt("toy_seeds", c.seeds));
    c.classifier_iterations = int(kv.GetInt("toy_classifier_iterations", c.classifier_iterations));
    c.classifier_learning_rate = kv.GetDouble("toy_classifier_learning_rate", c.classifier_learning_rate);
    const long long seed = kv.GetInt("seed", 1);
    if (seed < 0) throw ConfigError("seed must be >= 0");
    c.seed = std::uint64_t(seed);

    // Overlay pipeline keys on the toy defaults.
    PipelineConfig dflt = DefaultPipeline();
    PipelineConfig read = PipelineConfig::FromKeyValue(kv);
    auto pick = [&](const char *key, auto &dst, const auto &src) {
      if (kv.Has(key)) dst = src;
    };
    PipelineConfig &p = dflt;
    p.frontend = read.frontend;
    pick("feature_kind", p.feature_kind, read.feature_kind);
    pick("d_s", p.d_s, read.d_s);
    pick("d_t", p.d_t, read.d_t);
    pick("temporal_window", p.temporal_window, read.temporal_window);
    pick("validation_fraction", p.validation_fraction, read.validation_fraction);
    pick("hidden_dims", p.network.hidden_dims, read.network.hidden_dims);
    pick("bottleneck_proj_dim", p.network.bottleneck_proj_dim, read.network.bottleneck_proj_dim);
    pick("dropout_rate", p.network.dropout_rate, read.network.dropout_rate);
    pick("use_speaker_task", p.network.use_speaker_task, read.network.use_speaker_task);
    pick("mtl_weight", p.network.mtl_weight, read.network.mtl_weight);
    pick("learning_rate", p.network.learning_rate, read.network.learning_rate);
    pick("momentum", p.network.momentum, read.network.momentum);
    pick("batch_size", p.network.batch_size, read.network.batch_size);
    pick("epochs", p.network.epochs, read.network.epochs);
    pick("bn_epsilon", p.network.bn_epsilon, read.network.bn_epsilon);
    pick("bn_momentum", p.network.bn_momentum, read.network.bn_momentum);
    p.smoothing = read.smoothing;
    c.pipeline = p;
    c.Validate();
    return c;
  }

  void Validate() const {
    if (speakers < 2) throw ConfigError("toy_speakers must be >= 2");
    if (test_utterances_per_speaker < 1 ||
        utterances_per_speaker <= test_utterances_per_speaker)
      throw ConfigError("toy utterance counts must leave training and test utterances");
    if (classes < 2) throw ConfigError("toy_classes must be >= 2");
    if (segments_per_utterance < 1 || segment_frames < 1)
      throw ConfigError("toy segment sizes must be >= 1");
    if (channels < 2) throw ConfigError("toy_channels must be >= 2");
    if (!(tilt_min >= 0 && tilt_max >= tilt_min)) throw ConfigError("bad toy tilt range");
    if (!(tempo_spread >= 0 && tempo_spread < 1)) throw ConfigError("toy_tempo_spread must be in [0, 1)");
    if (!(noise >= 0)) throw ConfigError("toy_noise must be >= 0");
    if (seeds < 1) throw ConfigError("toy_seeds must be >= 1");
    if (classifier_iterations < 1 || !(classifier_learning_rate > 0))
      throw ConfigError("bad toy classifier settings");
    pipeline.Validate(false);
  }
};

struct ToyUtterance {
  MelSpectrogram spectrogram;
  std::vector<int> frame_labels;
  int speaker = 0;
  bool test = false;
};

struct ToySpeaker {
  double tilt = 0;
  double tempo = 1;
  int group = 0;
};

struct ToyCorpus {
  std::vector<ToyUtterance> utterances;
  std::vector<ToySpeaker> speakers;
};

inline std::string ToySpeakerId(int s) {
  char b[16];
  std::snprintf(b, sizeof b, "spk%02d", s);
  return b;
}

/// Class templates: a per-class spectral slope plus a few smooth bumps.
inline Matrix ToyTemplates(const ToyConfig &cfg, Rng &rng) {
  Matrix t(cfg.channels, cfg.classes);
  for (int k = 0; k < cfg.classes; ++k) {
    const double slope = -3.0 + 6.0 * double(k) / double(cfg.classes - 1);
    for (int c = 0; c < cfg.channels; ++c) {
      const double ramp = 2.0 * double(c) / double(cfg.channels - 1) - 1.0;
      t(c, k) = -4.0 + slope * ramp;
    }
    for (int b = 0; b < 3; ++b) {
      const double center = rng.Uniform(0.0, double(cfg.channels - 1));
      const double width = rng.Uniform(2.0, 6.0);
      const double amp = rng.Uniform(1.0, 2.5);
      for (int c = 0; c < cfg.channels; ++c)
        t(c, k) += amp * std::exp(-0.5 * std::pow((double(c) - center) / width, 2));
    }
  }
  return t;
}

inline ToyCorpus GenerateToyCorpus(const ToyConfig &cfg, std::uint64_t seed) {
  Rng rng(seed);
  const Matrix templates = ToyTemplates(cfg, rng);
  ToyCorpus corpus;
  for (int s = 0; s < cfg.speakers; ++s) {
    ToySpeaker sp;
    sp.group = s % 2;
    if (cfg.speaker_variation) {
      const double mag = rng.Uniform(cfg.tilt_min, cfg.tilt_max);
      sp.tilt = sp.group ? mag : -mag;
      sp.tempo = rng.Uniform(1.0 - cfg.tempo_spread, 1.0 + cfg.tempo_spread);
    }
    corpus.speakers.push_back(sp);
  }
  for (int s = 0; s < cfg.speakers; ++s) {
    const ToySpeaker &sp = corpus.speakers[std::size_t(s)];
    const int seg_len = std::max(1, int(std::lround(cfg.segment_frames * sp.tempo)));
    for (int u = 0; u < cfg.utterances_per_speaker; ++u) {
      ToyUtterance utt;
      utt.speaker = s;
      utt.test = u >= cfg.utterances_per_speaker - cfg.test_utterances_per_speaker;
      const int frames = seg_len * cfg.segments_per_utterance;
      Matrix v(cfg.channels, frames);
      for (int g = 0; g < cfg.segments_per_utterance; ++g) {
        const int k = int(rng.Index(std::size_t(cfg.classes)));
        for (int f = 0; f < seg_len; ++f) {
          const int col = g * seg_len + f;
          for (int c = 0; c < cfg.channels; ++c) {
            const double ramp = 2.0 * double(c) / double(cfg.channels - 1) - 1.0;
            v(c, col) = templates(c, k) + sp.tilt * ramp + cfg.noise * rng.Gaussian();
          }
          utt.frame_labels.push_back(k);
        }
      }
      utt.spectrogram.values = std::move(v);
      utt.spectrogram.speaker_id = ToySpeakerId(s);
      char b[32];
      std::snprintf(b, sizeof b, "%s_u%02d", utt.spectrogram.speaker_id.c_str(), u);
      utt.spectrogram.utterance_id = b;
      corpus.utterances.push_back(std::move(utt));
    }
  }
  return corpus;
}

// Frame classifier -----------------------------------------------------------

/// Multinomial logistic regression on standardized inputs, trained by
/// full-batch gradient descent from zero weights. Rows are frames.
class SoftmaxRegression {
 public:
  void Fit(const Matrix &x, const std::vector<int> &y, int classes, int iterations, double lr) {
    mean_ = x.colwise().mean();
    scale_ = ((x.rowwise() - mean_).array().square().colwise().mean()).sqrt().matrix();
    for (Eigen::Index j = 0; j < scale_.size(); ++j)
      if (!(scale_(j) > 1e-12)) scale_(j) = 1.0;
    const Matrix z = Standardize(x);
    const Eigen::Index n = z.rows();
    w_ = Matrix::Zero(z.cols(), classes);
    b_ = RowVector::Zero(classes);
    Matrix target = Matrix::Zero(n, classes);
    for (Eigen::Index i = 0; i < n; ++i) target(i, y[std::size_t(i)]) = 1.0;
    for (int it = 0; it < iterations; ++it) {
      Matrix p = Probabilities(z);
      Matrix g = (p - target) / double(n);
      w_ -= lr * (z.transpose() * g);
      b_ -= lr * g.colwise().sum();
    }
  }

  std::vector<int> Predict(const Matrix &x) const {
    Matrix p = Probabilities(Standardize(x));
    std::vector<int> out;
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      int best = 0;
      for (Eigen::Index k = 1; k < p.cols(); ++k)
        if (p(i, k) > p(i, best)) best = int(k);
      out.push_back(best);
    }
    return out;
  }

 private:
  Matrix Standardize(const Matrix &x) const {
    return ((x.rowwise() - mean_).array().rowwise() / scale_.array()).matrix();
  }
  Matrix Probabilities(const Matrix &z) const {
    Matrix logits = (z * w_).rowwise() + b_;
    return Softmax(logits.transpose()).transpose();
  }

  RowVector mean_, scale_;
  Matrix w_;
  RowVector b_;
};

struct ToySeedResult {
  std::uint64_t seed = 0;
  double error_without_aux = 0;
  double error_with_aux = 0;
};

struct ToyResult {
  bool speaker_variation = true;
  std::vector<ToySeedResult> runs;

  double MeanWithout() const {
    double s = 0;
    for (const auto &r : runs) s += r.error_without_aux;
    return s / double(runs.size());
  }
  double MeanWith() const {
    double s = 0;
    for (const auto &r : runs) s += r.error_with_aux;
    return s / double(runs.size());
  }
  /// Mean error with aux minus without, in percentage points.
  double DeltaPoints() const { return 100.0 * (MeanWith() - MeanWithout()); }
};

/// One seed: corpus, speaker embeddings from the training utterances, and
/// the two frame classifiers.
inline ToySeedResult RunToySeed(const ToyConfig &cfg, std::uint64_t seed) {
  ToyCorpus corpus = GenerateToyCorpus(cfg, StageSeed(seed, "toy-corpus"));

  LabelledCorpus train;
  train.primary_classes = {"group0", "group1"};
  for (int s = 0; s < cfg.speakers; ++s) train.speakers.push_back(ToySpeakerId(s));
  for (const auto &u : corpus.utterances) {
    if (u.test) continue;
    train.spectrograms.push_back(u.spectrogram);
    train.primary_labels.push_back(corpus.speakers[std::size_t(u.speaker)].group);
    train.speaker_labels.push_back(u.speaker);
  }
  PipelineConfig pc = cfg.pipeline;
  pc.seed = seed;
  ExtractionResult ex = RunOnCorpus(train, pc);
  const FeatureArchive &spk = ex.speaker_embeddings;

  auto frames = [&](bool test, bool aux, std::vector<int> &labels) {
    Eigen::Index rows = 0;
    for (const auto &u : corpus.utterances)
      if (u.test == test) rows += u.spectrogram.Frames();
    const Eigen::Index cols = cfg.channels + (aux ? spk.Dims() : 0);
    Matrix x(rows, cols);
    labels.clear();
    Eigen::Index r = 0;
    for (const auto &u : corpus.utterances) {
      if (u.test != test) continue;
      Matrix a = u.spectrogram.values.transpose();
      if (aux) {
        const Matrix &sv = spk.Get(u.spectrogram.speaker_id);
        a = ConcatAux(a, Vector(sv.row(0).transpose()));
      }
      x.middleRows(r, a.rows()) = a;
      r += a.rows();
      labels.insert(labels.end(), u.frame_labels.begin(), u.frame_labels.end());
    }
    return x;
  };
  auto error_rate = [&](bool aux) {
    std::vector<int> ytr, yte;
    Matrix xtr = frames(false, aux, ytr), xte = frames(true, aux, yte);
    SoftmaxRegression clf;
    clf.Fit(xtr, ytr, cfg.classes, cfg.classifier_iterations, cfg.classifier_learning_rate);
    std::vector<int> pred = clf.Predict(xte);
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) wrong += pred[i] != yte[i];
    return double(wrong) / double(pred.size());
  };
  return {seed, error_rate(false), error_rate(true)};
}

inline ToyResult RunToyExperiment(const ToyConfig &cfg) {
  cfg.Validate();
  ToyResult r;
  r.speaker_variation = cfg.speaker_variation;
  for (int i = 0; i < cfg.seeds; ++i) r.runs.push_back(RunToySeed(cfg, cfg.seed + std::uint64_t(i)));
  return r;
}

inline std::string ToyReportText(const ToyResult &main, const ToyResult &control) {
  std::string out;
  char b[160];
  auto section = [&](const char *title, const ToyResult &r) {
    out += std::string(title) + "\n";
    out += "  seed  frame_err_no_aux  frame_err_aux\n";
    for (const auto &run : r.runs) {
      std::snprintf(b, sizeof b, "  %4llu  %16.6f  %13.6f\n", (unsigned long long)run.seed,
                    run.error_without_aux, run.error_with_aux);
      out += b;
    }
    std::snprintf(b, sizeof b, "  mean  %16.6f  %13.6f\n  delta (aux - no aux) = %+.4f points\n",
                  r.MeanWithout(), r.MeanWith(), r.DeltaPoints());
    out += b;
  };
  section("speaker-varied corpus", main);
  section("control corpus (no speaker variation)", control);
  return out;
}

inline std::string ToyReportTsv(const ToyResult &main, const ToyResult &control) {
  std::string out = "corpus\tseed\tframe_err_no_aux\tframe_err_aux\n";
  auto rows = [&](const char *name, const ToyResult &r) {
    for (const auto &run : r.runs)
      out += std::string(name) + "\t" + std::to_string(run.seed) + "\t" +
             FormatExact(run.error_without_aux) + "\t" + FormatExact(run.error_with_aux) + "\n";
  };
  rows("varied", main);
  rows("control", control);
  return out;
}

}  // namespace spectemb
