// spectemb/pipeline.hpp

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

// End-to-end extraction:
//   manifest -> log-mel -> SVD bases -> basis features -> embedding network
//   (trained or loaded) -> utterance embeddings -> speaker smoothing
// plus the archives and run report written along the way.

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "spectemb/archive.hpp"
#include "spectemb/common.hpp"
#include "spectemb/embednet.hpp"
#include "spectemb/frontend.hpp"
#include "spectemb/keyvalue.hpp"
#include "spectemb/manifest.hpp"
#include "spectemb/smoothing.hpp"
#include "spectemb/subspace.hpp"

namespace spectemb {

struct SmoothingConfig {
  std::string method = "avg";  // avg | lda
  Eigen::Index gmm_components = 100;
  Eigen::Index lda_topics = 25;
  int lda_sweeps = 500;
  int lda_inference_sweeps = 200;
  double lda_alpha = -1.0;  // <= 0 means 50 / K
  double lda_beta = 0.01;
};

struct PipelineConfig {
  FrontendConfig frontend;
  std::string manifest_path;
  std::string model_path;  // load this network instead of training
  FeatureKind feature_kind = FeatureKind::kSpectral;
  Eigen::Index d_s = 2;
  Eigen::Index d_t = 5;
  Eigen::Index temporal_window = 25;
  std::string primary_target = "severity";  // severity | age
  double validation_fraction = 0.1;
  NetworkConfig network;
  SmoothingConfig smoothing;
  std::uint64_t seed = 1;

  /// Reads every pipeline key from `kv`. Relative paths are resolved
  /// against the config file's directory. Unknown keys are left for the
  /// caller to reject with kv.CheckAllUsed().
  static PipelineConfig FromKeyValue(const KeyValueConfig &kv) {
    PipelineConfig c;
    c.frontend = FrontendConfig::FromKeyValue(kv);
    auto resolve = [&](const std::string &p) {
      if (p.empty() || std::filesystem::path(p).is_absolute() || kv.BaseDir().empty()) return p;
      return (std::filesystem::path(kv.BaseDir()) / p).lexically_normal().string();
    };
    c.manifest_path = resolve(kv.GetString("manifest", ""));
    c.model_path = resolve(kv.GetString("model", ""));
    c.feature_kind = ParseFeatureKind(kv.GetString("feature_kind", "spectral"));
    const std::string corpus = kv.GetString("corpus_type", "dysarthric");
    if (corpus == "elderly") {
      c.d_s = 4;
      c.d_t = 10;
    } else if (corpus != "dysarthric") {
      throw ConfigError("corpus_type must be 'dysarthric' or 'elderly', got '" + corpus + "'");
    }
    c.d_s = kv.GetInt("d_s", c.d_s);
    c.d_t = kv.GetInt("d_t", c.d_t);
    c.temporal_window = kv.GetInt("temporal_window", c.temporal_window);
    c.primary_target = kv.GetString("primary_target", c.primary_target);
    c.validation_fraction = kv.GetDouble("validation_fraction", c.validation_fraction);
    c.network.ReadHyperparameters(kv);
    SmoothingConfig &s = c.smoothing;
    s.method = kv.GetString("smoothing", s.method);
    s.gmm_components = kv.GetInt("gmm_components", s.gmm_components);
    s.lda_topics = kv.GetInt("lda_topics", s.lda_topics);
    s.lda_sweeps = int(kv.GetInt("lda_sweeps", s.lda_sweeps));
    s.lda_inference_sweeps = int(kv.GetInt("lda_inference_sweeps", s.lda_inference_sweeps));
    s.lda_alpha = kv.GetDouble("lda_alpha", s.lda_alpha);
    s.lda_beta = kv.GetDouble("lda_beta", s.lda_beta);
    const long long seed = kv.GetInt("seed", 1);
    if (seed < 0) throw ConfigError("seed must be >= 0");
    c.seed = std::uint64_t(seed);
    return c;
  }

  static PipelineConfig Load(const std::string &path) {
    KeyValueConfig kv = KeyValueConfig::Load(path);
    PipelineConfig c = FromKeyValue(kv);
    kv.CheckAllUsed();
    return c;
  }

  void Validate(bool need_manifest = true) const {
    frontend.Validate();
    if (d_s < 1 || d_t < 1) throw ConfigError("d_s and d_t must be >= 1");
    if (temporal_window < 1) throw ConfigError("temporal_window must be >= 1");
    if (primary_target != "severity" && primary_target != "age")
      throw ConfigError("primary_target must be 'severity' or 'age'");
    if (!(validation_fraction >= 0 && validation_fraction < 1))
      throw ConfigError("validation_fraction must be in [0, 1)");
    if (smoothing.method != "avg" && smoothing.method != "lda")
      throw ConfigError("smoothing must be 'avg' or 'lda', got '" + smoothing.method + "'");
    if (smoothing.gmm_components < 1) throw ConfigError("gmm_components must be >= 1");
    if (smoothing.lda_topics < 2) throw ConfigError("lda_topics must be >= 2");
    if (smoothing.lda_sweeps < 1 || smoothing.lda_inference_sweeps < 1)
      throw ConfigError("LDA sweep counts must be >= 1");
    if (!(smoothing.lda_beta > 0)) throw ConfigError("lda_beta must be > 0");
    if (need_manifest) {
      if (manifest_path.empty()) throw ConfigError("config is missing 'manifest'");
      if (!std::filesystem::is_regular_file(manifest_path))
        throw ConfigError("manifest not found: " + manifest_path);
    }
    if (!model_path.empty() && !std::filesystem::is_regular_file(model_path))
      throw ConfigError("model not found: " + model_path);
  }

  /// Every field that influences outputs, in a fixed textual form.
  std::string Canonical() const {
    const SmoothingConfig &s = smoothing;
    NetworkConfig net = network;
    net.input_dim = 0;
    net.num_primary_classes = 0;
    net.num_speakers = 0;
    net.seed = 0;
    return frontend.Canonical() + "manifest=" + manifest_path + "\nmodel=" + model_path +
           "\nfeature_kind=" + FeatureKindName(feature_kind) + "\nd_s=" + std::to_string(d_s) +
           "\nd_t=" + std::to_string(d_t) + "\ntemporal_window=" + std::to_string(temporal_window) +
           "\nprimary_target=" + primary_target +
           "\nvalidation_fraction=" + FormatExact(validation_fraction) + "\n" + net.ToKeyValue() +
           "smoothing=" + s.method + "\ngmm_components=" + std::to_string(s.gmm_components) +
           "\nlda_topics=" + std::to_string(s.lda_topics) +
           "\nlda_sweeps=" + std::to_string(s.lda_sweeps) +
           "\nlda_inference_sweeps=" + std::to_string(s.lda_inference_sweeps) +
           "\nlda_alpha=" + FormatExact(s.lda_alpha) + "\nlda_beta=" + FormatExact(s.lda_beta) +
           "\nseed=" + std::to_string(seed) + "\n";
  }

  std::string Hash() const { return HashHex(Fnv1a64(Canonical())); }
};

/// Seed for a named sub-stage, so stages draw from independent streams.
inline std::uint64_t StageSeed(std::uint64_t seed, const std::string &stage) {
  return Fnv1a64(stage + "#" + std::to_string(seed));
}

// Data ------------------------------------------------------------------------

/// Spectrograms with their integer labels; the common input of the
/// extraction stages whether it came from audio or was synthesized.
struct LabelledCorpus {
  std::vector<MelSpectrogram> spectrograms;
  std::vector<int> primary_labels;
  std::vector<int> speaker_labels;
  std::vector<std::string> primary_classes;  // label -> name
  std::vector<std::string> speakers;         // label -> speaker id
};

/// Trims silence from every manifest entry and computes its log-mel
/// spectrogram, in manifest order.
inline std::vector<MelSpectrogram> LoadSpectrograms(const CorpusManifest &manifest,
                                                    const FrontendConfig &frontend) {
  std::vector<MelSpectrogram> out;
  out.reserve(manifest.entries.size());
  for (const ManifestEntry &e : manifest.entries) {
    AudioClip clip = LoadAudio(e.audio_path, e.utterance_id, e.speaker_id);
    TrimResult t = TrimSilence(clip, frontend);
    out.push_back(ComputeMelSpectrogram(t.clip, frontend));
  }
  return out;
}

/// Spectrograms plus labels from the configured primary target.
inline LabelledCorpus LoadCorpus(const CorpusManifest &manifest, const PipelineConfig &cfg) {
  LabelledCorpus c;
  if (cfg.primary_target == "severity") {
    if (!manifest.HasSeverity())
      throw ConfigError("primary_target=severity but the manifest has no severity labels");
    c.primary_classes = manifest.SeverityClasses();
  } else {
    if (!manifest.HasAge())
      throw ConfigError("primary_target=age but the manifest has no age labels");
    c.primary_classes = {"nonaged", "aged"};
  }
  c.speakers = manifest.Speakers();
  std::map<std::string, int> spk_index, cls_index;
  for (std::size_t i = 0; i < c.speakers.size(); ++i) spk_index[c.speakers[i]] = int(i);
  for (std::size_t i = 0; i < c.primary_classes.size(); ++i) cls_index[c.primary_classes[i]] = int(i);
  c.spectrograms = LoadSpectrograms(manifest, cfg.frontend);
  for (const ManifestEntry &e : manifest.entries) {
    c.speaker_labels.push_back(spk_index.at(e.speaker_id));
    c.primary_labels.push_back(cfg.primary_target == "severity" ? cls_index.at(*e.severity)
                                                                : int(*e.aged));
  }
  return c;
}

// Results ---------------------------------------------------------------------

struct RunReport {
  std::size_t utterances = 0;
  std::size_t speakers = 0;
  std::string feature_kind;
  Eigen::Index feature_dim = 0;
  Eigen::Index embedding_dim = 0;
  std::vector<std::pair<std::string, std::size_t>> label_counts;
  std::size_t train_utterances = 0;
  std::size_t validation_utterances = 0;
  bool trained = false;
  int epochs = 0;
  double final_loss = std::numeric_limits<double>::quiet_NaN();
  double train_accuracy = std::numeric_limits<double>::quiet_NaN();
  double validation_accuracy = std::numeric_limits<double>::quiet_NaN();
  std::string smoothing;
  Eigen::Index speaker_dim = 0;
  std::string config_hash;

  std::vector<std::pair<std::string, std::string>> Fields() const {
    auto num = [](double v) {
      if (std::isnan(v)) return std::string("n/a");
      char b[32];
      std::snprintf(b, sizeof b, "%.6f", v);
      return std::string(b);
    };
    std::vector<std::pair<std::string, std::string>> f{
        {"utterances", std::to_string(utterances)},
        {"speakers", std::to_string(speakers)},
        {"feature_kind", feature_kind},
        {"feature_dim", std::to_string(feature_dim)},
        {"embedding_dim", std::to_string(embedding_dim)}};
    for (const auto &[name, n] : label_counts) f.emplace_back("label_count." + name, std::to_string(n));
    f.emplace_back("train_utterances", std::to_string(train_utterances));
    f.emplace_back("validation_utterances", std::to_string(validation_utterances));
    f.emplace_back("network", trained ? "trained" : "loaded");
    f.emplace_back("epochs", std::to_string(epochs));
    f.emplace_back("final_train_loss", num(final_loss));
    f.emplace_back("train_accuracy", num(train_accuracy));
    f.emplace_back("validation_accuracy", num(validation_accuracy));
    f.emplace_back("smoothing", smoothing);
    f.emplace_back("speaker_dim", std::to_string(speaker_dim));
    f.emplace_back("config_hash", config_hash);
    return f;
  }

  std::string ToText() const {
    std::string out = "spectemb run report\n";
    for (const auto &[k, v] : Fields()) {
      char b[256];
      std::snprintf(b, sizeof b, "  %-24s %s\n", k.c_str(), v.c_str());
      out += b;
    }
    return out;
  }

  std::string ToTsv() const {
    std::string out = "field\tvalue\n";
    for (const auto &[k, v] : Fields()) out += k + "\t" + v + "\n";
    return out;
  }
};

struct ExtractionResult {
  FeatureArchive features;
  FeatureArchive utterance_embeddings;
  FeatureArchive speaker_embeddings;
  std::vector<SpeakerEmbedding> speaker_vectors;
  EmbeddingNetwork network;
  TrainingLog training_log;
  std::optional<GmmModel> gmm;
  std::optional<LdaModel> lda;
  RunReport report;
};

inline std::string FeatureArchiveKind(FeatureKind k) { return "basis-" + FeatureKindName(k); }

/// Basis features for every spectrogram, in corpus order.
inline std::vector<BasisFeature> ComputeFeatures(const LabelledCorpus &corpus,
                                                 const PipelineConfig &cfg) {
  std::vector<BasisFeature> out;
  out.reserve(corpus.spectrograms.size());
  for (const MelSpectrogram &s : corpus.spectrograms)
    out.push_back(BuildBasisFeature(s, cfg.feature_kind, cfg.d_s, cfg.d_t, cfg.temporal_window));
  return out;
}

/// Speaker smoothing of utterance embeddings (columns of `embeddings`).
inline std::vector<SpeakerEmbedding> SmoothSpeakers(const Matrix &embeddings,
                                                    const std::vector<std::string> &speaker_of,
                                                    const SmoothingConfig &s, std::uint64_t seed,
                                                    std::optional<GmmModel> *gmm_out = nullptr,
                                                    std::optional<LdaModel> *lda_out = nullptr) {
  if (embeddings.cols() == 0) throw DataError("smoothing: no utterance embeddings");
  if (s.method == "avg") {
    std::map<std::string, std::vector<Vector>> by;
    for (Eigen::Index j = 0; j < embeddings.cols(); ++j)
      by[speaker_of[std::size_t(j)]].push_back(embeddings.col(j));
    return AverageSmooth(by);
  }
  if (s.method != "lda") throw ConfigError("unknown smoothing method '" + s.method + "'");
  GmmModel gmm = FitGmm(embeddings, s.gmm_components, StageSeed(seed, "gmm"));
  std::map<std::string, SymbolBag> docs;
  for (Eigen::Index j = 0; j < embeddings.cols(); ++j)
    docs[speaker_of[std::size_t(j)]].push_back(Quantize(gmm, embeddings.col(j)));
  std::vector<SymbolBag> bags;
  for (const auto &[spk, bag] : docs) bags.push_back(bag);
  LdaOptions opt;
  opt.sweeps = s.lda_sweeps;
  opt.inference_sweeps = s.lda_inference_sweeps;
  opt.alpha = s.lda_alpha;
  opt.beta = s.lda_beta;
  LdaModel lda = FitLda(bags, s.lda_topics, s.gmm_components, StageSeed(seed, "lda"), opt);
  std::vector<SpeakerEmbedding> out;
  for (const auto &[spk, bag] : docs)
    out.push_back(LdaSmooth(lda, spk, bag, StageSeed(seed, "lda-infer:" + spk),
                            s.lda_inference_sweeps));
  if (gmm_out) *gmm_out = std::move(gmm);
  if (lda_out) *lda_out = std::move(lda);
  return out;
}

/// Runs features -> network -> embeddings -> smoothing on a labelled corpus.
/// When `preloaded` is given it is used instead of training a network.
inline ExtractionResult RunOnCorpus(const LabelledCorpus &corpus, const PipelineConfig &cfg,
                                    const EmbeddingNetwork *preloaded = nullptr) {
  cfg.Validate(false);
  const std::size_t n = corpus.spectrograms.size();
  if (n == 0) throw DataError("corpus has no utterances");
  const std::string hash = cfg.Hash();
  ExtractionResult res;
  RunReport &rep = res.report;
  rep.config_hash = hash;
  rep.utterances = n;
  rep.speakers = corpus.speakers.size();
  rep.feature_kind = FeatureKindName(cfg.feature_kind);

  std::vector<BasisFeature> features = ComputeFeatures(corpus, cfg);
  const Eigen::Index dim = features.front().values.size();
  rep.feature_dim = dim;
  res.features = FeatureArchive(FeatureArchiveKind(cfg.feature_kind), dim, hash);
  for (const auto &f : features) res.features.AddVector(f.utterance_id, f.values);

  std::vector<std::size_t> counts(corpus.primary_classes.size(), 0);
  for (int y : corpus.primary_labels) ++counts[std::size_t(y)];
  for (std::size_t k = 0; k < counts.size(); ++k)
    rep.label_counts.emplace_back(corpus.primary_classes[k], counts[k]);

  // Held-out split.
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng split_rng(StageSeed(cfg.seed, "split"));
  split_rng.Shuffle(order);
  const std::size_t n_val = std::size_t(std::floor(cfg.validation_fraction * double(n)));
  std::vector<bool> is_val(n, false);
  for (std::size_t i = 0; i < n_val; ++i) is_val[order[i]] = true;

  std::vector<TrainingRecord> train, val;
  for (std::size_t i = 0; i < n; ++i) {
    TrainingRecord r{features[i], corpus.primary_labels[i], corpus.speaker_labels[i]};
    (is_val[i] ? val : train).push_back(std::move(r));
  }
  rep.train_utterances = train.size();
  rep.validation_utterances = val.size();

  if (preloaded != nullptr) {
    if (preloaded->config.input_dim != dim)
      throw ArgumentError("loaded network expects input dim " +
                          std::to_string(preloaded->config.input_dim) + ", features have " +
                          std::to_string(dim));
    if (preloaded->config.num_primary_classes != Eigen::Index(corpus.primary_classes.size()))
      throw ArgumentError("loaded network has a different number of primary classes");
    res.network = *preloaded;
  } else {
    if (corpus.primary_classes.size() < 2)
      throw DataError("need at least two primary classes to train, found " +
                      std::to_string(corpus.primary_classes.size()));
    NetworkConfig nc = cfg.network;
    nc.input_dim = dim;
    nc.num_primary_classes = Eigen::Index(corpus.primary_classes.size());
    nc.num_speakers = nc.use_speaker_task ? Eigen::Index(corpus.speakers.size()) : 0;
    nc.seed = StageSeed(cfg.seed, "network");
    TrainResult tr = Train(train, nc);
    res.network = std::move(tr.net);
    res.training_log = std::move(tr.log);
    rep.trained = true;
    rep.epochs = nc.epochs;
    rep.final_loss = res.training_log.epochs.back().loss;
  }

  auto accuracy = [&](const std::vector<TrainingRecord> &rs) {
    if (rs.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::size_t hit = 0;
    for (const auto &r : rs) hit += Classify(res.network, r.feature).label == r.primary_label;
    return double(hit) / double(rs.size());
  };
  rep.train_accuracy = accuracy(train);
  rep.validation_accuracy = accuracy(val);

  Matrix emb(kBottleneckDim, Eigen::Index(n));
  std::vector<std::string> speaker_of;
  res.utterance_embeddings = FeatureArchive("utterance-embedding", kBottleneckDim, hash);
  for (std::size_t i = 0; i < n; ++i) {
    emb.col(Eigen::Index(i)) = ExtractEmbedding(res.network, features[i]);
    res.utterance_embeddings.AddVector(features[i].utterance_id, emb.col(Eigen::Index(i)));
    speaker_of.push_back(corpus.speakers[std::size_t(corpus.speaker_labels[i])]);
  }
  rep.embedding_dim = kBottleneckDim;

  res.speaker_vectors =
      SmoothSpeakers(emb, speaker_of, cfg.smoothing, cfg.seed, &res.gmm, &res.lda);
  rep.smoothing = cfg.smoothing.method;
  rep.speaker_dim = res.speaker_vectors.front().vector.size();
  res.speaker_embeddings =
      FeatureArchive("speaker-embedding-" + cfg.smoothing.method, rep.speaker_dim, hash);
  for (const auto &s : res.speaker_vectors) res.speaker_embeddings.AddVector(s.speaker_id, s.vector);
  return res;
}

inline void WriteText(const std::filesystem::path &path, const std::string &text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

inline void EnsureDirectory(const std::filesystem::path &dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir))
    throw IoError("cannot create output directory " + dir.string());
}

/// File names inside an output directory.
namespace outputs {
inline constexpr const char *kFbank = "fbank.ark";
inline constexpr const char *kFeatures = "utterance_features.ark";
inline constexpr const char *kUtteranceEmbeddings = "utterance_embeddings.ark";
inline constexpr const char *kSpeakerEmbeddings = "speaker_embeddings.ark";
inline constexpr const char *kModel = "embed.model";
inline constexpr const char *kGmm = "gmm.model";
inline constexpr const char *kLda = "lda.model";
inline constexpr const char *kTrainingLog = "training_log.txt";
inline constexpr const char *kReport = "report.txt";
inline constexpr const char *kReportTsv = "report.tsv";
}  // namespace outputs

/// Writes every artifact of an extraction run into `out_dir`.
inline void WriteExtraction(const ExtractionResult &r, const std::filesystem::path &out_dir) {
  EnsureDirectory(out_dir);
  r.features.Write((out_dir / outputs::kFeatures).string());
  r.utterance_embeddings.Write((out_dir / outputs::kUtteranceEmbeddings).string());
  r.speaker_embeddings.Write((out_dir / outputs::kSpeakerEmbeddings).string());
  SaveNetwork(r.network, (out_dir / outputs::kModel).string());
  if (r.report.trained) WriteText(out_dir / outputs::kTrainingLog, r.training_log.ToText());
  if (r.gmm) WriteText(out_dir / outputs::kGmm, SerializeGmm(*r.gmm));
  if (r.lda) WriteText(out_dir / outputs::kLda, SerializeLda(*r.lda));
  WriteText(out_dir / outputs::kReport, r.report.ToText());
  WriteText(out_dir / outputs::kReportTsv, r.report.ToTsv());
}

/// The full run from a manifest on disk.
inline ExtractionResult RunExtract(const PipelineConfig &cfg) {
  cfg.Validate(true);
  CorpusManifest manifest = LoadManifest(cfg.manifest_path);
  LabelledCorpus corpus = LoadCorpus(manifest, cfg);
  std::optional<EmbeddingNetwork> net;
  if (!cfg.model_path.empty()) net = LoadNetwork(cfg.model_path);
  return RunOnCorpus(corpus, cfg, net ? &*net : nullptr);
}

/// Log-mel archive: one entry per utterance, one row per frame.
inline FeatureArchive FbankArchive(const std::vector<MelSpectrogram> &spectrograms,
                                   const PipelineConfig &cfg) {
  FeatureArchive a("fbank", cfg.frontend.channels, cfg.Hash());
  for (const auto &s : spectrograms) a.Add(s.utterance_id, s.values.transpose());
  return a;
}

inline FeatureArchive FbankArchive(const LabelledCorpus &corpus, const PipelineConfig &cfg) {
  return FbankArchive(corpus.spectrograms, cfg);
}

/// Basis-feature archive without labels or training.
inline FeatureArchive BasisArchive(const std::vector<MelSpectrogram> &spectrograms,
                                   const PipelineConfig &cfg) {
  std::optional<FeatureArchive> a;
  for (const auto &s : spectrograms) {
    BasisFeature f = BuildBasisFeature(s, cfg.feature_kind, cfg.d_s, cfg.d_t, cfg.temporal_window);
    if (!a) a.emplace(FeatureArchiveKind(cfg.feature_kind), f.values.size(), cfg.Hash());
    a->AddVector(f.utterance_id, f.values);
  }
  if (!a) throw DataError("no utterances to decompose");
  return *a;
}

/// Smooths an utterance-embedding archive into a speaker archive.
inline FeatureArchive SmoothArchive(const FeatureArchive &utterances,
                                    const std::map<std::string, std::string> &speaker_of,
                                    const PipelineConfig &cfg,
                                    std::optional<GmmModel> *gmm_out = nullptr,
                                    std::optional<LdaModel> *lda_out = nullptr) {
  if (utterances.Size() == 0) throw DataError("no utterance embeddings to smooth");
  Matrix emb(utterances.Dims(), Eigen::Index(utterances.Size()));
  std::vector<std::string> spk;
  Eigen::Index j = 0;
  for (const auto &[utt, m] : utterances.Entries()) {
    if (m.rows() != 1) throw FormatError("utterance entry '" + utt + "' must be one row");
    auto it = speaker_of.find(utt);
    if (it == speaker_of.end()) throw DataError("no speaker known for utterance '" + utt + "'");
    emb.col(j++) = m.row(0).transpose();
    spk.push_back(it->second);
  }
  std::vector<SpeakerEmbedding> vs = SmoothSpeakers(emb, spk, cfg.smoothing, cfg.seed, gmm_out, lda_out);
  FeatureArchive out("speaker-embedding-" + cfg.smoothing.method, vs.front().vector.size(),
                     cfg.Hash());
  for (const auto &s : vs) out.AddVector(s.speaker_id, s.vector);
  return out;
}

// Auxiliary-feature concatenation ----------------------------------------------

/// Appends the speaker vector to every frame (row) of `acoustic`.
inline Matrix ConcatAux(const Matrix &acoustic, const Vector &speaker_vector) {
  Matrix out(acoustic.rows(), acoustic.cols() + speaker_vector.size());
  out.leftCols(acoustic.cols()) = acoustic;
  out.rightCols(speaker_vector.size()) =
      speaker_vector.transpose().replicate(acoustic.rows(), 1);
  return out;
}

inline Matrix ConcatAux(const Matrix &acoustic, const SpeakerEmbedding &e) {
  return ConcatAux(acoustic, e.vector);
}

/// Concatenates each utterance of a frame archive with its speaker's vector.
inline FeatureArchive ConcatArchive(const FeatureArchive &acoustic, const FeatureArchive &speakers,
                                    const std::map<std::string, std::string> &speaker_of) {
  FeatureArchive out(acoustic.Kind() + "+aux", acoustic.Dims() + speakers.Dims(),
                     HashHex(Fnv1a64(acoustic.ConfigHash() + "+" + speakers.ConfigHash())));
  for (const auto &[utt, frames] : acoustic.Entries()) {
    auto it = speaker_of.find(utt);
    if (it == speaker_of.end()) throw DataError("no speaker known for utterance '" + utt + "'");
    if (!speakers.Has(it->second))
      throw DataError("no speaker embedding for '" + it->second + "' (utterance '" + utt + "')");
    const Matrix &sv = speakers.Get(it->second);
    if (sv.rows() != 1) throw FormatError("speaker entry '" + it->second + "' must be one row");
    out.Add(utt, ConcatAux(frames, Vector(sv.row(0).transpose())));
  }
  return out;
}

}  // namespace spectemb
