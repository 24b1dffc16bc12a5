// tools/spectemb.cpp

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

// Command-line driver. Exit status: 0 success, 1 bad usage / config /
// input validation, 2 runtime failure.

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "spectemb/archive.hpp"
#include "spectemb/pipeline.hpp"
#include "spectemb/toy.hpp"
#include "spectemb/tsne.hpp"

namespace fs = std::filesystem;
using namespace spectemb;

namespace {

constexpr const char *kAdapted = "adapted_features.ark";
constexpr const char *kTsneSvg = "tsne.svg";
constexpr const char *kToyReport = "toy_report.txt";
constexpr const char *kToyReportTsv = "toy_report.tsv";

struct CommonArgs {
  std::string config;
  std::optional<long long> seed;
  std::string out;
  std::string manifest;
  std::string model;
  std::string input;
  std::string speakers;
  std::optional<double> perplexity;
  std::optional<int> iterations;
};

struct TsneSettings {
  std::optional<double> perplexity;
  int iterations = 1000;
};

// Loads the key=value config (if any) and applies command-line overrides.
KeyValueConfig LoadKeyValues(const CommonArgs &a, bool config_required) {
  KeyValueConfig kv;
  if (!a.config.empty()) {
    kv = KeyValueConfig::Load(a.config);
  } else if (config_required) {
    throw ConfigError("--config is required");
  }
  if (a.seed) {
    if (*a.seed < 0) throw ArgumentError("--seed must be >= 0");
    kv.Set("seed", std::to_string(*a.seed));
  }
  if (!a.manifest.empty()) kv.Set("manifest", fs::absolute(a.manifest).string());
  if (!a.model.empty()) kv.Set("model", fs::absolute(a.model).string());
  return kv;
}

TsneSettings ReadTsne(const KeyValueConfig &kv, const CommonArgs &a) {
  TsneSettings t;
  if (kv.Has("tsne_perplexity")) t.perplexity = kv.GetDouble("tsne_perplexity", 30.0);
  t.iterations = int(kv.GetInt("tsne_iterations", t.iterations));
  if (a.perplexity) t.perplexity = a.perplexity;
  if (a.iterations) t.iterations = *a.iterations;
  return t;
}

struct Loaded {
  PipelineConfig cfg;
  TsneSettings tsne;
};

Loaded LoadPipeline(const CommonArgs &a, bool need_manifest) {
  KeyValueConfig kv = LoadKeyValues(a, true);
  Loaded l{PipelineConfig::FromKeyValue(kv), ReadTsne(kv, a)};
  kv.CheckAllUsed();
  l.cfg.Validate(need_manifest);
  return l;
}

fs::path OutDir(const CommonArgs &a) {
  EnsureDirectory(a.out);
  return a.out;
}

std::string GroupLabel(const ManifestEntry &e, const PipelineConfig &cfg) {
  if (cfg.primary_target == "age" && e.aged) return *e.aged ? "aged" : "nonaged";
  if (e.severity) return *e.severity;
  return "all";
}

/// Projects every one-row entry of `archive` and writes the plot.
void ProjectArchive(const FeatureArchive &archive, const CorpusManifest *manifest,
                    const PipelineConfig &cfg, const TsneSettings &t, const fs::path &svg) {
  const Eigen::Index n = Eigen::Index(archive.Size());
  Matrix points(n, archive.Dims());
  ProjectionResult meta;
  Eigen::Index i = 0;
  for (const auto &[key, m] : archive.Entries()) {
    if (m.rows() != 1) throw FormatError("tsne input entry '" + key + "' must be one row");
    points.row(i++) = m.row(0);
    std::string group = "all";
    if (manifest != nullptr) {
      for (const auto &e : manifest->entries) {
        if (e.utterance_id == key || e.speaker_id == key) {
          group = GroupLabel(e, cfg);
          break;
        }
      }
    }
    meta.ids.push_back(key);
    meta.groups.push_back(group);
  }
  TsneOptions opt;
  opt.seed = StageSeed(cfg.seed, "tsne");
  opt.iterations = t.iterations;
  opt.perplexity = t.perplexity ? *t.perplexity : std::min(30.0, double(n - 1) / 4.0);
  ProjectionResult r = TsneProject(points, opt);
  r.ids = std::move(meta.ids);
  r.groups = std::move(meta.groups);
  EmitPlot(r, svg.string(), "t-SNE of " + archive.Kind());
  std::cout << "t-SNE: " << n << " points, KL " << r.kl_divergence << " -> " << svg.string()
            << "\n";
}

int RunFbk(const CommonArgs &a) {
  Loaded l = LoadPipeline(a, true);
  fs::path out = OutDir(a);
  auto specs = LoadSpectrograms(LoadManifest(l.cfg.manifest_path), l.cfg.frontend);
  FbankArchive(specs, l.cfg).Write((out / outputs::kFbank).string());
  std::cout << "wrote " << (out / outputs::kFbank).string() << "\n";
  return 0;
}

int RunSvd(const CommonArgs &a) {
  Loaded l = LoadPipeline(a, true);
  fs::path out = OutDir(a);
  auto specs = LoadSpectrograms(LoadManifest(l.cfg.manifest_path), l.cfg.frontend);
  BasisArchive(specs, l.cfg).Write((out / outputs::kFeatures).string());
  std::cout << "wrote " << (out / outputs::kFeatures).string() << "\n";
  return 0;
}

int RunTrainEmbed(const CommonArgs &a) {
  Loaded l = LoadPipeline(a, true);
  l.cfg.model_path.clear();
  PipelineConfig cfg = l.cfg;
  cfg.smoothing = SmoothingConfig{};
  fs::path out = OutDir(a);
  ExtractionResult r = RunExtract(cfg);
  r.report.config_hash = l.cfg.Hash();
  r.report.smoothing = "none";
  r.report.speaker_dim = 0;
  SaveNetwork(r.network, (out / outputs::kModel).string());
  WriteText(out / outputs::kTrainingLog, r.training_log.ToText());
  WriteText(out / outputs::kReport, r.report.ToText());
  WriteText(out / outputs::kReportTsv, r.report.ToTsv());
  std::cout << r.report.ToText();
  return 0;
}

int RunExtractCmd(const CommonArgs &a) {
  Loaded l = LoadPipeline(a, true);
  fs::path out = OutDir(a);
  ExtractionResult r = RunExtract(l.cfg);
  WriteExtraction(r, out);
  std::cout << r.report.ToText();
  return 0;
}

int RunSmooth(const CommonArgs &a) {
  Loaded l = LoadPipeline(a, true);
  FeatureArchive utts = FeatureArchive::Read(a.input);
  fs::path out = OutDir(a);
  std::optional<GmmModel> gmm;
  std::optional<LdaModel> lda;
  FeatureArchive spk =
      SmoothArchive(utts, LoadManifest(l.cfg.manifest_path).SpeakerOf(), l.cfg, &gmm, &lda);
  spk.Write((out / outputs::kSpeakerEmbeddings).string());
  if (gmm) WriteText(out / outputs::kGmm, SerializeGmm(*gmm));
  if (lda) WriteText(out / outputs::kLda, SerializeLda(*lda));
  std::cout << "wrote " << spk.Size() << " speaker vectors to "
            << (out / outputs::kSpeakerEmbeddings).string() << "\n";
  return 0;
}

int RunConcat(const CommonArgs &a) {
  Loaded l = LoadPipeline(a, true);
  FeatureArchive acoustic = FeatureArchive::Read(a.input);
  FeatureArchive speakers = FeatureArchive::Read(a.speakers);
  fs::path out = OutDir(a);
  FeatureArchive joined =
      ConcatArchive(acoustic, speakers, LoadManifest(l.cfg.manifest_path).SpeakerOf());
  joined.Write((out / kAdapted).string());
  std::cout << "wrote " << joined.Size() << " utterances (" << joined.Dims() << " dims) to "
            << (out / kAdapted).string() << "\n";
  return 0;
}

int RunTsne(const CommonArgs &a) {
  Loaded l = LoadPipeline(a, false);
  FeatureArchive archive = FeatureArchive::Read(a.input);
  std::optional<CorpusManifest> manifest;
  if (!l.cfg.manifest_path.empty()) manifest = LoadManifest(l.cfg.manifest_path);
  if (archive.Size() < 5)
    throw ArgumentError("t-SNE needs at least 5 points, " + a.input + " has " +
                        std::to_string(archive.Size()));
  fs::path out = OutDir(a);
  ProjectArchive(archive, manifest ? &*manifest : nullptr, l.cfg, l.tsne, out / kTsneSvg);
  return 0;
}

int RunToy(const CommonArgs &a) {
  KeyValueConfig kv = LoadKeyValues(a, false);
  ToyConfig cfg = ToyConfig::FromKeyValue(kv);
  kv.CheckAllUsed();
  fs::path out = OutDir(a);
  ToyResult main = RunToyExperiment(cfg);
  ToyConfig control_cfg = cfg;
  control_cfg.speaker_variation = false;
  ToyResult control = RunToyExperiment(control_cfg);
  WriteText(out / kToyReport, ToyReportText(main, control));
  WriteText(out / kToyReportTsv, ToyReportTsv(main, control));
  std::cout << ToyReportText(main, control);
  return 0;
}

int RunPipeline(const CommonArgs &a) {
  Loaded l = LoadPipeline(a, true);
  fs::path out = OutDir(a);
  CorpusManifest manifest = LoadManifest(l.cfg.manifest_path);
  LabelledCorpus corpus = LoadCorpus(manifest, l.cfg);
  std::optional<EmbeddingNetwork> net;
  if (!l.cfg.model_path.empty()) net = LoadNetwork(l.cfg.model_path);
  ExtractionResult r = RunOnCorpus(corpus, l.cfg, net ? &*net : nullptr);
  FeatureArchive fbank = FbankArchive(corpus, l.cfg);
  fbank.Write((out / outputs::kFbank).string());
  WriteExtraction(r, out);
  ConcatArchive(fbank, r.speaker_embeddings, manifest.SpeakerOf())
      .Write((out / kAdapted).string());
  std::cout << r.report.ToText();
  if (r.speaker_embeddings.Size() >= 5) {
    ProjectArchive(r.speaker_embeddings, &manifest, l.cfg, l.tsne, out / kTsneSvg);
  } else {
    std::cout << "t-SNE skipped: fewer than 5 speakers\n";
  }
  return 0;
}

void AddCommon(CLI::App *sub, CommonArgs &a, bool config_required = true) {
  auto *c = sub->add_option("--config", a.config, "key=value configuration file");
  if (config_required) c->required();
  sub->add_option("--seed", a.seed, "override the config seed");
  sub->add_option("--out", a.out, "output directory")->required();
}

void AddManifest(CLI::App *sub, CommonArgs &a) {
  sub->add_option("--manifest", a.manifest, "override the config manifest");
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"spectemb: spectral basis embeddings for speaker adaptation"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);
  CommonArgs a;
  std::function<int(const CommonArgs &)> action;
  auto bind = [&](CLI::App *sub, int (*fn)(const CommonArgs &)) {
    sub->callback([&action, fn] { action = fn; });
  };

  auto *fbk = app.add_subcommand("fbk", "log-mel filterbank archive for every utterance");
  AddCommon(fbk, a);
  AddManifest(fbk, a);
  bind(fbk, RunFbk);

  auto *svd = app.add_subcommand("svd", "spectral/temporal basis features for every utterance");
  AddCommon(svd, a);
  AddManifest(svd, a);
  bind(svd, RunSvd);

  auto *train = app.add_subcommand("train-embed", "train the embedding network");
  AddCommon(train, a);
  AddManifest(train, a);
  bind(train, RunTrainEmbed);

  auto *extract =
      app.add_subcommand("extract", "basis features, embeddings and speaker vectors");
  AddCommon(extract, a);
  AddManifest(extract, a);
  extract->add_option("--model", a.model, "use this trained network instead of training");
  bind(extract, RunExtractCmd);

  auto *smooth = app.add_subcommand("smooth", "speaker vectors from utterance embeddings");
  AddCommon(smooth, a);
  AddManifest(smooth, a);
  smooth->add_option("--input", a.input, "utterance embedding archive")->required();
  bind(smooth, RunSmooth);

  auto *concat = app.add_subcommand("concat", "append speaker vectors to every frame");
  AddCommon(concat, a);
  AddManifest(concat, a);
  concat->add_option("--input", a.input, "frame-level acoustic archive")->required();
  concat->add_option("--speakers", a.speakers, "speaker embedding archive")->required();
  bind(concat, RunConcat);

  auto *tsne = app.add_subcommand("tsne", "2-D t-SNE plot (SVG + TSV) of an archive");
  AddCommon(tsne, a);
  AddManifest(tsne, a);
  tsne->add_option("--input", a.input, "archive with one row per entry")->required();
  tsne->add_option("--perplexity", a.perplexity, "perplexity (default min(30, (N-1)/4))");
  tsne->add_option("--iterations", a.iterations, "optimisation iterations (default 1000)");
  bind(tsne, RunTsne);

  auto *toy = app.add_subcommand("toy-adapt", "synthetic adaptation experiment with/without aux");
  AddCommon(toy, a, false);
  bind(toy, RunToy);

  auto *pipe = app.add_subcommand("pipeline", "fbk -> svd -> train -> extract -> smooth -> concat");
  AddCommon(pipe, a);
  AddManifest(pipe, a);
  pipe->add_option("--model", a.model, "use this trained network instead of training");
  pipe->add_option("--perplexity", a.perplexity, "t-SNE perplexity");
  pipe->add_option("--iterations", a.iterations, "t-SNE iterations");
  bind(pipe, RunPipeline);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    app.exit(e);
    return 1;
  }

  try {
    return action(a);
  } catch (const ArgumentError &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ConfigError &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ValidationError &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
