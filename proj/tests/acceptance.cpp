// tests/acceptance.cpp

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


// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <limits>
#include <set>
#include <string>

#include <Eigen/Eigenvalues>

#include "spectemb/archive.hpp"
#include "spectemb/embednet.hpp"
#include "spectemb/pipeline.hpp"
#include "spectemb/smoothing.hpp"
#include "spectemb/subspace.hpp"
#include "spectemb/toy.hpp"
#include "spectemb/tsne.hpp"
#include "test_util.hpp"

namespace spectemb {
namespace {

namespace fs = std::filesystem;
using testing::RandomMatrix;
using testing::ReadFile;
using testing::TempDir;
using Clock = std::chrono::steady_clock;

double Seconds(Clock::time_point since) {
  return std::chrono::duration<double>(Clock::now() - since).count();
}

std::string Fmt(const char *f, double v) {
  char b[64];
  std::snprintf(b, sizeof b, f, v);
  return b;
}

struct Outcome {
  bool pass;
  std::string detail;
};

MelSpectrogram Spec(Matrix m) {
  MelSpectrogram s;
  s.values = std::move(m);
  s.utterance_id = "u";
  s.speaker_id = "s";
  return s;
}

// Singular values from the eigenvalues of the smaller Gram matrix.
Vector OracleSingularValues(const Matrix &s) {
  Matrix g = s.rows() <= s.cols() ? Matrix(s * s.transpose()) : Matrix(s.transpose() * s);
  Eigen::SelfAdjointEigenSolver<Matrix> es(g);
  return es.eigenvalues().reverse().cwiseMax(0.0).cwiseSqrt();
}

Outcome SvdOracle() {
  const auto t0 = Clock::now();
  Rng rng(101);
  double worst_sv = 0, worst_rec = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Index r = 1 + Eigen::Index(rng.Index(40));
    const Eigen::Index c = 1 + Eigen::Index(rng.Index(120));
    Matrix s = RandomMatrix(r, c, rng);
    if (trial < 4) s = RandomMatrix(40, 120, rng);
    SubspaceBases b = SvdDecompose(Spec(s));
    Vector oracle = OracleSingularValues(s);
    if (b.singular_values.size() != oracle.size()) return {false, "rank mismatch"};
    worst_sv = std::max(worst_sv, (b.singular_values - oracle).cwiseAbs().maxCoeff());
    worst_rec = std::max(worst_rec, (b.spectral * b.temporal - s).norm() / s.norm());
  }
  const double secs = Seconds(t0);
  return {worst_sv <= 1e-8 && worst_rec <= 1e-6 && secs < 30,
          "max sv err " + Fmt("%.2e", worst_sv) + ", max recon err/|S|_F " +
              Fmt("%.2e", worst_rec) + ", " + Fmt("%.2f", secs) + " s"};
}

Outcome EckartYoung() {
  Rng rng(102);
  int violations = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Index r = 2 + Eigen::Index(rng.Index(39));
    const Eigen::Index c = 2 + Eigen::Index(rng.Index(119));
    Matrix s = RandomMatrix(r, c, rng);
    SubspaceBases full = SvdDecompose(Spec(s));
    double prev = std::numeric_limits<double>::infinity();
    for (Eigen::Index d = 1; d <= std::min(r, c); ++d) {
      SubspaceBases t = Truncate(full, d, d);
      const double err = (s - t.spectral * t.temporal).norm();
      if (err > prev) ++violations;
      prev = err;
    }
  }
  return {violations == 0, std::to_string(violations) + " increases over 50 spectrograms"};
}

Outcome Dimensions() {
  Rng rng(103);
  MelSpectrogram s = Spec(RandomMatrix(40, 150, rng));
  auto dim = [&](FeatureKind k, Eigen::Index ds, Eigen::Index dt) {
    return BuildBasisFeature(s, k, ds, dt).values.size();
  };
  const Eigen::Index sbe2 = dim(FeatureKind::kSpectral, 2, 1);
  const Eigen::Index sbe4 = dim(FeatureKind::kSpectral, 4, 1);
  const Eigen::Index tbe5 = dim(FeatureKind::kTemporal, 1, 5);
  const Eigen::Index both25 = dim(FeatureKind::kSpectroTemporal, 2, 5);
  const Eigen::Index both410 = dim(FeatureKind::kSpectroTemporal, 4, 10);
  return {sbe2 == 80 && sbe4 == 160 && tbe5 == 250 && both25 == 330 && both410 == 660,
          std::to_string(sbe2) + "/" + std::to_string(sbe4) + "/" + std::to_string(tbe5) + "/" +
              std::to_string(both25) + "/" + std::to_string(both410)};
}

Outcome GradientCheck() {
  const auto t0 = Clock::now();
  NetworkConfig cfg;
  cfg.input_dim = 8;
  cfg.hidden_dims = {16, 16, 16, 25};
  cfg.bottleneck_proj_dim = 6;
  cfg.num_primary_classes = 3;
  cfg.use_speaker_task = true;
  cfg.num_speakers = 4;
  cfg.mtl_weight = 0.5;
  cfg.seed = 104;
  EmbeddingNetwork net = InitializeNetwork(cfg);
  Rng rng(105);
  for (auto *h : {&net.primary, &net.speaker}) {
    for (Eigen::Index i = 0; i < h->weight.size(); ++i) h->weight.data()[i] = rng.Uniform(-0.5, 0.5);
    for (Eigen::Index i = 0; i < h->bias.size(); ++i) h->bias(i) = rng.Uniform(-0.5, 0.5);
  }
  for (auto &h : net.hidden)
    for (Eigen::Index i = 0; i < h.bn_scale.size(); ++i) {
      h.bn_scale(i) = rng.Uniform(0.5, 1.5);
      h.bn_shift(i) = rng.Uniform(-0.3, 0.3);
    }
  const Eigen::Index n = 6;
  Matrix x = RandomMatrix(8, n, rng);
  Labels labels;
  for (Eigen::Index j = 0; j < n; ++j) {
    labels.primary.push_back(int(j % 3));
    labels.speaker.push_back(int((j * 7) % 4));
  }
  auto loss = [&](const EmbeddingNetwork &m) {
    ForwardResult r = Forward(m, x, Mode::kTrain);
    return MtlLoss(r.primary_logits, &r.speaker_logits, labels.primary, &labels.speaker, 0.5);
  };
  ForwardCache cache;
  Forward(net, x, Mode::kTrain, nullptr, &cache);
  EmbeddingNetwork grad = Backward(net, cache, labels, 0.5);
  double worst = 0;
  std::set<std::string> groups;
  EmbeddingNetwork probe = net;
  VisitParameters(
      [&](const std::string &name, auto &p, auto &g) {
        if (p.size() > 0) groups.insert(name);
        for (Eigen::Index i = 0; i < p.size(); ++i) {
          const double orig = p.data()[i];
          const double h = 1e-5 * std::max(1.0, std::abs(orig));
          p.data()[i] = orig + h;
          const double up = loss(probe);
          p.data()[i] = orig - h;
          const double down = loss(probe);
          p.data()[i] = orig;
          const double fd = (up - down) / (2 * h);
          const double an = g.data()[i];
          worst = std::max(worst, std::abs(fd - an) / std::max(1e-3, std::abs(fd) + std::abs(an)));
        }
      },
      probe, grad);
  const double secs = Seconds(t0);
  return {worst <= 1e-4 && secs < 60,
          "max rel err " + Fmt("%.2e", worst) + " over " + std::to_string(groups.size()) +
              " parameter groups, " + Fmt("%.2f", secs) + " s"};
}

std::vector<TrainingRecord> SeparableData(int n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<TrainingRecord> out;
  for (int i = 0; i < n; ++i) {
    TrainingRecord r;
    r.primary_label = i % 2;
    r.feature.values.resize(8);
    for (int k = 0; k < 8; ++k) r.feature.values(k) = rng.Gaussian();
    r.feature.values(0) += r.primary_label ? 3.0 : -3.0;
    r.feature.utterance_id = "u" + std::to_string(i);
    out.push_back(std::move(r));
  }
  return out;
}

Outcome ClassifierCapability() {
  NetworkConfig c;
  c.input_dim = 8;
  c.hidden_dims = {64, 64, 64, 25};
  c.bottleneck_proj_dim = 16;
  c.num_primary_classes = 2;
  c.learning_rate = 0.05;
  c.batch_size = 10;
  c.epochs = 20;
  c.seed = 106;
  TrainResult r = Train(SeparableData(100, 107), c);
  int first_perfect = -1;
  for (const auto &e : r.log.epochs)
    if (e.epoch > 0 && e.primary_accuracy == 1.0) {
      first_perfect = e.epoch;
      break;
    }
  int hits = 0;
  auto test = SeparableData(200, 108);
  for (const auto &t : test) hits += Classify(r.net, t.feature).label == t.primary_label;
  const double held_out = double(hits) / double(test.size());
  double worst_lnk = 0;
  for (int k : {2, 3, 7, 25}) {
    std::vector<int> y(4, 0);
    worst_lnk = std::max(worst_lnk, std::abs(CrossEntropy(Matrix::Zero(k, 4), y) - std::log(double(k))));
  }
  return {first_perfect > 0 && held_out >= 0.95 && worst_lnk <= 1e-12,
          "100% train accuracy at epoch " + std::to_string(first_perfect) + ", held-out " +
              Fmt("%.3f", held_out) + ", |CE - ln K| " + Fmt("%.1e", worst_lnk)};
}

Outcome GmmMonotone() {
  int violations = 0;
  double worst_drop = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(200 + seed);
    const Eigen::Index d = 2 + Eigen::Index(rng.Index(6));
    const Eigen::Index n = 60 + Eigen::Index(rng.Index(140));
    Matrix x = RandomMatrix(d, n, rng);
    for (Eigen::Index j = 0; j < n; ++j) x.col(j).array() += double(j % 3) * 2.0;
    GmmModel g = FitGmm(x, 2 + Eigen::Index(rng.Index(6)), seed);
    for (std::size_t i = 1; i < g.log_likelihood.size(); ++i) {
      const double drop = g.log_likelihood[i - 1] - g.log_likelihood[i];
      worst_drop = std::max(worst_drop, drop);
      if (drop > 1e-8) ++violations;
    }
  }
  Rng rng(221);
  Matrix x = RandomMatrix(5, 40, rng);
  GmmModel g = FitGmm(x, 1, 1);
  double worst = 0;
  for (Eigen::Index d = 0; d < 5; ++d) {
    double mean = 0;
    for (Eigen::Index i = 0; i < 40; ++i) mean += x(d, i);
    mean /= 40;
    double var = 0;
    for (Eigen::Index i = 0; i < 40; ++i) var += (x(d, i) - mean) * (x(d, i) - mean);
    var /= 40;
    worst = std::max({worst, std::abs(g.means(d, 0) - mean), std::abs(g.variances(d, 0) - var)});
  }
  return {violations == 0 && worst <= 1e-9,
          std::to_string(violations) + " LL decreases on 20 datasets (largest drop " +
              Fmt("%.1e", worst_drop) + "), M=1 err " + Fmt("%.1e", worst)};
}

Outcome LdaSanity() {
  const int k = 10;
  std::vector<SymbolBag> docs;
  for (int d = 0; d < k; ++d) docs.emplace_back(std::size_t(1000), d);
  LdaModel lda = FitLda(docs, k, 100, 3);
  double min_mass = 1;
  std::set<Eigen::Index> tops;
  for (int d = 0; d < k; ++d) {
    Eigen::Index top;
    min_mass = std::min(min_mass, lda.doc_topic.row(d).maxCoeff(&top));
    tops.insert(top);
  }
  double norm_err = 0;
  for (Eigen::Index r = 0; r < lda.topic_word.rows(); ++r)
    norm_err = std::max(norm_err, std::abs(lda.topic_word.row(r).sum() - 1.0));
  for (Eigen::Index r = 0; r < lda.doc_topic.rows(); ++r)
    norm_err = std::max(norm_err, std::abs(lda.doc_topic.row(r).sum() - 1.0));
  const Vector theta = InferTopics(lda, docs[3], 9);
  norm_err = std::max(norm_err, std::abs(theta.sum() - 1.0));
  return {min_mass >= 0.9 && tops.size() == std::size_t(k) && norm_err <= 1e-8,
          "min dominant mass " + Fmt("%.4f", min_mass) + ", " + std::to_string(tops.size()) +
              " distinct topics, normalization err " + Fmt("%.1e", norm_err)};
}

Matrix Blobs(int per, int dim, double separation, std::uint64_t seed) {
  Rng rng(seed);
  Matrix x(2 * per, dim);
  for (int i = 0; i < 2 * per; ++i)
    for (int d = 0; d < dim; ++d) x(i, d) = rng.Gaussian() + (i >= per && d == 0 ? separation : 0.0);
  return x;
}

double Silhouette(const Matrix &y, int per) {
  const int n = int(y.rows());
  double total = 0;
  for (int i = 0; i < n; ++i) {
    double in = 0, out = 0;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const double d = std::hypot(y(i, 0) - y(j, 0), y(i, 1) - y(j, 1));
      ((i >= per) == (j >= per) ? in : out) += d;
    }
    const double a = in / (per - 1), b = out / per;
    total += (b - a) / std::max(a, b);
  }
  return total / n;
}

Outcome TsneSeparation() {
  Matrix x = Blobs(50, 25, 10.0, 301);
  TsneOptions opt;
  opt.perplexity = 30;
  opt.seed = 302;
  const auto t0 = Clock::now();
  ProjectionResult a = TsneProject(x, opt);
  const double secs = Seconds(t0);
  ProjectionResult b = TsneProject(x, opt);
  const double sil = Silhouette(a.coords, 50);
  const bool same = a.coords == b.coords;
  return {sil >= 0.5 && same && secs < 60,
          "N=100 silhouette " + Fmt("%.3f", sil) + ", bitwise repeat " +
              (same ? "yes" : "no") + ", " + Fmt("%.2f", secs) + " s"};
}

Outcome ToyDirection() {
  const auto t0 = Clock::now();
  ToyConfig cfg;
  ToyResult main = RunToyExperiment(cfg);
  ToyConfig control_cfg = cfg;
  control_cfg.speaker_variation = false;
  ToyResult control = RunToyExperiment(control_cfg);
  const double secs = Seconds(t0);
  const bool ok = cfg.seeds >= 5 && main.MeanWith() <= main.MeanWithout() &&
                  std::abs(control.DeltaPoints()) <= 2.0 && secs < 300;
  return {ok, std::to_string(cfg.seeds) + " seeds: error " + Fmt("%.4f", main.MeanWithout()) +
                  " -> " + Fmt("%.4f", main.MeanWith()) + " (" +
                  Fmt("%+.2f", main.DeltaPoints()) + " points), control " +
                  Fmt("%+.2f", control.DeltaPoints()) + " points, " + Fmt("%.1f", secs) + " s"};
}

int RunCli(const std::string &args) {
  const std::string cmd = std::string("'") + SPECTEMB_CLI + "' " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome EndToEnd() {
  const std::string cfg = std::string(SPECTEMB_SOURCE_DIR) + "/data/sample/sample.cfg";
  const fs::path a = TempDir("accept_a"), b = TempDir("accept_b");
  const int ca = RunCli("pipeline --config '" + cfg + "' --out '" + a.string() + "'");
  const int cb = RunCli("pipeline --config '" + cfg + "' --out '" + b.string() + "'");
  if (ca != 0 || cb != 0)
    return {false, "pipeline exit codes " + std::to_string(ca) + ", " + std::to_string(cb)};
  int files = 0, differing = 0, archives = 0, roundtrip_bad = 0;
  for (const auto &e : fs::directory_iterator(a)) {
    ++files;
    const std::string bytes = ReadFile(e.path());
    if (bytes != ReadFile(b / e.path().filename())) ++differing;
    if (e.path().extension() == ".ark") {
      ++archives;
      FeatureArchive back = FeatureArchive::Read(e.path().string());
      const fs::path again = a.parent_path() / "spectemb_accept_rewrite.ark";
      back.Write(again.string());
      if (ReadFile(again) != bytes) ++roundtrip_bad;
      fs::remove(again);
    }
  }
  return {differing == 0 && archives >= 5 && roundtrip_bad == 0,
          std::to_string(files) + " output files, " + std::to_string(differing) +
              " differ between runs; " + std::to_string(archives) + " archives, " +
              std::to_string(roundtrip_bad) + " fail write-read-write"};
}

}  // namespace
}  // namespace spectemb

int main() {
  using namespace spectemb;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"svd-oracle-equivalence", SvdOracle},
      {"eckart-young-monotonicity", EckartYoung},
      {"dimensionality-contract", Dimensions},
      {"gradient-check", GradientCheck},
      {"classifier-capability", ClassifierCapability},
      {"gmm-em-monotonicity", GmmMonotone},
      {"lda-sanity", LdaSanity},
      {"tsne-separation", TsneSeparation},
      {"toy-adaptation-direction", ToyDirection},
      {"end-to-end-determinism", EndToEnd},
  };
  int failed = 0;
  for (const auto &[name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception &e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  }
  std::cout << (criteria.size() - std::size_t(failed)) << "/" << criteria.size()
            << " acceptance criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
