// spectemb/smoothing.hpp

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

// Speaker-level smoothing of utterance embeddings.
//
// Two methods:
//   avg  - per-speaker arithmetic mean.
//   lda  - every utterance embedding is quantized to the most likely
//          component of a diagonal GMM, each speaker becomes a bag of
//          component symbols, and the speaker feature is the LDA topic
//          posterior of that bag.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "spectemb/binary_io.hpp"
#include "spectemb/common.hpp"

namespace spectemb {

struct SpeakerEmbedding {
  std::string speaker_id;
  Vector vector;
  std::string method;  // "avg" or "lda"
  std::size_t count = 0;  // utterances that went into the vector
};

/// Per-speaker mean, in speaker-id order. The vectors of each speaker are
/// summed in a canonical (lexicographic) order so the result does not
/// depend on utterance order.
inline std::vector<SpeakerEmbedding> AverageSmooth(
    const std::map<std::string, std::vector<Vector>> &by_speaker) {
  if (by_speaker.empty()) throw DataError("average smoothing: no speakers");
  std::vector<SpeakerEmbedding> out;
  Eigen::Index dim = -1;
  for (const auto &[spk, list] : by_speaker) {
    if (list.empty()) throw DataError("average smoothing: speaker '" + spk + "' has no embeddings");
    std::vector<const Vector *> sorted;
    for (const auto &v : list) {
      if (dim < 0) dim = v.size();
      if (v.size() != dim)
        throw ArgumentError("average smoothing: speaker '" + spk + "' has a vector of dim " +
                            std::to_string(v.size()) + ", expected " + std::to_string(dim));
      if (!v.allFinite())
        throw NumericError("average smoothing: non-finite embedding for '" + spk + "'");
      sorted.push_back(&v);
    }
    std::sort(sorted.begin(), sorted.end(), [](const Vector *a, const Vector *b) {
      return std::lexicographical_compare(a->data(), a->data() + a->size(), b->data(),
                                          b->data() + b->size());
    });
    Vector sum = Vector::Zero(dim);
    for (const Vector *v : sorted) sum += *v;
    out.push_back({spk, sum / double(list.size()), "avg", list.size()});
  }
  return out;
}

// GMM ------------------------------------------------------------------------

struct GmmOptions {
  int max_iterations = 200;
  double tolerance = 1e-6;  // relative log-likelihood improvement
  double variance_floor = 1e-6;
};

struct GmmModel {
  Vector weights;     // M
  Matrix means;       // D x M
  Matrix variances;   // D x M
  std::vector<double> log_likelihood;  // total, initial model first

  Eigen::Index NumComponents() const { return weights.size(); }
  Eigen::Index Dim() const { return means.rows(); }

  /// log w_m + log N(x; mu_m, diag var_m) for every component.
  Vector ComponentScores(const Eigen::Ref<const Vector> &x) const {
    const Eigen::Index m_count = NumComponents();
    Vector s(m_count);
    const double log2pi = std::log(2.0 * std::numbers::pi);
    for (Eigen::Index m = 0; m < m_count; ++m) {
      double acc = 0.0;
      for (Eigen::Index d = 0; d < Dim(); ++d) {
        const double v = variances(d, m);
        const double diff = x(d) - means(d, m);
        acc += log2pi + std::log(v) + diff * diff / v;
      }
      s(m) = std::log(weights(m)) - 0.5 * acc;
    }
    return s;
  }

  double TotalLogLikelihood(const Matrix &data) const {
    double ll = 0.0;
    for (Eigen::Index n = 0; n < data.cols(); ++n) ll += LogSumExp(ComponentScores(data.col(n)));
    return ll;
  }
};

namespace gmm_detail {

inline Eigen::Index CountDistinctColumns(const Matrix &data) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(data.cols()));
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = Eigen::Index(i);
  auto less = [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index d = 0; d < data.rows(); ++d)
      if (data(d, a) != data(d, b)) return data(d, a) < data(d, b);
    return false;
  };
  std::sort(idx.begin(), idx.end(), less);
  Eigen::Index distinct = idx.empty() ? 0 : 1;
  for (std::size_t i = 1; i < idx.size(); ++i)
    if (less(idx[i - 1], idx[i])) ++distinct;
  return distinct;
}

// k-means++ seeding: first center uniform, then proportional to squared
// distance from the nearest chosen center.
inline std::vector<Eigen::Index> KMeansPlusPlus(const Matrix &data, Eigen::Index m_count,
                                                Rng &rng) {
  const Eigen::Index n = data.cols();
  std::vector<Eigen::Index> centers{Eigen::Index(rng.Index(std::size_t(n)))};
  Vector d2 = (data.colwise() - data.col(centers[0])).colwise().squaredNorm().transpose();
  while (Eigen::Index(centers.size()) < m_count) {
    const double total = d2.sum();
    double r = rng.Uniform() * total;
    Eigen::Index pick = -1;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (d2(i) <= 0) continue;
      pick = i;
      r -= d2(i);
      if (r < 0) break;
    }
    centers.push_back(pick);
    Vector nd = (data.colwise() - data.col(pick)).colwise().squaredNorm().transpose();
    d2 = d2.cwiseMin(nd);
  }
  return centers;
}

// M-step from responsibilities (N x M). Components with no mass keep their
// previous mean and variance and get weight 0.
inline void MStep(const Matrix &data, const Matrix &resp, double floor, GmmModel &g) {
  const Eigen::Index n = data.cols();
  for (Eigen::Index m = 0; m < g.NumComponents(); ++m) {
    const double nk = resp.col(m).sum();
    g.weights(m) = nk / double(n);
    if (nk <= 0) continue;
    Vector mean = data * resp.col(m) / nk;
    Vector var = ((data.colwise() - mean).array().square().matrix() * resp.col(m)) / nk;
    g.means.col(m) = mean;
    g.variances.col(m) = var.cwiseMax(floor);
  }
  g.weights /= g.weights.sum();
}

}  // namespace gmm_detail

/// Diagonal-covariance GMM by EM, initialized from a hard k-means++
/// assignment. `data` holds one vector per column.
inline GmmModel FitGmm(const Matrix &data, Eigen::Index num_components, std::uint64_t seed,
                       const GmmOptions &opt = {}) {
  if (num_components < 1) throw ArgumentError("GMM needs at least one component");
  if (data.cols() < num_components)
    throw DataError("GMM with " + std::to_string(num_components) + " components needs at least " +
                    std::to_string(num_components) + " vectors, got " +
                    std::to_string(data.cols()));
  if (!data.allFinite()) throw NumericError("GMM training data contains non-finite values");
  if (gmm_detail::CountDistinctColumns(data) < num_components)
    throw DataError("GMM with " + std::to_string(num_components) +
                    " components needs that many distinct vectors");
  const Eigen::Index n = data.cols(), dim = data.rows();
  Rng rng(seed);
  auto centers = gmm_detail::KMeansPlusPlus(data, num_components, rng);

  GmmModel g;
  g.weights = Vector::Zero(num_components);
  g.means.resize(dim, num_components);
  g.variances = Matrix::Constant(dim, num_components, opt.variance_floor);
  for (Eigen::Index m = 0; m < num_components; ++m) g.means.col(m) = data.col(centers[m]);

  // Hard assignment to the nearest seed (lowest index on ties).
  Matrix resp = Matrix::Zero(n, num_components);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index m = 0; m < num_components; ++m) {
      const double d = (data.col(i) - g.means.col(m)).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = m;
      }
    }
    resp(i, best) = 1.0;
  }
  gmm_detail::MStep(data, resp, opt.variance_floor, g);
  double ll = g.TotalLogLikelihood(data);
  g.log_likelihood.push_back(ll);

  for (int it = 0; it < opt.max_iterations; ++it) {
    for (Eigen::Index i = 0; i < n; ++i) {
      Vector s = g.ComponentScores(data.col(i));
      const double z = LogSumExp(s);
      resp.row(i) = (s.array() - z).exp().matrix().transpose();
    }
    gmm_detail::MStep(data, resp, opt.variance_floor, g);
    const double next = g.TotalLogLikelihood(data);
    if (!std::isfinite(next)) throw NumericError("GMM log-likelihood became non-finite");
    g.log_likelihood.push_back(next);
    const double gain = (next - ll) / std::max(std::abs(ll), 1e-300);
    ll = next;
    if (gain < opt.tolerance) break;
  }
  return g;
}

/// Index of the most likely component; ties go to the lowest index.
inline int Quantize(const GmmModel &gmm, const Eigen::Ref<const Vector> &x) {
  if (x.size() != gmm.Dim())
    throw ArgumentError("quantize: vector dim " + std::to_string(x.size()) +
                        " does not match GMM dim " + std::to_string(gmm.Dim()));
  Vector s = gmm.ComponentScores(x);
  int best = 0;
  for (Eigen::Index m = 1; m < s.size(); ++m)
    if (s(m) > s(best)) best = int(m);
  return best;
}

// LDA ------------------------------------------------------------------------

using SymbolBag = std::vector<int>;

struct LdaOptions {
  int sweeps = 500;
  int inference_sweeps = 200;
  double alpha = -1.0;  // <= 0 means 50 / K
  double beta = 0.01;
};

struct LdaModel {
  Eigen::Index num_topics = 0;
  double alpha = 0;
  double beta = 0;
  Matrix topic_word;  // K x V, rows sum to 1
  Matrix doc_topic;   // training docs x K, rows sum to 1

  Eigen::Index VocabularySize() const { return topic_word.cols(); }
};

namespace lda_detail {

inline void CheckDoc(const SymbolBag &doc, Eigen::Index vocab, const std::string &what) {
  if (doc.empty()) throw DataError(what + " is empty");
  for (int w : doc)
    if (w < 0 || w >= vocab)
      throw ArgumentError(what + " has symbol " + std::to_string(w) + " outside [0, " +
                          std::to_string(vocab) + ")");
}

inline int SampleIndex(const std::vector<double> &weights, double total, Rng &rng) {
  double r = rng.Uniform() * total;
  for (std::size_t k = 0; k + 1 < weights.size(); ++k) {
    r -= weights[k];
    if (r < 0) return int(k);
  }
  return int(weights.size()) - 1;
}

}  // namespace lda_detail

/// Collapsed Gibbs LDA over symbol bags drawn from a vocabulary of size
/// `vocab`. The topic-word matrix comes from the final-state counts;
/// training doc-topic rows are averaged over the second half of the sweeps.
inline LdaModel FitLda(const std::vector<SymbolBag> &docs, Eigen::Index num_topics,
                       Eigen::Index vocab, std::uint64_t seed, const LdaOptions &opt = {}) {
  if (num_topics < 2) throw ArgumentError("LDA needs at least 2 topics");
  if (vocab < 1) throw ArgumentError("LDA vocabulary must be non-empty");
  if (docs.empty()) throw DataError("LDA: no documents");
  if (opt.sweeps < 1) throw ArgumentError("LDA: sweeps must be >= 1");
  if (!(opt.beta > 0)) throw ArgumentError("LDA: beta must be > 0");
  for (std::size_t d = 0; d < docs.size(); ++d)
    lda_detail::CheckDoc(docs[d], vocab, "document " + std::to_string(d));

  const Eigen::Index k_count = num_topics;
  const double alpha = opt.alpha > 0 ? opt.alpha : 50.0 / double(k_count);
  const double beta = opt.beta;
  const double vbeta = double(vocab) * beta;
  Rng rng(seed);

  const std::size_t n_docs = docs.size();
  std::vector<std::vector<int>> z(n_docs);
  Matrix n_dk = Matrix::Zero(Eigen::Index(n_docs), k_count);
  Matrix n_kw = Matrix::Zero(k_count, vocab);
  Vector n_k = Vector::Zero(k_count);
  for (std::size_t d = 0; d < n_docs; ++d) {
    for (int w : docs[d]) {
      const int k = int(rng.Index(std::size_t(k_count)));
      z[d].push_back(k);
      n_dk(Eigen::Index(d), k) += 1;
      n_kw(k, w) += 1;
      n_k(k) += 1;
    }
  }

  Matrix theta_sum = Matrix::Zero(Eigen::Index(n_docs), k_count);
  int samples = 0;
  std::vector<double> p(static_cast<std::size_t>(k_count));
  const int burn_in = opt.sweeps / 2;
  for (int sweep = 0; sweep < opt.sweeps; ++sweep) {
    for (std::size_t d = 0; d < n_docs; ++d) {
      const Eigen::Index di = Eigen::Index(d);
      for (std::size_t i = 0; i < docs[d].size(); ++i) {
        const int w = docs[d][i];
        int k = z[d][i];
        n_dk(di, k) -= 1;
        n_kw(k, w) -= 1;
        n_k(k) -= 1;
        double total = 0;
        for (Eigen::Index t = 0; t < k_count; ++t) {
          p[std::size_t(t)] = (n_dk(di, t) + alpha) * (n_kw(t, w) + beta) / (n_k(t) + vbeta);
          total += p[std::size_t(t)];
        }
        k = lda_detail::SampleIndex(p, total, rng);
        z[d][i] = k;
        n_dk(di, k) += 1;
        n_kw(k, w) += 1;
        n_k(k) += 1;
      }
    }
    if (sweep >= burn_in) {
      for (std::size_t d = 0; d < n_docs; ++d) {
        const Eigen::Index di = Eigen::Index(d);
        theta_sum.row(di) += ((n_dk.row(di).array() + alpha) /
                              (double(docs[d].size()) + double(k_count) * alpha))
                                 .matrix();
      }
      ++samples;
    }
  }

  LdaModel lda;
  lda.num_topics = k_count;
  lda.alpha = alpha;
  lda.beta = beta;
  lda.topic_word = (n_kw.array() + beta).colwise() / (n_k.array() + vbeta);
  lda.doc_topic = theta_sum / double(samples);
  for (Eigen::Index d = 0; d < lda.doc_topic.rows(); ++d)
    lda.doc_topic.row(d) /= lda.doc_topic.row(d).sum();
  for (Eigen::Index k = 0; k < k_count; ++k) lda.topic_word.row(k) /= lda.topic_word.row(k).sum();
  return lda;
}

/// Topic posterior of one bag under a fixed topic-word matrix: Gibbs
/// sampling of the bag's topic assignments, theta = (count + alpha)
/// normalized, averaged over the second half of the sweeps.
inline Vector InferTopics(const LdaModel &lda, const SymbolBag &doc, std::uint64_t seed,
                          int sweeps = 200) {
  lda_detail::CheckDoc(doc, lda.VocabularySize(), "document");
  if (sweeps < 1) throw ArgumentError("LDA inference: sweeps must be >= 1");
  const Eigen::Index k_count = lda.num_topics;
  Rng rng(seed);
  std::vector<int> z;
  Vector n_k = Vector::Zero(k_count);
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const int k = int(rng.Index(std::size_t(k_count)));
    z.push_back(k);
    n_k(k) += 1;
  }
  const double norm = double(doc.size()) + double(k_count) * lda.alpha;
  Vector theta = Vector::Zero(k_count);
  int samples = 0;
  std::vector<double> p(static_cast<std::size_t>(k_count));
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    for (std::size_t i = 0; i < doc.size(); ++i) {
      n_k(z[i]) -= 1;
      double total = 0;
      for (Eigen::Index t = 0; t < k_count; ++t) {
        p[std::size_t(t)] = (n_k(t) + lda.alpha) * lda.topic_word(t, doc[i]);
        total += p[std::size_t(t)];
      }
      z[i] = lda_detail::SampleIndex(p, total, rng);
      n_k(z[i]) += 1;
    }
    if (sweep >= sweeps / 2) {
      theta += (n_k.array() + lda.alpha).matrix() / norm;
      ++samples;
    }
  }
  theta /= double(samples);
  return theta / theta.sum();
}

inline SpeakerEmbedding LdaSmooth(const LdaModel &lda, const std::string &speaker_id,
                                  const SymbolBag &doc, std::uint64_t seed,
                                  int sweeps = 200) {
  if (doc.empty()) throw DataError("LDA smoothing: speaker '" + speaker_id + "' has no symbols");
  return {speaker_id, InferTopics(lda, doc, seed, sweeps), "lda", doc.size()};
}

// Model containers -------------------------------------------------------------

inline constexpr char kGmmMagic[9] = "SPTEMGMM";
inline constexpr char kLdaMagic[9] = "SPTEMLDA";

inline std::string SerializeGmm(const GmmModel &g) {
  BinaryWriter w(kGmmMagic, 1);
  w.PutI64(g.NumComponents());
  w.PutI64(g.Dim());
  w.PutMatrix("weights", g.weights);
  w.PutMatrix("means", g.means);
  w.PutMatrix("variances", g.variances);
  w.PutMatrix("log_likelihood",
              Eigen::Map<const Vector>(g.log_likelihood.data(),
                                       Eigen::Index(g.log_likelihood.size())));
  return w.Bytes();
}

inline GmmModel DeserializeGmm(const std::string &bytes, const std::string &origin = "<gmm>") {
  BinaryReader r(bytes, kGmmMagic, origin);
  if (r.Version() != 1) throw FormatError(origin + ": unsupported GMM version");
  const std::int64_t m = r.GetI64(), d = r.GetI64();
  if (m < 1 || d < 1) throw FormatError(origin + ": bad GMM shape");
  GmmModel g;
  g.weights = r.GetMatrix("weights", m, 1).col(0);
  g.means = r.GetMatrix("means", d, m);
  g.variances = r.GetMatrix("variances", d, m);
  // History length is free; peek via a shape-agnostic read.
  BinaryReader probe = r;
  probe.GetString();
  const std::int64_t len = probe.GetI64();
  if (len < 0) throw FormatError(origin + ": bad history length");
  Vector hist = r.GetMatrix("log_likelihood", len, 1).col(0);
  g.log_likelihood.assign(hist.data(), hist.data() + hist.size());
  r.ExpectEnd();
  if (!g.weights.allFinite() || !g.means.allFinite() || !(g.variances.array() > 0).all())
    throw FormatError(origin + ": invalid GMM parameters");
  return g;
}

inline std::string SerializeLda(const LdaModel &lda) {
  BinaryWriter w(kLdaMagic, 1);
  w.PutI64(lda.num_topics);
  w.PutI64(lda.VocabularySize());
  w.PutI64(lda.doc_topic.rows());
  w.PutDouble(lda.alpha);
  w.PutDouble(lda.beta);
  w.PutMatrix("topic_word", lda.topic_word);
  w.PutMatrix("doc_topic", lda.doc_topic);
  return w.Bytes();
}

inline LdaModel DeserializeLda(const std::string &bytes, const std::string &origin = "<lda>") {
  BinaryReader r(bytes, kLdaMagic, origin);
  if (r.Version() != 1) throw FormatError(origin + ": unsupported LDA version");
  LdaModel lda;
  lda.num_topics = r.GetI64();
  const std::int64_t vocab = r.GetI64(), docs = r.GetI64();
  if (lda.num_topics < 2 || vocab < 1 || docs < 0) throw FormatError(origin + ": bad LDA shape");
  lda.alpha = r.GetDouble();
  lda.beta = r.GetDouble();
  lda.topic_word = r.GetMatrix("topic_word", lda.num_topics, vocab);
  lda.doc_topic = r.GetMatrix("doc_topic", docs, lda.num_topics);
  r.ExpectEnd();
  if (!(lda.alpha > 0) || !(lda.beta > 0) || !(lda.topic_word.array() > 0).all())
    throw FormatError(origin + ": invalid LDA parameters");
  return lda;
}

}  // namespace spectemb
