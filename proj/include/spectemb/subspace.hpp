// spectemb/subspace.hpp

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

// Spectral/temporal subspace decomposition of a spectrogram S (C x T):
//
//   S = U diag(sigma) V^T,
//
// with the singular values folded into the temporal rows, i.e. the temporal
// basis set is diag(sigma) V^T. The spectral basis set keeps unit-norm
// columns. Fixed-length network inputs are then built from the top-d bases.

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "spectemb/common.hpp"
#include "spectemb/frontend.hpp"

namespace spectemb {

struct SubspaceBases {
  Matrix spectral;              // C x d_s, orthonormal columns
  Matrix temporal;              // d_t x T, rows scaled by singular values
  Vector singular_values;       // all min(C, T) values, descending
  std::string utterance_id;
  std::string speaker_id;

  Eigen::Index SpectralDim() const { return spectral.cols(); }
  Eigen::Index TemporalDim() const { return temporal.rows(); }
  Eigen::Index Rank() const { return singular_values.size(); }
};

enum class FeatureKind { kSpectral, kTemporal, kSpectroTemporal };

inline std::string FeatureKindName(FeatureKind k) {
  switch (k) {
    case FeatureKind::kSpectral: return "spectral";
    case FeatureKind::kTemporal: return "temporal";
    case FeatureKind::kSpectroTemporal: return "spectro-temporal";
  }
  return "?";
}

inline FeatureKind ParseFeatureKind(const std::string &s) {
  if (s == "spectral") return FeatureKind::kSpectral;
  if (s == "temporal") return FeatureKind::kTemporal;
  if (s == "spectro-temporal") return FeatureKind::kSpectroTemporal;
  throw ConfigError("unknown feature kind '" + s +
                    "' (expected spectral, temporal or spectro-temporal)");
}

struct BasisFeature {
  Vector values;
  FeatureKind kind = FeatureKind::kSpectral;
  std::string utterance_id;
  std::string speaker_id;
};

/// Input length of each feature kind for C channels.
inline Eigen::Index SpectralFeatureDim(Eigen::Index channels, Eigen::Index d_s) {
  return channels * d_s;
}
inline Eigen::Index TemporalFeatureDim(Eigen::Index d_t, Eigen::Index window = 25) {
  return 2 * window * d_t;
}

namespace subspace_detail {

// Extends the first `filled` orthonormal columns of q to a full orthonormal
// set using canonical basis vectors and two rounds of Gram-Schmidt.
inline void CompleteOrthonormal(Matrix &q, Eigen::Index filled) {
  const Eigen::Index m = q.rows();
  Eigen::Index next = filled, e = 0;
  while (next < q.cols() && e < m) {
    Vector v = Vector::Unit(m, e++);
    for (int pass = 0; pass < 2; ++pass)
      for (Eigen::Index j = 0; j < next; ++j) v -= q.col(j).dot(v) * q.col(j);
    const double n = v.norm();
    if (n > 1e-8) q.col(next++) = v / n;
  }
}

}  // namespace subspace_detail

/// Full thin SVD by one-sided (Hestenes) Jacobi rotations. The rotation set
/// is applied to the columns of whichever of S, S^T is taller.
inline SubspaceBases SvdDecompose(const MelSpectrogram &spec) {
  const Matrix &s = spec.values;
  if (s.rows() < 1 || s.cols() < 1)
    throw ArgumentError("svd: spectrogram must be non-empty");
  if (!s.allFinite()) throw NumericError("svd: non-finite spectrogram entries");

  const bool transposed = s.rows() < s.cols();
  Matrix b = transposed ? Matrix(s.transpose()) : s;  // m x n, m >= n
  const Eigen::Index m = b.rows(), n = b.cols();
  Matrix w = Matrix::Identity(n, n);

  constexpr double kTol = 1e-15;
  constexpr int kMaxSweeps = 80;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
      for (Eigen::Index j = i + 1; j < n; ++j) {
        const double alpha = b.col(i).squaredNorm();
        const double beta = b.col(j).squaredNorm();
        const double gamma = b.col(i).dot(b.col(j));
        if (gamma == 0.0 || std::abs(gamma) <= kTol * std::sqrt(alpha * beta))
          continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = (zeta >= 0 ? 1.0 : -1.0) /
                         (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double sn = c * t;
        for (Eigen::Index r = 0; r < m; ++r) {
          const double bi = b(r, i), bj = b(r, j);
          b(r, i) = c * bi - sn * bj;
          b(r, j) = sn * bi + c * bj;
        }
        for (Eigen::Index r = 0; r < n; ++r) {
          const double wi = w(r, i), wj = w(r, j);
          w(r, i) = c * wi - sn * wj;
          w(r, j) = sn * wi + c * wj;
        }
      }
    }
    if (!rotated) break;
  }

  Vector sigma(n);
  for (Eigen::Index i = 0; i < n; ++i) sigma(i) = b.col(i).norm();

  // Descending order; equal values keep their original index order.
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index(0));
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index c) { return sigma(a) > sigma(c); });

  // Left singular vectors of b (m x n) and right singular vectors (n x n).
  Matrix left(m, n), right(n, n);
  Vector sorted(n);
  const double scale = sigma.size() ? sigma.maxCoeff() : 0.0;
  Eigen::Index nonzero = 0;
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index src = order[static_cast<std::size_t>(k)];
    sorted(k) = sigma(src);
    right.col(k) = w.col(src);
    if (sigma(src) > scale * 1e-13 && sigma(src) > 0) {
      left.col(k) = b.col(src) / sigma(src);
      nonzero = k + 1;
    }
  }
  subspace_detail::CompleteOrthonormal(left, nonzero);

  SubspaceBases out;
  out.utterance_id = spec.utterance_id;
  out.speaker_id = spec.speaker_id;
  out.singular_values = sorted;
  Matrix u = transposed ? right : left;  // C x k
  Matrix v = transposed ? left : right;  // T x k
  // Sign convention: the largest-magnitude entry of each spectral vector is
  // positive (first such entry on ties); the temporal vector follows.
  for (Eigen::Index k = 0; k < u.cols(); ++k) {
    Eigen::Index arg = 0;
    u.col(k).cwiseAbs().maxCoeff(&arg);
    if (u(arg, k) < 0) {
      u.col(k) = -u.col(k);
      v.col(k) = -v.col(k);
    }
  }
  out.spectral = std::move(u);
  out.temporal = sorted.asDiagonal() * v.transpose();
  return out;
}

/// Keeps the top d_s spectral and top d_t temporal bases.
inline SubspaceBases Truncate(const SubspaceBases &bases, Eigen::Index d_s,
                              Eigen::Index d_t) {
  const Eigen::Index k = bases.Rank();
  if (d_s < 1 || d_s > bases.SpectralDim() || d_s > k)
    throw ArgumentError("truncate: d_s=" + std::to_string(d_s) +
                        " outside [1, " + std::to_string(bases.SpectralDim()) + "]");
  if (d_t < 1 || d_t > bases.TemporalDim() || d_t > k)
    throw ArgumentError("truncate: d_t=" + std::to_string(d_t) +
                        " outside [1, " + std::to_string(bases.TemporalDim()) + "]");
  SubspaceBases out;
  out.spectral = bases.spectral.leftCols(d_s);
  out.temporal = bases.temporal.topRows(d_t);
  out.singular_values = bases.singular_values;
  out.utterance_id = bases.utterance_id;
  out.speaker_id = bases.speaker_id;
  return out;
}

/// Spectral bases flattened basis by basis (column-major), length C * d_s.
inline BasisFeature SpectralFeature(const SubspaceBases &bases) {
  BasisFeature f;
  f.kind = FeatureKind::kSpectral;
  f.utterance_id = bases.utterance_id;
  f.speaker_id = bases.speaker_id;
  f.values = Eigen::Map<const Vector>(bases.spectral.data(), bases.spectral.size());
  return f;
}

/// Windowed statistics of one temporal row: elementwise mean and population
/// standard deviation of every length-`window` slice (hop 1), written as
/// [mean(0..window-1), std(0..window-1)] into `out`. Rows shorter than the
/// window are left-padded with their first value.
inline void WindowedMeanStd(const Eigen::Ref<const RowVector> &row,
                            Eigen::Index window, Eigen::Ref<Vector> out) {
  RowVector x = row;
  if (x.size() < window) {
    RowVector padded(window);
    const Eigen::Index pad = window - x.size();
    padded.head(pad).setConstant(x(0));
    padded.tail(x.size()) = x;
    x = padded;
  }
  const Eigen::Index count = x.size() - window + 1;
  for (Eigen::Index p = 0; p < window; ++p) {
    const auto seg = x.segment(p, count);
    const double mean = seg.mean();
    out(p) = mean;
    out(window + p) = std::sqrt((seg.array() - mean).square().sum() / double(count));
  }
}

inline BasisFeature TemporalFeature(const SubspaceBases &bases,
                                    Eigen::Index window = 25) {
  if (window < 1) throw ArgumentError("temporal window must be >= 1");
  if (bases.temporal.cols() < 1)
    throw ArgumentError("temporal bases have no frames");
  BasisFeature f;
  f.kind = FeatureKind::kTemporal;
  f.utterance_id = bases.utterance_id;
  f.speaker_id = bases.speaker_id;
  f.values.resize(2 * window * bases.TemporalDim());
  for (Eigen::Index r = 0; r < bases.TemporalDim(); ++r)
    WindowedMeanStd(bases.temporal.row(r), window,
                    f.values.segment(2 * window * r, 2 * window));
  return f;
}

inline BasisFeature CombinedFeature(const BasisFeature &spectral,
                                    const BasisFeature &temporal) {
  if (spectral.utterance_id != temporal.utterance_id)
    throw ArgumentError("combined feature: utterance ids differ ('" +
                        spectral.utterance_id + "' vs '" +
                        temporal.utterance_id + "')");
  BasisFeature f;
  f.kind = FeatureKind::kSpectroTemporal;
  f.utterance_id = spectral.utterance_id;
  f.speaker_id = spectral.speaker_id;
  f.values.resize(spectral.values.size() + temporal.values.size());
  f.values << spectral.values, temporal.values;
  return f;
}

/// Builds the configured feature kind from a spectrogram in one call.
inline BasisFeature BuildBasisFeature(const MelSpectrogram &spec, FeatureKind kind,
                                      Eigen::Index d_s, Eigen::Index d_t,
                                      Eigen::Index window = 25) {
  const SubspaceBases full = SvdDecompose(spec);
  const Eigen::Index k = full.Rank();
  // Only the side that is used must fit the rank.
  const Eigen::Index ds = kind == FeatureKind::kTemporal ? 1 : d_s;
  const Eigen::Index dt = kind == FeatureKind::kSpectral ? 1 : d_t;
  if (ds > k || dt > k)
    throw ArgumentError("utterance '" + spec.utterance_id + "' has rank bound " +
                        std::to_string(k) + ", below the requested d");
  const SubspaceBases top = Truncate(full, ds, dt);
  switch (kind) {
    case FeatureKind::kSpectral: return SpectralFeature(top);
    case FeatureKind::kTemporal: return TemporalFeature(top, window);
    case FeatureKind::kSpectroTemporal:
      return CombinedFeature(SpectralFeature(top), TemporalFeature(top, window));
  }
  throw ArgumentError("bad feature kind");
}

}  // namespace spectemb
