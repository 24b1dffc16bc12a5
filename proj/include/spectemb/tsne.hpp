// spectemb/tsne.hpp

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

// Exact O(N^2) t-SNE and a small SVG scatter-plot writer.
//
// Points are rows of an N x D matrix. Perplexity is exp(H) with H the
// Shannon entropy in nats of each conditional distribution P(j | i).

#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "spectemb/common.hpp"
#include "spectemb/keyvalue.hpp"

namespace spectemb {

struct TsneOptions {
  double perplexity = 30.0;
  int iterations = 1000;
  std::uint64_t seed = 1;
  double learning_rate = 200.0;
  double exaggeration = 12.0;
  int exaggeration_iterations = 250;
  double initial_momentum = 0.5;
  double final_momentum = 0.8;
  int momentum_switch = 250;
  double entropy_tolerance = 1e-5;
  int max_bisection_steps = 50;
  int kl_every = 50;
};

struct ProjectionResult {
  Matrix coords;  // N x 2
  std::vector<std::string> ids;     // optional, one per point
  std::vector<std::string> groups;  // optional, one per point
  double kl_divergence = 0;
  int iterations = 0;
  std::vector<std::pair<int, double>> kl_trace;  // (iteration, KL)
};

/// Squared Euclidean distances between rows, computed from differences.
inline Matrix PairwiseSquaredDistances(const Matrix &x) {
  const Eigen::Index n = x.rows();
  Matrix d = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) d(i, j) = d(j, i) = (x.row(i) - x.row(j)).squaredNorm();
  return d;
}

struct ConditionalAffinities {
  Matrix p;               // row i is P(. | i); zero diagonal
  Vector perplexity;      // achieved per row
};

/// Per-row Gaussian bandwidth search by bisection on the precision.
inline ConditionalAffinities ComputeConditionalAffinities(const Matrix &x, double perplexity,
                                                          const TsneOptions &opt = {}) {
  const Eigen::Index n = x.rows();
  Matrix d = PairwiseSquaredDistances(x);
  for (Eigen::Index i = 0; i < n; ++i) {
    bool any = false;
    for (Eigen::Index j = 0; j < n; ++j) any |= (j != i && d(i, j) > 0);
    if (!any)
      throw ArgumentError("t-SNE: degenerate input, point " + std::to_string(i) +
                          " coincides with every other point");
  }
  const double target = std::log(perplexity);
  ConditionalAffinities out{Matrix::Zero(n, n), Vector::Zero(n)};
  Vector row(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    // Offset by the nearest-neighbour distance.
    double dmin = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) dmin = std::min(dmin, d(i, j));
    double beta = 1.0, lo = 0.0, hi = std::numeric_limits<double>::infinity();
    double entropy = 0.0;
    auto evaluate = [&](double b) {
      double sum = 0.0, dot = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        row(j) = j == i ? 0.0 : std::exp(-b * (d(i, j) - dmin));
        sum += row(j);
        dot += row(j) * (d(i, j) - dmin);
      }
      row /= sum;
      entropy = std::log(sum) + b * dot / sum;
    };
    // Scale the starting precision to the data.
    double mean_d = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) mean_d += d(i, j);
    mean_d /= double(n - 1);
    beta = 1.0 / std::max(mean_d, 1e-300);
    evaluate(beta);
    for (int step = 0; step < opt.max_bisection_steps; ++step) {
      const double diff = entropy - target;
      if (std::abs(diff) < opt.entropy_tolerance) break;
      if (diff > 0) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
      } else {
        hi = beta;
        beta = 0.5 * (beta + lo);
      }
      evaluate(beta);
    }
    out.p.row(i) = row.transpose();
    out.perplexity(i) = std::exp(entropy);
  }
  return out;
}

/// Symmetrized joint affinities (P + P^T) / 2N.
inline Matrix ComputeJointAffinities(const Matrix &x, double perplexity,
                                     const TsneOptions &opt = {}) {
  Matrix p = ComputeConditionalAffinities(x, perplexity, opt).p;
  Matrix joint = (p + p.transpose()) / (2.0 * double(x.rows()));
  return joint.cwiseMax(1e-12 / double(x.rows()));
}

namespace tsne_detail {

inline double KlDivergence(const Matrix &p, const Matrix &y) {
  const Eigen::Index n = y.rows();
  Matrix num = Matrix::Zero(n, n);
  double z = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (i != j) {
        num(i, j) = 1.0 / (1.0 + (y.row(i) - y.row(j)).squaredNorm());
        z += num(i, j);
      }
  double kl = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (i != j) kl += p(i, j) * std::log(p(i, j) / std::max(num(i, j) / z, 1e-300));
  return std::max(kl, 0.0);
}

}  // namespace tsne_detail

inline ProjectionResult TsneProject(const Matrix &points, const TsneOptions &opt = {}) {
  const Eigen::Index n = points.rows();
  if (n < 5) throw ArgumentError("t-SNE needs at least 5 points, got " + std::to_string(n));
  if (!(opt.perplexity > 0) || !(opt.perplexity < double(n - 1) / 3.0))
    throw ArgumentError("t-SNE: perplexity " + FormatExact(opt.perplexity) +
                        " is infeasible for " + std::to_string(n) +
                        " points (need 0 < perplexity < (N-1)/3)");
  if (opt.iterations < 1) throw ArgumentError("t-SNE: iterations must be >= 1");
  if (!points.allFinite()) throw NumericError("t-SNE input contains non-finite values");

  Matrix p = ComputeJointAffinities(points, opt.perplexity, opt);
  p.diagonal().setZero();
  Rng rng(opt.seed);
  Matrix y(n, 2);
  for (Eigen::Index i = 0; i < n; ++i)
    for (int c = 0; c < 2; ++c) y(i, c) = 1e-4 * rng.Gaussian();
  Matrix update = Matrix::Zero(n, 2), gains = Matrix::Ones(n, 2);
  Matrix num(n, n), grad(n, 2);

  ProjectionResult res;
  for (int it = 1; it <= opt.iterations; ++it) {
    const double exag = it <= opt.exaggeration_iterations ? opt.exaggeration : 1.0;
    const double momentum = it <= opt.momentum_switch ? opt.initial_momentum : opt.final_momentum;
    double z = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      num(i, i) = 0.0;
      for (Eigen::Index j = i + 1; j < n; ++j) {
        num(i, j) = num(j, i) = 1.0 / (1.0 + (y.row(i) - y.row(j)).squaredNorm());
        z += 2.0 * num(i, j);
      }
    }
    grad.setZero();
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) {
        if (i == j) continue;
        const double w = (exag * p(i, j) - num(i, j) / z) * num(i, j);
        grad.row(i) += 4.0 * w * (y.row(i) - y.row(j));
      }
    for (Eigen::Index i = 0; i < n; ++i)
      for (int c = 0; c < 2; ++c) {
        const bool same = (grad(i, c) > 0) == (update(i, c) > 0);
        gains(i, c) = same ? gains(i, c) * 0.8 : gains(i, c) + 0.2;
        gains(i, c) = std::max(gains(i, c), 0.01);
        update(i, c) = momentum * update(i, c) - opt.learning_rate * gains(i, c) * grad(i, c);
      }
    y += update;
    y.rowwise() -= y.colwise().mean();
    if (!y.allFinite()) throw NumericError("t-SNE diverged at iteration " + std::to_string(it));
    if ((opt.kl_every > 0 && it % opt.kl_every == 0) || it == opt.iterations)
      res.kl_trace.emplace_back(it, tsne_detail::KlDivergence(p, y));
  }
  res.coords = y;
  res.iterations = opt.iterations;
  res.kl_divergence = res.kl_trace.back().second;
  return res;
}

// Plot output ----------------------------------------------------------------

namespace plot_detail {

inline std::string XmlEscape(const std::string &s) {
  std::string o;
  for (char c : s) {
    switch (c) {
      case '&': o += "&amp;"; break;
      case '<': o += "&lt;"; break;
      case '>': o += "&gt;"; break;
      case '"': o += "&quot;"; break;
      default: o += c;
    }
  }
  return o;
}

inline const char *Color(std::size_t i) {
  static const char *kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                   "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  return kPalette[i % (sizeof kPalette / sizeof kPalette[0])];
}

}  // namespace plot_detail

/// Sidecar path used by EmitPlot: same stem, ".tsv" extension.
inline std::string SidecarPath(const std::string &svg_path) {
  return std::filesystem::path(svg_path).replace_extension(".tsv").string();
}

/// Writes an SVG scatter (one color per group, legend, axes) and a TSV
/// sidecar "speaker_id x y group" next to it.
inline void EmitPlot(const ProjectionResult &r, const std::string &svg_path,
                     const std::string &title = "t-SNE") {
  const Eigen::Index n = r.coords.rows();
  if (r.coords.cols() != 2 || n == 0) throw ArgumentError("plot: need N x 2 coordinates");
  if (!r.coords.allFinite()) throw NumericError("plot: non-finite coordinates");
  auto id_of = [&](Eigen::Index i) {
    return std::size_t(i) < r.ids.size() ? r.ids[std::size_t(i)] : "p" + std::to_string(i);
  };
  auto group_of = [&](Eigen::Index i) {
    return std::size_t(i) < r.groups.size() ? r.groups[std::size_t(i)] : std::string("all");
  };
  std::map<std::string, std::size_t> group_index;
  for (Eigen::Index i = 0; i < n; ++i) group_index.emplace(group_of(i), 0);
  std::size_t next = 0;
  for (auto &[g, idx] : group_index) idx = next++;

  const double w = 640, h = 480, margin = 50;
  const double x0 = r.coords.col(0).minCoeff(), x1 = r.coords.col(0).maxCoeff();
  const double y0 = r.coords.col(1).minCoeff(), y1 = r.coords.col(1).maxCoeff();
  const double sx = (w - 2 * margin - 120) / std::max(x1 - x0, 1e-12);
  const double sy = (h - 2 * margin) / std::max(y1 - y0, 1e-12);
  auto px = [&](double v) { return margin + (v - x0) * sx; };
  auto py = [&](double v) { return h - margin - (v - y0) * sy; };

  std::string svg;
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%g\" height=\"%g\" "
                "viewBox=\"0 0 %g %g\">\n"
                "<rect width=\"100%%\" height=\"100%%\" fill=\"white\"/>\n",
                w, h, w, h);
  svg += buf;
  svg += "<title>" + plot_detail::XmlEscape(title) + "</title>\n";
  std::snprintf(buf, sizeof buf,
                "<g class=\"axes\" stroke=\"black\" stroke-width=\"1\">\n"
                "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\"/>\n"
                "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\"/>\n</g>\n",
                margin - 10, h - margin + 10, w - margin - 110, h - margin + 10, margin - 10,
                h - margin + 10, margin - 10, margin - 10);
  svg += buf;
  std::snprintf(buf, sizeof buf,
                "<text x=\"%g\" y=\"%g\" font-size=\"12\" text-anchor=\"middle\">dim 1</text>\n"
                "<text x=\"%g\" y=\"%g\" font-size=\"12\" text-anchor=\"middle\" "
                "transform=\"rotate(-90 %g %g)\">dim 2</text>\n",
                (w - 120) / 2, h - margin + 30, margin - 30, h / 2, margin - 30, h / 2);
  svg += buf;
  svg += "<g class=\"points\">\n";
  for (Eigen::Index i = 0; i < n; ++i) {
    std::snprintf(buf, sizeof buf,
                  "<circle class=\"marker\" cx=\"%.3f\" cy=\"%.3f\" r=\"4\" fill=\"%s\">"
                  "<title>%s</title></circle>\n",
                  px(r.coords(i, 0)), py(r.coords(i, 1)),
                  plot_detail::Color(group_index.at(group_of(i))),
                  plot_detail::XmlEscape(id_of(i)).c_str());
    svg += buf;
  }
  svg += "</g>\n<g class=\"legend\">\n";
  for (const auto &[g, idx] : group_index) {
    const double ly = margin + 20.0 * double(idx);
    std::snprintf(buf, sizeof buf,
                  "<g class=\"legend-entry\"><circle cx=\"%g\" cy=\"%g\" r=\"5\" fill=\"%s\"/>"
                  "<text x=\"%g\" y=\"%g\" font-size=\"12\">%s</text></g>\n",
                  w - 110, ly, plot_detail::Color(idx), w - 100, ly + 4,
                  plot_detail::XmlEscape(g).c_str());
    svg += buf;
  }
  svg += "</g>\n</svg>\n";

  std::ofstream out(svg_path);
  if (!out) throw IoError("cannot write plot " + svg_path);
  out << svg;
  if (!out) throw IoError("write failed: " + svg_path);

  const std::string tsv_path = SidecarPath(svg_path);
  std::ofstream tsv(tsv_path);
  if (!tsv) throw IoError("cannot write " + tsv_path);
  tsv << "speaker_id\tx\ty\tgroup\n";
  for (Eigen::Index i = 0; i < n; ++i)
    tsv << id_of(i) << '\t' << FormatExact(r.coords(i, 0)) << '\t' << FormatExact(r.coords(i, 1))
        << '\t' << group_of(i) << '\n';
  if (!tsv) throw IoError("write failed: " + tsv_path);
}

}  // namespace spectemb
