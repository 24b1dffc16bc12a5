// tests/tsne_test.cpp

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

#include <gtest/gtest.h>

#include <cmath>
#include <regex>

#include "spectemb/tsne.hpp"
#include "test_util.hpp"

namespace spectemb {
namespace {

Matrix Blobs(int per, int dim, double separation, std::uint64_t seed) {
  Rng rng(seed);
  Matrix x(2 * per, dim);
  for (int i = 0; i < 2 * per; ++i)
    for (int d = 0; d < dim; ++d)
      x(i, d) = rng.Gaussian() + (i >= per && d == 0 ? separation : 0.0);
  return x;
}

// Mean silhouette of labelled 2-D points, straight from the definition.
double Silhouette(const Matrix &y, const std::vector<int> &label) {
  const int n = int(y.rows());
  double total = 0;
  for (int i = 0; i < n; ++i) {
    double in = 0, out = 0;
    int n_in = 0, n_out = 0;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const double d = std::hypot(y(i, 0) - y(j, 0), y(i, 1) - y(j, 1));
      if (label[j] == label[i]) {
        in += d;
        ++n_in;
      } else {
        out += d;
        ++n_out;
      }
    }
    const double a = in / n_in, b = out / n_out;
    total += (b - a) / std::max(a, b);
  }
  return total / n;
}

TEST(Affinities, RowsHitTargetPerplexity) {
  Matrix x = Blobs(20, 5, 3.0, 1);
  for (double perp : {5.0, 10.0}) {
    ConditionalAffinities a = ComputeConditionalAffinities(x, perp);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      EXPECT_NEAR(a.p.row(i).sum(), 1.0, 1e-12);
      EXPECT_EQ(a.p(i, i), 0.0);
      double h = 0;
      for (Eigen::Index j = 0; j < x.rows(); ++j)
        if (a.p(i, j) > 0) h -= a.p(i, j) * std::log(a.p(i, j));
      EXPECT_NEAR(std::exp(h), perp, 1e-3);
    }
  }
}

TEST(Affinities, TranslationInvariant) {
  Matrix x = Blobs(15, 4, 2.0, 2);
  Matrix shifted = x.rowwise() + Eigen::RowVectorXd::Constant(4, 3.25);
  Matrix a = ComputeJointAffinities(x, 5.0), b = ComputeJointAffinities(shifted, 5.0);
  EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Affinities, JointIsSymmetricAndNormalized) {
  Matrix p = ComputeJointAffinities(Blobs(10, 3, 1.0, 3), 4.0);
  EXPECT_LE((p - p.transpose()).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_NEAR(p.sum() - p.diagonal().sum(), 1.0, 1e-9);
}

TEST(Tsne, SeparatesBlobs) {
  Matrix x = Blobs(30, 25, 10.0, 4);
  TsneOptions opt;
  opt.perplexity = 10;
  opt.seed = 3;
  ProjectionResult r = TsneProject(x, opt);
  std::vector<int> label;
  for (int i = 0; i < 60; ++i) label.push_back(i >= 30);
  EXPECT_GE(Silhouette(r.coords, label), 0.5);
  EXPECT_TRUE(r.coords.allFinite());
  EXPECT_GE(r.kl_divergence, 0.0);
  EXPECT_EQ(r.iterations, 1000);
}

TEST(Tsne, KlDecreasesAfterExaggeration) {
  Rng rng(5);
  Matrix x = testing::RandomMatrix(40, 6, rng);
  TsneOptions opt;
  opt.perplexity = 8;
  ProjectionResult r = TsneProject(x, opt);
  double at300 = -1;
  for (auto [it, kl] : r.kl_trace)
    if (it == 300) at300 = kl;
  ASSERT_GE(at300, 0.0);
  EXPECT_LE(r.kl_trace.back().second, at300);
  EXPECT_EQ(r.kl_trace.back().first, 1000);
}

TEST(Tsne, SeededRunsAreBitIdentical) {
  Matrix x = Blobs(12, 5, 4.0, 6);
  TsneOptions opt;
  opt.perplexity = 5;
  opt.iterations = 300;
  ProjectionResult a = TsneProject(x, opt), b = TsneProject(x, opt);
  EXPECT_EQ(a.coords, b.coords);
  opt.seed = 2;
  EXPECT_NE(TsneProject(x, opt).coords, a.coords);
}

TEST(Tsne, RejectsBadInput) {
  EXPECT_THROW(TsneProject(Matrix::Random(4, 3)), ArgumentError);
  TsneOptions opt;
  opt.perplexity = 30;
  EXPECT_THROW(TsneProject(Blobs(20, 3, 1, 1), opt), ArgumentError);  // 30 >= 39/3
  opt.perplexity = 3;
  EXPECT_THROW(TsneProject(Matrix::Ones(12, 4), opt), ArgumentError);
}

TEST(Plot, MarkersLegendAndSidecar) {
  ProjectionResult r;
  r.coords.resize(3, 2);
  r.coords << 0.1, 0.2, -1.0 / 3.0, 5.5, 2.0, -7.0;
  r.ids = {"s1", "s2", "s3"};
  r.groups = {"aged", "non-aged", "aged"};
  auto dir = testing::TempDir("plot");
  const std::string svg = (dir / "proj.svg").string();
  EmitPlot(r, svg);
  const std::string text = testing::ReadFile(svg);
  auto count = [&](const std::string &pat) {
    std::regex re(pat);
    return std::distance(std::sregex_iterator(text.begin(), text.end(), re),
                         std::sregex_iterator());
  };
  EXPECT_EQ(count("class=\"marker\""), 3);
  EXPECT_EQ(count("class=\"legend-entry\""), 2);
  EXPECT_EQ(count("class=\"axes\""), 1);

  std::ifstream tsv(SidecarPath(svg));
  std::string line;
  std::getline(tsv, line);
  EXPECT_EQ(line, "speaker_id\tx\ty\tgroup");
  int rows = 0;
  while (std::getline(tsv, line)) {
    std::istringstream ss(line);
    std::string id, group;
    double x, y;
    ss >> id >> x >> y >> group;
    EXPECT_EQ(id, r.ids[std::size_t(rows)]);
    EXPECT_NEAR(x, r.coords(rows, 0), 1e-9);
    EXPECT_NEAR(y, r.coords(rows, 1), 1e-9);
    EXPECT_EQ(group, r.groups[std::size_t(rows)]);
    ++rows;
  }
  EXPECT_EQ(rows, 3);
  EXPECT_THROW(EmitPlot(r, "/nonexistent/dir/p.svg"), IoError);
}

}  // namespace
}  // namespace spectemb
