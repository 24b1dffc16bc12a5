// tests/cli_test.cpp

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


#include <sys/wait.h>

#include <cstdlib>
#include <fstream>

#include <gtest/gtest.h>

#include "spectemb/archive.hpp"
#include "test_util.hpp"

namespace spectemb {
namespace {

namespace fs = std::filesystem;
using testing::ReadFile;
using testing::TempDir;

const std::string kCli = SPECTEMB_CLI;
const std::string kSampleConfig = std::string(SPECTEMB_SOURCE_DIR) + "/data/sample/sample.cfg";

struct Outcome {
  int code = -1;
  std::string output;  // stdout and stderr
};

Outcome RunCli(const std::string &args) {
  static int counter = 0;
  const fs::path log = TempDir("cli_logs") / ("run" + std::to_string(counter++) + ".txt");
  const std::string cmd = "'" + kCli + "' " + args + " > '" + log.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  Outcome o;
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  o.output = ReadFile(log);
  return o;
}

TEST(Cli, HelpDocumentsEverySubcommand) {
  Outcome o = RunCli("--help");
  EXPECT_EQ(o.code, 0);
  for (const char *sub : {"fbk", "svd", "train-embed", "extract", "smooth", "concat", "tsne",
                          "toy-adapt", "pipeline"}) {
    EXPECT_NE(o.output.find(sub), std::string::npos) << sub;
    Outcome h = RunCli(std::string(sub) + " --help");
    EXPECT_EQ(h.code, 0) << sub;
    for (const char *flag : {"--config", "--seed", "--out"})
      EXPECT_NE(h.output.find(flag), std::string::npos) << sub << " " << flag;
  }
}

TEST(Cli, UnknownFlagPrintsUsageAndFails) {
  Outcome o = RunCli("pipeline --config '" + kSampleConfig + "' --out /tmp/x --bogus");
  EXPECT_EQ(o.code, 1);
  EXPECT_NE(o.output.find("--bogus"), std::string::npos);
  EXPECT_NE(o.output.find("Usage"), std::string::npos);
  EXPECT_EQ(RunCli("no-such-command").code, 1);
  EXPECT_EQ(RunCli("").code, 1);
}

TEST(Cli, MissingConfigNamesThePath) {
  Outcome o = RunCli("pipeline --config /nonexistent/c.cfg --out " + TempDir("cli_x").string());
  EXPECT_EQ(o.code, 1);
  EXPECT_NE(o.output.find("/nonexistent/c.cfg"), std::string::npos);
}

TEST(Cli, TsneOnTwoPointsIsAValidationError) {
  auto dir = TempDir("cli_tsne2");
  FeatureArchive a("k", 2, "h");
  Matrix m(1, 2);
  m << 1, 2;
  a.Add("p1", m);
  a.Add("p2", m * 2);
  a.Write((dir / "two.ark").string());
  Outcome o = RunCli("tsne --config '" + kSampleConfig + "' --input '" + (dir / "two.ark").string() +
                  "' --out '" + (dir / "out").string() + "'");
  EXPECT_EQ(o.code, 1);
  EXPECT_NE(o.output.find("at least 5"), std::string::npos);
}

TEST(Cli, RuntimeFailureExitsTwo) {
  auto dir = TempDir("cli_rt");
  Outcome o = RunCli("smooth --config '" + kSampleConfig + "' --input /nonexistent/u.ark --out '" +
                  dir.string() + "'");
  EXPECT_EQ(o.code, 2);
}

TEST(Cli, PipelineOnSampleIsDeterministic) {
  auto a = TempDir("cli_pipe_a"), b = TempDir("cli_pipe_b");
  Outcome ra = RunCli("pipeline --config '" + kSampleConfig + "' --out '" + a.string() + "'");
  ASSERT_EQ(ra.code, 0) << ra.output;
  Outcome rb = RunCli("pipeline --config '" + kSampleConfig + "' --out '" + b.string() + "'");
  ASSERT_EQ(rb.code, 0) << rb.output;
  for (const char *f : {"fbank.ark", "utterance_features.ark", "utterance_embeddings.ark",
                        "speaker_embeddings.ark", "adapted_features.ark", "embed.model",
                        "report.txt", "report.tsv", "tsne.svg", "tsne.tsv"}) {
    ASSERT_TRUE(fs::exists(a / f)) << f;
    EXPECT_EQ(ReadFile(a / f), ReadFile(b / f)) << f;
  }
  FeatureArchive spk = FeatureArchive::Read((a / "speaker_embeddings.ark").string());
  EXPECT_EQ(spk.Dims(), 25);
  EXPECT_EQ(spk.Size(), 6u);
  EXPECT_EQ(FeatureArchive::Read((a / "utterance_features.ark").string()).Dims(), 80);
  EXPECT_EQ(FeatureArchive::Read((a / "adapted_features.ark").string()).Dims(), 40 + 25);

  auto c = TempDir("cli_pipe_c");
  ASSERT_EQ(RunCli("pipeline --config '" + kSampleConfig + "' --seed 2 --out '" + c.string() + "'")
                .code,
            0);
  EXPECT_NE(FeatureArchive::Read((c / "speaker_embeddings.ark").string()).ConfigHash(),
            spk.ConfigHash());
}

TEST(Cli, StagesChain) {
  auto dir = TempDir("cli_chain");
  const std::string cfg = "--config '" + kSampleConfig + "' ";
  auto out = [&](const char *name) { return "--out '" + (dir / name).string() + "'"; };
  ASSERT_EQ(RunCli("fbk " + cfg + out("fbk")).code, 0);
  ASSERT_EQ(RunCli("svd " + cfg + out("svd")).code, 0);
  ASSERT_EQ(RunCli("train-embed " + cfg + out("train")).code, 0);
  ASSERT_EQ(RunCli("extract " + cfg + "--model '" + (dir / "train/embed.model").string() + "' " +
                out("extract"))
                .code,
            0);
  ASSERT_EQ(RunCli("smooth " + cfg + "--input '" + (dir / "extract/utterance_embeddings.ark").string() +
                "' " + out("smooth"))
                .code,
            0);
  Outcome c = RunCli("concat " + cfg + "--input '" + (dir / "fbk/fbank.ark").string() +
                  "' --speakers '" + (dir / "smooth/speaker_embeddings.ark").string() + "' " +
                  out("concat"));
  ASSERT_EQ(c.code, 0) << c.output;
  FeatureArchive fb = FeatureArchive::Read((dir / "fbk/fbank.ark").string());
  FeatureArchive joined = FeatureArchive::Read((dir / "concat/adapted_features.ark").string());
  ASSERT_EQ(joined.Size(), fb.Size());
  for (const auto &[utt, frames] : fb.Entries())
    EXPECT_EQ(joined.Get(utt).leftCols(frames.cols()), frames);
  ASSERT_EQ(RunCli("tsne " + cfg + "--input '" + (dir / "smooth/speaker_embeddings.ark").string() +
                "' " + out("tsne"))
                .code,
            0);
  EXPECT_TRUE(fs::exists(dir / "tsne/tsne.tsv"));
  // The trained model reproduces the training run's embeddings.
  FeatureArchive svd = FeatureArchive::Read((dir / "svd/utterance_features.ark").string());
  FeatureArchive ext = FeatureArchive::Read((dir / "extract/utterance_features.ark").string());
  for (const auto &[utt, v] : svd.Entries()) EXPECT_EQ(ext.Get(utt), v);
}

TEST(Cli, ToyAdaptWritesReports) {
  auto dir = TempDir("cli_toy");
  std::ofstream(dir / "toy.cfg") << "toy_seeds = 1\ntoy_speakers = 4\nepochs = 3\n";
  Outcome o = RunCli("toy-adapt --config '" + (dir / "toy.cfg").string() + "' --out '" +
                  (dir / "out").string() + "'");
  ASSERT_EQ(o.code, 0) << o.output;
  EXPECT_TRUE(fs::exists(dir / "out/toy_report.txt"));
  EXPECT_TRUE(fs::exists(dir / "out/toy_report.tsv"));
  std::ofstream(dir / "bad.cfg") << "toy_speakers = 1\n";
  EXPECT_EQ(RunCli("toy-adapt --config '" + (dir / "bad.cfg").string() + "' --out '" +
                (dir / "out").string() + "'")
                .code,
            1);
}

}  // namespace
}  // namespace spectemb
