// tools/make_sample.cpp

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


// Writes a small synthetic corpus (WAVs, manifest, config) into a directory.

#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "spectemb/synth.hpp"

int main(int argc, char **argv) {
  CLI::App app{"spectemb-make-sample: write a synthetic demo corpus"};
  std::string out = "data/sample";
  int speakers = 6, per_speaker = 4;
  std::uint64_t seed = 7;
  app.add_option("--out", out, "output directory");
  app.add_option("--speakers", speakers, "number of speakers")->check(CLI::Range(1, 99));
  app.add_option("--utterances", per_speaker, "utterances per speaker")->check(CLI::Range(1, 999));
  app.add_option("--seed", seed, "generator seed");
  CLI11_PARSE(app, argc, argv);

  try {
    const std::filesystem::path dir(out);
    spectemb::WriteSynthCorpus(dir, spectemb::DemoCorpusSpecs(speakers, per_speaker, seed));
    std::ofstream cfg(dir / "sample.cfg");
    cfg << "# Demo configuration for the synthetic sample corpus.\n"
           "manifest = manifest.tsv\n"
           "corpus_type = dysarthric\n"
           "feature_kind = spectral\n"
           "primary_target = severity\n"
           "validation_fraction = 0.25\n"
           "epochs = 20\n"
           "smoothing = avg\n"
           "seed = 1\n";
    if (!cfg) throw spectemb::IoError("cannot write " + (dir / "sample.cfg").string());
    std::cout << "wrote " << speakers * per_speaker << " utterances to " << dir.string() << "\n";
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
