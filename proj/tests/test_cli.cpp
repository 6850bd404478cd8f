// Copyright 2026 The Cropline Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <string>

#include "test_support.hpp"

namespace cropline {
namespace {

struct Run {
  int code = -1;
  std::string output;
};

std::string quote(const std::string& s) {
  std::string q = "'";
  for (char c : s) {
    if (c == '\'') q += "'\\''";
    else q += c;
  }
  return q + "'";
}

Run run(const std::string& args) {
  const std::string cmd = quote(CROPLINE_CLI) + " " + args + " 2>&1";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n = 0;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.output.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string fixture(const char* name) { return quote((testing::fixture_dir() / name).string()); }

TEST(Cli, KbImportReportsCounts) {
  const auto r = run("kb --csv " + fixture("kb.csv"));
  EXPECT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("imported 5 records, 3 seasons"), std::string::npos) << r.output;
}

TEST(Cli, KbStoreRoundTripsThroughReplayConfig) {
  testing::TempDir dir;
  const auto store = (dir.path() / "kb.sqlite").string();
  ASSERT_EQ(run("kb --csv " + fixture("kb.csv") + " --store " + quote(store)).code, 0);
  const auto r = run("replay --log " + fixture("log.jsonl") + " --config " +
                     fixture("pipeline.cfg") + " --out " + quote(dir.path().string()) +
                     " --set kb_path=" + quote(store));
  EXPECT_EQ(r.code, 0) << r.output;
  EXPECT_EQ(testing::read_file(dir.path() / "replies.jsonl"),
            testing::read_file(testing::golden_dir() / "replay_replies.jsonl"));
}

TEST(Cli, KbBadRowAndMissingFileExitTwo) {
  testing::TempDir dir;
  const auto bad = testing::write_file(dir.path() / "bad.csv",
                                       std::string(kKnowledgeBaseHeader) +
                                           "\nsummer,Blight,spray,0.3,12,none,13\n");
  const auto r = run("kb --csv " + quote(bad.string()));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("row 2"), std::string::npos) << r.output;
  EXPECT_EQ(run("kb --csv " + quote((dir.path() / "none.csv").string())).code, 2);
}

TEST(Cli, WmdPrintsDistance) {
  const auto same = run("wmd --embeddings " + fixture("embeddings.txt") +
                        " 'add water to the plant' 'add water to the plant'");
  EXPECT_EQ(same.code, 0) << same.output;
  EXPECT_EQ(same.output, "0.000000\n");
  const auto pair = run("wmd --embeddings " + fixture("embeddings.txt") +
                        " 'moisture the soil' 'add water to the plant'");
  EXPECT_EQ(pair.code, 0) << pair.output;
  EXPECT_EQ(pair.output.size(), 9u) << pair.output;
  EXPECT_EQ(run("wmd --embeddings " + fixture("embeddings.txt") + " 'qqq zzz' 'add water'").code,
            2);
}

TEST(Cli, EmbedPrintsWeights) {
  const auto r = run("embed --embeddings " + fixture("embeddings.txt") + " 'water water soil'");
  EXPECT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("water"), std::string::npos) << r.output;
}

TEST(Cli, PhashComparesImages) {
  const auto r = run("phash " + fixture("farmer_leaf.png") + " " + fixture("farmer_leaf.png"));
  EXPECT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("hamming 0"), std::string::npos) << r.output;
  EXPECT_EQ(run("phash " + fixture("kb.csv")).code, 2);
}

TEST(Cli, ReplayWritesGoldenOutputs) {
  testing::TempDir dir;
  const auto r = run("replay --log " + fixture("log.jsonl") + " --config " +
                     fixture("pipeline.cfg") + " --out " + quote(dir.path().string()) +
                     " --seed 7");
  EXPECT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("replies 1, skipped 0"), std::string::npos) << r.output;
  EXPECT_EQ(testing::read_file(dir.path() / "replies.jsonl"),
            testing::read_file(testing::golden_dir() / "replay_replies.jsonl"));
  for (const char* f : {"drift_report.csv", "skipped.csv", "drift_state.csv"}) {
    EXPECT_TRUE(std::filesystem::exists(dir.path() / f)) << f;
  }
}

TEST(Cli, ReplayMalformedLogExitTwo) {
  testing::TempDir dir;
  const auto log = testing::write_file(dir.path() / "log.jsonl", "{not json\n");
  const auto r = run("replay --log " + quote(log.string()) + " --config " +
                     fixture("pipeline.cfg") + " --out " + quote(dir.path().string()));
  EXPECT_EQ(r.code, 2) << r.output;
  EXPECT_NE(r.output.find(":1:"), std::string::npos) << r.output;
}

TEST(Cli, DriftShowsSwitchProbabilities) {
  testing::TempDir dir;
  const auto state = testing::write_file(
      dir.path() / "state.csv",
      "season,summer\ncapacity,30\nwmd,rainy,1.2\nwmd,summer,0.38\nwmd,winter,0.1\n"
      "day_index,posterior\n");
  const auto r = run("drift --state " + quote(state.string()));
  EXPECT_EQ(r.code, 0) << r.output;
  for (const char* s : {"0.257", "0.676", "0.068", "recommended winter", "window empty"}) {
    EXPECT_NE(r.output.find(s), std::string::npos) << s << "\n" << r.output;
  }
}

TEST(Cli, DriftCorruptStateExitTwo) {
  testing::TempDir dir;
  const auto state = testing::write_file(dir.path() / "s.csv", "garbage\n");
  EXPECT_EQ(run("drift --state " + quote(state.string())).code, 2);
}

TEST(Cli, HelpAndUnknownSubcommand) {
  const auto help = run("--help");
  EXPECT_EQ(help.code, 0);
  EXPECT_NE(help.output.find("replay"), std::string::npos);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("").code, 2);
}

}  // namespace
}  // namespace cropline
