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

#include <random>
#include <string>

#include "test_support.hpp"

namespace cropline {
namespace {

using testing::TempDir;
using testing::write_file;

constexpr const char* kHeader =
    "season_id,disease_name,solution,water_availability,daylight_hours,"
    "dangerous_pests,active_months\n";

TEST(NormalizeName, CollapsesCaseAndWhitespace) {
  EXPECT_EQ(normalize_name("  Early   Blight "), "early blight");
  EXPECT_EQ(normalize_name("\tLEAF\nRust"), "leaf rust");
  EXPECT_EQ(normalize_name(""), "");
}

TEST(NormalizeName, IsIdempotent) {
  std::mt19937_64 rng(5);
  const std::string alphabet = "aB \t-xYz";
  for (int t = 0; t < 500; ++t) {
    std::string s;
    const int len = static_cast<int>(rng() % 20);
    for (int i = 0; i < len; ++i) s.push_back(alphabet[rng() % alphabet.size()]);
    const auto once = normalize_name(s);
    EXPECT_EQ(normalize_name(once), once) << "input '" << s << "'";
  }
}

TEST(Levenshtein, MatchesRecurrenceOracle) {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 300; ++t) {
    std::string a, b;
    for (int i = 0, n = static_cast<int>(rng() % 9); i < n; ++i) a.push_back("abc"[rng() % 3]);
    for (int i = 0, n = static_cast<int>(rng() % 9); i < n; ++i) b.push_back("abc"[rng() % 3]);
    EXPECT_EQ(levenshtein(a, b), testing::levenshtein_oracle(a, b)) << a << " / " << b;
  }
}

TEST(ImportCsv, EqualDurationsGiveEqualPriors) {
  TempDir dir;
  const auto csv = write_file(dir / "kb.csv", std::string(kHeader) +
                                                  "summer,Early Blight,spray copper,0.3,13,aphids,3-6\n"
                                                  "rainy,Late Blight,improve drainage,0.9,11,slugs,7;8;9;10\n"
                                                  "winter,Rust,mulch,0.5,10,,11-2\n");
  KnowledgeBase kb;
  EXPECT_EQ(kb.import_csv(csv), 3u);
  ASSERT_EQ(kb.seasons().size(), 3u);
  for (const auto* s : kb.seasons()) {
    EXPECT_EQ(s->duration_months, 4);
    EXPECT_DOUBLE_EQ(s->prior, 1.0 / 3.0);
  }
}

TEST(ImportCsv, PriorsFollowDurationRatio) {
  TempDir dir;
  const auto csv = write_file(dir / "kb.csv", std::string(kHeader) +
                                                  "long,A,x,0.5,12,,1-6\n"
                                                  "short1,B,y,0.5,12,,7-9\n"
                                                  "short2,C,z,0.5,12,,10-12\n");
  KnowledgeBase kb;
  kb.import_csv(csv);
  EXPECT_DOUBLE_EQ(kb.season("long").prior, 0.5);
  EXPECT_DOUBLE_EQ(kb.season("short1").prior, 0.25);
  EXPECT_DOUBLE_EQ(kb.season("short2").prior, 0.25);
}

TEST(ImportCsv, OverlappingSeasonsAreRenormalized) {
  TempDir dir;
  const auto csv = write_file(dir / "kb.csv", std::string(kHeader) +
                                                  "a,X,x,0.5,12,,1-12\n"
                                                  "b,Y,y,0.5,12,,1-6\n"
                                                  "c,Z,z,0.5,12,,5-10\n");
  KnowledgeBase kb;
  kb.import_csv(csv);
  double total = 0.0;
  for (const auto* s : kb.seasons()) total += s->prior;
  EXPECT_NEAR(total, 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(kb.season("a").prior, 0.5);
}

TEST(ImportCsv, MonthOutOfRangeNamesRowAndColumn) {
  TempDir dir;
  const auto csv = write_file(dir / "kb.csv", std::string(kHeader) +
                                                  "summer,A,x,0.5,12,,3-6\n"
                                                  "summer,B,y,0.5,12,,13\n");
  KnowledgeBase kb;
  try {
    kb.import_csv(csv);
    FAIL() << "expected a validation error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kValidation);
    EXPECT_NE(std::string(e.what()).find("row 3"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("active_months"), std::string::npos) << e.what();
  }
}

TEST(ImportCsv, RejectsDuplicateSeasonDisease) {
  TempDir dir;
  const auto csv = write_file(dir / "kb.csv", std::string(kHeader) +
                                                  "summer,Early Blight,x,0.5,12,,3-6\n"
                                                  "summer,early  blight,y,0.5,12,,3-6\n");
  KnowledgeBase kb;
  try {
    kb.import_csv(csv);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDuplicate);
  }
}

TEST(ImportCsv, RejectsBadHeaderAndNumbers) {
  TempDir dir;
  KnowledgeBase kb;
  EXPECT_THROW(kb.import_csv(write_file(dir / "h.csv", "season,name\nx,y\n")), Error);
  KnowledgeBase kb2;
  try {
    kb2.import_csv(write_file(dir / "n.csv", std::string(kHeader) + "s,A,x,wet,12,,1\n"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("water_availability"), std::string::npos);
  }
  KnowledgeBase kb3;
  EXPECT_THROW(kb3.import_csv(dir / "missing.csv"), Error);
}

TEST(ImportCsv, QuotedSolutionWithComma) {
  TempDir dir;
  const auto csv = write_file(dir / "kb.csv", std::string(kHeader) +
                                                  "rainy,Blight,\"drain, then spray\",0.9,11,slugs;snails,7-10\n");
  KnowledgeBase kb;
  kb.import_csv(csv);
  const auto rec = kb.lookup_exact("blight", "rainy");
  ASSERT_TRUE(rec);
  EXPECT_EQ(rec->solution_text, "drain, then spray");
  EXPECT_EQ(rec->dangerous_pests, (std::vector<std::string>{"slugs", "snails"}));
  EXPECT_EQ(rec->active_months, (std::set<int>{7, 8, 9, 10}));
}

class LookupTest : public ::testing::Test {
 protected:
  void SetUp() override {
    csv_ = write_file(dir_ / "kb.csv", std::string(kHeader) +
                                           "summer,Early Blight,apply copper fungicide,0.3,13,,3-6\n"
                                           "summer,Leaf Mold,ventilate,0.3,13,,3-6\n"
                                           "rainy,Late Blight,drain,0.9,11,,7-10\n");
    kb_.import_csv(csv_);
  }
  TempDir dir_;
  std::filesystem::path csv_;
  KnowledgeBase kb_;
};

TEST_F(LookupTest, ExactMatchesNormalizedName) {
  const auto a = kb_.lookup_exact("Early Blight", "summer");
  const auto b = kb_.lookup_exact("early  blight ", "summer");
  ASSERT_TRUE(a && b);
  EXPECT_EQ(a->solution_text, "apply copper fungicide");
  EXPECT_EQ(b->solution_text, a->solution_text);
  EXPECT_FALSE(kb_.lookup_exact("Rust", "summer"));
  EXPECT_THROW(kb_.lookup_exact("Rust", "autumn"), Error);
}

TEST_F(LookupTest, ClosestToleratesTypo) {
  const ClosestMatch m = kb_.lookup_closest("erly blight", "summer");
  EXPECT_EQ(m.record.disease_name, "early blight");
  const double expected =
      1.0 - static_cast<double>(testing::levenshtein_oracle("erly blight", "early blight")) / 12.0;
  EXPECT_NEAR(m.similarity, expected, 1e-12);
  EXPECT_NEAR(m.similarity, 1.0 - 1.0 / 12.0, 1e-12);
}

TEST_F(LookupTest, ClosestStoredNameScoresOne) {
  for (const auto* s : kb_.seasons()) {
    for (const auto& r : s->records) {
      const auto m = kb_.lookup_closest(r.disease_name, s->season_id);
      EXPECT_EQ(m.record.disease_name, r.disease_name);
      EXPECT_DOUBLE_EQ(m.similarity, 1.0);
    }
  }
}

TEST_F(LookupTest, ClosestBelowThresholdCarriesBestCandidate) {
  // "powdery" vs both stored names is far below 0.7 by the oracle.
  ASSERT_LT(1.0 - static_cast<double>(testing::levenshtein_oracle("powdery", "leaf mold")) / 9.0, 0.7);
  ASSERT_LT(1.0 - static_cast<double>(testing::levenshtein_oracle("powdery", "early blight")) / 12.0, 0.7);
  try {
    kb_.lookup_closest("powdery", "summer");
    FAIL();
  } catch (const NoMatchError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kNoMatch);
    EXPECT_FALSE(e.best_candidate().empty());
    EXPECT_LT(e.best_score(), 0.7);
  }
  EXPECT_THROW(kb_.lookup_closest("   ", "summer"), Error);
}

TEST(Lookup, TiesPreferLexicographicallySmallerName) {
  KnowledgeBase kb;
  kb.add_record({"abd", "one", "s", 0.5, 12, {}, {1}});
  kb.add_record({"abb", "two", "s", 0.5, 12, {}, {1}});
  kb.finalize();
  const auto m = kb.lookup_closest("abc", "s", 0.5);
  EXPECT_EQ(m.record.disease_name, "abb");
}

TEST_F(LookupTest, StoreRoundTripPreservesRecords) {
  const auto store = dir_ / "kb.db";
  kb_.save_store(store);
  const KnowledgeBase loaded = KnowledgeBase::load_store(store);
  EXPECT_EQ(loaded.record_count(), 3u);
  const auto rec = loaded.lookup_exact("late blight", "rainy");
  ASSERT_TRUE(rec);
  EXPECT_EQ(rec->solution_text, "drain");
  EXPECT_DOUBLE_EQ(loaded.season("summer").prior, kb_.season("summer").prior);
  EXPECT_THROW(KnowledgeBase::load_store(dir_ / "nope.db"), Error);
}

}  // namespace
}  // namespace cropline
