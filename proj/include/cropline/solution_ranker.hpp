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

#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "cropline/error.hpp"
#include "cropline/knowledge_base.hpp"
#include "cropline/message_parser.hpp"
#include "cropline/text_embeddings.hpp"
#include "cropline/wmd.hpp"

namespace cropline {

struct VoteTally {
  std::map<std::string, int> counts;
  std::map<std::string, std::int64_t> first_vote;  // earliest timestamp
  std::string winner;
};

// Multipliers applied to the base weight of 1.
struct ScoringWeights {
  double labeled = 1.5;
  double image = 1.25;
};

struct ScoredReply {
  ParsedReply reply;
  double wmd_to_trusted = 1.0;  // clipped to [0, 1]
  double weight = 1.0;
  double score = 0.0;
  bool degraded = false;  // solution had no in-vocabulary words
};

struct BestSolution {
  std::string disease_name;
  std::string user_solution;
  std::string trusted_solution;
  std::string contributing_author;
  std::string source_id;
  double score = 0.0;
};

// One vote per (author, disease). Winner has the most votes; ties go to the
// disease voted for first, then to the lexicographically smaller name.
inline VoteTally tally_disease_votes(const std::vector<ParsedReply>& replies) {
  VoteTally tally;
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& r : replies) {
    if (!r.disease_name || r.disease_name->empty()) continue;
    const std::string name = normalize_name(*r.disease_name);
    auto [it, fresh] = tally.first_vote.try_emplace(name, r.timestamp);
    if (!fresh) it->second = std::min(it->second, r.timestamp);
    if (seen.emplace(r.author, name).second) ++tally.counts[name];
  }
  if (tally.counts.empty()) {
    throw Error(ErrorKind::kNoVotes, "no reply names a disease");
  }
  const std::string* best = nullptr;
  for (const auto& [name, count] : tally.counts) {
    if (best == nullptr) {
      best = &name;
      continue;
    }
    const int best_count = tally.counts.at(*best);
    const auto ts = tally.first_vote.at(name);
    const auto best_ts = tally.first_vote.at(*best);
    if (count > best_count || (count == best_count && ts < best_ts)) best = &name;
  }
  tally.winner = *best;
  return tally;
}

inline double reply_weight(const ParsedReply& reply, const ScoringWeights& w) {
  double weight = 1.0;
  if (reply.is_labeled) weight *= w.labeled;
  if (reply.has_image) weight *= w.image;
  return weight;
}

// score = weight * (1 - clip(WMD to the trusted solution)).
inline ScoredReply score_reply(const ParsedReply& reply, const ProcessedDoc& trusted,
                               const EmbeddingTable& table, const StopWords& stopwords,
                               const ScoringWeights& weights = {}) {
  if (!reply.solution_text || reply.solution_text->empty()) {
    throw Error(ErrorKind::kInvalidArgument,
                "reply " + reply.source_id + " has no solution text");
  }
  ScoredReply out;
  out.reply = reply;
  out.weight = reply_weight(reply, weights);
  try {
    const ProcessedDoc doc = embed_text(*reply.solution_text, stopwords, table);
    out.wmd_to_trusted = clip_unit(wmd_distance(doc, trusted, table));
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kEmptyDoc) throw;
    out.wmd_to_trusted = 1.0;
    out.degraded = true;
  }
  out.score = out.weight * (1.0 - out.wmd_to_trusted);
  return out;
}

// Highest score wins; ties go to the earlier reply, then the author name.
inline bool outranks(const ScoredReply& a, const ScoredReply& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.reply.timestamp != b.reply.timestamp) {
    return a.reply.timestamp < b.reply.timestamp;
  }
  if (a.reply.author != b.reply.author) return a.reply.author < b.reply.author;
  return a.reply.source_id < b.reply.source_id;
}

// Scores every reply carrying a solution and returns them best first.
inline std::vector<ScoredReply> score_replies(const std::vector<ParsedReply>& replies,
                                              const ProcessedDoc& trusted,
                                              const EmbeddingTable& table,
                                              const StopWords& stopwords,
                                              const ScoringWeights& weights = {}) {
  std::vector<ScoredReply> scored;
  for (const auto& r : replies) {
    if (!r.solution_text || r.solution_text->empty()) continue;
    scored.push_back(score_reply(r, trusted, table, stopwords, weights));
  }
  std::sort(scored.begin(), scored.end(), outranks);
  return scored;
}

// Picks the best reply for an already-decided disease and trusted record.
inline BestSolution select_best(const std::vector<ParsedReply>& replies,
                                const DiseaseRecord& trusted,
                                const EmbeddingTable& table,
                                const StopWords& stopwords,
                                const ScoringWeights& weights = {}) {
  ProcessedDoc trusted_doc;
  try {
    trusted_doc = embed_text(trusted.solution_text, stopwords, table);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kEmptyDoc) throw;
    throw Error(ErrorKind::kNoTrustedRecord,
                "trusted solution for '" + trusted.disease_name +
                    "' has no in-vocabulary words");
  }
  const auto scored = score_replies(replies, trusted_doc, table, stopwords, weights);
  if (scored.empty()) {
    throw Error(ErrorKind::kNoScorableReplies,
                "no reply carries a solution for '" + trusted.disease_name + "'");
  }
  const ScoredReply& top = scored.front();
  return BestSolution{trusted.disease_name, *top.reply.solution_text,
                      trusted.solution_text, top.reply.author, top.reply.source_id,
                      top.score};
}

// Votes, trusted lookup (exact then closest name) and scoring in one call.
// Image filtering, when wanted, happens on `replies` before this.
inline BestSolution best_solution(const std::vector<ParsedReply>& replies,
                                  const KnowledgeBase& kb, std::string_view season_id,
                                  const EmbeddingTable& table, const StopWords& stopwords,
                                  const ScoringWeights& weights = {}) {
  const VoteTally tally = tally_disease_votes(replies);
  const auto trusted = kb.resolve(tally.winner, season_id);
  if (!trusted) {
    throw Error(ErrorKind::kNoTrustedRecord,
                "no trusted record for '" + tally.winner + "' in season '" +
                    std::string(season_id) + "'");
  }
  BestSolution best = select_best(replies, *trusted, table, stopwords, weights);
  return best;
}

}  // namespace cropline
