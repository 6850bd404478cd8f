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

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cropline/drift_detector.hpp"
#include "cropline/error.hpp"
#include "cropline/image_verifier.hpp"
#include "cropline/knowledge_base.hpp"
#include "cropline/message_parser.hpp"
#include "cropline/solution_ranker.hpp"
#include "cropline/strings.hpp"
#include "cropline/text_embeddings.hpp"

namespace cropline {

enum class ImageCheck { kPerceptual, kClassifier, kNone };

struct DriftSettings {
  std::size_t window = 30;
  RansacConfig ransac;
  std::uint64_t seed = kDefaultSeed;
};

struct PipelineConfig {
  std::string hashtag{kDefaultHashtag};
  std::filesystem::path kb_path;
  std::filesystem::path embeddings_path;
  std::optional<std::filesystem::path> stopwords_path;
  std::optional<std::filesystem::path> reference_dir;
  std::optional<std::filesystem::path> drift_state_path;
  ImageCheck image_check = ImageCheck::kPerceptual;
  int image_threshold = kDefaultMatchThreshold;
  double name_threshold = kDefaultNameThreshold;
  ScoringWeights weights;
  DriftSettings drift;
  std::string current_season;
  bool auto_switch = false;

  void validate() const {
    if (hashtag.size() < 2 || hashtag.front() != '#') {
      throw Error(ErrorKind::kValidation, "hashtag must start with '#'");
    }
    auto must_exist = [](const std::filesystem::path& p, const char* key) {
      if (p.empty()) throw Error(ErrorKind::kValidation, std::string(key) + " not set");
      if (!std::filesystem::exists(p)) {
        throw Error(ErrorKind::kValidation,
                    std::string(key) + " does not exist: " + p.string());
      }
    };
    must_exist(kb_path, "kb_path");
    must_exist(embeddings_path, "embeddings_path");
    if (stopwords_path) must_exist(*stopwords_path, "stopwords_path");
    if (reference_dir) must_exist(*reference_dir, "reference_dir");
    if (drift_state_path) must_exist(*drift_state_path, "drift_state");
    if (current_season.empty()) {
      throw Error(ErrorKind::kValidation, "current_season not set");
    }
    if (image_threshold < 0 || image_threshold > 64) {
      throw Error(ErrorKind::kValidation, "image_threshold outside [0,64]");
    }
    if (!(name_threshold >= 0.0 && name_threshold <= 1.0)) {
      throw Error(ErrorKind::kValidation, "name_threshold outside [0,1]");
    }
    if (!(weights.labeled >= 1.0) || !(weights.image >= 1.0)) {
      throw Error(ErrorKind::kValidation, "reply weights must be >= 1");
    }
    if (drift.window == 0) throw Error(ErrorKind::kValidation, "drift_window must be > 0");
    drift.ransac.validate();
  }
};

inline ImageCheck parse_image_check(std::string_view v) {
  if (v == "perceptual") return ImageCheck::kPerceptual;
  if (v == "classifier") return ImageCheck::kClassifier;
  if (v == "none") return ImageCheck::kNone;
  throw Error(ErrorKind::kValidation, "image_check must be perceptual, classifier or none");
}

inline bool parse_bool(std::string_view v, std::string_view key) {
  const std::string s = to_lower(trim(v));
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw Error(ErrorKind::kValidation, "invalid boolean for " + std::string(key));
}

// Applies one `key = value` setting. Relative paths resolve against `base`.
inline void apply_setting(PipelineConfig& cfg, std::string_view key, std::string_view value,
                          const std::filesystem::path& base = {}) {
  const std::string v(trim(value));
  auto path = [&] {
    std::filesystem::path p = v;
    return p.is_relative() && !base.empty() ? base / p : p;
  };
  if (key == "hashtag") cfg.hashtag = v;
  else if (key == "kb_path") cfg.kb_path = path();
  else if (key == "embeddings_path") cfg.embeddings_path = path();
  else if (key == "stopwords_path") cfg.stopwords_path = path();
  else if (key == "reference_dir") cfg.reference_dir = path();
  else if (key == "drift_state") cfg.drift_state_path = path();
  else if (key == "image_check") cfg.image_check = parse_image_check(v);
  else if (key == "image_threshold") cfg.image_threshold = static_cast<int>(parse_int(v, key));
  else if (key == "name_threshold") cfg.name_threshold = parse_double(v, key);
  else if (key == "weight_labeled") cfg.weights.labeled = parse_double(v, key);
  else if (key == "weight_image") cfg.weights.image = parse_double(v, key);
  else if (key == "drift_window") {
    const auto r = parse_int(v, key);
    if (r <= 0) throw Error(ErrorKind::kValidation, "drift_window must be > 0");
    cfg.drift.window = static_cast<std::size_t>(r);
  }
  else if (key == "ransac_confidence") cfg.drift.ransac.confidence = parse_double(v, key);
  else if (key == "ransac_sample_size") cfg.drift.ransac.sample_size = static_cast<int>(parse_int(v, key));
  else if (key == "ransac_inlier_ratio") cfg.drift.ransac.inlier_ratio = parse_double(v, key);
  else if (key == "ransac_inlier_threshold") cfg.drift.ransac.inlier_threshold = parse_double(v, key);
  else if (key == "slope_threshold") cfg.drift.ransac.slope_threshold = parse_double(v, key);
  else if (key == "seed") {
    const auto s = parse_int(v, key);
    if (s < 0) throw Error(ErrorKind::kValidation, "seed must be >= 0");
    cfg.drift.seed = static_cast<std::uint64_t>(s);
  }
  else if (key == "current_season") cfg.current_season = v;
  else if (key == "auto_switch") cfg.auto_switch = parse_bool(v, key);
  else throw Error(ErrorKind::kValidation, "unknown config key '" + std::string(key) + "'");
}

// Flat `key = value` file; '#' starts a comment line.
inline PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open config " + path.string());
  PipelineConfig cfg;
  const auto base = path.parent_path();
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorKind::kParse, path.string() + ":" + std::to_string(line_no) +
                                         ": expected key = value");
    }
    try {
      apply_setting(cfg, trim(t.substr(0, eq)), t.substr(eq + 1), base);
    } catch (const Error& e) {
      throw Error(e.kind(), path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return cfg;
}

struct BotReply {
  std::string root_post_id;
  std::string disease_name;
  std::string user_solution;
  std::string trusted_solution;
  std::string contributing_author;
  std::string season_used;
  std::optional<std::string> switch_recommended;
};

struct DriftEvent {
  std::string root_post_id;
  std::int64_t day_index = 0;
  std::optional<double> posterior;
  std::optional<double> slope;
  std::string decision;  // stay | switch:<season> | warmup | same_day | skipped
};

struct SkippedPost {
  std::string root_post_id;
  std::string reason;
};

struct DriftReport {
  std::vector<DriftEvent> events;
  std::vector<SkippedPost> skipped;
  std::vector<std::string> notes;  // per-reply drops (parse or image failures)
  DriftState final_state;
  std::optional<SwitchProbabilities> last_switch;
};

struct ReplayResult {
  std::vector<BotReply> replies;
  DriftReport report;
};

inline constexpr std::int64_t kSecondsPerDay = 86400;

inline std::int64_t day_index_of(std::int64_t ts) {
  return ts >= 0 ? ts / kSecondsPerDay : -((-ts + kSecondsPerDay - 1) / kSecondsPerDay);
}

// Loaded resources shared by every post of a replay.
struct PipelineResources {
  KnowledgeBase kb;
  EmbeddingTable table;
  StopWords stopwords;
  std::unique_ptr<ClassifierProvider> classifier;

  static PipelineResources load(const PipelineConfig& cfg) {
    PipelineResources r;
    r.kb = KnowledgeBase::open(cfg.kb_path);
    r.table = load_embeddings(cfg.embeddings_path);
    r.stopwords = cfg.stopwords_path ? load_stopwords(*cfg.stopwords_path)
                                     : default_stopwords();
    r.classifier = std::make_unique<SidecarClassifier>();
    return r;
  }
};

namespace detail {

inline std::map<std::string, std::string> root_of(const std::vector<RawMessage>& msgs) {
  std::map<std::string, const RawMessage*> by_id;
  for (const auto& m : msgs) by_id[m.id] = &m;
  std::map<std::string, std::string> root;
  for (const auto& m : msgs) {
    const RawMessage* cur = &m;
    std::set<std::string> visited;
    while (cur->parent_id) {
      if (!visited.insert(cur->id).second) {
        throw Error(ErrorKind::kValidation, "reply cycle through '" + m.id + "'");
      }
      cur = by_id.at(*cur->parent_id);
    }
    root[m.id] = cur->id;
  }
  return root;
}

// Step 4: replies whose attached image does not match the disease are dropped.
inline bool image_passes(const ParsedReply& reply, const RawMessage& msg,
                         const std::string& disease, const PipelineConfig& cfg,
                         const PipelineResources& res, std::vector<std::string>& notes) {
  if (!reply.has_image || !msg.image_path || cfg.image_check == ImageCheck::kNone) {
    return true;
  }
  try {
    if (cfg.image_check == ImageCheck::kClassifier) {
      const DiseaseVerdict v = classify(*msg.image_path, *res.classifier);
      const bool ok = name_similarity(normalize_name(v.label), disease) >= cfg.name_threshold;
      if (!ok) notes.push_back(msg.id + ": classifier label '" + v.label + "' rejected");
      return ok;
    }
    if (!cfg.reference_dir) return true;
    const auto refs = reference_images(*cfg.reference_dir, disease);
    if (refs.empty()) return true;
    const MatchResult m = verify_match(*msg.image_path, refs, cfg.image_threshold);
    if (!m.matched) {
      notes.push_back(msg.id + ": image distance " + std::to_string(m.best_distance) +
                      " exceeds " + std::to_string(cfg.image_threshold));
    }
    return m.matched;
  } catch (const Error& e) {
    notes.push_back(msg.id + ": image check failed: " + e.what());
    return false;
  }
}

}  // namespace detail

// Replays a message log through vote tally, image filtering, scoring and
// drift tracking. Per-post failures are reported and the post is skipped.
inline ReplayResult run_replay(const std::vector<RawMessage>& messages,
                               const PipelineConfig& cfg, const PipelineResources& res) {
  if (!res.kb.has_season(cfg.current_season)) {
    throw Error(ErrorKind::kUnknownSeason, "current_season '" + cfg.current_season +
                                               "' not in knowledge base");
  }
  ReplayResult out;
  DriftReport& report = out.report;
  DriftState& state = report.final_state;
  if (cfg.drift_state_path) {
    state = load_drift_state(*cfg.drift_state_path);
    if (state.window.capacity() != cfg.drift.window) {
      DriftWindow resized(cfg.drift.window);
      for (const auto& e : state.window.entries()) resized.push(e.day, e.value);
      state.window = std::move(resized);
    }
    if (!res.kb.has_season(state.current_season)) {
      throw Error(ErrorKind::kUnknownSeason, "drift state season '" +
                                                 state.current_season + "' unknown");
    }
  } else {
    state.current_season = cfg.current_season;
    state.window = DriftWindow(cfg.drift.window);
  }

  SeasonValues priors;
  for (const SeasonModel* s : res.kb.seasons()) priors[s->season_id] = s->prior;

  const auto roots = detail::root_of(messages);
  std::map<std::string, std::vector<const RawMessage*>> thread;
  for (const auto& m : messages) {
    if (!m.is_root()) thread[roots.at(m.id)].push_back(&m);
  }

  for (const auto& root : messages) {
    if (!root.is_root()) continue;
    auto skip = [&](const std::string& reason) {
      report.skipped.push_back({root.id, reason});
    };

    std::vector<ParsedReply> parsed;
    std::map<std::string, const RawMessage*> source;
    for (const RawMessage* m : thread[root.id]) {
      try {
        parsed.push_back(parse_message(*m, cfg.hashtag));
        source[m->id] = m;
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::kNotTracked) report.notes.push_back(e.what());
      }
    }

    std::string winner;
    try {
      winner = tally_disease_votes(parsed).winner;
    } catch (const Error& e) {
      skip(e.what());
      continue;
    }
    const std::string season = state.current_season;
    const auto trusted = res.kb.resolve(winner, season, cfg.name_threshold);
    if (!trusted) {
      skip(std::string(to_string(ErrorKind::kNoTrustedRecord)) + ": no trusted record for '" +
           winner + "' in season '" + season + "'");
      continue;
    }

    std::vector<ParsedReply> verified;
    for (const auto& r : parsed) {
      if (detail::image_passes(r, *source.at(r.source_id), trusted->disease_name, cfg, res,
                               report.notes)) {
        verified.push_back(r);
      }
    }

    BestSolution best;
    try {
      best = select_best(verified, *trusted, res.table, res.stopwords, cfg.weights);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kNoScorableReplies && e.kind() != ErrorKind::kNoTrustedRecord) {
        throw;
      }
      skip(e.what());
      continue;
    }

    BotReply reply{root.id,       best.disease_name,        best.user_solution,
                   best.trusted_solution, best.contributing_author, season,
                   std::nullopt};

    DriftEvent ev;
    ev.root_post_id = root.id;
    ev.day_index = day_index_of(root.timestamp);
    try {
      EventObservation obs{embed_text(best.user_solution, res.stopwords, res.table),
                           root.timestamp, best.disease_name};
      const SeasonValues dist = season_distances(obs, res.kb, res.table, res.stopwords);
      SeasonValues lik = dist;
      for (auto& [s, v] : lik) v = 1.0 - v;
      const SeasonPosterior post = posterior(lik, priors);
      const double p = post.posterior.at(season);
      ev.posterior = p;
      state.wmds = dist;
      if (state.window.last_day() && *state.window.last_day() >= ev.day_index) {
        ev.decision = "same_day";
      } else {
        state.window.push(ev.day_index, p);
        if (state.window.size() < static_cast<std::size_t>(cfg.drift.ransac.sample_size) ||
            dist.size() < 2) {
          ev.decision = "warmup";
        } else {
          const SwitchProbabilities sp = switch_probabilities(dist);
          report.last_switch = sp;
          const SwitchDecision d = should_switch(state.window, cfg.drift.ransac, sp.probability,
                                                 season, cfg.drift.seed);
          ev.slope = d.slope;
          if (d.switch_model) {
            ev.decision = "switch:" + d.target;
            reply.switch_recommended = d.target;
            if (cfg.auto_switch) {
              state.current_season = d.target;
              state.window.clear();
            }
          } else {
            ev.decision = "stay";
          }
        }
      }
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kEmptyDoc && e.kind() != ErrorKind::kNoEvidence &&
          e.kind() != ErrorKind::kNoTrustedRecord && e.kind() != ErrorKind::kDegenerate) {
        throw;
      }
      ev.decision = "skipped";
      report.notes.push_back(root.id + ": drift update skipped: " + e.what());
    }
    report.events.push_back(std::move(ev));
    out.replies.push_back(std::move(reply));
  }
  return out;
}

inline ReplayResult run_replay(const std::filesystem::path& log_path,
                               const PipelineConfig& cfg) {
  cfg.validate();
  const auto messages = load_log(log_path);
  const auto res = PipelineResources::load(cfg);
  return run_replay(messages, cfg, res);
}

inline std::string serialize_reply(const BotReply& r) {
  nlohmann::ordered_json j;
  j["root_post_id"] = r.root_post_id;
  j["disease"] = r.disease_name;
  j["user_solution"] = r.user_solution;
  j["trusted_solution"] = r.trusted_solution;
  j["author"] = r.contributing_author;
  j["season"] = r.season_used;
  j["switch_to"] = r.switch_recommended ? nlohmann::ordered_json(*r.switch_recommended)
                                        : nlohmann::ordered_json(nullptr);
  return j.dump();
}

// One JSON object per line, fields in fixed order.
inline std::size_t emit_replies(const std::vector<BotReply>& replies,
                                const std::filesystem::path& out_path) {
  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + out_path.string());
  for (const auto& r : replies) out << serialize_reply(r) << '\n';
  out.flush();
  if (!out) throw Error(ErrorKind::kIo, "write failed: " + out_path.string());
  return replies.size();
}

inline void write_drift_report(const DriftReport& report,
                               const std::filesystem::path& out_path) {
  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + out_path.string());
  out << "day_index,posterior,slope,decision\n";
  for (const auto& e : report.events) {
    out << e.day_index << ',' << (e.posterior ? format_fixed(*e.posterior, 9) : "") << ','
        << (e.slope ? format_fixed(*e.slope, 9) : "") << ',' << e.decision << '\n';
  }
  if (!out) throw Error(ErrorKind::kIo, "write failed: " + out_path.string());
}

inline void write_skipped(const DriftReport& report, const std::filesystem::path& out_path) {
  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + out_path.string());
  out << "root_post_id,reason\n";
  for (const auto& s : report.skipped) {
    std::string reason = s.reason;
    for (char& c : reason) {
      if (c == ',' || c == '\n') c = ' ';
    }
    out << s.root_post_id << ',' << reason << '\n';
  }
}

}  // namespace cropline
