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

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cropline/error.hpp"
#include "cropline/knowledge_base.hpp"
#include "cropline/strings.hpp"
#include "cropline/text_embeddings.hpp"
#include "cropline/wmd.hpp"

namespace cropline {

struct EventObservation {
  ProcessedDoc event_doc;
  std::int64_t timestamp = 0;
  std::string disease_name;
};

using SeasonValues = std::map<std::string, double>;

// Clipped WMD between the event text and each season's trusted solution for
// the event's disease. Seasons without a matching record get the maximal
// distance 1.
inline SeasonValues season_distances(const EventObservation& event,
                                     const KnowledgeBase& kb,
                                     const EmbeddingTable& table,
                                     const StopWords& stopwords) {
  if (event.event_doc.empty()) {
    throw Error(ErrorKind::kEmptyDoc, "event has no in-vocabulary words");
  }
  SeasonValues out;
  bool any = false;
  for (const SeasonModel* season : kb.seasons()) {
    const auto record = kb.resolve(event.disease_name, season->season_id);
    if (!record) {
      out[season->season_id] = 1.0;
      continue;
    }
    any = true;
    const ProcessedDoc trusted = embed_text(record->solution_text, stopwords, table);
    out[season->season_id] = clip_unit(wmd_distance(event.event_doc, trusted, table));
  }
  if (!any) {
    throw Error(ErrorKind::kNoTrustedRecord,
                "no season has a record for '" + event.disease_name + "'");
  }
  return out;
}

// P(E|S) = 1 - clipped WMD(event, trusted solution of S).
inline SeasonValues season_likelihoods(const EventObservation& event,
                                       const KnowledgeBase& kb,
                                       const EmbeddingTable& table,
                                       const StopWords& stopwords) {
  SeasonValues out = season_distances(event, kb, table, stopwords);
  for (auto& [season, value] : out) value = 1.0 - value;
  return out;
}

struct SeasonPosterior {
  SeasonValues likelihood;
  SeasonValues posterior;
};

// Bayes rule over seasons: P(S|E) = P(E|S)P(S) / sum_H P(E|H)P(H).
inline SeasonPosterior posterior(const SeasonValues& likelihoods,
                                 const SeasonValues& priors) {
  if (likelihoods.empty()) throw Error(ErrorKind::kInvalidArgument, "no seasons");
  if (likelihoods.size() != priors.size()) {
    throw Error(ErrorKind::kInvalidArgument, "likelihood/prior season sets differ");
  }
  double prior_sum = 0.0;
  double evidence = 0.0;
  for (const auto& [season, l] : likelihoods) {
    const auto it = priors.find(season);
    if (it == priors.end()) {
      throw Error(ErrorKind::kInvalidArgument, "no prior for season '" + season + "'");
    }
    if (!(l >= 0.0) || !(it->second >= 0.0)) {
      throw Error(ErrorKind::kInvalidArgument, "negative likelihood or prior");
    }
    prior_sum += it->second;
    evidence += l * it->second;
  }
  if (std::abs(prior_sum - 1.0) > 1e-9) {
    throw Error(ErrorKind::kInvalidArgument, "priors do not sum to 1");
  }
  if (!(evidence > 0.0)) {
    throw Error(ErrorKind::kNoEvidence, "every season has zero likelihood");
  }
  SeasonPosterior out;
  out.likelihood = likelihoods;
  for (const auto& [season, l] : likelihoods) {
    out.posterior[season] = l * priors.at(season) / evidence;
  }
  return out;
}

struct SwitchProbabilities {
  SeasonValues probability;
  std::string recommended;  // least probability of switching away
};

// Each model's WMD is clipped to 1 and divided by the total, so a model that
// matches the evidence well has a small share. All-zero input (every model
// matching perfectly) yields the uniform distribution.
inline SwitchProbabilities switch_probabilities(const SeasonValues& wmds) {
  if (wmds.size() < 2) {
    throw Error(ErrorKind::kInvalidArgument, "need at least two models");
  }
  SwitchProbabilities out;
  double total = 0.0;
  for (const auto& [model, w] : wmds) {
    const double c = clip_unit(w);
    out.probability[model] = c;
    total += c;
  }
  const double uniform = 1.0 / static_cast<double>(wmds.size());
  for (auto& [model, p] : out.probability) p = total > 0.0 ? p / total : uniform;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& [model, p] : out.probability) {
    if (p < best) {
      best = p;
      out.recommended = model;
    }
  }
  return out;
}

// Most recent `capacity` (day, value) observations with strictly increasing
// day indices.
class DriftWindow {
 public:
  struct Entry {
    std::int64_t day = 0;
    double value = 0.0;
  };

  explicit DriftWindow(std::size_t capacity = 30) : capacity_(capacity) {
    if (capacity_ == 0) throw Error(ErrorKind::kInvalidArgument, "window capacity 0");
  }

  void push(std::int64_t day, double value) {
    if (!entries_.empty() && day <= entries_.back().day) {
      throw Error(ErrorKind::kInvalidArgument,
                  "day index " + std::to_string(day) + " not after " +
                      std::to_string(entries_.back().day));
    }
    if (!std::isfinite(value)) {
      throw Error(ErrorKind::kInvalidArgument, "non-finite drift value");
    }
    entries_.push_back({day, value});
    if (entries_.size() > capacity_) entries_.pop_front();
  }

  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  const std::deque<Entry>& entries() const noexcept { return entries_; }
  std::optional<std::int64_t> last_day() const {
    if (entries_.empty()) return std::nullopt;
    return entries_.back().day;
  }
  void clear() { entries_.clear(); }

 private:
  std::size_t capacity_;
  std::deque<Entry> entries_;
};

// Trial budget N = ceil(log(1 - p) / log(1 - e^k)).
inline std::size_t ransac_trials(double p, double e, int k) {
  if (!(p > 0.0 && p < 1.0)) {
    throw Error(ErrorKind::kInvalidArgument, "confidence must be in (0,1)");
  }
  if (!(e > 0.0 && e <= 1.0)) {
    throw Error(ErrorKind::kInvalidArgument, "inlier ratio must be in (0,1]");
  }
  if (k < 1) throw Error(ErrorKind::kInvalidArgument, "sample size must be >= 1");
  const double all_inlier = std::pow(e, k);
  if (all_inlier >= 1.0) return 1;
  const double n = std::log(1.0 - p) / std::log(1.0 - all_inlier);
  return static_cast<std::size_t>(std::max(1.0, std::ceil(n)));
}

struct RansacConfig {
  double confidence = 0.99;
  int sample_size = 2;
  double inlier_ratio = 0.5;
  double inlier_threshold = 0.05;
  double slope_threshold = 0.01;

  void validate() const {
    if (!(confidence > 0.0 && confidence < 1.0)) {
      throw Error(ErrorKind::kValidation, "ransac confidence must be in (0,1)");
    }
    if (sample_size < 2) throw Error(ErrorKind::kValidation, "ransac sample size < 2");
    if (!(inlier_ratio > 0.0 && inlier_ratio <= 1.0)) {
      throw Error(ErrorKind::kValidation, "ransac inlier ratio must be in (0,1]");
    }
    if (!(inlier_threshold > 0.0)) {
      throw Error(ErrorKind::kValidation, "ransac inlier threshold must be > 0");
    }
    if (!(slope_threshold > 0.0)) {
      throw Error(ErrorKind::kValidation, "slope threshold must be > 0");
    }
  }
};

inline constexpr std::uint64_t kDefaultSeed = 20211;

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  std::size_t inlier_count = 0;
};

// Ordinary least squares; nullopt when all x coincide.
inline std::optional<LineFit> ols_fit(std::span<const Point> pts) {
  if (pts.size() < 2) return std::nullopt;
  double mx = 0.0;
  double my = 0.0;
  for (const auto& p : pts) {
    mx += p.x;
    my += p.y;
  }
  mx /= static_cast<double>(pts.size());
  my /= static_cast<double>(pts.size());
  double sxx = 0.0;
  double sxy = 0.0;
  for (const auto& p : pts) {
    sxx += (p.x - mx) * (p.x - mx);
    sxy += (p.x - mx) * (p.y - my);
  }
  if (sxx == 0.0) return std::nullopt;
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.inlier_count = pts.size();
  return f;
}

inline std::vector<Point> window_points(const DriftWindow& window) {
  std::vector<Point> pts;
  pts.reserve(window.size());
  for (const auto& e : window.entries()) {
    pts.push_back({static_cast<double>(e.day), e.value});
  }
  return pts;
}

// Robust line fit. Runs ransac_trials(p, e, k) trials, each fitting k
// distinct points drawn from a seeded mt19937_64; the candidate with the
// most inliers (|residual| <= threshold) wins, ties to the smaller summed
// inlier residual, and the winner's inliers are refit by least squares.
inline LineFit ransac_fit(std::span<const Point> pts, const RansacConfig& cfg,
                          std::uint64_t seed) {
  cfg.validate();
  const std::size_t k = static_cast<std::size_t>(cfg.sample_size);
  if (pts.size() < k) {
    throw Error(ErrorKind::kInvalidArgument,
                "ransac needs " + std::to_string(k) + " points, have " +
                    std::to_string(pts.size()));
  }
  const std::size_t trials = ransac_trials(cfg.confidence, cfg.inlier_ratio, cfg.sample_size);
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> idx(pts.size());
  std::vector<Point> sample(k);
  std::vector<std::size_t> best_inliers;
  double best_residual = 0.0;

  for (std::size_t t = 0; t < trials; ++t) {
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng() % (idx.size() - i));
      std::swap(idx[i], idx[j]);
      sample[i] = pts[idx[i]];
    }
    const auto model = ols_fit(sample);
    if (!model) continue;  // identical x: spend the trial and resample
    std::vector<std::size_t> inliers;
    double residual = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const double r = std::abs(pts[i].y - (model->slope * pts[i].x + model->intercept));
      if (r <= cfg.inlier_threshold) {
        inliers.push_back(i);
        residual += r;
      }
    }
    if (inliers.size() > best_inliers.size() ||
        (!inliers.empty() && inliers.size() == best_inliers.size() &&
         residual < best_residual)) {
      best_inliers = std::move(inliers);
      best_residual = residual;
    }
  }
  if (best_inliers.size() < 2) {
    throw Error(ErrorKind::kDegenerate, "ransac found no usable consensus set");
  }
  std::vector<Point> consensus;
  for (std::size_t i : best_inliers) consensus.push_back(pts[i]);
  auto refit = ols_fit(consensus);
  if (!refit) throw Error(ErrorKind::kDegenerate, "consensus set has a single x");
  refit->inlier_count = best_inliers.size();
  return *refit;
}

inline LineFit ransac_fit(const DriftWindow& window, const RansacConfig& cfg,
                          std::uint64_t seed) {
  const auto pts = window_points(window);
  return ransac_fit(std::span<const Point>(pts), cfg, seed);
}

struct SwitchDecision {
  bool switch_model = false;
  std::string target;  // set when switch_model
  double slope = 0.0;
};

// The window holds the current season's posterior history. A slope at or
// below -slope_threshold triggers a switch to the model with the least
// switch probability, unless that model is the current one.
inline SwitchDecision should_switch(const DriftWindow& window, const RansacConfig& cfg,
                                    const SeasonValues& switch_probs,
                                    std::string_view current_season,
                                    std::uint64_t seed) {
  SwitchDecision d;
  d.slope = ransac_fit(window, cfg, seed).slope;
  if (d.slope > -cfg.slope_threshold) return d;
  if (switch_probs.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "no switch probabilities");
  }
  std::string best;
  double best_p = std::numeric_limits<double>::infinity();
  for (const auto& [model, p] : switch_probs) {
    if (p < best_p) {
      best_p = p;
      best = model;
    }
  }
  if (best != current_season) {
    d.switch_model = true;
    d.target = best;
  }
  return d;
}

// Drift state persisted between runs:
//   season,<current season>
//   capacity,<R>
//   wmd,<model>,<value>        (zero or more; latest per-model distances)
//   day_index,posterior
//   <day>,<posterior>          (zero or more)
struct DriftState {
  std::string current_season;
  DriftWindow window{30};
  SeasonValues wmds;
};

inline void save_drift_state(const std::filesystem::path& path, const DriftState& s) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out << "season," << s.current_season << '\n';
  out << "capacity," << s.window.capacity() << '\n';
  for (const auto& [model, w] : s.wmds) out << "wmd," << model << ',' << format_shortest(w) << '\n';
  out << "day_index,posterior\n";
  for (const auto& e : s.window.entries()) {
    out << e.day << ',' << format_shortest(e.value) << '\n';
  }
  if (!out) throw Error(ErrorKind::kIo, "write failed: " + path.string());
}

inline DriftState load_drift_state(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open drift state " + path.string());
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& why) {
    return Error(ErrorKind::kParse,
                 path.string() + ":" + std::to_string(line_no) + ": " + why);
  };
  DriftState s;
  bool have_season = false;
  bool in_rows = false;
  std::optional<std::size_t> capacity;
  std::vector<DriftWindow::Entry> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto f = split(line, ',');
    try {
      if (in_rows) {
        if (f.size() != 2) throw fail("expected day_index,posterior");
        rows.push_back({parse_int(f[0], "day_index"), parse_double(f[1], "posterior")});
      } else if (f[0] == "season" && f.size() == 2) {
        s.current_season = std::string(trim(f[1]));
        have_season = !s.current_season.empty();
      } else if (f[0] == "capacity" && f.size() == 2) {
        const auto c = parse_int(f[1], "capacity");
        if (c <= 0) throw fail("capacity must be positive");
        capacity = static_cast<std::size_t>(c);
      } else if (f[0] == "wmd" && f.size() == 3) {
        const double w = parse_double(f[2], "wmd");
        if (!(w >= 0.0)) throw fail("negative wmd");
        s.wmds[std::string(trim(f[1]))] = w;
      } else if (line == "day_index,posterior") {
        in_rows = true;
      } else {
        throw fail("unrecognized line '" + line + "'");
      }
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::kParse && std::string(e.what()).find(path.string()) != std::string::npos) throw;
      throw fail(e.what());
    }
  }
  if (!have_season) throw Error(ErrorKind::kParse, path.string() + ": missing season line");
  if (!in_rows) throw Error(ErrorKind::kParse, path.string() + ": missing day_index,posterior header");
  s.window = DriftWindow(capacity.value_or(std::max<std::size_t>(30, rows.size())));
  for (const auto& r : rows) {
    try {
      s.window.push(r.day, r.value);
    } catch (const Error& e) {
      throw Error(ErrorKind::kParse, path.string() + ": " + e.what());
    }
  }
  return s;
}

}  // namespace cropline
