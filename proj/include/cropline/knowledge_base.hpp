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

#include <sqlite3.h>

#include <algorithm>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cropline/error.hpp"
#include "cropline/strings.hpp"

namespace cropline {

struct DiseaseRecord {
  std::string disease_name;  // normalized
  std::string solution_text;
  std::string season_id;
  double water_availability = 0.0;  // normalized supply index in [0, 1]
  double daylight_hours = 0.0;
  std::vector<std::string> dangerous_pests;
  std::set<int> active_months;  // 1..12
};

struct SeasonModel {
  std::string season_id;
  double prior = 0.0;
  int duration_months = 0;
  std::vector<DiseaseRecord> records;
};

// Thrown by lookup_closest when nothing clears the acceptance threshold.
class NoMatchError : public Error {
 public:
  NoMatchError(const std::string& query, std::string best_candidate,
               double best_score)
      : Error(ErrorKind::kNoMatch,
              "no trusted disease close to '" + query + "' (best '" +
                  best_candidate + "', similarity " +
                  format_fixed(best_score, 3) + ")"),
        best_candidate_(std::move(best_candidate)),
        best_score_(best_score) {}

  const std::string& best_candidate() const noexcept { return best_candidate_; }
  double best_score() const noexcept { return best_score_; }

 private:
  std::string best_candidate_;
  double best_score_;
};

struct ClosestMatch {
  DiseaseRecord record;
  double similarity = 0.0;
};

inline constexpr double kDefaultNameThreshold = 0.7;

inline constexpr std::string_view kKnowledgeBaseHeader =
    "season_id,disease_name,solution,water_availability,daylight_hours,"
    "dangerous_pests,active_months";

namespace detail {

// Splits one CSV record. Double-quoted fields may contain commas and "".
inline std::vector<std::string> split_csv_line(std::string_view line,
                                               std::size_t row) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  bool field_started_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"' && cur.empty() && !field_started_quoted) {
      quoted = true;
      field_started_quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
      field_started_quoted = false;
    } else {
      cur.push_back(c);
    }
  }
  if (quoted) {
    throw Error(ErrorKind::kParse,
                "row " + std::to_string(row) + ": unterminated quoted field");
  }
  fields.push_back(std::move(cur));
  return fields;
}

inline std::set<int> parse_months(std::string_view text) {
  const std::string t(trim(text));
  std::set<int> months;
  auto check = [](long long m) {
    if (m < 1 || m > 12) {
      throw Error(ErrorKind::kValidation,
                  "month " + std::to_string(m) + " outside 1-12");
    }
    return static_cast<int>(m);
  };
  if (t.empty()) throw Error(ErrorKind::kValidation, "no active months");
  const auto dash = t.find('-');
  if (dash != std::string::npos && t.find(';') == std::string::npos) {
    const int first = check(parse_int(t.substr(0, dash), "month"));
    const int last = check(parse_int(t.substr(dash + 1), "month"));
    // A wrapped range such as 11-2 spans the year boundary.
    for (int m = first;; m = m % 12 + 1) {
      months.insert(m);
      if (m == last) break;
    }
    return months;
  }
  for (const auto& part : split(t, ';')) {
    months.insert(check(parse_int(part, "month")));
  }
  return months;
}

inline std::string months_to_string(const std::set<int>& months) {
  std::string out;
  for (int m : months) {
    if (!out.empty()) out.push_back(';');
    out += std::to_string(m);
  }
  return out;
}

inline std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out.push_back(sep);
    out += parts[i];
  }
  return out;
}

struct SqliteCloser {
  void operator()(sqlite3* db) const { sqlite3_close(db); }
};
struct StmtFinalizer {
  void operator()(sqlite3_stmt* st) const { sqlite3_finalize(st); }
};
using SqliteHandle = std::unique_ptr<sqlite3, SqliteCloser>;
using StmtHandle = std::unique_ptr<sqlite3_stmt, StmtFinalizer>;

inline SqliteHandle open_sqlite(const std::filesystem::path& path, int flags) {
  sqlite3* raw = nullptr;
  const int rc = sqlite3_open_v2(path.string().c_str(), &raw, flags, nullptr);
  SqliteHandle db(raw);
  if (rc != SQLITE_OK) {
    throw Error(ErrorKind::kIo, "cannot open store " + path.string() + ": " +
                                    (raw ? sqlite3_errmsg(raw) : "out of memory"));
  }
  return db;
}

inline void exec_sql(sqlite3* db, const char* sql) {
  char* msg = nullptr;
  if (sqlite3_exec(db, sql, nullptr, nullptr, &msg) != SQLITE_OK) {
    std::string text = msg ? msg : "unknown sqlite error";
    sqlite3_free(msg);
    throw Error(ErrorKind::kIo, text);
  }
}

inline StmtHandle prepare(sqlite3* db, const char* sql) {
  sqlite3_stmt* st = nullptr;
  if (sqlite3_prepare_v2(db, sql, -1, &st, nullptr) != SQLITE_OK) {
    throw Error(ErrorKind::kIo, sqlite3_errmsg(db));
  }
  return StmtHandle(st);
}

inline std::string column_text(sqlite3_stmt* st, int col) {
  const auto* p = sqlite3_column_text(st, col);
  return p ? std::string(reinterpret_cast<const char*>(p)) : std::string();
}

}  // namespace detail

// Trusted disease/solution table grouped by season. Import and add_record
// are single-writer; once finalize() has run the registry is read-only and
// safe to share between threads.
class KnowledgeBase {
 public:
  // Validates and stores one record. Leaves the registry unfinalized.
  void add_record(DiseaseRecord record) {
    record.disease_name = normalize_name(record.disease_name);
    record.season_id = collapse_whitespace(record.season_id);
    if (record.disease_name.empty()) {
      throw Error(ErrorKind::kValidation, "empty disease_name");
    }
    if (record.season_id.empty()) {
      throw Error(ErrorKind::kValidation, "empty season_id");
    }
    if (record.active_months.empty()) {
      throw Error(ErrorKind::kValidation, "no active months");
    }
    for (int m : record.active_months) {
      if (m < 1 || m > 12) {
        throw Error(ErrorKind::kValidation,
                    "month " + std::to_string(m) + " outside 1-12");
      }
    }
    if (record.water_availability < 0.0 || record.water_availability > 1.0) {
      throw Error(ErrorKind::kValidation,
                  "water_availability outside [0,1]");
    }
    if (record.daylight_hours < 0.0 || record.daylight_hours > 24.0) {
      throw Error(ErrorKind::kValidation, "daylight_hours outside [0,24]");
    }
    SeasonModel& season = seasons_[record.season_id];
    season.season_id = record.season_id;
    for (const auto& existing : season.records) {
      if (existing.disease_name == record.disease_name) {
        throw Error(ErrorKind::kDuplicate,
                    "duplicate (" + record.season_id + ", " +
                        record.disease_name + ")");
      }
    }
    season.records.push_back(std::move(record));
    finalized_ = false;
  }

  // Season duration is the number of distinct months covered by its
  // records; priors are durations over their total so they always sum to 1.
  void finalize() {
    if (seasons_.empty()) {
      throw Error(ErrorKind::kValidation, "knowledge base has no records");
    }
    int total = 0;
    for (auto& [id, season] : seasons_) {
      std::set<int> months;
      for (const auto& r : season.records) {
        months.insert(r.active_months.begin(), r.active_months.end());
      }
      season.duration_months = static_cast<int>(months.size());
      total += season.duration_months;
    }
    for (auto& [id, season] : seasons_) {
      season.prior = static_cast<double>(season.duration_months) / total;
    }
    finalized_ = true;
  }

  bool finalized() const noexcept { return finalized_; }

  // Parses a CSV with the fixed header, adds every row and finalizes.
  // Returns the number of records imported from this file.
  std::size_t import_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) {
      throw Error(ErrorKind::kValidation, path.string() + ": missing header");
    }
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
      line.erase(0, 3);
    }
    if (trim(line) != kKnowledgeBaseHeader) {
      throw Error(ErrorKind::kValidation,
                  path.string() + ": header must be '" +
                      std::string(kKnowledgeBaseHeader) + "'");
    }
    static constexpr const char* kColumns[] = {
        "season_id",      "disease_name",    "solution",     "water_availability",
        "daylight_hours", "dangerous_pests", "active_months"};
    std::size_t row = 1;
    std::size_t imported = 0;
    while (std::getline(in, line)) {
      ++row;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (trim(line).empty()) continue;
      const auto fields = detail::split_csv_line(line, row);
      if (fields.size() != 7) {
        throw Error(ErrorKind::kValidation,
                    "row " + std::to_string(row) + ": expected 7 columns, got " +
                        std::to_string(fields.size()));
      }
      std::size_t column = 0;
      try {
        DiseaseRecord rec;
        rec.season_id = std::string(trim(fields[0]));
        column = 1;
        rec.disease_name = fields[1];
        if (normalize_name(rec.disease_name).empty()) {
          throw Error(ErrorKind::kValidation, "empty value");
        }
        column = 2;
        rec.solution_text = collapse_whitespace(fields[2]);
        if (rec.solution_text.empty()) {
          throw Error(ErrorKind::kValidation, "empty value");
        }
        column = 3;
        rec.water_availability = parse_double(fields[3], kColumns[3]);
        if (rec.water_availability < 0.0 || rec.water_availability > 1.0) {
          throw Error(ErrorKind::kValidation, "outside [0,1]");
        }
        column = 4;
        rec.daylight_hours = parse_double(fields[4], kColumns[4]);
        if (rec.daylight_hours < 0.0 || rec.daylight_hours > 24.0) {
          throw Error(ErrorKind::kValidation, "outside [0,24]");
        }
        column = 5;
        for (const auto& pest : split(fields[5], ';')) {
          auto p = collapse_whitespace(pest);
          if (!p.empty()) rec.dangerous_pests.push_back(std::move(p));
        }
        column = 6;
        rec.active_months = detail::parse_months(fields[6]);
        column = 0;
        if (rec.season_id.empty()) {
          throw Error(ErrorKind::kValidation, "empty value");
        }
        add_record(std::move(rec));
      } catch (const Error& e) {
        throw Error(e.kind() == ErrorKind::kDuplicate ? ErrorKind::kDuplicate
                                                      : ErrorKind::kValidation,
                    path.string() + ": row " + std::to_string(row) +
                        ", column " + kColumns[column] + ": " + e.what());
      }
      ++imported;
    }
    finalize();
    return imported;
  }

  const SeasonModel& season(std::string_view season_id) const {
    const auto it = seasons_.find(std::string(trim(season_id)));
    if (it == seasons_.end()) {
      throw Error(ErrorKind::kUnknownSeason,
                  "unknown season '" + std::string(season_id) + "'");
    }
    return it->second;
  }

  bool has_season(std::string_view season_id) const {
    return seasons_.count(std::string(trim(season_id))) != 0;
  }

  // Seasons in lexicographic id order.
  std::vector<const SeasonModel*> seasons() const {
    std::vector<const SeasonModel*> out;
    for (const auto& [id, s] : seasons_) out.push_back(&s);
    return out;
  }

  std::size_t record_count() const {
    std::size_t n = 0;
    for (const auto& [id, s] : seasons_) n += s.records.size();
    return n;
  }

  // WHERE season_id = ? AND disease_name = ? over normalized names.
  std::optional<DiseaseRecord> lookup_exact(std::string_view disease_name,
                                            std::string_view season_id) const {
    require_finalized();
    const auto& s = season(season_id);
    const std::string key = normalize_name(disease_name);
    for (const auto& r : s.records) {
      if (r.disease_name == key) return r;
    }
    return std::nullopt;
  }

  ClosestMatch lookup_closest(std::string_view disease_name,
                              std::string_view season_id,
                              double threshold = kDefaultNameThreshold) const {
    require_finalized();
    const std::string key = normalize_name(disease_name);
    if (key.empty()) throw Error(ErrorKind::kInvalidArgument, "empty query");
    const auto& s = season(season_id);
    if (s.records.empty()) {
      throw Error(ErrorKind::kNoMatch, "season '" + s.season_id + "' is empty");
    }
    const DiseaseRecord* best = nullptr;
    double best_sim = -1.0;
    for (const auto& r : s.records) {
      const double sim = name_similarity(key, r.disease_name);
      if (sim > best_sim ||
          (sim == best_sim && r.disease_name < best->disease_name)) {
        best = &r;
        best_sim = sim;
      }
    }
    if (best_sim < threshold) {
      throw NoMatchError(key, best->disease_name, best_sim);
    }
    return {*best, best_sim};
  }

  // Exact lookup first, then fuzzy; nullopt when the season lacks the
  // disease or does not exist.
  std::optional<DiseaseRecord> resolve(std::string_view disease_name,
                                       std::string_view season_id,
                                       double threshold = kDefaultNameThreshold) const {
    if (!has_season(season_id)) return std::nullopt;
    if (auto exact = lookup_exact(disease_name, season_id)) return exact;
    try {
      return lookup_closest(disease_name, season_id, threshold).record;
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::kNoMatch) return std::nullopt;
      throw;
    }
  }

  // Persists the registry to a single-file SQLite store in WAL mode.
  void save_store(const std::filesystem::path& path) const {
    require_finalized();
    auto db = detail::open_sqlite(
        path, SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE);
    detail::exec_sql(db.get(), "PRAGMA journal_mode=WAL;");
    detail::exec_sql(db.get(),
                     "BEGIN;"
                     "DROP TABLE IF EXISTS disease_records;"
                     "CREATE TABLE disease_records ("
                     " season_id TEXT NOT NULL,"
                     " disease_name TEXT NOT NULL,"
                     " solution TEXT NOT NULL,"
                     " water_availability REAL NOT NULL,"
                     " daylight_hours REAL NOT NULL,"
                     " dangerous_pests TEXT NOT NULL,"
                     " active_months TEXT NOT NULL,"
                     " PRIMARY KEY (season_id, disease_name));");
    auto st = detail::prepare(
        db.get(), "INSERT INTO disease_records VALUES (?,?,?,?,?,?,?);");
    for (const auto& [id, s] : seasons_) {
      for (const auto& r : s.records) {
        sqlite3_reset(st.get());
        const std::string pests = detail::join(r.dangerous_pests, ';');
        const std::string months = detail::months_to_string(r.active_months);
        sqlite3_bind_text(st.get(), 1, r.season_id.c_str(), -1, SQLITE_TRANSIENT);
        sqlite3_bind_text(st.get(), 2, r.disease_name.c_str(), -1, SQLITE_TRANSIENT);
        sqlite3_bind_text(st.get(), 3, r.solution_text.c_str(), -1, SQLITE_TRANSIENT);
        sqlite3_bind_double(st.get(), 4, r.water_availability);
        sqlite3_bind_double(st.get(), 5, r.daylight_hours);
        sqlite3_bind_text(st.get(), 6, pests.c_str(), -1, SQLITE_TRANSIENT);
        sqlite3_bind_text(st.get(), 7, months.c_str(), -1, SQLITE_TRANSIENT);
        if (sqlite3_step(st.get()) != SQLITE_DONE) {
          throw Error(ErrorKind::kIo, sqlite3_errmsg(db.get()));
        }
      }
    }
    st.reset();
    detail::exec_sql(db.get(), "COMMIT;");
  }

  static KnowledgeBase load_store(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) {
      throw Error(ErrorKind::kIo, "store not found: " + path.string());
    }
    auto db = detail::open_sqlite(path, SQLITE_OPEN_READONLY);
    auto st = detail::prepare(
        db.get(),
        "SELECT season_id, disease_name, solution, water_availability,"
        " daylight_hours, dangerous_pests, active_months FROM disease_records"
        " ORDER BY season_id, rowid;");
    KnowledgeBase kb;
    int rc;
    while ((rc = sqlite3_step(st.get())) == SQLITE_ROW) {
      DiseaseRecord r;
      r.season_id = detail::column_text(st.get(), 0);
      r.disease_name = detail::column_text(st.get(), 1);
      r.solution_text = detail::column_text(st.get(), 2);
      r.water_availability = sqlite3_column_double(st.get(), 3);
      r.daylight_hours = sqlite3_column_double(st.get(), 4);
      for (const auto& p : split(detail::column_text(st.get(), 5), ';')) {
        if (!p.empty()) r.dangerous_pests.push_back(p);
      }
      r.active_months = detail::parse_months(detail::column_text(st.get(), 6));
      kb.add_record(std::move(r));
    }
    if (rc != SQLITE_DONE) throw Error(ErrorKind::kIo, sqlite3_errmsg(db.get()));
    kb.finalize();
    return kb;
  }

  // A path ending in .csv is imported; anything else is opened as a store.
  static KnowledgeBase open(const std::filesystem::path& path) {
    if (to_lower(path.extension().string()) == ".csv") {
      KnowledgeBase kb;
      kb.import_csv(path);
      return kb;
    }
    return load_store(path);
  }

 private:
  void require_finalized() const {
    if (!finalized_) {
      throw Error(ErrorKind::kInvalidArgument, "knowledge base not finalized");
    }
  }

  std::map<std::string, SeasonModel> seasons_;
  bool finalized_ = false;
};

}  // namespace cropline
