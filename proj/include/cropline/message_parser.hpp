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
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cropline/error.hpp"
#include "cropline/strings.hpp"

namespace cropline {

struct RawMessage {
  std::string id;
  std::string author;
  std::int64_t timestamp = 0;
  std::string text;
  std::optional<std::filesystem::path> image_path;
  std::optional<std::string> parent_id;  // absent for a root (farmer) post

  bool is_root() const { return !parent_id.has_value(); }
};

struct ParsedReply {
  std::string source_id;
  std::optional<std::string> disease_name;
  std::optional<std::string> solution_text;
  bool has_image = false;
  bool is_labeled = false;
  std::string author;
  std::int64_t timestamp = 0;
};

inline constexpr std::string_view kDefaultHashtag = "#savemyplant";

namespace detail {

inline bool is_word_char(char c) {
  const auto u = static_cast<unsigned char>(c);
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
         (c >= '0' && c <= '9') || c == '_' || u >= 0x80;
}

// Case-insensitive search for `needle` as a whole token: not preceded or
// followed by a word character.
inline std::size_t find_token(std::string_view lowered, std::string_view needle,
                              std::size_t from = 0) {
  while (from <= lowered.size()) {
    const std::size_t pos = lowered.find(needle, from);
    if (pos == std::string_view::npos) return pos;
    const bool left_ok = pos == 0 || !is_word_char(lowered[pos - 1]);
    const std::size_t end = pos + needle.size();
    const bool right_ok = end >= lowered.size() || !is_word_char(lowered[end]);
    if (left_ok && right_ok) return pos;
    from = pos + 1;
  }
  return std::string_view::npos;
}

// Replaces URLs, @mentions and #hashtags with a space.
inline std::string strip_markup(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    const bool at_boundary = i == 0 || !is_word_char(text[i - 1]);
    const std::string_view rest = text.substr(i);
    const std::string low = to_lower(rest.substr(0, 8));
    if (at_boundary && (low.rfind("http://", 0) == 0 || low.rfind("https://", 0) == 0)) {
      while (i < text.size() && !is_space(text[i])) ++i;
      out.push_back(' ');
      continue;
    }
    if (at_boundary && (text[i] == '#' || text[i] == '@') && i + 1 < text.size() &&
        is_word_char(text[i + 1])) {
      ++i;
      while (i < text.size() && is_word_char(text[i])) ++i;
      out.push_back(' ');
      continue;
    }
    out.push_back(text[i]);
    ++i;
  }
  return out;
}

// Finds `label` followed by optional whitespace and a colon. Returns the
// label start and sets `value_begin` past the colon.
inline std::size_t find_label(std::string_view lowered, std::string_view label,
                              std::size_t& value_begin) {
  std::size_t from = 0;
  while (from < lowered.size()) {
    const std::size_t pos = lowered.find(label, from);
    if (pos == std::string_view::npos) return pos;
    std::size_t j = pos + label.size();
    const bool left_ok = pos == 0 || !is_word_char(lowered[pos - 1]);
    while (j < lowered.size() && is_space(lowered[j])) ++j;
    if (left_ok && j < lowered.size() && lowered[j] == ':') {
      value_begin = j + 1;
      return pos;
    }
    from = pos + 1;
  }
  return std::string_view::npos;
}

inline std::string clean_value(std::string_view raw) {
  std::string v = normalize_name(raw);
  auto is_edge_punct = [](char c) {
    return c == ',' || c == ';' || c == '.' || c == '-' || c == '|';
  };
  std::size_t b = 0;
  std::size_t e = v.size();
  while (b < e && (is_edge_punct(v[b]) || is_space(v[b]))) ++b;
  while (e > b && (is_edge_punct(v[e - 1]) || is_space(v[e - 1]))) --e;
  return v.substr(b, e - b);
}

}  // namespace detail

// Extracts the disease name and solution from a hashtag-gated message of
// the form "Name: <disease> Solution: <remedy> #tag". Pure.
inline ParsedReply parse_message(const RawMessage& msg,
                                 std::string_view tracked_hashtag) {
  if (tracked_hashtag.size() < 2 || tracked_hashtag.front() != '#') {
    throw Error(ErrorKind::kInvalidArgument,
                "tracked hashtag must start with '#': '" +
                    std::string(tracked_hashtag) + "'");
  }
  const std::string lowered_text = to_lower(msg.text);
  if (detail::find_token(lowered_text, to_lower(tracked_hashtag)) ==
      std::string::npos) {
    throw Error(ErrorKind::kNotTracked,
                "message " + msg.id + " lacks " + std::string(tracked_hashtag));
  }

  ParsedReply out;
  out.source_id = msg.id;
  out.author = msg.author;
  out.timestamp = msg.timestamp;
  out.has_image = msg.image_path.has_value();

  const std::string body = detail::strip_markup(msg.text);
  const std::string lowered = to_lower(body);
  std::size_t name_value = 0;
  std::size_t solution_value = 0;
  const std::size_t name_at = detail::find_label(lowered, "name", name_value);
  const std::size_t solution_at =
      detail::find_label(lowered, "solution", solution_value);
  const bool has_name = name_at != std::string::npos;
  const bool has_solution = solution_at != std::string::npos;

  if (!has_name && !has_solution) {
    std::string text = detail::clean_value(body);
    if (!text.empty()) out.solution_text = std::move(text);
    return out;
  }
  if (has_name && has_solution && solution_at < name_at) {
    throw Error(ErrorKind::kMalformedLabels,
                "message " + msg.id + ": Solution label precedes Name label");
  }
  if (has_name) {
    const std::size_t end = has_solution ? solution_at : body.size();
    std::string name = detail::clean_value(
        std::string_view(body).substr(name_value, end - name_value));
    if (name.empty()) {
      throw Error(ErrorKind::kMalformedLabels,
                  "message " + msg.id + ": empty Name value");
    }
    out.disease_name = std::move(name);
  }
  if (has_solution) {
    std::string solution =
        detail::clean_value(std::string_view(body).substr(solution_value));
    if (solution.empty()) {
      throw Error(ErrorKind::kMalformedLabels,
                  "message " + msg.id + ": empty Solution value");
    }
    out.solution_text = std::move(solution);
  }
  out.is_labeled = has_name && has_solution;
  return out;
}

// Reads a newline-delimited message log. Each line is a flat JSON object with
// exactly the fields id, author, ts, text, image, parent. Relative image
// paths are resolved against the log's directory. Returns messages ordered
// by timestamp (file order among equal timestamps).
inline std::vector<RawMessage> load_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open log " + path.string());
  static const std::set<std::string> kFields = {"id",   "author", "ts",
                                                "text", "image",  "parent"};
  const std::filesystem::path base = path.parent_path();
  std::vector<RawMessage> messages;
  std::set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fail = [&](const std::string& why) {
      return Error(ErrorKind::kParse, path.string() + ":" +
                                          std::to_string(line_no) + ": " + why);
    };
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw fail(std::string("invalid JSON (") + e.what() + ")");
    }
    if (!j.is_object()) throw fail("record is not an object");
    for (const auto& [key, value] : j.items()) {
      if (!kFields.count(key)) throw fail("unexpected field '" + key + "'");
    }
    for (const auto& key : kFields) {
      if (!j.contains(key)) throw fail("missing field '" + key + "'");
    }
    RawMessage m;
    if (!j["id"].is_string() || j["id"].get<std::string>().empty()) {
      throw fail("id must be a nonempty string");
    }
    if (!j["author"].is_string()) throw fail("author must be a string");
    if (!j["ts"].is_number_integer()) throw fail("ts must be an integer");
    if (!j["text"].is_string()) throw fail("text must be a string");
    if (!j["image"].is_null() && !j["image"].is_string()) {
      throw fail("image must be a string or null");
    }
    if (!j["parent"].is_null() && !j["parent"].is_string()) {
      throw fail("parent must be a string or null");
    }
    m.id = j["id"].get<std::string>();
    m.author = j["author"].get<std::string>();
    m.timestamp = j["ts"].get<std::int64_t>();
    m.text = j["text"].get<std::string>();
    if (j["image"].is_string()) {
      std::filesystem::path img = j["image"].get<std::string>();
      m.image_path = img.is_relative() ? base / img : img;
    }
    if (j["parent"].is_string()) m.parent_id = j["parent"].get<std::string>();
    if (!ids.insert(m.id).second) throw fail("duplicate id '" + m.id + "'");
    messages.push_back(std::move(m));
  }
  for (const auto& m : messages) {
    if (m.parent_id && !ids.count(*m.parent_id)) {
      throw Error(ErrorKind::kValidation, path.string() + ": message '" + m.id +
                                              "' refers to unknown parent '" +
                                              *m.parent_id + "'");
    }
  }
  std::stable_sort(messages.begin(), messages.end(),
                   [](const RawMessage& a, const RawMessage& b) {
                     return a.timestamp < b.timestamp;
                   });
  return messages;
}

}  // namespace cropline
