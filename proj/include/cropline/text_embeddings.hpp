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
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "cropline/error.hpp"
#include "cropline/strings.hpp"

namespace cropline {

using StopWords = std::unordered_set<std::string>;

// Fixed English stop-word list (articles, pronouns, prepositions,
// auxiliaries). Mirrors data/stopwords_en.txt.
inline constexpr std::string_view kDefaultStopWords[] = {
    "i", "me", "my", "myself", "we", "our", "ours", "ourselves", "you",
    "your", "yours", "yourself", "yourselves", "he", "him", "his", "himself",
    "she", "her", "hers", "herself", "it", "its", "itself", "they", "them",
    "their", "theirs", "themselves", "what", "which", "who", "whom", "this",
    "that", "these", "those", "am", "is", "are", "was", "were", "be", "been",
    "being", "have", "has", "had", "having", "do", "does", "did", "doing",
    "a", "an", "the", "and", "but", "if", "or", "because", "as", "until",
    "while", "of", "at", "by", "for", "with", "about", "against", "between",
    "into", "through", "during", "before", "after", "above", "below", "to",
    "from", "up", "down", "in", "out", "on", "off", "over", "under", "again",
    "further", "then", "once", "here", "there", "when", "where", "why", "how",
    "all", "any", "both", "each", "few", "more", "most", "other", "some",
    "such", "no", "nor", "not", "only", "own", "same", "so", "than", "too",
    "very", "s", "t", "can", "will", "just", "don", "should", "now", "d", "ll",
    "m", "o", "re", "ve", "y", "ain", "aren", "couldn", "didn", "doesn",
    "hadn", "hasn", "haven", "isn", "ma", "mightn", "mustn", "needn", "shan",
    "shouldn", "wasn", "weren", "won", "wouldn"};

inline StopWords default_stopwords() {
  StopWords out;
  for (auto w : kDefaultStopWords) out.emplace(w);
  return out;
}

// One word per line; blank lines and lines starting with '#' are skipped.
inline StopWords load_stopwords(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open stop words " + path.string());
  StopWords out;
  std::string line;
  while (std::getline(in, line)) {
    const auto w = to_lower(trim(line));
    if (w.empty() || w.front() == '#') continue;
    out.insert(w);
  }
  return out;
}

inline bool is_ascii_punct(char c) {
  return (c >= '!' && c <= '/') || (c >= ':' && c <= '@') ||
         (c >= '[' && c <= '`') || (c >= '{' && c <= '~');
}

// Lowercases, drops punctuation, splits on whitespace and removes stop words.
// Apostrophes are deleted so contractions stay one token; other punctuation
// separates tokens.
inline std::vector<std::string> preprocess(std::string_view raw,
                                           const StopWords& stopwords) {
  std::string cleaned;
  cleaned.reserve(raw.size());
  for (char c : raw) {
    if (c == '\'') continue;
    cleaned.push_back(is_ascii_punct(c) ? ' ' : to_lower_ascii(c));
  }
  std::vector<std::string> tokens;
  for (auto& tok : split_whitespace(cleaned)) {
    if (!stopwords.count(tok)) tokens.push_back(std::move(tok));
  }
  return tokens;
}

namespace detail {

inline bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() &&
         s.substr(s.size() - suffix.size()) == suffix;
}

inline bool has_vowel(std::string_view s) {
  return s.find_first_of("aeiouy") != std::string_view::npos;
}

inline bool is_consonant(char c) {
  return c >= 'a' && c <= 'z' && std::string_view("aeiou").find(c) ==
                                     std::string_view::npos;
}

inline std::string stem_once(std::string w) {
  if (w.size() > 5 && ends_with(w, "ing")) {
    std::string base = w.substr(0, w.size() - 3);
    if (has_vowel(base)) {
      const std::size_t n = base.size();
      if (n >= 4 && base[n - 1] == base[n - 2] && is_consonant(base[n - 1]) &&
          base[n - 1] != 'l' && base[n - 1] != 's' && base[n - 1] != 'z') {
        base.pop_back();
      }
      return base;
    }
  }
  if (w.size() > 4 && (ends_with(w, "sses") || ends_with(w, "xes") ||
                       ends_with(w, "zes") || ends_with(w, "ches") ||
                       ends_with(w, "shes"))) {
    return w.substr(0, w.size() - 2);
  }
  if (w.size() > 3 && ends_with(w, "s") && !ends_with(w, "ss") &&
      !ends_with(w, "us") && !ends_with(w, "is")) {
    return w.substr(0, w.size() - 1);
  }
  return w;
}

}  // namespace detail

// Light suffix stemmer: plural -s/-es and gerund -ing with consonant
// doubling undone. Applied to a fixed point, so stem(stem(w)) == stem(w).
inline std::string stem(std::string_view word) {
  std::string w(word);
  for (;;) {
    std::string next = detail::stem_once(w);
    if (next == w) return w;
    w = std::move(next);
  }
}

// Unit-norm word vectors of one fixed dimension. Immutable once loaded.
class EmbeddingTable {
 public:
  explicit EmbeddingTable(std::size_t dim = 0) : dim_(dim) {}

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return index_.size(); }

  // Normalizes and stores a vector; the first insertion fixes the dimension.
  void add(std::string word, std::span<const double> values) {
    if (word.empty()) throw Error(ErrorKind::kValidation, "empty word");
    if (dim_ == 0) dim_ = values.size();
    if (values.size() != dim_ || dim_ == 0) {
      throw Error(ErrorKind::kValidation,
                  "dimension mismatch for '" + word + "': expected " +
                      std::to_string(dim_) + ", got " +
                      std::to_string(values.size()));
    }
    double norm2 = 0.0;
    for (double v : values) {
      if (!std::isfinite(v)) {
        throw Error(ErrorKind::kValidation, "non-finite component in '" + word + "'");
      }
      norm2 += v * v;
    }
    if (norm2 == 0.0) {
      throw Error(ErrorKind::kValidation, "zero vector for '" + word + "'");
    }
    if (index_.count(word)) {
      throw Error(ErrorKind::kDuplicate, "duplicate word '" + word + "'");
    }
    const double inv = 1.0 / std::sqrt(norm2);
    const std::size_t offset = data_.size();
    for (double v : values) data_.push_back(v * inv);
    index_.emplace(std::move(word), offset);
  }

  bool contains(std::string_view word) const {
    return index_.count(std::string(word)) != 0;
  }

  std::optional<std::span<const double>> find(std::string_view word) const {
    const auto it = index_.find(std::string(word));
    if (it == index_.end()) return std::nullopt;
    return std::span<const double>(data_.data() + it->second, dim_);
  }

  std::span<const double> at(std::string_view word) const {
    auto v = find(word);
    if (!v) {
      throw Error(ErrorKind::kInvalidArgument,
                  "word not in embedding table: '" + std::string(word) + "'");
    }
    return *v;
  }

  // Exact word if present, otherwise its stem if present.
  std::optional<std::string> resolve(std::string_view token) const {
    if (contains(token)) return std::string(token);
    std::string s = stem(token);
    if (contains(s)) return s;
    return std::nullopt;
  }

 private:
  std::size_t dim_;
  std::vector<double> data_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Text format: optional "<vocab_size> <dim>" header, then "word v1 .. vdim".
inline EmbeddingTable load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open embeddings " + path.string());
  EmbeddingTable table;
  std::optional<std::size_t> header_dim;
  std::string line;
  std::size_t line_no = 0;
  std::vector<double> values;
  while (std::getline(in, line)) {
    ++line_no;
    const auto parts = split_whitespace(line);
    if (parts.empty()) continue;
    auto where = [&] { return path.string() + ":" + std::to_string(line_no) + ": "; };
    if (line_no == 1 && parts.size() == 2) {
      try {
        parse_int(parts[0], "vocab size");
        const auto dim = parse_int(parts[1], "dim");
        if (dim <= 0) throw Error(ErrorKind::kValidation, "bad header dimension");
        header_dim = static_cast<std::size_t>(dim);
        continue;
      } catch (const Error&) {
        // Not a header: a one-dimensional entry. Fall through.
      }
    }
    if (parts.size() < 2) throw Error(ErrorKind::kParse, where() + "no vector");
    values.clear();
    try {
      for (std::size_t i = 1; i < parts.size(); ++i) {
        values.push_back(parse_double(parts[i], "vector component"));
      }
      if (header_dim && values.size() != *header_dim) {
        throw Error(ErrorKind::kValidation,
                    "dimension mismatch: expected " + std::to_string(*header_dim) +
                        ", got " + std::to_string(values.size()));
      }
      table.add(parts[0], values);
    } catch (const Error& e) {
      throw Error(e.kind(), where() + e.what());
    }
  }
  return table;
}

// Tokens plus their normalized bag-of-words weights. nbow keys are table
// words, so a token and its stem collapse onto one entry.
struct ProcessedDoc {
  std::vector<std::string> tokens;
  std::map<std::string, double> nbow;

  bool empty() const { return nbow.empty(); }
};

inline ProcessedDoc to_nbow(std::vector<std::string> tokens,
                            const EmbeddingTable& table) {
  std::map<std::string, std::size_t> counts;
  std::size_t total = 0;
  for (const auto& t : tokens) {
    if (auto key = table.resolve(t)) {
      ++counts[*key];
      ++total;
    }
  }
  if (total == 0) {
    throw Error(ErrorKind::kEmptyDoc, "no in-vocabulary tokens");
  }
  ProcessedDoc doc;
  doc.tokens = std::move(tokens);
  for (const auto& [word, n] : counts) {
    doc.nbow.emplace(word, static_cast<double>(n) / static_cast<double>(total));
  }
  return doc;
}

// preprocess + to_nbow in one step.
inline ProcessedDoc embed_text(std::string_view raw, const StopWords& stopwords,
                               const EmbeddingTable& table) {
  return to_nbow(preprocess(raw, stopwords), table);
}

}  // namespace cropline
