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
#include <cmath>
#include <cstddef>
#include <limits>
#include <queue>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cropline/error.hpp"
#include "cropline/text_embeddings.hpp"
#include "cropline/transport.hpp"

namespace cropline {

inline double euclidean(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double d = x[k] - y[k];
    s += d * d;
  }
  return std::sqrt(s);
}

// Ground costs between the unique words of two documents, rows from `a`.
struct CostMatrix {
  std::vector<std::string> rows;
  std::vector<std::string> cols;
  Matrix cost;
};

struct TransportPlan {
  std::vector<std::string> rows;
  std::vector<std::string> cols;
  Matrix flow;
  double objective = 0.0;
};

struct WmdResult {
  double distance = 0.0;
  TransportPlan plan;
};

namespace detail {

inline void require_nonempty(const ProcessedDoc& a, const ProcessedDoc& b) {
  if (a.empty() || b.empty()) {
    throw Error(ErrorKind::kEmptyDoc, "document has no in-vocabulary words");
  }
}

// Words with zero mass carry no constraint and are dropped.
inline std::pair<std::vector<std::string>, std::vector<double>> support(
    const ProcessedDoc& doc) {
  std::pair<std::vector<std::string>, std::vector<double>> out;
  for (const auto& [word, w] : doc.nbow) {
    if (w > 0.0) {
      out.first.push_back(word);
      out.second.push_back(w);
    }
  }
  return out;
}

inline std::vector<double> centroid(const ProcessedDoc& doc,
                                    const EmbeddingTable& table) {
  std::vector<double> c(table.dim(), 0.0);
  for (const auto& [word, w] : doc.nbow) {
    const auto v = table.at(word);
    for (std::size_t k = 0; k < c.size(); ++k) c[k] += w * v[k];
  }
  return c;
}

// Sum over source words of mass times distance to the nearest target word.
inline double one_sided_relaxation(const ProcessedDoc& from,
                                   const ProcessedDoc& to,
                                   const EmbeddingTable& table) {
  double total = 0.0;
  for (const auto& [wi, mass] : from.nbow) {
    const auto xi = table.at(wi);
    double nearest = std::numeric_limits<double>::infinity();
    for (const auto& [wj, unused] : to.nbow) {
      nearest = std::min(nearest, euclidean(xi, table.at(wj)));
    }
    total += mass * nearest;
  }
  return total;
}

}  // namespace detail

inline CostMatrix cost_matrix(const ProcessedDoc& a, const ProcessedDoc& b,
                              const EmbeddingTable& table) {
  CostMatrix out;
  out.rows = detail::support(a).first;
  out.cols = detail::support(b).first;
  out.cost = Matrix(out.rows.size(), out.cols.size());
  for (std::size_t i = 0; i < out.rows.size(); ++i) {
    const auto xi = table.at(out.rows[i]);
    for (std::size_t j = 0; j < out.cols.size(); ++j) {
      out.cost(i, j) =
          out.rows[i] == out.cols[j] ? 0.0 : euclidean(xi, table.at(out.cols[j]));
    }
  }
  return out;
}

// Word Mover's Distance: optimal transport of a's nBOW mass onto b's.
inline WmdResult wmd_exact(const ProcessedDoc& a, const ProcessedDoc& b,
                           const EmbeddingTable& table) {
  detail::require_nonempty(a, b);
  auto [rows, supply] = detail::support(a);
  auto [cols, demand] = detail::support(b);
  CostMatrix cm = cost_matrix(a, b, table);
  TransportSolution sol = solve_transport(supply, demand, cm.cost);
  WmdResult out;
  out.distance = std::max(0.0, sol.objective);
  out.plan = TransportPlan{std::move(rows), std::move(cols), std::move(sol.flow),
                           sol.objective};
  return out;
}

inline double wmd_distance(const ProcessedDoc& a, const ProcessedDoc& b,
                           const EmbeddingTable& table) {
  return wmd_exact(a, b, table).distance;
}

// Word centroid distance, a lower bound on WMD.
inline double wcd(const ProcessedDoc& a, const ProcessedDoc& b,
                  const EmbeddingTable& table) {
  detail::require_nonempty(a, b);
  return euclidean(detail::centroid(a, table), detail::centroid(b, table));
}

// Relaxed WMD: each side drops one marginal constraint; the larger of the
// two relaxations is still a lower bound on WMD.
inline double rwmd(const ProcessedDoc& a, const ProcessedDoc& b,
                   const EmbeddingTable& table) {
  detail::require_nonempty(a, b);
  return std::max(detail::one_sided_relaxation(a, b, table),
                  detail::one_sided_relaxation(b, a, table));
}

// WMD values above 1 are saturated to 1.
inline double clip_unit(double x) {
  if (std::isnan(x) || x < 0.0) {
    throw Error(ErrorKind::kInvalidArgument,
                "distance must be nonnegative, got " + std::to_string(x));
  }
  return std::min(x, 1.0);
}

struct RankedCandidate {
  std::size_t index = 0;
  double distance = 0.0;

  friend bool operator==(const RankedCandidate&, const RankedCandidate&) = default;
};

// Exact top-k candidates by WMD, ascending, ties to the lower index. With
// pruning on, candidates are visited in WCD order and skipped once a lower
// bound (WCD, then RWMD) exceeds the current k-th best; the result is
// identical to the unpruned computation.
inline std::vector<RankedCandidate> rank_by_wmd(
    const ProcessedDoc& query, std::span<const ProcessedDoc> candidates,
    std::size_t k, const EmbeddingTable& table, bool prune = true) {
  if (candidates.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "no candidates to rank");
  }
  if (k == 0 || k > candidates.size()) {
    throw Error(ErrorKind::kInvalidArgument,
                "k must be in [1, " + std::to_string(candidates.size()) + "]");
  }
  auto better = [](const RankedCandidate& x, const RankedCandidate& y) {
    return x.distance < y.distance ||
           (x.distance == y.distance && x.index < y.index);
  };

  std::vector<RankedCandidate> all;
  if (!prune) {
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      all.push_back({i, wmd_distance(query, candidates[i], table)});
    }
    std::sort(all.begin(), all.end(), better);
    all.resize(k);
    return all;
  }

  // Bounds may exceed the exact value by float noise; only prune when the
  // gap is larger than that.
  constexpr double kSlack = 1e-9;
  std::vector<std::pair<double, std::size_t>> order;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    order.emplace_back(wcd(query, candidates[i], table), i);
  }
  std::sort(order.begin(), order.end());

  // Max-heap on `better`: top() is the current worst of the kept k.
  std::priority_queue<RankedCandidate, std::vector<RankedCandidate>,
                      decltype(better)>
      heap(better);
  for (const auto& [bound, idx] : order) {
    if (heap.size() == k) {
      const double worst = heap.top().distance;
      if (bound > worst + kSlack) break;
      if (rwmd(query, candidates[idx], table) > worst + kSlack) continue;
    }
    const RankedCandidate cand{idx, wmd_distance(query, candidates[idx], table)};
    if (heap.size() < k) {
      heap.push(cand);
    } else if (better(cand, heap.top())) {
      heap.pop();
      heap.push(cand);
    }
  }
  while (!heap.empty()) {
    all.push_back(heap.top());
    heap.pop();
  }
  std::sort(all.begin(), all.end(), better);
  return all;
}

}  // namespace cropline
