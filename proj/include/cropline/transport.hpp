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
#include <numeric>
#include <span>
#include <vector>

#include "cropline/error.hpp"

namespace cropline {

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct TransportSolution {
  Matrix flow;
  double objective = 0.0;
};

// Exact balanced transportation problem
//   min sum_ij flow(i,j) * cost(i,j)
//   s.t. sum_j flow(i,j) = supply[i], sum_i flow(i,j) = demand[j], flow >= 0
// solved by successive shortest augmenting paths. Each path is found with
// Bellman-Ford over the residual graph (forward arcs at +cost, arcs carrying
// flow backwards at -cost), which keeps the method exact under the
// nonnegative-cost assumption. Supplies and demands must share the same total.
inline TransportSolution solve_transport(std::span<const double> supply,
                                         std::span<const double> demand,
                                         const Matrix& cost) {
  const std::size_t n = supply.size();
  const std::size_t m = demand.size();
  if (n == 0 || m == 0) {
    throw Error(ErrorKind::kEmptyDoc, "transport problem with an empty side");
  }
  if (cost.rows() != n || cost.cols() != m) {
    throw Error(ErrorKind::kInvalidArgument, "cost matrix shape mismatch");
  }
  const double total_supply = std::accumulate(supply.begin(), supply.end(), 0.0);
  const double total_demand = std::accumulate(demand.begin(), demand.end(), 0.0);
  if (std::abs(total_supply - total_demand) > 1e-9 * std::max(1.0, total_supply)) {
    throw Error(ErrorKind::kInvalidArgument, "unbalanced transport problem");
  }
  for (double s : supply) {
    if (!(s >= 0.0)) throw Error(ErrorKind::kInvalidArgument, "negative supply");
  }
  for (double d : demand) {
    if (!(d >= 0.0)) throw Error(ErrorKind::kInvalidArgument, "negative demand");
  }

  // Masses below this are treated as exhausted.
  const double eps = 1e-15 * std::max(1.0, total_supply);
  // Relaxations must improve by more than rounding noise, otherwise a
  // zero-cost residual cycle (forward arc then its reverse) can be relaxed
  // by one ulp and leave a cycle in the predecessor graph.
  double max_cost = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (double c : cost.row(i)) max_cost = std::max(max_cost, std::abs(c));
  }
  const double relax_tol = 1e-12 * std::max(1.0, max_cost);
  constexpr double kInf = std::numeric_limits<double>::infinity();

  std::vector<double> left(supply.begin(), supply.end());
  std::vector<double> right(demand.begin(), demand.end());
  Matrix flow(n, m, 0.0);

  // Node layout: rows 0..n-1, columns n..n+m-1.
  std::vector<double> dist(n + m);
  std::vector<std::ptrdiff_t> pred(n + m);
  const std::size_t max_rounds = 8 * (n + m) * (n + m) + 64;

  for (std::size_t round = 0;; ++round) {
    double remaining = 0.0;
    for (double r : left) remaining += r;
    if (remaining <= eps * static_cast<double>(n)) break;
    if (round > max_rounds) {
      throw Error(ErrorKind::kInternal, "transport solver failed to converge");
    }

    std::fill(dist.begin(), dist.end(), kInf);
    std::fill(pred.begin(), pred.end(), -1);
    for (std::size_t i = 0; i < n; ++i) {
      if (left[i] > eps) dist[i] = 0.0;
    }
    for (std::size_t pass = 0; pass < n + m; ++pass) {
      bool changed = false;
      for (std::size_t i = 0; i < n; ++i) {
        if (dist[i] == kInf) continue;
        for (std::size_t j = 0; j < m; ++j) {
          const double nd = dist[i] + cost(i, j);
          if (nd < dist[n + j] - relax_tol) {
            dist[n + j] = nd;
            pred[n + j] = static_cast<std::ptrdiff_t>(i);
            changed = true;
          }
        }
      }
      for (std::size_t j = 0; j < m; ++j) {
        if (dist[n + j] == kInf) continue;
        for (std::size_t i = 0; i < n; ++i) {
          if (flow(i, j) <= eps) continue;
          const double nd = dist[n + j] - cost(i, j);
          if (nd < dist[i] - relax_tol) {
            dist[i] = nd;
            pred[i] = static_cast<std::ptrdiff_t>(n + j);
            changed = true;
          }
        }
      }
      if (!changed) break;
    }

    std::ptrdiff_t sink = -1;
    for (std::size_t j = 0; j < m; ++j) {
      if (right[j] <= eps || dist[n + j] == kInf) continue;
      if (sink < 0 || dist[n + j] < dist[static_cast<std::size_t>(sink)]) {
        sink = static_cast<std::ptrdiff_t>(n + j);
      }
    }
    if (sink < 0) break;

    // Walk back to the source row, collecting the bottleneck.
    double push = right[static_cast<std::size_t>(sink) - n];
    std::size_t node = static_cast<std::size_t>(sink);
    std::size_t steps = 0;
    while (pred[node] >= 0) {
      const auto prev = static_cast<std::size_t>(pred[node]);
      if (prev >= n) push = std::min(push, flow(node, prev - n));
      node = prev;
      if (++steps > 2 * (n + m)) {
        throw Error(ErrorKind::kInternal, "cycle in augmenting path");
      }
    }
    push = std::min(push, left[node]);
    if (!(push > 0.0)) break;

    left[node] -= push;
    right[static_cast<std::size_t>(sink) - n] -= push;
    node = static_cast<std::size_t>(sink);
    while (pred[node] >= 0) {
      const auto prev = static_cast<std::size_t>(pred[node]);
      if (prev < n) {
        flow(prev, node - n) += push;
      } else {
        flow(node, prev - n) -= push;
        if (flow(node, prev - n) < 0.0) flow(node, prev - n) = 0.0;
      }
      node = prev;
    }
  }

  TransportSolution out{std::move(flow), 0.0};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) out.objective += out.flow(i, j) * cost(i, j);
  }
  return out;
}

}  // namespace cropline
