// Copyright 2026 The OddForge Authors. All Rights Reserved.
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
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "oddforge/error.hpp"

namespace oddforge::kmeans {

using Point = std::vector<double>;

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// mt19937_64 with a portable [0,1) mapping (top 53 bits), so draws are
/// identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  std::size_t index(std::size_t n) {
    auto i = static_cast<std::size_t>(uniform() * static_cast<double>(n));
    return i < n ? i : n - 1;
  }

 private:
  std::mt19937_64 engine_;
};

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double t = a[i] - b[i];
    d += t * t;
  }
  return d;
}

/// Index of the nearest center; ties go to the lowest index.
inline std::size_t nearest(std::span<const double> p, const std::vector<Point>& centers,
                           double* dist = nullptr) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < centers.size(); ++j) {
    double d = squared_distance(p, centers[j]);
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  if (dist) *dist = best_d;
  return best;
}

/// Within-cluster sum of squared distances for a given assignment.
inline double within_sse(const std::vector<Point>& points, const std::vector<Point>& centers,
                         const std::vector<std::size_t>& assignment) {
  double s = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i)
    s += squared_distance(points[i], centers[assignment[i]]);
  return s;
}

/// SSE when every point goes to its nearest center.
inline double nearest_sse(const std::vector<Point>& points, const std::vector<Point>& centers) {
  double s = 0.0;
  for (const auto& p : points) {
    double d = 0.0;
    nearest(p, centers, &d);
    s += d;
  }
  return s;
}

/// k-means++ seeding: first center uniform, then D^2-weighted draws. When
/// every remaining point coincides with a chosen center the lowest unused
/// index is taken.
inline std::vector<Point> plus_plus_init(const std::vector<Point>& points, std::size_t k, Rng& rng) {
  const std::size_t n = points.size();
  std::vector<Point> centers;
  std::vector<bool> used(n, false);
  std::size_t first = rng.index(n);
  centers.push_back(points[first]);
  used[first] = true;
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(points[i], centers[0]);
  while (centers.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += d2[i];
    std::size_t pick = n;
    if (total > 0.0) {
      double r = rng.uniform() * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (d2[i] <= 0.0) continue;
        acc += d2[i];
        pick = i;
        if (r < acc) break;
      }
    } else {
      rng.uniform();
      for (std::size_t i = 0; i < n; ++i)
        if (!used[i]) {
          pick = i;
          break;
        }
    }
    if (pick == n) break;
    used[pick] = true;
    centers.push_back(points[pick]);
    for (std::size_t i = 0; i < n; ++i)
      d2[i] = std::min(d2[i], squared_distance(points[i], centers.back()));
  }
  return centers;
}

struct Result {
  std::vector<Point> centers;
  std::vector<std::size_t> assignment;
  std::vector<std::size_t> counts;
  double sse = 0.0;
  double initial_sse = 0.0;
  int iterations = 0;
};

struct LloydOptions {
  int max_iterations = 300;
  double tolerance = 1e-9;  // max Euclidean center movement
};

/// Lloyd iterations from the given centers. An emptied cluster is moved to
/// the point farthest from its own center (lowest index on ties) when that
/// point is not alone in its cluster.
inline Result lloyd(const std::vector<Point>& points, std::vector<Point> centers,
                    LloydOptions opt = {}) {
  if (points.empty() || centers.empty()) throw DataError("kmeans: no points or no centers");
  const std::size_t n = points.size(), k = centers.size(), dim = points[0].size();
  Result res;
  res.initial_sse = nearest_sse(points, centers);
  res.assignment.assign(n, 0);
  auto assign = [&] {
    for (std::size_t i = 0; i < n; ++i) res.assignment[i] = nearest(points[i], centers);
  };
  assign();
  for (int it = 0; it < opt.max_iterations; ++it) {
    res.iterations = it + 1;
    std::vector<Point> sums(k, Point(dim, 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      auto c = res.assignment[i];
      ++counts[c];
      for (std::size_t d = 0; d < dim; ++d) sums[c][d] += points[i][d];
    }
    double movement = 0.0;
    std::vector<Point> next = centers;
    for (std::size_t j = 0; j < k; ++j) {
      if (counts[j] == 0) continue;
      for (std::size_t d = 0; d < dim; ++d) next[j][d] = sums[j][d] / static_cast<double>(counts[j]);
    }
    for (std::size_t j = 0; j < k; ++j) {
      if (counts[j] != 0) continue;
      std::size_t far = n;
      double far_d = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (counts[res.assignment[i]] < 2) continue;
        double d = squared_distance(points[i], next[res.assignment[i]]);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      if (far == n) continue;
      --counts[res.assignment[far]];
      res.assignment[far] = j;
      counts[j] = 1;
      next[j] = points[far];
    }
    for (std::size_t j = 0; j < k; ++j)
      movement = std::max(movement, std::sqrt(squared_distance(next[j], centers[j])));
    centers = std::move(next);
    assign();
    if (movement < opt.tolerance) break;
  }
  res.counts.assign(k, 0);
  for (auto a : res.assignment) ++res.counts[a];
  res.sse = within_sse(points, centers, res.assignment);
  res.centers = std::move(centers);
  return res;
}

inline constexpr std::size_t kExhaustiveSeedLimit = 512;

/// Number of k-subsets of n items, saturating at `limit + 1`.
inline std::size_t bounded_binomial(std::size_t n, std::size_t k, std::size_t limit) {
  std::size_t c = 1;
  for (std::size_t i = 1; i <= k; ++i) {
    c = c * (n - k + i) / i;
    if (c > limit) return limit + 1;
  }
  return c;
}

/// Best-of-`restarts` k-means++ / Lloyd runs, each seeded deterministically
/// from `seed`. Keeps the first run attaining the minimum SSE. Small inputs
/// (at most kExhaustiveSeedLimit k-subsets) additionally try Lloyd from every
/// k-subset of the points, in lexicographic order.
inline Result cluster(const std::vector<Point>& points, std::size_t k, std::uint64_t seed,
                      int restarts = 10, LloydOptions opt = {}) {
  if (points.empty()) throw DataError("kmeans: no points");
  if (k == 0) throw DataError("kmeans: k must be positive");
  k = std::min(k, points.size());
  Result best;
  bool have = false;
  for (int r = 0; r < std::max(restarts, 1); ++r) {
    Rng rng(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(r))));
    auto init = plus_plus_init(points, k, rng);
    Result res = lloyd(points, std::move(init), opt);
    if (!have || res.sse < best.sse) {
      best = std::move(res);
      have = true;
    }
  }
  const std::size_t n = points.size();
  if (bounded_binomial(n, k, kExhaustiveSeedLimit) <= kExhaustiveSeedLimit) {
    std::vector<bool> pick(n, false);
    std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(k), true);
    do {
      std::vector<Point> init;
      for (std::size_t i = 0; i < n; ++i)
        if (pick[i]) init.push_back(points[i]);
      Result res = lloyd(points, std::move(init), opt);
      if (res.sse < best.sse) best = std::move(res);
    } while (std::prev_permutation(pick.begin(), pick.end()));
  }
  return best;
}

}  // namespace oddforge::kmeans
