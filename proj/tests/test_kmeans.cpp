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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "oddforge/catalog.hpp"
#include "oddforge/kmeans.hpp"
#include "oddforge/store.hpp"

namespace oddforge {
namespace {

using kmeans::Point;

// Exhaustive optimum over all labelings of n points into at most k groups.
double brute_force_sse(const std::vector<Point>& pts, std::size_t k) {
  const std::size_t n = pts.size(), dim = pts[0].size();
  std::size_t total = 1;
  for (std::size_t i = 0; i < n; ++i) total *= k;
  double best = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> label(n);
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t c = code;
    for (std::size_t i = 0; i < n; ++i, c /= k) label[i] = c % k;
    double sse = 0;
    for (std::size_t g = 0; g < k; ++g) {
      std::vector<double> mean(dim, 0.0);
      std::size_t count = 0;
      for (std::size_t i = 0; i < n; ++i)
        if (label[i] == g) {
          ++count;
          for (std::size_t d = 0; d < dim; ++d) mean[d] += pts[i][d];
        }
      if (count == 0) continue;
      for (auto& m : mean) m /= static_cast<double>(count);
      for (std::size_t i = 0; i < n; ++i)
        if (label[i] == g)
          for (std::size_t d = 0; d < dim; ++d) sse += (pts[i][d] - mean[d]) * (pts[i][d] - mean[d]);
    }
    best = std::min(best, sse);
  }
  return best;
}

std::vector<Point> random_points(std::mt19937& rng, std::size_t n, std::size_t dim) {
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<Point> pts(n, Point(dim));
  for (auto& p : pts)
    for (auto& v : p) v = u(rng);
  return pts;
}

StyleSpace space_of(const std::vector<Point>& pts, CategoryId cat = 10) {
  StyleSpace space;
  for (std::size_t i = 0; i < pts.size(); ++i)
    space.entries.push_back({"s" + std::to_string(i), 0, cat, StyleVector(pts[i])});
  return space;
}

Point embed(double x) { return {x, 0, 0, 0, 0, 0}; }

TEST(SplitMixTest, KnownValues) {
  // Reference outputs of the SplitMix64 generator seeded with 0.
  EXPECT_EQ(kmeans::splitmix64(0), 0xe220a8397b1dcdafULL);
  EXPECT_EQ(kmeans::splitmix64(0x9e3779b97f4a7c15ULL), 0x6e789e6aa1b965f4ULL);
}

TEST(ClusterStylesTest, SingleEntry) {
  auto cat = cluster_styles(space_of({embed(0.3)}), 1, 0);
  ASSERT_EQ(cat.clusters(10).size(), 1u);
  EXPECT_EQ(cat.clusters(10)[0].center, StyleVector(embed(0.3)));
  EXPECT_EQ(cat.clusters(10)[0].member_count, 1u);
}

TEST(ClusterStylesTest, FourPointsTwoClusters) {
  auto cat = cluster_styles(space_of({embed(0.0), embed(0.1), embed(0.9), embed(1.0)}), 2, 3);
  const auto& cl = cat.clusters(10);
  ASSERT_EQ(cl.size(), 2u);
  EXPECT_NEAR(cl[0].center[0], 0.05, 1e-12);
  EXPECT_NEAR(cl[1].center[0], 0.95, 1e-12);
  EXPECT_EQ(cl[0].member_count, 2u);
  EXPECT_EQ(cl[1].member_count, 2u);
  EXPECT_NEAR(brute_force_sse({{0.0}, {0.1}, {0.9}, {1.0}}, 2), 0.01, 1e-12);
}

TEST(ClusterStylesTest, KIsCappedByEntryCount) {
  auto cat = cluster_styles(space_of({embed(0.1), embed(0.5), embed(0.9)}), 10, 1);
  EXPECT_EQ(cat.clusters(10).size(), 3u);
  EXPECT_EQ(cat.k(), 10u);
}

TEST(ClusterStylesTest, EmptySpaceIsAnError) {
  EXPECT_THROW(cluster_styles(StyleSpace{}, 2, 0), DataError);
  EXPECT_THROW(cluster_styles(space_of({embed(0)}), 0, 0), DataError);
}

TEST(ClusterStylesTest, CountsSumAndOrdering) {
  std::mt19937 rng(17);
  auto pts = random_points(rng, 40, 6);
  auto space = space_of(pts, 3);
  for (auto& e : space_of(random_points(rng, 9, 6), 8).entries) space.entries.push_back(e);
  auto cat = cluster_styles(space, 4, 5);
  for (auto [id, n] : {std::pair<CategoryId, std::size_t>{3, 40}, {8, 9}}) {
    const auto& cl = cat.clusters(id);
    ASSERT_EQ(cl.size(), 4u);
    std::size_t sum = 0;
    for (std::size_t i = 0; i < cl.size(); ++i) {
      sum += cl[i].member_count;
      if (i > 0) {
        EXPECT_GE(cl[i - 1].member_count, cl[i].member_count);
        if (cl[i - 1].member_count == cl[i].member_count)
          EXPECT_LT(cl[i - 1].center.components, cl[i].center.components);
      }
    }
    EXPECT_EQ(sum, n);
  }
  EXPECT_EQ(cluster_styles(space, 4, 5), cat);
}

TEST(ClusterStylesTest, RecoversThreeBlobs) {
  std::mt19937 rng(2024);
  std::normal_distribution<double> noise(0.0, 0.01);
  std::vector<Point> means{{0.2, 0.3, 0.4, 0.05, 0.05, 0.05},
                           {0.8, 0.8, 0.9, 0.02, 0.02, 0.02},
                           {0.05, 0.05, 0.15, 0.1, 0.1, 0.1}};
  std::vector<Point> pts;
  for (const auto& m : means)
    for (int i = 0; i < 50; ++i) {
      Point p = m;
      for (auto& v : p) v += noise(rng);
      pts.push_back(p);
    }
  auto cat = cluster_styles(space_of(pts), 3, 42);
  const auto& cl = cat.clusters(10);
  ASSERT_EQ(cl.size(), 3u);
  for (const auto& m : means) {
    double best = 1e9;
    for (const auto& c : cl) best = std::min(best, std::sqrt(kmeans::squared_distance(m, c.center.components)));
    EXPECT_LT(best, 0.02);
  }
  EXPECT_EQ(canonical_dump(cluster_styles(space_of(pts), 3, 42).to_json()), canonical_dump(cat.to_json()));
}

TEST(KMeansProperty, MatchesExhaustiveOptimumOnSmallFixtures) {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 60; ++trial) {
    std::size_t n = 2 + trial % 7, k = 1 + trial % 3, dim = 1 + trial % 3;
    auto pts = random_points(rng, n, dim);
    double optimum = brute_force_sse(pts, std::min(k, n));

    // Lloyd started from every k-subset of points reaches the optimum.
    double best_lloyd = std::numeric_limits<double>::infinity();
    std::size_t kk = std::min(k, n);
    std::vector<bool> pick(n, false);
    std::fill(pick.begin(), pick.begin() + static_cast<long>(kk), true);
    do {
      std::vector<Point> init;
      for (std::size_t i = 0; i < n; ++i)
        if (pick[i]) init.push_back(pts[i]);
      best_lloyd = std::min(best_lloyd, kmeans::lloyd(pts, init).sse);
    } while (std::prev_permutation(pick.begin(), pick.end()));
    EXPECT_NEAR(best_lloyd, optimum, 1e-12) << "trial " << trial;

    auto res = kmeans::cluster(pts, k, static_cast<std::uint64_t>(trial));
    EXPECT_NEAR(res.sse, optimum, 1e-12) << "trial " << trial << " n=" << n << " k=" << k;
  }
}

TEST(KMeansProperty, LloydNeverIncreasesSse) {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 40; ++trial) {
    auto pts = random_points(rng, 30, 6);
    kmeans::Rng r(static_cast<std::uint64_t>(trial));
    auto init = kmeans::plus_plus_init(pts, 5, r);
    auto res = kmeans::lloyd(pts, init);
    EXPECT_LE(res.sse, res.initial_sse + 1e-12);
    EXPECT_EQ(res.initial_sse, kmeans::nearest_sse(pts, init));
  }
}

TEST(KMeansTest, TiesGoToLowestIndex) {
  std::vector<Point> centers{{0.0}, {2.0}};
  EXPECT_EQ(kmeans::nearest(Point{1.0}, centers), 0u);
  std::vector<Point> same{{0.5}, {0.5}};
  EXPECT_EQ(kmeans::nearest(Point{0.1}, same), 0u);
}

TEST(KMeansTest, DuplicatePointsStillGiveDistinctCenters) {
  std::vector<Point> pts{{0.0}, {0.0}, {0.0}, {1.0}};
  auto res = kmeans::cluster(pts, 3, 0);
  EXPECT_EQ(res.centers.size(), 3u);
  EXPECT_NEAR(res.sse, 0.0, 1e-15);
}

class CatalogLabelTest : public ::testing::Test {
 protected:
  StyleCatalog catalog_ = cluster_styles(space_of({embed(0.0), embed(0.1), embed(0.9)}), 2, 3);
};

TEST_F(CatalogLabelTest, LabelIsPureAndLookupReturnsCenter) {
  auto labeled = catalog_.label(10, 0, "night");
  EXPECT_EQ(labeled.lookup(10, "night"), labeled.clusters(10)[0].center);
  EXPECT_FALSE(catalog_.find(10, "night").has_value());
}

TEST_F(CatalogLabelTest, RelabelReplaces) {
  auto twice = catalog_.label(10, 0, "night").label(10, 0, "dusk");
  EXPECT_FALSE(twice.find(10, "night"));
  EXPECT_TRUE(twice.find(10, "dusk"));
}

TEST_F(CatalogLabelTest, DuplicateAndOutOfRangeAreErrors) {
  auto labeled = catalog_.label(10, 0, "night");
  EXPECT_THROW(labeled.label(10, 1, "night"), DataError);
  EXPECT_THROW(labeled.label(10, 2, "day"), NotFoundError);
  EXPECT_THROW(labeled.label(4, 0, "day"), NotFoundError);
  EXPECT_THROW(labeled.lookup(10, "snow"), NotFoundError);
}

TEST_F(CatalogLabelTest, JsonReloadIsBitExact) {
  std::mt19937 rng(3);
  auto cat = cluster_styles(space_of(random_points(rng, 25, 6)), 3, 9).label(10, 1, "cloudy");
  auto text = canonical_dump(cat.to_json());
  auto back = StyleCatalog::from_json(nlohmann::json::parse(text));
  EXPECT_EQ(back, cat);
  EXPECT_EQ(canonical_dump(back.to_json()), text);
  EXPECT_THROW(StyleCatalog::from_json(nlohmann::json::parse(R"({"D":6})")), DataError);
}

}  // namespace
}  // namespace oddforge
