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
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "oddforge/error.hpp"
#include "oddforge/kmeans.hpp"
#include "oddforge/style.hpp"

namespace oddforge {

inline constexpr int kClusterRestarts = 10;

struct StyleCluster {
  StyleVector center;
  std::size_t member_count = 0;
  std::optional<std::string> concept_label;
  friend bool operator==(const StyleCluster&, const StyleCluster&) = default;
};

/// Per-category style prototypes with optional human-assigned concept names.
class StyleCatalog {
 public:
  StyleCatalog() = default;
  StyleCatalog(std::size_t dim, std::size_t k, std::uint64_t seed)
      : dim_(dim), k_(k), seed_(seed) {}

  std::size_t dim() const { return dim_; }
  std::size_t k() const { return k_; }
  std::uint64_t seed() const { return seed_; }
  const std::map<CategoryId, std::vector<StyleCluster>>& categories() const { return categories_; }

  bool has_category(CategoryId cat) const { return categories_.count(cat) != 0; }
  const std::vector<StyleCluster>& clusters(CategoryId cat) const {
    auto it = categories_.find(cat);
    if (it == categories_.end())
      throw NotFoundError("catalog: no clusters for category " + std::to_string(cat));
    return it->second;
  }

  void set_clusters(CategoryId cat, std::vector<StyleCluster> clusters) {
    for (const auto& c : clusters)
      if (c.center.dim() != dim_) throw DataError("catalog: center dimension mismatch");
    categories_[cat] = std::move(clusters);
  }

  std::optional<StyleVector> find(CategoryId cat, const std::string& concept_name) const {
    auto it = categories_.find(cat);
    if (it == categories_.end()) return std::nullopt;
    for (const auto& c : it->second)
      if (c.concept_label == concept_name) return c.center;
    return std::nullopt;
  }

  StyleVector lookup(CategoryId cat, const std::string& concept_name) const {
    if (auto s = find(cat, concept_name)) return *s;
    throw NotFoundError("catalog: category " + std::to_string(cat) + " has no cluster labeled '" +
                        concept_name + "'");
  }

  /// Returns a copy with `concept_name` attached to the cluster. Relabeling
  /// the same index replaces its label.
  StyleCatalog label(CategoryId cat, std::size_t cluster_index, const std::string& concept_name) const {
    if (concept_name.empty()) throw DataError("catalog: concept label must be non-empty");
    auto it = categories_.find(cat);
    if (it == categories_.end())
      throw NotFoundError("catalog: no clusters for category " + std::to_string(cat));
    if (cluster_index >= it->second.size())
      throw NotFoundError("catalog: cluster index " + std::to_string(cluster_index) +
                          " out of range for category " + std::to_string(cat) + " (" +
                          std::to_string(it->second.size()) + " clusters)");
    for (std::size_t i = 0; i < it->second.size(); ++i)
      if (i != cluster_index && it->second[i].concept_label == concept_name)
        throw DataError("catalog: concept '" + concept_name + "' already used by cluster " +
                        std::to_string(i) + " of category " + std::to_string(cat));
    StyleCatalog out = *this;
    out.categories_[cat][cluster_index].concept_label = concept_name;
    return out;
  }

  nlohmann::json to_json() const {
    nlohmann::json cats = nlohmann::json::array();
    for (const auto& [cat, clusters] : categories_) {
      nlohmann::json cl = nlohmann::json::array();
      for (const auto& c : clusters) {
        nlohmann::json item = {{"center", c.center.components}, {"member_count", c.member_count}};
        if (c.concept_label) item["concept"] = *c.concept_label;
        cl.push_back(std::move(item));
      }
      cats.push_back({{"id", cat}, {"clusters", std::move(cl)}});
    }
    return {{"version", 1}, {"D", dim_}, {"k", k_}, {"seed", seed_}, {"categories", cats}};
  }

  static StyleCatalog from_json(const nlohmann::json& j) {
    try {
      StyleCatalog cat(j.at("D").get<std::size_t>(), j.at("k").get<std::size_t>(),
                       j.at("seed").get<std::uint64_t>());
      for (const auto& c : j.at("categories")) {
        std::vector<StyleCluster> clusters;
        for (const auto& item : c.at("clusters")) {
          StyleCluster sc;
          sc.center = StyleVector(item.at("center").get<std::vector<double>>());
          sc.member_count = item.at("member_count").get<std::size_t>();
          if (item.contains("concept")) sc.concept_label = item.at("concept").get<std::string>();
          clusters.push_back(std::move(sc));
        }
        cat.set_clusters(c.at("id").get<CategoryId>(), std::move(clusters));
      }
      return cat;
    } catch (const nlohmann::json::exception& ex) {
      throw DataError(std::string("catalog: malformed file: ") + ex.what());
    }
  }

  friend bool operator==(const StyleCatalog&, const StyleCatalog&) = default;

 private:
  std::size_t dim_ = kStyleDim;
  std::size_t k_ = 0;
  std::uint64_t seed_ = 0;
  std::map<CategoryId, std::vector<StyleCluster>> categories_;
};

/// Seed for one category's clustering, derived from (seed, category_id).
inline std::uint64_t category_seed(std::uint64_t seed, CategoryId cat) {
  return kmeans::splitmix64(kmeans::splitmix64(seed) ^ (static_cast<std::uint64_t>(cat) + 1));
}

/// Per-category k-means (k' = min(k, n)) over the style space. Centers are
/// sorted by descending member count, then lexicographically.
inline StyleCatalog cluster_styles(const StyleSpace& space, std::size_t k, std::uint64_t seed,
                                   int restarts = kClusterRestarts) {
  if (space.entries.empty()) throw DataError("cluster_styles: empty style space");
  if (k == 0) throw DataError("cluster_styles: k must be positive");
  std::map<CategoryId, std::vector<kmeans::Point>> by_cat;
  for (const auto& e : space.entries) {
    if (e.style.dim() != space.dim) throw DataError("cluster_styles: style dimension mismatch");
    by_cat[e.category_id].push_back(e.style.components);
  }
  StyleCatalog catalog(space.dim, k, seed);
  for (const auto& [cat, points] : by_cat) {
    auto res = kmeans::cluster(points, k, category_seed(seed, cat), restarts);
    std::vector<StyleCluster> clusters;
    for (std::size_t j = 0; j < res.centers.size(); ++j)
      clusters.push_back({StyleVector(res.centers[j]), res.counts[j], std::nullopt});
    std::sort(clusters.begin(), clusters.end(), [](const auto& a, const auto& b) {
      if (a.member_count != b.member_count) return a.member_count > b.member_count;
      return a.center.components < b.center.components;
    });
    catalog.set_clusters(cat, std::move(clusters));
  }
  return catalog;
}

}  // namespace oddforge
