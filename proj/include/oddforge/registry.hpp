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
#include <array>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "oddforge/error.hpp"

namespace oddforge {

using CategoryId = std::uint8_t;
using Rgb8 = std::array<std::uint8_t, 3>;

inline constexpr CategoryId kDefaultIgnoreId = 255;

struct CategoryEntry {
  CategoryId id = 0;
  std::string name;
  Rgb8 color{0, 0, 0};
};

/// Ordered set of semantic categories plus the "unlabeled" sentinel.
///
/// Ids are contiguous from 0, names are unique and non-empty, and the ignore
/// id lies outside [0, size()). Construction validates all three.
class CategoryRegistry {
 public:
  CategoryRegistry(std::vector<CategoryEntry> entries,
                   CategoryId ignore_id = kDefaultIgnoreId)
      : entries_(std::move(entries)), ignore_id_(ignore_id) {
    if (entries_.empty()) throw DataError("registry: no categories");
    if (entries_.size() > 255)
      throw DataError("registry: at most 255 categories are supported");
    std::set<std::string> names;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      const auto& e = entries_[i];
      if (e.id != i)
        throw DataError("registry: category ids must be contiguous from 0 (entry " +
                        std::to_string(i) + " has id " + std::to_string(e.id) + ")");
      if (e.name.empty())
        throw DataError("registry: empty name for category " + std::to_string(e.id));
      if (!names.insert(e.name).second)
        throw DataError("registry: duplicate category name '" + e.name + "'");
    }
    if (ignore_id_ < entries_.size())
      throw DataError("registry: ignore id " + std::to_string(ignore_id_) +
                      " collides with a category id");
  }

  std::size_t size() const { return entries_.size(); }
  CategoryId ignore_id() const { return ignore_id_; }
  const std::vector<CategoryEntry>& entries() const { return entries_; }
  const CategoryEntry& at(CategoryId id) const {
    if (id >= entries_.size())
      throw NotFoundError("registry: unknown category id " + std::to_string(id));
    return entries_[id];
  }

  bool is_category(std::uint8_t value) const { return value < entries_.size(); }
  bool is_valid_label(std::uint8_t value) const {
    return is_category(value) || value == ignore_id_;
  }

  std::optional<CategoryId> find(std::string_view name) const {
    for (const auto& e : entries_)
      if (e.name == name) return e.id;
    return std::nullopt;
  }

  /// Resolves either a category name or a decimal id.
  CategoryId resolve(std::string_view name_or_id) const {
    if (auto id = find(name_or_id)) return *id;
    if (!name_or_id.empty() &&
        name_or_id.find_first_not_of("0123456789") == std::string_view::npos &&
        name_or_id.size() <= 3) {
      int v = std::stoi(std::string(name_or_id));
      if (v >= 0 && static_cast<std::size_t>(v) < entries_.size())
        return static_cast<CategoryId>(v);
    }
    throw NotFoundError("registry: unknown category '" + std::string(name_or_id) + "'");
  }

  nlohmann::json to_json() const {
    auto out = nlohmann::json::array();
    for (const auto& e : entries_)
      out.push_back({{"id", e.id}, {"name", e.name},
                     {"color", {e.color[0], e.color[1], e.color[2]}}});
    return out;
  }

  static CategoryRegistry from_json(const nlohmann::json& j,
                                    CategoryId ignore_id = kDefaultIgnoreId) {
    if (!j.is_array()) throw DataError("registry: expected a JSON list");
    std::vector<CategoryEntry> entries;
    for (const auto& item : j) {
      try {
        CategoryEntry e;
        int id = item.at("id").get<int>();
        if (id < 0 || id > 254) throw DataError("registry: id out of range: " + std::to_string(id));
        e.id = static_cast<CategoryId>(id);
        e.name = item.at("name").get<std::string>();
        const auto& c = item.at("color");
        if (!c.is_array() || c.size() != 3) throw DataError("registry: color must be [r,g,b]");
        for (int k = 0; k < 3; ++k) {
          int v = c[k].get<int>();
          if (v < 0 || v > 255) throw DataError("registry: color component out of range");
          e.color[k] = static_cast<std::uint8_t>(v);
        }
        entries.push_back(std::move(e));
      } catch (const nlohmann::json::exception& ex) {
        throw DataError(std::string("registry: malformed entry: ") + ex.what());
      }
    }
    std::sort(entries.begin(), entries.end(),
              [](const auto& a, const auto& b) { return a.id < b.id; });
    return CategoryRegistry(std::move(entries), ignore_id);
  }

  static CategoryRegistry load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("registry: cannot open " + path);
    try {
      return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& ex) {
      throw DataError("registry: " + path + ": " + ex.what());
    }
  }

 private:
  std::vector<CategoryEntry> entries_;
  CategoryId ignore_id_;
};

/// The 19 RailSem19 categories in the dataset's label-id order.
inline CategoryRegistry default_registry() {
  return CategoryRegistry({
      {0, "road", {128, 64, 128}},
      {1, "sidewalk", {244, 35, 232}},
      {2, "construction", {70, 70, 70}},
      {3, "tram-track", {192, 0, 128}},
      {4, "fence", {190, 153, 153}},
      {5, "pole", {153, 153, 153}},
      {6, "traffic-light", {250, 170, 30}},
      {7, "traffic-sign", {220, 220, 0}},
      {8, "vegetation", {107, 142, 35}},
      {9, "terrain", {152, 251, 152}},
      {10, "sky", {70, 130, 180}},
      {11, "human", {220, 20, 60}},
      {12, "rail-track", {230, 150, 140}},
      {13, "car", {0, 0, 142}},
      {14, "truck", {0, 0, 70}},
      {15, "trackbed", {90, 40, 40}},
      {16, "on-rails", {0, 80, 100}},
      {17, "rail-raised", {0, 254, 254}},
      {18, "rail-embedded", {0, 68, 63}},
  });
}

}  // namespace oddforge
