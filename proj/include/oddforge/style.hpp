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

#include <cmath>
#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "oddforge/error.hpp"
#include "oddforge/image.hpp"
#include "oddforge/scene.hpp"

namespace oddforge {

/// Default style layout: per-channel mean (3) followed by per-channel
/// population standard deviation (3).
inline constexpr std::size_t kStyleDim = 6;

struct StyleVector {
  std::vector<double> components;

  StyleVector() = default;
  explicit StyleVector(std::vector<double> c) : components(std::move(c)) {}
  StyleVector(std::initializer_list<double> c) : components(c) {}

  std::size_t dim() const { return components.size(); }
  double operator[](std::size_t i) const { return components[i]; }
  double& operator[](std::size_t i) { return components[i]; }

  double mean(int channel) const { return components[channel]; }
  double stddev(int channel) const { return components[3 + channel]; }

  friend bool operator==(const StyleVector&, const StyleVector&) = default;
  friend auto operator<=>(const StyleVector& a, const StyleVector& b) {
    return a.components <=> b.components;
  }
};

inline void to_json(nlohmann::json& j, const StyleVector& s) { j = s.components; }
inline void from_json(const nlohmann::json& j, StyleVector& s) {
  s.components = j.get<std::vector<double>>();
}

/// Per-channel mean and population standard deviation over the region.
inline StyleVector encode_region(const SceneImage& image, const InstanceRegion& region) {
  if (region.pixels.empty())
    throw DataError("encode_region: region " + std::to_string(region.region_id) + " is empty");
  const std::size_t n = region.pixels.size();
  for (auto p : region.pixels)
    if (p >= image.pixel_count())
      throw DataError("encode_region: region " + std::to_string(region.region_id) +
                      " lies outside the image");
  StyleVector out(std::vector<double>(kStyleDim, 0.0));
  for (int c = 0; c < 3; ++c) {
    // Shifted by the first sample so constant regions give exactly (v, 0).
    const double origin = image.at(region.pixels.front(), c);
    double sum = 0.0;
    for (auto p : region.pixels) sum += image.at(p, c) - origin;
    const double shift = sum / static_cast<double>(n);
    double sq = 0.0;
    for (auto p : region.pixels) {
      double d = image.at(p, c) - origin - shift;
      sq += d * d;
    }
    out[c] = origin + shift;
    out[3 + c] = std::sqrt(sq / static_cast<double>(n));
  }
  return out;
}

/// One style vector per region of one scene, keyed by region id.
using StyleAssignment = std::map<int, StyleVector>;

inline StyleAssignment encode_scene(const Scene& scene) {
  StyleAssignment out;
  for (const auto& r : scene.regions) out.emplace(r.region_id, encode_region(scene.image, r));
  return out;
}

struct StyleEntry {
  std::string scene_id;
  int region_id = 0;
  CategoryId category_id = 0;
  StyleVector style;
  friend bool operator==(const StyleEntry&, const StyleEntry&) = default;
};

struct StyleSpace {
  std::size_t dim = kStyleDim;
  std::vector<StyleEntry> entries;
  friend bool operator==(const StyleSpace&, const StyleSpace&) = default;
};

/// Encodes every region of every scene, in scene order then region order.
inline StyleSpace build_style_space(const std::vector<Scene>& scenes) {
  StyleSpace space;
  for (const auto& scene : scenes)
    for (const auto& r : scene.regions)
      space.entries.push_back({scene.scene_id, r.region_id, r.category_id,
                               encode_region(scene.image, r)});
  return space;
}

inline nlohmann::json to_json(const StyleSpace& space) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : space.entries)
    entries.push_back({{"scene", e.scene_id},
                       {"region", e.region_id},
                       {"category", e.category_id},
                       {"style", e.style.components}});
  return {{"version", 1}, {"D", space.dim}, {"entries", entries}};
}

inline StyleSpace style_space_from_json(const nlohmann::json& j) {
  try {
    StyleSpace space;
    space.dim = j.at("D").get<std::size_t>();
    for (const auto& e : j.at("entries")) {
      StyleEntry entry{e.at("scene").get<std::string>(), e.at("region").get<int>(),
                       e.at("category").get<CategoryId>(),
                       StyleVector(e.at("style").get<std::vector<double>>())};
      if (entry.style.dim() != space.dim) throw DataError("style space: dimension mismatch");
      space.entries.push_back(std::move(entry));
    }
    return space;
  } catch (const nlohmann::json::exception& ex) {
    throw DataError(std::string("style space: malformed file: ") + ex.what());
  }
}

/// Replaces the style of every targeted region. Pure.
inline StyleAssignment apply_style(const StyleAssignment& base, const std::set<int>& targets,
                                   const StyleVector& new_style) {
  StyleAssignment out = base;
  for (int id : targets) {
    auto it = out.find(id);
    if (it == out.end())
      throw NotFoundError("apply_style: unknown region " + std::to_string(id));
    it->second = new_style;
  }
  return out;
}

/// Componentwise (1-lambda)*a + lambda*b, computed as a + lambda*(b-a) so
/// the result is monotone in lambda; the endpoints are exact copies.
inline StyleAssignment interpolate_assignment(const StyleAssignment& a, const StyleAssignment& b,
                                              double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0))
    throw DataError("interpolate: lambda must lie in [0,1], got " + std::to_string(lambda));
  if (a.size() != b.size())
    throw DataError("interpolate: assignments cover different region sets");
  for (auto ia = a.begin(), ib = b.begin(); ia != a.end(); ++ia, ++ib) {
    if (ia->first != ib->first)
      throw DataError("interpolate: assignments cover different region sets");
    if (ia->second.dim() != ib->second.dim())
      throw DataError("interpolate: style dimension mismatch on region " +
                      std::to_string(ia->first));
  }
  if (lambda == 0.0) return a;
  if (lambda == 1.0) return b;
  StyleAssignment out;
  for (auto ia = a.begin(), ib = b.begin(); ia != a.end(); ++ia, ++ib) {
    StyleVector v = ia->second;
    for (std::size_t i = 0; i < v.dim(); ++i) v[i] = ia->second[i] + lambda * (ib->second[i] - ia->second[i]);
    out.emplace(ia->first, std::move(v));
  }
  return out;
}

}  // namespace oddforge
