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
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "oddforge/error.hpp"
#include "oddforge/image.hpp"
#include "oddforge/png_io.hpp"
#include "oddforge/registry.hpp"

namespace oddforge {

inline constexpr std::size_t kDefaultMinArea = 64;

/// A 4-connected component of one category, or the per-category residual
/// that collects every component smaller than the extraction's min_area.
struct InstanceRegion {
  int region_id = 0;
  CategoryId category_id = 0;
  std::vector<std::uint32_t> pixels;  // sorted row-major linear indices
  bool residual = false;

  std::size_t area() const { return pixels.size(); }
  friend bool operator==(const InstanceRegion&, const InstanceRegion&) = default;
};

/// Labels non-ignore pixels by 4-connected components and merges small ones.
///
/// Regions are ordered by (category_id, first pixel in row-major order) and
/// numbered 0..n-1 in that order. Components with area < min_area are merged
/// into a single residual region for their category.
inline std::vector<InstanceRegion> extract_instances(const SemanticMask& mask,
                                                     const CategoryRegistry& registry,
                                                     std::size_t min_area = kDefaultMinArea) {
  const int w = mask.width();
  const int h = mask.height();
  const std::size_t n = mask.size();
  constexpr std::uint32_t kUnvisited = 0xffffffffu;
  std::vector<std::uint32_t> component(n, kUnvisited);

  std::vector<InstanceRegion> comps;
  std::map<CategoryId, InstanceRegion> residuals;
  std::vector<std::uint32_t> stack;

  for (std::size_t start = 0; start < n; ++start) {
    std::uint8_t label = mask[start];
    if (!registry.is_category(label) || component[start] != kUnvisited) continue;
    InstanceRegion region;
    region.category_id = label;
    auto id = static_cast<std::uint32_t>(comps.size());
    stack.assign(1, static_cast<std::uint32_t>(start));
    component[start] = id;
    while (!stack.empty()) {
      std::uint32_t p = stack.back();
      stack.pop_back();
      region.pixels.push_back(p);
      int x = static_cast<int>(p % w), y = static_cast<int>(p / w);
      auto visit = [&](int nx, int ny) {
        if (nx < 0 || ny < 0 || nx >= w || ny >= h) return;
        std::size_t q = mask.index(nx, ny);
        if (component[q] == kUnvisited && mask[q] == label) {
          component[q] = id;
          stack.push_back(static_cast<std::uint32_t>(q));
        }
      };
      visit(x - 1, y);
      visit(x + 1, y);
      visit(x, y - 1);
      visit(x, y + 1);
    }
    std::sort(region.pixels.begin(), region.pixels.end());
    if (region.area() < min_area) {
      auto& res = residuals[label];
      res.category_id = label;
      res.residual = true;
      res.pixels.insert(res.pixels.end(), region.pixels.begin(), region.pixels.end());
      comps.push_back({});  // keeps component ids dense; dropped below
    } else {
      comps.push_back(std::move(region));
    }
  }

  std::vector<InstanceRegion> regions;
  for (auto& c : comps)
    if (!c.pixels.empty()) regions.push_back(std::move(c));
  for (auto& [cat, res] : residuals) {
    std::sort(res.pixels.begin(), res.pixels.end());
    regions.push_back(std::move(res));
  }
  std::sort(regions.begin(), regions.end(), [](const auto& a, const auto& b) {
    if (a.category_id != b.category_id) return a.category_id < b.category_id;
    return a.pixels.front() < b.pixels.front();
  });
  for (std::size_t i = 0; i < regions.size(); ++i) regions[i].region_id = static_cast<int>(i);
  return regions;
}

/// Per-pixel region index (-1 for ignore pixels).
inline std::vector<int> region_index_map(const SemanticMask& mask,
                                         const std::vector<InstanceRegion>& regions) {
  std::vector<int> map(mask.size(), -1);
  for (std::size_t i = 0; i < regions.size(); ++i)
    for (auto p : regions[i].pixels) map[p] = static_cast<int>(i);
  return map;
}

struct Scene {
  std::string scene_id;
  SceneImage image;
  SemanticMask mask;
  std::vector<InstanceRegion> regions;
  std::string source_path;

  const InstanceRegion& region(int region_id) const {
    for (const auto& r : regions)
      if (r.region_id == region_id) return r;
    throw NotFoundError("scene " + scene_id + ": unknown region " + std::to_string(region_id));
  }
};

/// Builds a validated scene from in-memory data.
inline Scene make_scene(std::string scene_id, SceneImage image, SemanticMask mask,
                        const CategoryRegistry& registry,
                        std::size_t min_area = kDefaultMinArea, std::string source = {}) {
  if (image.width() != mask.width() || image.height() != mask.height())
    throw DataError(scene_id + ": image is " + std::to_string(image.width()) + "x" +
                    std::to_string(image.height()) + " but mask is " +
                    std::to_string(mask.width()) + "x" + std::to_string(mask.height()));
  image.validate(scene_id);
  mask.validate(registry, scene_id);
  Scene s;
  s.scene_id = std::move(scene_id);
  s.regions = extract_instances(mask, registry, min_area);
  s.image = std::move(image);
  s.mask = std::move(mask);
  s.source_path = std::move(source);
  return s;
}

inline Scene load_scene(const std::string& image_path, const std::string& mask_path,
                        const CategoryRegistry& registry,
                        std::size_t min_area = kDefaultMinArea) {
  SceneImage image = read_png_rgb(image_path);
  SemanticMask mask = read_png_mask(mask_path);
  if (image.width() != mask.width() || image.height() != mask.height())
    throw DataError("dimension mismatch: " + image_path + " is " + std::to_string(image.width()) +
                    "x" + std::to_string(image.height()) + ", " + mask_path + " is " +
                    std::to_string(mask.width()) + "x" + std::to_string(mask.height()));
  mask.validate(registry, mask_path);
  std::string id = std::filesystem::path(image_path).stem().string();
  return make_scene(std::move(id), std::move(image), std::move(mask), registry, min_area,
                    image_path);
}

// Dataset layout: <root>/images/<id>.png and <root>/masks/<id>.png.

inline std::filesystem::path dataset_image_path(const std::filesystem::path& root,
                                                const std::string& id) {
  return root / "images" / (id + ".png");
}
inline std::filesystem::path dataset_mask_path(const std::filesystem::path& root,
                                               const std::string& id) {
  return root / "masks" / (id + ".png");
}

namespace detail {
inline std::set<std::string> png_stems(const std::filesystem::path& dir) {
  std::set<std::string> out;
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) return out;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".png") out.insert(e.path().stem().string());
  }
  return out;
}
}  // namespace detail

/// Ids that have both an image and a mask, sorted.
inline std::vector<std::string> dataset_ids(const std::filesystem::path& root) {
  auto images = detail::png_stems(root / "images");
  auto masks = detail::png_stems(root / "masks");
  std::vector<std::string> ids;
  std::set_intersection(images.begin(), images.end(), masks.begin(), masks.end(),
                        std::back_inserter(ids));
  return ids;
}

inline std::vector<Scene> load_dataset(const std::filesystem::path& root,
                                       const CategoryRegistry& registry,
                                       std::size_t min_area = kDefaultMinArea,
                                       const std::vector<std::string>& only = {}) {
  std::vector<std::string> ids = only.empty() ? dataset_ids(root) : only;
  std::vector<Scene> scenes;
  scenes.reserve(ids.size());
  for (const auto& id : ids)
    scenes.push_back(load_scene(dataset_image_path(root, id).string(),
                                dataset_mask_path(root, id).string(), registry, min_area));
  return scenes;
}

/// One diagnostic per violation; an empty list means the dataset is clean.
inline std::vector<std::string> validate_dataset(const std::filesystem::path& root,
                                                 const CategoryRegistry& registry) {
  std::error_code ec;
  if (!std::filesystem::is_directory(root, ec))
    throw DataError("dataset root is not a readable directory: " + root.string());
  auto images = detail::png_stems(root / "images");
  auto masks = detail::png_stems(root / "masks");
  std::vector<std::string> diags;
  for (const auto& id : images)
    if (!masks.count(id)) diags.push_back("missing mask for " + id);
  for (const auto& id : masks)
    if (!images.count(id)) diags.push_back("missing image for " + id);
  for (const auto& id : images) {
    if (!masks.count(id)) continue;
    auto ipath = dataset_image_path(root, id).string();
    auto mpath = dataset_mask_path(root, id).string();
    try {
      SceneImage image = read_png_rgb(ipath);
      SemanticMask mask = read_png_mask(mpath);
      if (image.width() != mask.width() || image.height() != mask.height()) {
        diags.push_back("size mismatch for " + id + ": image " + std::to_string(image.width()) +
                        "x" + std::to_string(image.height()) + ", mask " +
                        std::to_string(mask.width()) + "x" + std::to_string(mask.height()));
        continue;
      }
      mask.validate(registry, mpath);
    } catch (const DataError& e) {
      diags.push_back(e.what());
    }
  }
  return diags;
}

}  // namespace oddforge
