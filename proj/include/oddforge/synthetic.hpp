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

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "oddforge/catalog.hpp"
#include "oddforge/fsutil.hpp"
#include "oddforge/kmeans.hpp"
#include "oddforge/png_io.hpp"
#include "oddforge/registry.hpp"
#include "oddforge/renderer.hpp"
#include "oddforge/scene.hpp"
#include "oddforge/store.hpp"
#include "oddforge/style.hpp"
#include "oddforge/sweep.hpp"

// Procedural rail scenes for demos and end-to-end tests. Each scene has a
// sky band, vegetation and terrain flanks, a trackbed with two rails, and
// optionally a car, a person and an on-rail vehicle; every category is drawn
// in one of four weather looks.
namespace oddforge::synthetic {

enum class Weather { kSunny, kCloudy, kNight, kSnow };

inline std::string to_string(Weather w) {
  switch (w) {
    case Weather::kSunny: return "sunny";
    case Weather::kCloudy: return "cloudy";
    case Weather::kNight: return "night";
    default: return "snow";
  }
}

struct Look {
  std::array<double, 3> mean;
  double stddev;
};

/// Categories the generator draws, by registry name.
inline const std::vector<std::string>& drawn_categories() {
  static const std::vector<std::string> names{"sky",      "vegetation", "terrain", "trackbed",
                                              "rail-track", "car",      "human",   "on-rails"};
  return names;
}

/// Prototype look of a category under a weather.
inline Look prototype(const std::string& category, Weather w) {
  static const std::map<std::string, std::array<Look, 4>> looks{
      // sunny, cloudy, night, snow
      {"sky", {{{{0.35, 0.60, 0.95}, 0.03}, {{0.72, 0.74, 0.78}, 0.03},
               {{0.03, 0.04, 0.10}, 0.01}, {{0.86, 0.87, 0.89}, 0.02}}}},
      {"vegetation", {{{{0.20, 0.45, 0.15}, 0.04}, {{0.18, 0.36, 0.16}, 0.04},
                      {{0.03, 0.06, 0.03}, 0.01}, {{0.80, 0.82, 0.80}, 0.03}}}},
      {"terrain", {{{{0.58, 0.52, 0.30}, 0.04}, {{0.50, 0.46, 0.32}, 0.04},
                   {{0.08, 0.07, 0.05}, 0.01}, {{0.93, 0.93, 0.94}, 0.02}}}},
      {"trackbed", {{{{0.42, 0.33, 0.30}, 0.03}, {{0.38, 0.32, 0.30}, 0.03},
                    {{0.06, 0.05, 0.05}, 0.01}, {{0.76, 0.75, 0.75}, 0.03}}}},
      {"rail-track", {{{{0.52, 0.50, 0.47}, 0.02}, {{0.48, 0.47, 0.46}, 0.02},
                      {{0.15, 0.15, 0.16}, 0.01}, {{0.42, 0.42, 0.44}, 0.02}}}},
      {"car", {{{{0.78, 0.12, 0.12}, 0.03}, {{0.68, 0.14, 0.14}, 0.03},
               {{0.12, 0.03, 0.03}, 0.01}, {{0.82, 0.58, 0.58}, 0.03}}}},
      {"human", {{{{0.88, 0.62, 0.20}, 0.03}, {{0.80, 0.58, 0.24}, 0.03},
                 {{0.10, 0.08, 0.05}, 0.01}, {{0.72, 0.52, 0.34}, 0.03}}}},
      {"on-rails", {{{{0.10, 0.12, 0.30}, 0.02}, {{0.12, 0.14, 0.30}, 0.02},
                    {{0.04, 0.04, 0.08}, 0.01}, {{0.62, 0.62, 0.72}, 0.02}}}},
  };
  return looks.at(category)[static_cast<int>(w)];
}

struct SceneSpec {
  std::string id;
  Weather weather = Weather::kSunny;
  std::uint64_t seed = 0;
  bool car = true;
  bool human = true;
  bool on_rails = true;
};

inline constexpr int kWidth = 64;
inline constexpr int kHeight = 48;

/// Builds the mask for a layout seed. Object placement varies with the seed.
inline SemanticMask synthetic_mask(const SceneSpec& spec, const CategoryRegistry& registry) {
  kmeans::Rng rng(kmeans::splitmix64(spec.seed));
  auto id = [&](const char* name) { return registry.resolve(name); };
  SemanticMask mask(kWidth, kHeight, id("terrain"));
  const int horizon = 14 + static_cast<int>(rng.index(5));  // 14..18
  const int veg_bottom = horizon + 6 + static_cast<int>(rng.index(3));
  const int bed_left = 22 + static_cast<int>(rng.index(4)), bed_right = bed_left + 20;
  for (int y = 0; y < kHeight; ++y)
    for (int x = 0; x < kWidth; ++x) {
      if (y < horizon) mask(x, y) = id("sky");
      else if (y < veg_bottom && (x < bed_left - 4 || x > bed_right + 4)) mask(x, y) = id("vegetation");
      else if (x >= bed_left && x < bed_right && y >= horizon) mask(x, y) = id("trackbed");
    }
  for (int y = horizon; y < kHeight; ++y)
    for (int r : {bed_left + 4, bed_right - 7})
      for (int x = r; x < r + 3; ++x) mask(x, y) = id("rail-track");
  auto rect = [&](int x0, int y0, int w, int h, CategoryId c) {
    for (int y = y0; y < y0 + h && y < kHeight; ++y)
      for (int x = x0; x < x0 + w && x < kWidth; ++x) mask(x, y) = c;
  };
  if (spec.on_rails) rect(bed_left + 4, horizon + 4 + static_cast<int>(rng.index(4)), 13, 9, id("on-rails"));
  if (spec.car) rect(2 + static_cast<int>(rng.index(4)), kHeight - 12 - static_cast<int>(rng.index(4)), 11, 8, id("car"));
  if (spec.human) rect(bed_right + 8 + static_cast<int>(rng.index(6)), kHeight - 16, 6, 12, id("human"));
  return mask;
}

/// Renders a scene in its weather look with small per-scene jitter of the
/// style means, quantized to 8 bits like a stored PNG.
inline Scene make_scene(const SceneSpec& spec, const CategoryRegistry& registry,
                        std::size_t min_area = kDefaultMinArea) {
  SemanticMask mask = synthetic_mask(spec, registry);
  auto regions = extract_instances(mask, registry, min_area);
  kmeans::Rng rng(kmeans::splitmix64(spec.seed ^ 0x5eedULL));
  StyleAssignment styles;
  for (const auto& r : regions) {
    Look look = prototype(registry.at(r.category_id).name, spec.weather);
    StyleVector s(std::vector<double>(kStyleDim, 0.0));
    for (int c = 0; c < 3; ++c) {
      s[c] = std::clamp(look.mean[c] + (rng.uniform() - 0.5) * 0.04, 0.0, 1.0);
      s[3 + c] = look.stddev;
    }
    styles.emplace(r.region_id, s);
  }
  SceneImage image = render(mask, regions, styles, RenderParams{spec.seed});
  SceneImage quantized(image.width(), image.height());
  for (std::size_t p = 0; p < image.pixel_count(); ++p)
    for (int c = 0; c < 3; ++c) quantized.at(p, c) = quantize_sample(image.at(p, c)) / 255.0;
  return oddforge::make_scene(spec.id, std::move(quantized), std::move(mask), registry, min_area);
}

/// Reference scenes cycle through all four weathers; test scenes are
/// daylight only (sunny/cloudy) and always contain an on-rail vehicle.
struct DatasetLayout {
  std::vector<SceneSpec> reference;
  std::vector<SceneSpec> test;

  std::vector<std::string> reference_ids() const {
    std::vector<std::string> out;
    for (const auto& s : reference) out.push_back(s.id);
    return out;
  }
  std::vector<std::string> daylight_reference_ids() const {
    std::vector<std::string> out;
    for (const auto& s : reference)
      if (s.weather == Weather::kSunny || s.weather == Weather::kCloudy) out.push_back(s.id);
    return out;
  }
  std::vector<std::string> test_ids() const {
    std::vector<std::string> out;
    for (const auto& s : test) out.push_back(s.id);
    return out;
  }
};

inline DatasetLayout default_layout(std::size_t reference_count = 12, std::size_t test_count = 5,
                                    std::uint64_t seed = 7) {
  DatasetLayout layout;
  char name[32];
  for (std::size_t i = 0; i < reference_count; ++i) {
    std::snprintf(name, sizeof name, "ref_%02zu", i);
    layout.reference.push_back({name, static_cast<Weather>(i % 4), seed * 1000 + i, true, true, true});
  }
  for (std::size_t i = 0; i < test_count; ++i) {
    std::snprintf(name, sizeof name, "test_%02zu", i);
    layout.test.push_back({name, i % 2 == 0 ? Weather::kSunny : Weather::kCloudy,
                           seed * 1000 + 500 + i, i % 2 == 0, i % 3 != 2, true});
  }
  return layout;
}

inline std::vector<Scene> make_scenes(const std::vector<SceneSpec>& specs,
                                      const CategoryRegistry& registry,
                                      std::size_t min_area = kDefaultMinArea) {
  std::vector<Scene> out;
  for (const auto& s : specs) out.push_back(make_scene(s, registry, min_area));
  return out;
}

/// Writes images/, masks/, registry.json, odd.json and config.json under
/// `root`. The config clusters the reference scenes with k=4, fits the
/// baseline on daylight reference scenes and tests on the test scenes.
inline void write_dataset(const std::filesystem::path& root, const DatasetLayout& layout,
                          const CategoryRegistry& registry) {
  std::filesystem::create_directories(root / "images");
  std::filesystem::create_directories(root / "masks");
  std::vector<SceneSpec> all = layout.reference;
  all.insert(all.end(), layout.test.begin(), layout.test.end());
  for (const auto& spec : all) {
    Scene s = make_scene(spec, registry);
    write_png_rgb(dataset_image_path(root, spec.id).string(), s.image);
    write_png_mask(dataset_mask_path(root, spec.id).string(), s.mask);
  }
  write_file_atomic(root / "registry.json", registry.to_json().dump(2) + "\n");
  write_file_atomic(root / "odd.json", default_odd(registry).to_json(registry).dump(2) + "\n");
  nlohmann::json config = {
      {"dataset_root", "."},
      {"registry", "registry.json"},
      {"odd", "odd.json"},
      {"store", "store"},
      {"style_scenes", layout.reference_ids()},
      {"baseline_scenes", layout.daylight_reference_ids()},
      {"test_scenes", layout.test_ids()},
      {"min_area", kDefaultMinArea},
      {"cluster", {{"k", 4}, {"seed", 11}}},
      {"render_seed", 20240601},
      {"focus_category", "on-rails"},
      {"adapter", {{"kind", "builtin-baseline"}}},
      {"parallelism", 1}};
  write_file_atomic(root / "config.json", config.dump(2) + "\n");
}

/// Index of the cluster whose center mean is closest to the weather's
/// prototype look. Stands in for the human who names clusters by eye.
inline std::size_t nearest_cluster(const StyleCatalog& catalog, CategoryId cat,
                                   const std::string& category_name, Weather w) {
  Look look = prototype(category_name, w);
  const auto& clusters = catalog.clusters(cat);
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    double d = 0.0;
    for (int c = 0; c < 3; ++c) {
      double t = clusters[i].center.mean(c) - look.mean[c];
      d += t * t;
    }
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

}  // namespace oddforge::synthetic
