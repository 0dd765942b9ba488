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

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "oddforge/catalog.hpp"
#include "oddforge/image.hpp"
#include "oddforge/registry.hpp"
#include "oddforge/scene.hpp"
#include "oddforge/seg_eval.hpp"
#include "oddforge/synthetic.hpp"

namespace oddforge::testing {

inline SemanticMask mask_from(int w, int h, std::vector<std::uint8_t> labels) {
  return SemanticMask(w, h, std::move(labels));
}

inline SceneImage uniform_image(int w, int h, double r, double g, double b) {
  SceneImage img(w, h);
  for (std::size_t p = 0; p < img.pixel_count(); ++p) {
    img.at(p, 0) = r;
    img.at(p, 1) = g;
    img.at(p, 2) = b;
  }
  return img;
}

/// Returns the ground-truth mask of the scene a sample belongs to; sample
/// ids are "<scene>/<condition>" or "<scene>/sweep:...".
class OracleSegmenter : public Segmenter {
 public:
  explicit OracleSegmenter(std::map<std::string, SemanticMask> gt) : gt_(std::move(gt)) {}
  std::vector<PredictionOutcome> predict_batch(const std::vector<PredictionRequest>& batch) override {
    std::vector<PredictionOutcome> out;
    for (const auto& req : batch) {
      auto scene = req.sample_id.substr(0, req.sample_id.find('/'));
      if (fail_.count(req.sample_id)) out.push_back({std::nullopt, "injected failure"});
      else out.push_back({gt_.at(scene), {}});
    }
    return out;
  }
  std::string identity() const override { return "oracle"; }
  void fail_on(const std::string& sample) { fail_.insert(sample); }

 private:
  std::map<std::string, SemanticMask> gt_;
  std::set<std::string> fail_;
};

/// Names every drawn category's clusters after the weather whose prototype
/// look is nearest, the way an auditor would by eye.
inline StyleCatalog label_by_prototype(StyleCatalog catalog, const CategoryRegistry& registry) {
  using synthetic::Weather;
  for (const auto& name : synthetic::drawn_categories()) {
    CategoryId cat = registry.resolve(name);
    if (!catalog.has_category(cat)) continue;
    for (Weather w : {Weather::kSunny, Weather::kCloudy, Weather::kNight, Weather::kSnow})
      catalog = catalog.label(cat, synthetic::nearest_cluster(catalog, cat, name, w), synthetic::to_string(w));
  }
  return catalog;
}

/// Reference scenes clustered with k=4 and labeled by prototype, plus the
/// test scenes and a baseline fitted on the daylight references.
struct Fixture {
  CategoryRegistry registry = default_registry();
  synthetic::DatasetLayout layout = synthetic::default_layout();
  std::vector<Scene> reference = synthetic::make_scenes(layout.reference, registry);
  std::vector<Scene> test = synthetic::make_scenes(layout.test, registry);
  StyleCatalog catalog = label_by_prototype(cluster_styles(build_style_space(reference), 4, 11), registry);

  BaselineModel baseline() const {
    std::vector<Scene> daylight;
    for (const auto& s : reference)
      for (const auto& id : layout.daylight_reference_ids())
        if (s.scene_id == id) daylight.push_back(s);
    return fit_baseline(daylight, registry);
  }
};

}  // namespace oddforge::testing
