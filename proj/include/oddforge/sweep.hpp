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
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "oddforge/catalog.hpp"
#include "oddforge/error.hpp"
#include "oddforge/parallel.hpp"
#include "oddforge/registry.hpp"
#include "oddforge/renderer.hpp"
#include "oddforge/scene.hpp"
#include "oddforge/seg_eval.hpp"
#include "oddforge/style.hpp"
#include "oddforge/verdict.hpp"

namespace oddforge {

/// Name reserved for the unedited re-render of each scene.
inline const std::string kOriginalCondition = "original";

enum class ConditionScope { kSkyOnly, kAllCategories };

inline std::string to_string(ConditionScope s) {
  return s == ConditionScope::kSkyOnly ? "sky-only" : "all-categories";
}

inline ConditionScope parse_scope(const std::string& s) {
  if (s == "sky-only") return ConditionScope::kSkyOnly;
  if (s == "all-categories") return ConditionScope::kAllCategories;
  throw DataError("condition scope must be 'sky-only' or 'all-categories', got '" + s + "'");
}

/// A style edit: which categories get which catalog concept. Categories that
/// are not mapped keep their original style.
struct ConditionSpec {
  std::string name;
  ConditionScope scope = ConditionScope::kAllCategories;
  std::map<CategoryId, std::string> style_source;

  bool is_original() const { return name == kOriginalCondition; }

  void validate(const CategoryRegistry& registry) const {
    if (name.empty()) throw DataError("condition: empty name");
    if (is_original() && !style_source.empty())
      throw DataError("condition: 'original' is reserved for the unedited render");
    for (const auto& [cat, concept_name] : style_source) {
      if (!registry.is_category(cat))
        throw DataError("condition " + name + ": unknown category " + std::to_string(cat));
      if (concept_name.empty())
        throw DataError("condition " + name + ": empty concept for category " + registry.at(cat).name);
    }
    if (scope == ConditionScope::kSkyOnly) {
      auto sky = registry.find("sky");
      if (!sky) throw DataError("condition " + name + ": sky-only scope needs a 'sky' category");
      if (style_source.size() != 1 || style_source.begin()->first != *sky)
        throw DataError("condition " + name + ": sky-only scope must map exactly the sky category");
    }
  }
};

inline ConditionSpec original_condition() {
  return {kOriginalCondition, ConditionScope::kAllCategories, {}};
}

inline ConditionSpec sky_condition(const CategoryRegistry& registry, const std::string& name,
                                   const std::string& concept_name) {
  auto sky = registry.find("sky");
  if (!sky) throw DataError("registry has no 'sky' category");
  return {name, ConditionScope::kSkyOnly, {{*sky, concept_name}}};
}

/// cloudy, sunny, night (sky-only) and snow (every category).
inline std::vector<ConditionSpec> default_conditions(const CategoryRegistry& registry) {
  std::vector<ConditionSpec> out{sky_condition(registry, "cloudy", "cloudy"),
                                 sky_condition(registry, "sunny", "sunny"),
                                 sky_condition(registry, "night", "night")};
  ConditionSpec snow{"snow", ConditionScope::kAllCategories, {}};
  for (const auto& e : registry.entries()) snow.style_source[e.id] = "snow";
  out.push_back(std::move(snow));
  return out;
}

inline nlohmann::json to_json(const ConditionSpec& c, const CategoryRegistry& registry) {
  nlohmann::json src = nlohmann::json::object();
  for (const auto& [cat, concept_name] : c.style_source) src[registry.at(cat).name] = concept_name;
  return {{"name", c.name}, {"scope", to_string(c.scope)}, {"style_source", src}};
}

struct OddSpec {
  std::vector<ConditionSpec> conditions;
  std::map<std::pair<std::string, CategoryId>, double> thresholds;
  double default_threshold = 0.5;
  double drop_threshold = 0.3;
  int steps = 4;

  double threshold(const std::string& condition, CategoryId cat) const {
    auto it = thresholds.find({condition, cat});
    return it == thresholds.end() ? default_threshold : it->second;
  }

  const ConditionSpec& condition(const std::string& name) const {
    for (const auto& c : conditions)
      if (c.name == name) return c;
    throw NotFoundError("ODD spec has no condition '" + name + "'");
  }

  /// Like condition(), but also resolves "original".
  ConditionSpec resolve(const std::string& name) const {
    if (name == kOriginalCondition) return original_condition();
    return condition(name);
  }

  void validate(const CategoryRegistry& registry) const {
    std::set<std::string> names;
    for (const auto& c : conditions) {
      c.validate(registry);
      if (c.is_original()) throw DataError("ODD spec: 'original' cannot be an ODD condition");
      if (!names.insert(c.name).second) throw DataError("ODD spec: duplicate condition '" + c.name + "'");
    }
    auto check = [](double v, const std::string& what) {
      if (!(v >= 0.0 && v <= 1.0)) throw DataError("ODD spec: " + what + " must lie in [0,1]");
    };
    check(default_threshold, "default_threshold");
    for (const auto& [key, v] : thresholds) {
      if (!names.count(key.first))
        throw DataError("ODD spec: threshold for unknown condition '" + key.first + "'");
      check(v, "threshold for " + key.first);
    }
    if (!(drop_threshold > 0.0 && drop_threshold <= 1.0))
      throw DataError("ODD spec: drop_threshold must lie in (0,1]");
    if (steps < 2) throw DataError("ODD spec: steps must be at least 2");
  }

  nlohmann::json to_json(const CategoryRegistry& registry) const {
    nlohmann::json conds = nlohmann::json::array();
    for (const auto& c : conditions) conds.push_back(oddforge::to_json(c, registry));
    nlohmann::json th = nlohmann::json::object();
    for (const auto& [key, v] : thresholds) th[key.first][registry.at(key.second).name] = v;
    return {{"conditions", conds},         {"thresholds", th},
            {"default_threshold", default_threshold}, {"drop_threshold", drop_threshold},
            {"steps", steps}};
  }

  static OddSpec from_json(const nlohmann::json& j, const CategoryRegistry& registry) {
    OddSpec odd;
    try {
      for (const auto& c : j.at("conditions")) {
        ConditionSpec spec;
        spec.name = c.at("name").get<std::string>();
        spec.scope = parse_scope(c.at("scope").get<std::string>());
        for (const auto& [cat, concept_name] : c.at("style_source").items())
          spec.style_source[registry.resolve(cat)] = concept_name.get<std::string>();
        odd.conditions.push_back(std::move(spec));
      }
      if (j.contains("thresholds"))
        for (const auto& [cond, cats] : j.at("thresholds").items())
          for (const auto& [cat, v] : cats.items())
            odd.thresholds[{cond, registry.resolve(cat)}] = v.get<double>();
      odd.default_threshold = j.value("default_threshold", 0.5);
      odd.drop_threshold = j.value("drop_threshold", 0.3);
      odd.steps = j.value("steps", 4);
    } catch (const nlohmann::json::exception& ex) {
      throw DataError(std::string("ODD spec: malformed: ") + ex.what());
    } catch (const NotFoundError& ex) {
      throw DataError(std::string("ODD spec: ") + ex.what());
    }
    odd.validate(registry);
    return odd;
  }
};

inline OddSpec default_odd(const CategoryRegistry& registry) {
  OddSpec odd;
  odd.conditions = default_conditions(registry);
  return odd;
}

// ---------------------------------------------------------------------------
// Condition suites

/// Applies `condition` to a scene's original style assignment. Every region
/// whose category is mapped gets that category's concept center.
inline StyleAssignment condition_assignment(const Scene& scene, const StyleAssignment& original,
                                            const StyleCatalog& catalog,
                                            const ConditionSpec& condition,
                                            std::vector<std::string>* warnings = nullptr) {
  StyleAssignment out = original;
  std::size_t edited = 0;
  for (const auto& r : scene.regions) {
    auto src = condition.style_source.find(r.category_id);
    if (src == condition.style_source.end()) continue;
    auto style = catalog.find(r.category_id, src->second);
    if (!style)
      throw DataError("condition " + condition.name + ": catalog has no cluster labeled '" +
                      src->second + "' for category " + std::to_string(r.category_id) +
                      " (label one with the `label` command)");
    out = apply_style(out, {r.region_id}, *style);
    ++edited;
  }
  if (edited == 0 && !condition.is_original() && warnings)
    warnings->push_back("condition " + condition.name + " edits no region of scene " +
                        scene.scene_id);
  return out;
}

struct Variant {
  std::string scene_id;
  std::string condition;
  SceneImage image;
  StyleAssignment styles;
  std::vector<std::string> warnings;

  std::string sample_id() const { return variant_sample_id(scene_id, condition); }
  bool is_original() const { return condition == kOriginalCondition; }
};

struct Suite {
  RenderParams params;
  std::vector<std::string> conditions;  // without "original"
  std::vector<Variant> variants;        // per scene: original, then conditions in order

  const Variant* find(const std::string& scene, const std::string& condition) const {
    for (const auto& v : variants)
      if (v.scene_id == scene && v.condition == condition) return &v;
    return nullptr;
  }
  std::vector<std::string> warnings() const {
    std::vector<std::string> out;
    for (const auto& v : variants) out.insert(out.end(), v.warnings.begin(), v.warnings.end());
    return out;
  }
};

inline void check_catalog(const StyleCatalog& catalog, const CategoryRegistry& registry) {
  if (catalog.dim() != kStyleDim)
    throw DataError("catalog dimension " + std::to_string(catalog.dim()) + " does not match style layout " +
                    std::to_string(kStyleDim));
  for (const auto& [cat, clusters] : catalog.categories())
    if (!registry.is_category(cat))
      throw DataError("catalog/registry mismatch: catalog has category " + std::to_string(cat) +
                      " but registry has " + std::to_string(registry.size()) + " categories");
}

/// Renders the original plus one variant per condition for every scene.
inline Suite build_condition_suite(const std::vector<Scene>& scenes, const StyleCatalog& catalog,
                                   const std::vector<ConditionSpec>& conditions,
                                   const RenderParams& params, const CategoryRegistry& registry,
                                   std::size_t parallelism = 1) {
  check_catalog(catalog, registry);
  std::set<std::string> names;
  for (const auto& c : conditions) {
    c.validate(registry);
    if (c.is_original()) throw DataError("suite: 'original' is always included and cannot be listed");
    if (!names.insert(c.name).second) throw DataError("suite: duplicate condition " + c.name);
  }
  Suite suite;
  suite.params = params;
  for (const auto& c : conditions) suite.conditions.push_back(c.name);
  const std::size_t per_scene = conditions.size() + 1;
  suite.variants.resize(scenes.size() * per_scene);
  parallel_for(scenes.size(), parallelism, [&](std::size_t s) {
    const Scene& scene = scenes[s];
    StyleAssignment original = encode_scene(scene);
    for (std::size_t c = 0; c < per_scene; ++c) {
      const ConditionSpec cond = c == 0 ? original_condition() : conditions[c - 1];
      Variant v;
      v.scene_id = scene.scene_id;
      v.condition = cond.name;
      v.styles = condition_assignment(scene, original, catalog, cond, &v.warnings);
      v.image = render(scene, v.styles, params);
      suite.variants[s * per_scene + c] = std::move(v);
    }
  });
  return suite;
}

struct VariantResult {
  std::string scene_id;
  std::string condition;
  std::optional<ConfusionMatrix> confusion;
  std::optional<SemanticMask> prediction;
  std::string error;

  bool scored() const { return confusion.has_value(); }
  std::string sample_id() const { return variant_sample_id(scene_id, condition); }
};

struct SuiteResults {
  std::size_t categories = 0;
  std::vector<std::string> conditions;  // including "original" first
  std::vector<VariantResult> variants;

  bool partial() const {
    return std::any_of(variants.begin(), variants.end(), [](const auto& v) { return !v.scored(); });
  }

  /// Summed confusion of scored variants of `condition` that pass `keep`.
  template <class Keep>
  std::optional<ConfusionMatrix> aggregate(const std::string& condition, Keep&& keep) const {
    std::optional<ConfusionMatrix> sum;
    for (const auto& v : variants) {
      if (v.condition != condition || !v.scored() || !keep(v)) continue;
      if (!sum) sum = ConfusionMatrix(categories);
      *sum += *v.confusion;
    }
    return sum;
  }
  std::optional<ConfusionMatrix> aggregate(const std::string& condition) const {
    return aggregate(condition, [](const VariantResult&) { return true; });
  }
};

/// Predicts every variant and scores it against the scene's original mask.
/// Adapter failures are recorded per variant and the rest still score.
inline SuiteResults run_suite(const Suite& suite, const std::vector<Scene>& scenes,
                              Segmenter& segmenter, const CategoryRegistry& registry) {
  std::map<std::string, const Scene*> by_id;
  for (const auto& s : scenes) by_id[s.scene_id] = &s;
  SuiteResults res;
  res.categories = registry.size();
  res.conditions.push_back(kOriginalCondition);
  res.conditions.insert(res.conditions.end(), suite.conditions.begin(), suite.conditions.end());

  std::vector<PredictionRequest> batch;
  for (const auto& v : suite.variants) batch.push_back({v.sample_id(), &v.image});
  std::vector<PredictionOutcome> outcomes;
  try {
    outcomes = segmenter.predict_batch(batch);
  } catch (const Error& e) {
    outcomes.assign(batch.size(), PredictionOutcome{std::nullopt, e.what()});
  }
  if (outcomes.size() != batch.size())
    throw AdapterError("segmenter returned " + std::to_string(outcomes.size()) + " results for " +
                       std::to_string(batch.size()) + " inputs");
  for (std::size_t i = 0; i < suite.variants.size(); ++i) {
    const auto& v = suite.variants[i];
    VariantResult r{v.scene_id, v.condition, std::nullopt, std::nullopt, {}};
    auto it = by_id.find(v.scene_id);
    if (it == by_id.end()) throw NotFoundError("run_suite: no ground truth for scene " + v.scene_id);
    if (!outcomes[i].ok()) {
      r.error = outcomes[i].error;
    } else {
      try {
        r.confusion = confusion_accumulate(it->second->mask, *outcomes[i].mask, registry);
        r.prediction = std::move(outcomes[i].mask);
      } catch (const Error& e) {
        r.error = e.what();
      }
    }
    res.variants.push_back(std::move(r));
  }
  return res;
}

inline nlohmann::json to_json(const SuiteResults& res) {
  nlohmann::json variants = nlohmann::json::array();
  for (const auto& v : res.variants) {
    nlohmann::json item = {{"scene", v.scene_id}, {"condition", v.condition},
                           {"status", v.scored() ? "scored" : "failed"}};
    if (v.scored()) {
      item["confusion"] = v.confusion->to_json();
      item["iou"] = to_json(iou_from_matrix(*v.confusion));
    } else {
      item["error"] = v.error;
    }
    variants.push_back(std::move(item));
  }
  nlohmann::json conds = nlohmann::json::object();
  for (const auto& c : res.conditions) {
    std::size_t samples = 0, failed = 0;
    for (const auto& v : res.variants)
      if (v.condition == c) {
        ++samples;
        failed += !v.scored();
      }
    auto agg = res.aggregate(c);
    conds[c] = {{"samples", samples},
                {"failed", failed},
                {"iou", agg ? to_json(iou_from_matrix(*agg)) : nlohmann::json(nullptr)}};
  }
  return {{"version", 1},          {"categories", res.categories}, {"conditions_order", res.conditions},
          {"conditions", conds},   {"variants", variants},         {"partial", res.partial()}};
}

inline SuiteResults suite_results_from_json(const nlohmann::json& j) {
  try {
    SuiteResults res;
    res.categories = j.at("categories").get<std::size_t>();
    res.conditions = j.at("conditions_order").get<std::vector<std::string>>();
    for (const auto& item : j.at("variants")) {
      VariantResult v;
      v.scene_id = item.at("scene").get<std::string>();
      v.condition = item.at("condition").get<std::string>();
      if (item.contains("confusion")) v.confusion = ConfusionMatrix::from_json(item.at("confusion"));
      v.error = item.value("error", "");
      res.variants.push_back(std::move(v));
    }
    return res;
  } catch (const nlohmann::json::exception& ex) {
    throw DataError(std::string("suite report: malformed: ") + ex.what());
  }
}

// ---------------------------------------------------------------------------
// Transition sweeps and drop detection

enum class DropKind { kDrop, kRecovery };

inline std::string to_string(DropKind k) { return k == DropKind::kDrop ? "drop" : "recovery"; }

/// Adjacent-step change of at least the drop threshold. `delta` is the
/// magnitude of the change: before - after for drops, after - before for
/// recoveries.
struct DropFlag {
  std::string scene_id;
  CategoryId category_id = 0;
  std::size_t step = 0;  // flags the transition step -> step + 1
  double iou_before = 0.0;
  double iou_after = 0.0;
  double delta = 0.0;
  DropKind kind = DropKind::kDrop;

  nlohmann::json to_json() const {
    return {{"scene", scene_id},       {"category", category_id}, {"step", step},
            {"iou_before", iou_before}, {"iou_after", iou_after}, {"delta", delta},
            {"kind", to_string(kind)}};
  }
};

inline std::vector<DropFlag> detect_drops(const std::vector<double>& series, double drop_threshold) {
  std::vector<DropFlag> flags;
  for (std::size_t i = 0; i + 1 < series.size(); ++i) {
    double before = series[i], after = series[i + 1];
    if (before - after >= drop_threshold)
      flags.push_back({{}, 0, i, before, after, before - after, DropKind::kDrop});
    else if (after - before >= drop_threshold)
      flags.push_back({{}, 0, i, before, after, after - before, DropKind::kRecovery});
  }
  return flags;
}

struct SweepFrame {
  double lambda = 0.0;
  SceneImage image;
  std::optional<SemanticMask> prediction;
  std::optional<IouReport> report;
  std::string error;
};

struct SweepResult {
  std::string scene_id;
  std::string from;
  std::string to;
  CategoryId focus = 0;
  std::vector<double> lambdas;
  std::vector<SweepFrame> frames;
  std::vector<double> focus_series;  // empty when any frame failed
  std::vector<DropFlag> flags;

  bool complete() const {
    return std::all_of(frames.begin(), frames.end(), [](const auto& f) { return f.report.has_value(); });
  }
};

inline nlohmann::json to_json(const SweepResult& r, const CategoryRegistry& registry) {
  nlohmann::json frames = nlohmann::json::array();
  for (std::size_t i = 0; i < r.frames.size(); ++i) {
    const auto& f = r.frames[i];
    nlohmann::json item = {{"step", i}, {"lambda", f.lambda},
                           {"sample", sweep_sample_id(r.scene_id, r.from, r.to, i)}};
    if (f.report) {
      item["iou"] = to_json(*f.report);
      item["focus_iou"] = detail::opt_json(f.report->iou(r.focus));
    } else {
      item["error"] = f.error;
    }
    frames.push_back(std::move(item));
  }
  nlohmann::json flags = nlohmann::json::array();
  for (const auto& f : r.flags) flags.push_back(f.to_json());
  return {{"version", 1},
          {"scene", r.scene_id},
          {"from", r.from},
          {"to", r.to},
          {"focus_category", r.focus},
          {"focus_name", registry.at(r.focus).name},
          {"lambdas", r.lambdas},
          {"focus_series", r.focus_series},
          {"frames", frames},
          {"flags", flags}};
}

/// Renders `steps` frames between the two conditions, predicts each and
/// extracts the focus category's IoU series.
inline SweepResult transition_sweep(const Scene& scene, const StyleCatalog& catalog,
                                    const ConditionSpec& from, const ConditionSpec& to, int steps,
                                    Segmenter& segmenter, CategoryId focus,
                                    const CategoryRegistry& registry, const RenderParams& params,
                                    double drop_threshold = 0.3) {
  if (steps < 2) throw DataError("sweep: steps must be at least 2");
  if (!registry.is_category(focus)) throw DataError("sweep: unknown focus category");
  if (std::find(scene.mask.labels().begin(), scene.mask.labels().end(), focus) ==
      scene.mask.labels().end())
    throw DataError("sweep: focus category " + registry.at(focus).name + " does not occur in scene " +
                    scene.scene_id);
  StyleAssignment original = encode_scene(scene);
  StyleAssignment a = condition_assignment(scene, original, catalog, from);
  StyleAssignment b = condition_assignment(scene, original, catalog, to);

  SweepResult res;
  res.scene_id = scene.scene_id;
  res.from = from.name;
  res.to = to.name;
  res.focus = focus;
  res.lambdas = transition_lambdas(steps);
  for (double lambda : res.lambdas)
    res.frames.push_back({lambda, render(scene, interpolate_assignment(a, b, lambda), params), {}, {}, {}});

  std::vector<PredictionRequest> batch;
  for (std::size_t i = 0; i < res.frames.size(); ++i)
    batch.push_back({sweep_sample_id(scene.scene_id, from.name, to.name, i), &res.frames[i].image});
  std::vector<PredictionOutcome> outcomes;
  try {
    outcomes = segmenter.predict_batch(batch);
  } catch (const Error& e) {
    outcomes.assign(batch.size(), PredictionOutcome{std::nullopt, e.what()});
  }
  for (std::size_t i = 0; i < res.frames.size(); ++i) {
    auto& f = res.frames[i];
    if (!outcomes.at(i).ok()) {
      f.error = outcomes[i].error;
      continue;
    }
    try {
      f.report = iou_from_matrix(confusion_accumulate(scene.mask, *outcomes[i].mask, registry));
      f.prediction = std::move(outcomes[i].mask);
    } catch (const Error& e) {
      f.error = e.what();
    }
  }
  if (res.complete()) {
    for (const auto& f : res.frames) res.focus_series.push_back(f.report->iou(focus).value_or(0.0));
    res.flags = detect_drops(res.focus_series, drop_threshold);
    for (auto& flag : res.flags) {
      flag.scene_id = scene.scene_id;
      flag.category_id = focus;
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// Compliance

enum class CellStatus { kPass, kFail, kInsufficientEvidence };

inline std::string to_string(CellStatus s) {
  switch (s) {
    case CellStatus::kPass: return "pass";
    case CellStatus::kFail: return "fail";
    default: return "insufficient-evidence";
  }
}

struct ComplianceCell {
  std::string condition;
  CategoryId category_id = 0;
  std::optional<double> iou;
  double threshold = 0.0;
  CellStatus status = CellStatus::kInsufficientEvidence;
};

struct ConditionSummary {
  std::string name;
  std::size_t samples = 0;   // variants of this condition in the suite
  std::size_t failed = 0;    // adapter/scoring failures
  std::size_t excluded = 0;  // rejected by an auditor
  std::size_t audited = 0;   // with an explicit verdict
  std::size_t contributing = 0;
  std::optional<IouReport> aggregate;
  CellStatus status = CellStatus::kInsufficientEvidence;

  double audited_fraction() const {
    return samples == 0 ? 0.0 : static_cast<double>(audited) / static_cast<double>(samples);
  }
};

struct ComplianceReport {
  std::vector<ConditionSummary> conditions;
  std::vector<ComplianceCell> cells;  // grouped by condition, categories ascending
  CellStatus overall = CellStatus::kInsufficientEvidence;

  const ComplianceCell* cell(const std::string& condition, CategoryId cat) const {
    for (const auto& c : cells)
      if (c.condition == condition && c.category_id == cat) return &c;
    return nullptr;
  }
  const ConditionSummary* summary(const std::string& condition) const {
    for (const auto& c : conditions)
      if (c.name == condition) return &c;
    return nullptr;
  }
};

/// Aggregates each ODD condition over its surviving (scored, not rejected)
/// samples and compares every category against its threshold.
///
/// Cells exist for every category present in the condition's unfiltered
/// aggregate plus every explicitly thresholded category, so rejecting a
/// sample changes cell values but never the table's shape.
inline ComplianceReport evaluate_compliance(const SuiteResults& results, const OddSpec& odd,
                                            const VerdictSet& verdicts) {
  ComplianceReport report;
  bool any_fail = false, any_insufficient = false;
  for (const auto& cond : odd.conditions) {
    ConditionSummary summary;
    summary.name = cond.name;
    for (const auto& v : results.variants) {
      if (v.condition != cond.name) continue;
      ++summary.samples;
      summary.failed += !v.scored();
      summary.audited += verdicts.audited(v.sample_id());
      if (verdicts.rejected(v.sample_id())) ++summary.excluded;
      else if (v.scored()) ++summary.contributing;
    }
    if (summary.samples == 0)
      throw DataError("compliance: suite results have no samples for ODD condition '" + cond.name + "'");

    std::set<CategoryId> cats;
    if (auto all = results.aggregate(cond.name)) {
      auto full = iou_from_matrix(*all);
      for (std::size_t c = 0; c < full.per_category.size(); ++c)
        if (full.per_category[c]) cats.insert(static_cast<CategoryId>(c));
    }
    for (const auto& [key, v] : odd.thresholds)
      if (key.first == cond.name) cats.insert(key.second);

    auto kept = results.aggregate(cond.name, [&](const VariantResult& v) {
      return !verdicts.rejected(v.sample_id());
    });
    if (kept) summary.aggregate = iou_from_matrix(*kept);

    bool cond_fail = false, cond_insufficient = !kept;
    for (CategoryId c : cats) {
      ComplianceCell cell;
      cell.condition = cond.name;
      cell.category_id = c;
      cell.threshold = odd.threshold(cond.name, c);
      if (summary.aggregate && c < summary.aggregate->per_category.size())
        cell.iou = summary.aggregate->per_category[c];
      if (!cell.iou) {
        cell.status = CellStatus::kInsufficientEvidence;
        cond_insufficient = true;
      } else if (*cell.iou >= cell.threshold) {
        cell.status = CellStatus::kPass;
      } else {
        cell.status = CellStatus::kFail;
        cond_fail = true;
      }
      report.cells.push_back(cell);
    }
    summary.status = cond_fail ? CellStatus::kFail
                               : (cond_insufficient ? CellStatus::kInsufficientEvidence : CellStatus::kPass);
    any_fail = any_fail || cond_fail;
    any_insufficient = any_insufficient || cond_insufficient;
    report.conditions.push_back(std::move(summary));
  }
  report.overall = any_fail ? CellStatus::kFail
                            : (any_insufficient ? CellStatus::kInsufficientEvidence : CellStatus::kPass);
  return report;
}

inline nlohmann::json to_json(const ComplianceCell& c, const CategoryRegistry& registry) {
  return {{"condition", c.condition}, {"category", c.category_id},
          {"category_name", registry.at(c.category_id).name}, {"iou", detail::opt_json(c.iou)},
          {"threshold", c.threshold}, {"status", to_string(c.status)}};
}

inline nlohmann::json to_json(const ComplianceReport& r, const CategoryRegistry& registry) {
  nlohmann::json conds = nlohmann::json::array();
  for (const auto& s : r.conditions) {
    nlohmann::json item = {{"name", s.name},
                           {"samples", s.samples},
                           {"failed", s.failed},
                           {"excluded", s.excluded},
                           {"audited", s.audited},
                           {"audited_fraction", s.audited_fraction()},
                           {"contributing", s.contributing},
                           {"status", to_string(s.status)}};
    if (s.aggregate) {
      item["mean_iou"] = detail::opt_json(s.aggregate->mean_iou);
      item["mean_iou_all_categories"] = detail::opt_json(s.aggregate->mean_iou_all);
      item["frequency_weighted_iou"] = detail::opt_json(s.aggregate->frequency_weighted_iou);
    } else {
      item["mean_iou"] = nullptr;
      item["mean_iou_all_categories"] = nullptr;
      item["frequency_weighted_iou"] = nullptr;
    }
    conds.push_back(std::move(item));
  }
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : r.cells) cells.push_back(to_json(c, registry));
  return {{"version", 1},
          {"overall", to_string(r.overall)},
          {"conditions", conds},
          {"cells", cells},
          {"mean_definition", "macro mean over categories with non-empty union"}};
}

/// One row per condition x category.
inline std::string compliance_csv(const ComplianceReport& r, const CategoryRegistry& registry) {
  std::string out = "condition,category_id,category_name,iou,threshold,status,contributing,excluded\n";
  for (const auto& c : r.cells) {
    const auto* s = r.summary(c.condition);
    char iou[32] = "", th[32];
    if (c.iou) std::snprintf(iou, sizeof iou, "%.6f", *c.iou);
    std::snprintf(th, sizeof th, "%.6f", c.threshold);
    out += c.condition + "," + std::to_string(c.category_id) + "," + registry.at(c.category_id).name +
           "," + iou + "," + th + "," + to_string(c.status) + "," +
           std::to_string(s ? s->contributing : 0) + "," + std::to_string(s ? s->excluded : 0) + "\n";
  }
  return out;
}

}  // namespace oddforge
