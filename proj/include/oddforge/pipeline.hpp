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
#include <cstdlib>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "oddforge/catalog.hpp"
#include "oddforge/error.hpp"
#include "oddforge/fsutil.hpp"
#include "oddforge/hash.hpp"
#include "oddforge/png_io.hpp"
#include "oddforge/registry.hpp"
#include "oddforge/renderer.hpp"
#include "oddforge/scene.hpp"
#include "oddforge/seg_eval.hpp"
#include "oddforge/store.hpp"
#include "oddforge/style.hpp"
#include "oddforge/sweep.hpp"

namespace oddforge {

/// Run configuration. Relative paths resolve against the config file's
/// directory; ODDFORGE_STORE overrides the store path.
struct Config {
  std::filesystem::path base_dir;
  std::filesystem::path dataset_root;
  std::optional<std::filesystem::path> registry_path;
  std::optional<std::filesystem::path> catalog_path;
  std::optional<std::filesystem::path> odd_path;
  std::filesystem::path store_path;
  std::vector<std::string> style_scenes;     // empty: all dataset ids
  std::vector<std::string> baseline_scenes;  // empty: style scenes
  std::vector<std::string> test_scenes;      // empty: all dataset ids
  std::size_t min_area = kDefaultMinArea;
  std::size_t k = 10;
  std::uint64_t cluster_seed = 0;
  std::uint64_t render_seed = 0;
  std::string focus_category = "rail-track";
  ModelAdapter adapter;
  std::size_t parallelism = 1;
  nlohmann::json raw = nlohmann::json::object();

  static Config from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
    Config c;
    c.base_dir = base_dir;
    c.raw = j;
    auto resolve = [&](const std::string& p) {
      std::filesystem::path path(p);
      return path.is_absolute() ? path : (base_dir / path).lexically_normal();
    };
    try {
      c.dataset_root = resolve(j.at("dataset_root").get<std::string>());
      if (j.contains("registry")) c.registry_path = resolve(j.at("registry").get<std::string>());
      if (j.contains("catalog")) c.catalog_path = resolve(j.at("catalog").get<std::string>());
      if (j.contains("odd")) c.odd_path = resolve(j.at("odd").get<std::string>());
      c.store_path = resolve(j.value("store", "store"));
      c.style_scenes = j.value("style_scenes", std::vector<std::string>{});
      c.baseline_scenes = j.value("baseline_scenes", std::vector<std::string>{});
      c.test_scenes = j.value("test_scenes", std::vector<std::string>{});
      c.min_area = j.value("min_area", kDefaultMinArea);
      if (j.contains("cluster")) {
        c.k = j["cluster"].value("k", std::size_t{10});
        c.cluster_seed = j["cluster"].value("seed", std::uint64_t{0});
      }
      c.render_seed = j.value("render_seed", std::uint64_t{0});
      c.focus_category = j.value("focus_category", std::string("rail-track"));
      c.parallelism = std::max<std::size_t>(1, j.value("parallelism", std::size_t{1}));
      if (j.contains("adapter")) {
        const auto& a = j["adapter"];
        std::string kind = a.value("kind", "builtin-baseline");
        if (kind == "builtin-baseline") {
          c.adapter.kind = AdapterKind::kBuiltinBaseline;
        } else if (kind == "external-command") {
          c.adapter.kind = AdapterKind::kExternalCommand;
          c.adapter.command = a.at("command").get<std::string>();
          c.adapter.working_dir = a.contains("working_dir")
                                      ? resolve(a["working_dir"].get<std::string>()).string()
                                      : base_dir.string();
          c.adapter.timeout_seconds = a.value("timeout_seconds", 300.0);
        } else {
          throw DataError("config: adapter kind must be builtin-baseline or external-command");
        }
      }
    } catch (const nlohmann::json::exception& ex) {
      throw DataError(std::string("config: ") + ex.what());
    }
    if (const char* env = std::getenv("ODDFORGE_STORE"); env && *env) c.store_path = env;
    return c;
  }

  static Config load(const std::filesystem::path& path) {
    std::string text;
    try {
      text = read_file(path);
    } catch (const StoreError&) {
      throw DataError("config: cannot read " + path.string());
    }
    try {
      return from_json(nlohmann::json::parse(text),
                       std::filesystem::absolute(path).parent_path());
    } catch (const nlohmann::json::parse_error& ex) {
      throw DataError("config: " + path.string() + ": " + ex.what());
    }
  }

  /// Checks that every referenced input path resolves.
  void check_paths() const {
    std::error_code ec;
    if (!std::filesystem::is_directory(dataset_root, ec))
      throw DataError("config: dataset_root " + dataset_root.string() + " is not a directory");
    if (registry_path && !std::filesystem::exists(*registry_path, ec))
      throw DataError("config: registry " + registry_path->string() + " does not exist");
    if (odd_path && !std::filesystem::exists(*odd_path, ec))
      throw DataError("config: ODD spec " + odd_path->string() + " does not exist");
  }
};

/// Wires the modules into the validation workflow for one run.
class Pipeline {
 public:
  explicit Pipeline(Config config)
      : config_(std::move(config)),
        registry_(config_.registry_path ? CategoryRegistry::load(config_.registry_path->string())
                                        : default_registry()),
        store_(config_.store_path) {
    config_.check_paths();
    odd_ = config_.odd_path ? load_odd(*config_.odd_path) : default_odd(registry_);
    all_ids_ = dataset_ids(config_.dataset_root);
    run_id_ = compute_run_id(identity());
  }

  const Config& config() const { return config_; }
  const CategoryRegistry& registry() const { return registry_; }
  const OddSpec& odd() const { return odd_; }
  ReportStore& store() { return store_; }
  const std::string& run_id() const { return run_id_; }
  RenderParams render_params() const { return RenderParams{config_.render_seed}; }

  std::vector<std::string> style_ids() const {
    return config_.style_scenes.empty() ? all_ids_ : config_.style_scenes;
  }
  std::vector<std::string> baseline_ids() const {
    return config_.baseline_scenes.empty() ? style_ids() : config_.baseline_scenes;
  }
  std::vector<std::string> test_ids() const {
    return config_.test_scenes.empty() ? all_ids_ : config_.test_scenes;
  }

  /// Everything the run's outputs depend on, hashed into the run id.
  nlohmann::json identity() const {
    nlohmann::json cfg = config_.raw;
    cfg.erase("store");
    auto file_hash = [](const std::optional<std::filesystem::path>& p) {
      return p ? sha256_hex(read_file(*p)) : std::string("builtin");
    };
    return {{"config", cfg},
            {"registry", file_hash(config_.registry_path)},
            {"odd", file_hash(config_.odd_path)},
            {"style_ids", style_ids()},
            {"baseline_ids", baseline_ids()},
            {"test_ids", test_ids()},
            {"seeds", {{"cluster", config_.cluster_seed}, {"render", config_.render_seed}}},
            {"tool_version", kToolVersion}};
  }

  void ensure_run() {
    RunManifest m;
    m.run_id = run_id_;
    m.dataset_root = config_.dataset_root.string();
    m.registry_hash = config_.registry_path ? sha256_hex(read_file(*config_.registry_path)) : "builtin";
    m.odd_hash = config_.odd_path ? sha256_hex(read_file(*config_.odd_path)) : "builtin";
    m.config_hash = sha256_hex(identity()["config"].dump());
    m.style_scene_ids = style_ids();
    m.test_scene_ids = test_ids();
    m.seeds = {{"cluster", config_.cluster_seed}, {"render", config_.render_seed}};
    if (std::filesystem::exists(catalog_path())) m.catalog_hash = sha256_hex(read_file(catalog_path()));
    store_.create_run(m);
  }

  std::filesystem::path run_dir() const { return store_.run_dir(run_id_); }
  std::filesystem::path catalog_path() const {
    return config_.catalog_path ? *config_.catalog_path : run_dir() / "catalog.json";
  }

  std::vector<Scene> load_scenes(const std::vector<std::string>& ids) const {
    for (const auto& id : ids)
      if (std::find(all_ids_.begin(), all_ids_.end(), id) == all_ids_.end())
        throw DataError("dataset " + config_.dataset_root.string() + " has no scene '" + id + "'");
    return load_dataset(config_.dataset_root, registry_, config_.min_area, ids);
  }

  const Scene& test_scene(const std::string& id) {
    auto it = scene_cache_.find(id);
    if (it != scene_cache_.end()) return it->second;
    auto ids = test_ids();
    if (std::find(ids.begin(), ids.end(), id) == ids.end())
      throw NotFoundError("run " + run_id_ + " has no test scene '" + id + "'");
    auto scenes = load_scenes({id});
    return scene_cache_.emplace(id, std::move(scenes.front())).first->second;
  }

  // --- stages -------------------------------------------------------------

  StyleSpace encode() {
    ensure_run();
    StyleSpace space = build_style_space(load_scenes(style_ids()));
    store_.persist_report(run_id_, "style_space", to_json(space));
    return space;
  }

  StyleSpace load_style_space() const {
    if (!store_.has_report(run_id_, "style_space"))
      throw NotFoundError("run " + run_id_ + " has no style space; run `oddforge encode` first");
    return style_space_from_json(store_.load_report(run_id_, "style_space"));
  }

  StyleCatalog cluster(std::optional<std::size_t> k = std::nullopt,
                       std::optional<std::uint64_t> seed = std::nullopt) {
    StyleCatalog catalog = cluster_styles(load_style_space(), k.value_or(config_.k),
                                          seed.value_or(config_.cluster_seed));
    save_catalog(catalog);
    return catalog;
  }

  StyleCatalog load_catalog() const {
    auto path = catalog_path();
    if (!std::filesystem::exists(path))
      throw NotFoundError("no catalog at " + path.string() + "; run `oddforge cluster` first");
    try {
      return StyleCatalog::from_json(nlohmann::json::parse(read_file(path)));
    } catch (const nlohmann::json::parse_error& ex) {
      throw DataError("catalog " + path.string() + ": " + ex.what());
    }
  }

  void save_catalog(const StyleCatalog& catalog) {
    write_file_atomic(catalog_path(), canonical_dump(catalog.to_json()));
    ensure_run();
  }

  StyleCatalog label(const std::string& category, std::size_t index, const std::string& concept_name) {
    StyleCatalog catalog = load_catalog().label(registry_.resolve(category), index, concept_name);
    save_catalog(catalog);
    return catalog;
  }

  std::unique_ptr<Segmenter> segmenter() {
    std::optional<BaselineModel> baseline;
    if (config_.adapter.kind == AdapterKind::kBuiltinBaseline) {
      if (!baseline_) baseline_ = fit_baseline(load_scenes(baseline_ids()), registry_);
      baseline = baseline_;
    }
    return make_segmenter(config_.adapter, baseline, registry_);
  }

  static std::string variant_file(const std::string& scene, const std::string& cond) {
    return "renders/" + scene + "_" + cond + ".png";
  }
  static std::string prediction_file(const std::string& scene, const std::string& cond) {
    return "renders/" + scene + "_" + cond + ".pred.png";
  }
  static std::string frame_file(const std::string& scene, const std::string& from,
                                const std::string& to, std::size_t i) {
    return "renders/" + scene + "_" + from + "_" + to + "_" + std::to_string(i) + ".png";
  }

  struct SuiteOutcome {
    Suite suite;
    SuiteResults results;
  };

  SuiteOutcome suite() {
    ensure_run();
    StyleCatalog catalog = load_catalog();
    auto scenes = load_scenes(test_ids());
    Suite suite = build_condition_suite(scenes, catalog, odd_.conditions, render_params(), registry_,
                                        config_.parallelism);
    auto seg = segmenter();
    SuiteResults results = run_suite(suite, scenes, *seg, registry_);

    std::vector<std::string> samples;
    nlohmann::json styles = nlohmann::json::array();
    for (std::size_t i = 0; i < suite.variants.size(); ++i) {
      const auto& v = suite.variants[i];
      samples.push_back(v.sample_id());
      store_.persist_file(run_id_, variant_file(v.scene_id, v.condition), encode_png_rgb(v.image));
      if (results.variants[i].prediction)
        store_.persist_file(run_id_, prediction_file(v.scene_id, v.condition),
                            encode_png_mask(*results.variants[i].prediction));
      nlohmann::json regions = nlohmann::json::object();
      for (const auto& [rid, s] : v.styles) regions[std::to_string(rid)] = s.components;
      styles.push_back({{"scene", v.scene_id}, {"condition", v.condition}, {"styles", regions},
                        {"warnings", v.warnings}});
    }
    nlohmann::json report = to_json(results);
    report["render_seed"] = config_.render_seed;
    report["adapter"] = seg->identity();
    report["warnings"] = suite.warnings();
    store_.persist_report(run_id_, "suite", report);
    store_.persist_report(run_id_, "suite_styles",
                          {{"render_seed", config_.render_seed},
                           {"catalog_hash", sha256_hex(read_file(catalog_path()))},
                           {"variants", styles}});
    store_.register_samples(run_id_, samples);
    return {std::move(suite), std::move(results)};
  }

  SuiteResults load_suite_results() const {
    if (!store_.has_report(run_id_, "suite"))
      throw NotFoundError("run " + run_id_ + " has no suite report; run `oddforge suite` first");
    return suite_results_from_json(store_.load_report(run_id_, "suite"));
  }

  CategoryId focus_category(const std::optional<std::string>& override_name = std::nullopt) const {
    return registry_.resolve(override_name.value_or(config_.focus_category));
  }

  SweepResult sweep(const std::string& scene_id, const std::string& from, const std::string& to,
                    std::optional<int> steps = std::nullopt,
                    std::optional<std::string> focus = std::nullopt) {
    ensure_run();
    StyleCatalog catalog = load_catalog();
    const Scene& scene = test_scene(scene_id);
    auto seg = segmenter();
    SweepResult res = transition_sweep(scene, catalog, odd_.resolve(from), odd_.resolve(to),
                                       steps.value_or(odd_.steps), *seg, focus_category(focus),
                                       registry_, render_params(), odd_.drop_threshold);
    std::vector<std::string> samples;
    for (std::size_t i = 0; i < res.frames.size(); ++i) {
      store_.persist_file(run_id_, frame_file(scene_id, from, to, i), encode_png_rgb(res.frames[i].image));
      samples.push_back(sweep_sample_id(scene_id, from, to, i));
    }
    store_.persist_report(run_id_, sweep_report_name(scene_id, from, to), to_json(res, registry_));
    store_.register_samples(run_id_, samples);
    return res;
  }

  static std::string sweep_report_name(const std::string& scene, const std::string& from,
                                       const std::string& to) {
    return "sweep_" + scene + "_" + from + "_" + to;
  }

  /// Compliance over the stored suite results and the current verdicts.
  ComplianceReport compliance() const {
    return evaluate_compliance(load_suite_results(), odd_, store_.effective_verdicts(run_id_));
  }

  ComplianceReport comply() {
    ComplianceReport report = compliance();
    store_.persist_report(run_id_, "compliance", to_json(report, registry_));
    store_.persist_file(run_id_, "reports/compliance.csv", compliance_csv(report, registry_));
    return report;
  }

  VerdictAck verdict(const std::string& scene, const std::string& sample, VerdictKind kind,
                     const std::string& reason, const std::string& author) {
    Verdict v;
    v.run_id = run_id_;
    v.scene_id = scene;
    v.sample = sample;
    v.verdict = kind;
    v.reason = reason;
    v.author = author;
    return store_.record_verdict(v);
  }

 private:
  OddSpec load_odd(const std::filesystem::path& path) const {
    try {
      return OddSpec::from_json(nlohmann::json::parse(read_file(path)), registry_);
    } catch (const nlohmann::json::parse_error& ex) {
      throw DataError("ODD spec " + path.string() + ": " + ex.what());
    }
  }

  Config config_;
  CategoryRegistry registry_;
  ReportStore store_;
  OddSpec odd_;
  std::vector<std::string> all_ids_;
  std::string run_id_;
  std::optional<BaselineModel> baseline_;
  std::map<std::string, Scene> scene_cache_;
};

/// Exit status for a compliance outcome: 0 pass, 2 fail, 3 insufficient.
inline int compliance_exit_code(CellStatus overall) {
  switch (overall) {
    case CellStatus::kPass: return 0;
    case CellStatus::kFail: return 2;
    default: return 3;
  }
}

}  // namespace oddforge
