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

// Acceptance suite: prints one PASS/FAIL line per criterion and exits
// nonzero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cli_util.hpp"
#include "oddforge/catalog.hpp"
#include "oddforge/kmeans.hpp"
#include "oddforge/png_io.hpp"
#include "oddforge/renderer.hpp"
#include "oddforge/store.hpp"
#include "oddforge/sweep.hpp"
#include "test_util.hpp"

namespace oddforge {
namespace {

using Clock = std::chrono::steady_clock;
using kmeans::Point;
using nlohmann::json;
using testing::Cli;

/// Collects failure messages for one criterion.
class Check {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok && failures_.size() < 5) failures_.push_back(what);
    if (!ok) ++count_;
  }
  bool ok() const { return count_ == 0; }
  std::string detail() const {
    std::string s;
    for (const auto& f : failures_) s += (s.empty() ? "" : "; ") + f;
    if (count_ > failures_.size()) s += "; ... " + std::to_string(count_ - failures_.size()) + " more";
    return s;
  }

 private:
  std::vector<std::string> failures_;
  std::size_t count_ = 0;
};

std::string num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// 1, 2: IoU

SemanticMask random_mask(std::mt19937& rng, bool with_ignore) {
  std::uniform_int_distribution<int> cat(0, 18), coin(0, 9);
  SemanticMask m(16, 16);
  for (std::size_t i = 0; i < m.size(); ++i)
    m[i] = (with_ignore && coin(rng) == 0) ? 255 : static_cast<std::uint8_t>(cat(rng));
  return m;
}

void iou_brute_force(Check& check) {
  auto t0 = Clock::now();
  auto registry = default_registry();
  std::mt19937 rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    auto gt = random_mask(rng, true), pred = random_mask(rng, false);
    auto r = iou_from_matrix(confusion_accumulate(gt, pred, registry));
    double sum = 0;
    int present = 0;
    for (int c = 0; c < 19; ++c) {
      long inter = 0, uni = 0;
      for (std::size_t i = 0; i < gt.size(); ++i) {
        if (gt[i] == 255) continue;
        inter += gt[i] == c && pred[i] == c;
        uni += gt[i] == c || pred[i] == c;
      }
      if (uni == 0) {
        check.expect(!r.iou(c).has_value(), "absent category has an IoU");
        continue;
      }
      double want = static_cast<double>(inter) / static_cast<double>(uni);
      check.expect(r.iou(c) == want, "trial " + std::to_string(trial) + " category " + std::to_string(c));
      sum += want;
      ++present;
    }
    // The mean is a derived aggregate; summation order may move the last bit.
    check.expect(r.mean_iou && std::abs(*r.mean_iou - sum / present) <= 1e-15,
                 "trial " + std::to_string(trial) + " mean");
  }
  double secs = seconds_since(t0);
  check.expect(secs < 5.0, "took " + num(secs) + " s");
}

void iou_hand_example(Check& check) {
  auto r = iou_from_matrix(confusion_accumulate(SemanticMask(4, 1, {0, 0, 1, 1}),
                                                SemanticMask(4, 1, {0, 1, 1, 1}), default_registry()));
  check.expect(r.iou(0) == 0.5, "IoU(0) = " + num(r.iou(0).value_or(-1)));
  check.expect(r.iou(1) == 2.0 / 3.0, "IoU(1) = " + num(r.iou(1).value_or(-1)));
  check.expect(r.mean_iou == 7.0 / 12.0, "mean = " + num(r.mean_iou.value_or(-1)));
}

// ---------------------------------------------------------------------------
// 3, 4: clustering

StyleSpace space_of(const std::vector<Point>& pts) {
  StyleSpace space;
  for (std::size_t i = 0; i < pts.size(); ++i)
    space.entries.push_back({"s" + std::to_string(i), 0, 10, StyleVector(pts[i])});
  return space;
}

void kmeans_recovery(Check& check) {
  auto t0 = Clock::now();
  std::mt19937 rng(3);
  std::normal_distribution<double> noise(0.0, 0.01);
  std::vector<Point> means{{0.2, 0.3, 0.4, 0.05, 0.05, 0.05},
                           {0.8, 0.8, 0.9, 0.02, 0.02, 0.02},
                           {0.05, 0.05, 0.15, 0.1, 0.1, 0.1}};
  std::vector<Point> pts;
  std::vector<Point> sample_means(3, Point(6, 0.0));
  for (std::size_t b = 0; b < means.size(); ++b)
    for (int i = 0; i < 50; ++i) {
      Point p = means[b];
      for (auto& v : p) v += noise(rng);
      for (std::size_t d = 0; d < 6; ++d) sample_means[b][d] += p[d] / 50.0;
      pts.push_back(p);
    }
  auto first = canonical_dump(cluster_styles(space_of(pts), 3, 99).to_json());
  auto second = canonical_dump(cluster_styles(space_of(pts), 3, 99).to_json());
  check.expect(first == second, "catalog bytes differ between runs");
  auto catalog = StyleCatalog::from_json(json::parse(first));
  const auto& clusters = catalog.clusters(10);
  check.expect(clusters.size() == 3, "expected 3 clusters");
  for (const auto& m : sample_means) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& c : clusters)
      best = std::min(best, std::sqrt(kmeans::squared_distance(m, c.center.components)));
    check.expect(best <= 0.02, "blob mean is " + num(best) + " from the nearest center");
  }
  double secs = seconds_since(t0);
  check.expect(secs < 5.0, "took " + num(secs) + " s");
}

// Minimum within-cluster SSE over every assignment of n points to k labels.
double exhaustive_sse(const std::vector<Point>& pts, std::size_t k) {
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
      Point mean(dim, 0.0);
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

void kmeans_brute_force(Check& check) {
  std::mt19937 rng(4);
  std::uniform_real_distribution<double> u(0, 1);
  for (std::size_t n = 1; n <= 8; ++n)
    for (std::size_t k = 1; k <= 3; ++k)
      for (int rep = 0; rep < 5; ++rep) {
        std::vector<Point> pts(n, Point(6));
        for (auto& p : pts)
          for (auto& v : p) v = u(rng);
        double want = exhaustive_sse(pts, std::min(k, n));
        auto catalog = cluster_styles(space_of(pts), k, static_cast<std::uint64_t>(rep));
        double got = 0;
        for (const auto& p : pts) {
          double best = std::numeric_limits<double>::infinity();
          for (const auto& c : catalog.clusters(10))
            best = std::min(best, kmeans::squared_distance(p, c.center.components));
          got += best;
        }
        check.expect(std::abs(got - want) <= 1e-9 * std::max(1.0, want),
                     "n=" + std::to_string(n) + " k=" + std::to_string(k) + ": " + num(got) + " vs " + num(want));
      }
}

// ---------------------------------------------------------------------------
// 5, 6: rendering

Scene block_scene(const CategoryRegistry& registry) {
  SemanticMask m(64, 48);
  for (int y = 0; y < 48; ++y)
    for (int x = 0; x < 64; ++x) m(x, y) = x < 32 ? 10 : 16;  // two 1536 px regions
  return make_scene("blocks", SceneImage(64, 48, 0.0), m, registry);
}

void render_roundtrip(Check& check) {
  auto registry = default_registry();
  auto scene = block_scene(registry);
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> mean(0.25, 0.75), sd(0.0, 0.08);
  for (int trial = 0; trial < 20; ++trial) {
    StyleAssignment styles;
    for (const auto& r : scene.regions)
      styles[r.region_id] = StyleVector{mean(rng), mean(rng), mean(rng), sd(rng), sd(rng), sd(rng)};
    auto image = render(scene, styles, {static_cast<std::uint64_t>(trial)});
    for (const auto& region : scene.regions) {
      auto got = encode_region(image, region);
      const auto& want = styles.at(region.region_id);
      for (int c = 0; c < 3; ++c) {
        check.expect(std::abs(got.mean(c) - want.mean(c)) <= 0.02, "mean off by " + num(got.mean(c) - want.mean(c)));
        check.expect(std::abs(got.stddev(c) - want.stddev(c)) <= 0.05,
                     "std off by " + num(got.stddev(c) - want.stddev(c)));
      }
    }
  }
}

void transition_endpoints(Check& check) {
  auto registry = default_registry();
  auto scene = block_scene(registry);
  StyleAssignment a{{0, {0.5, 0.6, 0.7, 0.05, 0.05, 0.05}}, {1, {0.4, 0.4, 0.4, 0.1, 0.1, 0.1}}};
  StyleAssignment b{{0, {0.03, 0.04, 0.1, 0.01, 0.01, 0.01}}, {1, {0.2, 0.25, 0.2, 0.08, 0.08, 0.08}}};
  for (int steps : {2, 4, 7}) {
    auto frames = render_transition(scene, a, b, steps, {20240601});
    check.expect(encode_png_rgb(frames.front()) == encode_png_rgb(render(scene, a, {20240601})),
                 "lambda=0 frame differs (steps " + std::to_string(steps) + ")");
    check.expect(encode_png_rgb(frames.back()) == encode_png_rgb(render(scene, b, {20240601})),
                 "lambda=1 frame differs (steps " + std::to_string(steps) + ")");
  }
}

// ---------------------------------------------------------------------------
// 7: drop detection

void drop_detection(Check& check) {
  auto describe = [](const std::vector<DropFlag>& flags) {
    std::string s;
    for (const auto& f : flags)
      s += (s.empty() ? "" : ",") + to_string(f.kind) + "@" + std::to_string(f.step) + "->" +
           std::to_string(f.step + 1);
    return s;
  };
  struct Case {
    std::vector<double> series;
    std::string want;
  };
  std::vector<Case> cases{{{0.89, 0.90, 0.0, 0.0}, "drop@1->2"},
                          {{0.95, 0.01, 0.06, 0.91}, "drop@0->1,recovery@2->3"},
                          {{0.93, 0.93, 0.26, 0.10}, "drop@1->2"}};
  for (const auto& c : cases) {
    auto got = describe(detect_drops(c.series, 0.3));
    check.expect(got == c.want, "got '" + got + "', want '" + c.want + "'");
  }
}

// ---------------------------------------------------------------------------
// 8, 9: suites on the synthetic fixture

std::map<std::string, SemanticMask> ground_truth(const std::vector<Scene>& scenes) {
  std::map<std::string, SemanticMask> out;
  for (const auto& s : scenes) out.emplace(s.scene_id, s.mask);
  return out;
}

void suite_shape(Check& check, const testing::Fixture& f) {
  auto conditions = default_conditions(f.registry);
  check.expect(conditions.size() == 4, "expected 4 conditions");
  auto suite = build_condition_suite(f.test, f.catalog, conditions, {20240601}, f.registry);
  std::size_t originals = 0, others = 0;
  for (const auto& v : suite.variants) (v.is_original() ? originals : others) += 1;
  check.expect(f.test.size() == 5, "expected 5 fixture scenes");
  check.expect(others == 20, std::to_string(others) + " condition variants");
  check.expect(originals == 5, std::to_string(originals) + " originals");
  // Scoring every variant against its scene's labels with a segmenter that
  // returns those labels yields 1.0 only if the labels are shared unchanged.
  testing::OracleSegmenter oracle(ground_truth(f.test));
  auto results = run_suite(suite, f.test, oracle, f.registry);
  for (const auto& v : results.variants)
    check.expect(v.confusion && iou_from_matrix(*v.confusion).mean_iou == 1.0, v.scene_id + "/" + v.condition);
  for (const auto& v : suite.variants) {
    const Scene* scene = nullptr;
    for (const auto& s : f.test)
      if (s.scene_id == v.scene_id) scene = &s;
    check.expect(scene && v.styles.size() == scene->regions.size(), v.sample_id() + ": region set changed");
    if (!scene) continue;
    for (std::size_t p = 0; p < scene->mask.size(); ++p)
      if (!f.registry.is_category(scene->mask[p]))
        for (int c = 0; c < 3; ++c) check.expect(v.image.at(p, c) == 0.0, v.sample_id() + ": ignore pixel not black");
  }
}

void baseline_degradation(Check& check, const testing::Fixture& f) {
  auto suite = build_condition_suite(f.test, f.catalog, default_conditions(f.registry), {20240601}, f.registry);
  BaselineSegmenter seg(f.baseline());
  auto results = run_suite(suite, f.test, seg, f.registry);
  auto report = [&](const std::string& c) { return iou_from_matrix(*results.aggregate(c)); };
  auto original = report("original"), night = report("night"), snow = report("snow");
  check.expect(*night.mean_iou < *original.mean_iou,
               "night mIoU " + num(*night.mean_iou) + " vs original " + num(*original.mean_iou));
  check.expect(*snow.mean_iou < *original.mean_iou,
               "snow mIoU " + num(*snow.mean_iou) + " vs original " + num(*original.mean_iou));
  double worst = 0;
  for (std::size_t c = 0; c < 19; ++c)
    if (original.iou(c)) worst = std::max(worst, *original.iou(c) - night.iou(c).value_or(0.0));
  check.expect(worst >= 0.3, "largest night drop is " + num(worst));
}

// ---------------------------------------------------------------------------
// 10, 11: CLI and store

void pipeline_determinism(Check& check) {
  Cli a, b;
  a.prepare();
  b.prepare();
  auto ra = a.run({"comply"}), rb = b.run({"comply"});
  check.expect(ra.exit_code == 2, "default ODD comply exit " + std::to_string(ra.exit_code));
  check.expect(rb.exit_code == ra.exit_code, "second run exit differs");
  auto id = ra.summary.at("run_id").get<std::string>();
  for (const char* file : {"reports/compliance.json", "reports/compliance.csv"})
    check.expect(read_file(a.run_dir(id) / file) == read_file(b.run_dir(id) / file),
                 std::string(file) + " differs between runs");

  auto odd = json::parse(read_file(a.root() / "odd.json"));
  odd["default_threshold"] = 0.0;
  write_file_atomic(a.root() / "odd_lenient.json", odd.dump(2));
  auto lenient = a.patched_config("lenient.json", {{"odd", "odd_lenient.json"}});
  a.prepare(lenient);
  auto r = a.run({"comply"}, lenient);
  check.expect(r.exit_code == 0, "lenient ODD comply exit " + std::to_string(r.exit_code));
  for (const char* scene : {"test_00", "test_01", "test_02", "test_03", "test_04"})
    Cli::expect_ok(a.run({"verdict", "--scene", scene, "--sample", "night", "--verdict", "rejected"}, lenient),
                   "verdict");
  r = a.run({"comply"}, lenient);
  check.expect(r.exit_code == 3, "comply exit with night fully rejected " + std::to_string(r.exit_code));
}

struct Choice {
  std::string condition;
  std::string scene;
  CategoryId category = 0;
  double all = 0, rest = 0;
};

double cell_iou(const std::vector<ConfusionMatrix>& matrices, CategoryId c) {
  std::uint64_t tp = 0, gt = 0, pred = 0;
  for (const auto& m : matrices)
    for (std::size_t k = 0; k < m.size(); ++k) {
      gt += m(c, k);
      pred += m(k, c);
      if (k == c) tp += m(c, c);
    }
  return static_cast<double>(tp) / static_cast<double>(gt + pred - tp);
}

bool has_union(const std::vector<ConfusionMatrix>& matrices, CategoryId c) {
  for (const auto& m : matrices)
    for (std::size_t k = 0; k < m.size(); ++k)
      if (m(c, k) || m(k, c)) return true;
  return false;
}

void verdict_recompute(Check& check) {
  Cli cli;
  auto id = cli.prepare();
  auto suite = json::parse(read_file(cli.run_dir(id) / "reports/suite.json"));

  // Find the (condition, variant, category) whose exclusion raises the
  // aggregate IoU the most.
  std::map<std::string, std::vector<std::pair<std::string, ConfusionMatrix>>> by_condition;
  for (const auto& v : suite.at("variants"))
    if (v.at("condition") != "original")
      by_condition[v.at("condition")].emplace_back(v.at("scene"), ConfusionMatrix::from_json(v.at("confusion")));
  std::optional<Choice> best;
  for (const auto& [cond, items] : by_condition)
    for (std::size_t skip = 0; skip < items.size(); ++skip)
      for (CategoryId c = 0; c < 19; ++c) {
        std::vector<ConfusionMatrix> all, rest;
        for (std::size_t i = 0; i < items.size(); ++i) {
          all.push_back(items[i].second);
          if (i != skip) rest.push_back(items[i].second);
        }
        if (!has_union(rest, c)) continue;
        Choice ch{cond, items[skip].first, c, cell_iou(all, c), cell_iou(rest, c)};
        if (!best || ch.rest - ch.all > best->rest - best->all) best = ch;
      }
  check.expect(best && best->rest - best->all > 1e-6, "no variant lowers any cell");
  if (!check.ok()) return;
  auto registry = default_registry();
  std::string cat_name = registry.at(best->category).name;
  double threshold = (best->all + best->rest) / 2.0;

  auto odd = json::parse(read_file(cli.root() / "odd.json"));
  json kept = json::array();
  for (const auto& c : odd["conditions"])
    if (c["name"] == best->condition) kept.push_back(c);
  odd["conditions"] = kept;
  odd["default_threshold"] = 0.0;
  odd["thresholds"] = {{best->condition, {{cat_name, threshold}}}};
  write_file_atomic(cli.root() / "odd_single.json", odd.dump(2));
  auto config = cli.patched_config("single.json", {{"odd", "odd_single.json"}});
  auto run = cli.prepare(config);

  auto cell_of = [&](const json& report) -> json {
    for (const auto& c : report.at("cells"))
      if (c.at("condition") == best->condition && c.at("category_name") == cat_name) return c;
    return nullptr;
  };
  auto compliance = [&] { return json::parse(read_file(cli.run_dir(run) / "reports/compliance.json")); };

  auto r = cli.run({"comply"}, config);
  check.expect(r.exit_code == 2, "before verdict: exit " + std::to_string(r.exit_code));
  auto before = cell_of(compliance());
  check.expect(before.is_object() && before["status"] == "fail", "cell does not fail before the verdict");
  check.expect(before.is_object() && before["iou"] == best->all, "cell IoU before the verdict");

  Cli::expect_ok(cli.run({"verdict", "--scene", best->scene, "--sample", best->condition, "--verdict", "rejected",
                          "--reason", "artifact"},
                         config),
                 "verdict");
  r = cli.run({"comply"}, config);
  auto after = cell_of(compliance());
  check.expect(after.is_object() && after["status"] == "pass", "cell does not pass after rejecting " + best->scene);
  check.expect(after.is_object() && after["iou"] == best->rest,
               "cell IoU " + (after.is_object() ? after["iou"].dump() : "missing") + ", recomputed " + num(best->rest));
  check.expect(r.exit_code == 0, "after verdict: exit " + std::to_string(r.exit_code));

  for (const auto& [scene, m] : by_condition.at(best->condition))
    Cli::expect_ok(cli.run({"verdict", "--scene", scene, "--sample", best->condition, "--verdict", "rejected"}, config),
                   "verdict");
  r = cli.run({"comply"}, config);
  check.expect(r.exit_code == 3, "all rejected: exit " + std::to_string(r.exit_code));
  auto last = cell_of(compliance());
  check.expect(last.is_object() && last["status"] == "insufficient-evidence",
               "cell status with every variant rejected");
}

}  // namespace
}  // namespace oddforge

int main() {
  using namespace oddforge;
  auto shared_fixture = []() -> const testing::Fixture& {
    static const testing::Fixture f;
    return f;
  };
  std::vector<std::pair<std::string, std::function<void(Check&)>>> criteria{
      {"IoU matches brute-force pixel counting on 200 random 16x16 pairs", iou_brute_force},
      {"IoU hand example gives (0.5, 2/3) and mean 7/12", iou_hand_example},
      {"k-means recovers three blobs with identical catalog bytes", kmeans_recovery},
      {"k-means matches exhaustive optimum for n<=8, k<=3", kmeans_brute_force},
      {"encode of a render recovers the styles", render_roundtrip},
      {"transition endpoints equal direct renders", transition_endpoints},
      {"drop detection flags the reference series", drop_detection},
      {"5 scenes x 4 conditions give 20 variants plus 5 originals", [&](Check& c) { suite_shape(c, shared_fixture()); }},
      {"baseline degrades under night and snow", [&](Check& c) { baseline_degradation(c, shared_fixture()); }},
      {"pipeline is deterministic and comply exit codes are 0/2/3", pipeline_determinism},
      {"rejecting a variant recomputes its cell; rejecting all is insufficient", verdict_recompute},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Check check;
    try {
      criteria[i].second(check);
    } catch (const std::exception& e) {
      check.expect(false, std::string("exception: ") + e.what());
    }
    std::printf("%s %zu %s%s%s\n", check.ok() ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                check.ok() ? "" : " -- ", check.detail().c_str());
    failed += !check.ok();
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - static_cast<std::size_t>(failed), criteria.size());
  return failed == 0 ? 0 : 1;
}
