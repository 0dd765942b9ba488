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

#include <stdlib.h>

#include <array>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "oddforge/error.hpp"
#include "oddforge/fsutil.hpp"
#include "oddforge/image.hpp"
#include "oddforge/png_io.hpp"
#include "oddforge/registry.hpp"
#include "oddforge/scene.hpp"
#include "oddforge/subprocess.hpp"

namespace oddforge {

/// Rows are ground truth, columns are predictions. Ignore pixels are never
/// counted.
class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::size_t categories)
      : size_(categories), counts_(categories * categories, 0) {}

  std::size_t size() const { return size_; }
  std::uint64_t operator()(std::size_t gt, std::size_t pred) const { return counts_[gt * size_ + pred]; }
  void add(std::size_t gt, std::size_t pred, std::uint64_t n = 1) { counts_[gt * size_ + pred] += n; }

  std::uint64_t total() const {
    std::uint64_t t = 0;
    for (auto c : counts_) t += c;
    return t;
  }
  std::uint64_t true_positives(std::size_t c) const { return (*this)(c, c); }
  std::uint64_t gt_count(std::size_t c) const {
    std::uint64_t t = 0;
    for (std::size_t p = 0; p < size_; ++p) t += (*this)(c, p);
    return t;
  }
  std::uint64_t pred_count(std::size_t c) const {
    std::uint64_t t = 0;
    for (std::size_t g = 0; g < size_; ++g) t += (*this)(g, c);
    return t;
  }
  std::uint64_t false_positives(std::size_t c) const { return pred_count(c) - true_positives(c); }
  std::uint64_t false_negatives(std::size_t c) const { return gt_count(c) - true_positives(c); }

  ConfusionMatrix& operator+=(const ConfusionMatrix& other) {
    if (other.size_ != size_) throw DataError("confusion: category count mismatch");
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
    return *this;
  }

  // Sparse form: list of [gt, pred, count] for non-zero cells.
  nlohmann::json to_json() const {
    nlohmann::json cells = nlohmann::json::array();
    for (std::size_t g = 0; g < size_; ++g)
      for (std::size_t p = 0; p < size_; ++p)
        if (auto n = (*this)(g, p)) cells.push_back({g, p, n});
    return {{"categories", size_}, {"cells", cells}};
  }
  static ConfusionMatrix from_json(const nlohmann::json& j) {
    ConfusionMatrix m(j.at("categories").get<std::size_t>());
    for (const auto& cell : j.at("cells")) {
      auto g = cell.at(0).get<std::size_t>(), p = cell.at(1).get<std::size_t>();
      if (g >= m.size_ || p >= m.size_) throw DataError("confusion: cell out of range");
      m.add(g, p, cell.at(2).get<std::uint64_t>());
    }
    return m;
  }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::size_t size_ = 0;
  std::vector<std::uint64_t> counts_;
};

inline ConfusionMatrix confusion_accumulate(const SemanticMask& gt, const SemanticMask& pred,
                                            const CategoryRegistry& registry) {
  if (gt.width() != pred.width() || gt.height() != pred.height())
    throw DataError("confusion: ground truth is " + std::to_string(gt.width()) + "x" +
                    std::to_string(gt.height()) + " but prediction is " +
                    std::to_string(pred.width()) + "x" + std::to_string(pred.height()));
  ConfusionMatrix m(registry.size());
  for (std::size_t i = 0; i < gt.size(); ++i) {
    std::uint8_t g = gt[i];
    if (g == registry.ignore_id()) continue;
    if (!registry.is_category(g)) throw DataError("confusion: unregistered ground-truth label " + std::to_string(g));
    std::uint8_t p = pred[i];
    if (!registry.is_category(p))
      throw DataError("confusion: unregistered prediction value " + std::to_string(p) + " at pixel (" +
                      std::to_string(i % gt.width()) + "," + std::to_string(i / gt.width()) + ")");
    m.add(g, p);
  }
  return m;
}

/// Per-category IoU = TP / (TP + FP + FN). A category is absent (nullopt)
/// when its union is empty.
struct IouReport {
  std::vector<std::optional<double>> per_category;
  std::vector<std::uint64_t> intersection;
  std::vector<std::uint64_t> union_count;
  std::vector<std::uint64_t> gt_pixels;
  std::uint64_t scored_pixels = 0;
  /// Unweighted mean over present categories; undefined with no scored pixels.
  std::optional<double> mean_iou;
  /// Mean over all categories with absent ones counted as 0.
  std::optional<double> mean_iou_all;
  /// Ground-truth-frequency-weighted mean.
  std::optional<double> frequency_weighted_iou;

  std::optional<double> iou(std::size_t c) const { return per_category.at(c); }
  std::size_t present_count() const {
    std::size_t n = 0;
    for (const auto& v : per_category) n += v.has_value();
    return n;
  }
};

inline IouReport iou_from_matrix(const ConfusionMatrix& m) {
  const std::size_t c_count = m.size();
  IouReport r;
  r.per_category.assign(c_count, std::nullopt);
  r.intersection.assign(c_count, 0);
  r.union_count.assign(c_count, 0);
  r.gt_pixels.assign(c_count, 0);
  r.scored_pixels = m.total();
  // Means accumulate in extended precision so simple ratios round to the
  // nearest double, e.g. mean(1/2, 2/3) == 7.0 / 12.0.
  long double sum = 0.0L, weighted = 0.0L;
  std::size_t present = 0;
  for (std::size_t c = 0; c < c_count; ++c) {
    std::uint64_t tp = m.true_positives(c), gt = m.gt_count(c), pred = m.pred_count(c);
    std::uint64_t uni = gt + pred - tp;
    r.intersection[c] = tp;
    r.union_count[c] = uni;
    r.gt_pixels[c] = gt;
    if (uni == 0) continue;
    double v = static_cast<double>(tp) / static_cast<double>(uni);
    r.per_category[c] = v;
    long double exact = static_cast<long double>(tp) / static_cast<long double>(uni);
    sum += exact;
    weighted += exact * static_cast<long double>(gt);
    ++present;
  }
  if (r.scored_pixels > 0 && present > 0) {
    r.mean_iou = static_cast<double>(sum / static_cast<long double>(present));
    r.mean_iou_all = static_cast<double>(sum / static_cast<long double>(c_count));
    r.frequency_weighted_iou = static_cast<double>(weighted / static_cast<long double>(r.scored_pixels));
  }
  return r;
}

namespace detail {
inline nlohmann::json opt_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}
}  // namespace detail

inline nlohmann::json to_json(const IouReport& r) {
  nlohmann::json per = nlohmann::json::array();
  for (std::size_t c = 0; c < r.per_category.size(); ++c)
    per.push_back({{"iou", detail::opt_json(r.per_category[c])},
                   {"intersection", r.intersection[c]},
                   {"union", r.union_count[c]}});
  return {{"per_category", per},
          {"scored_pixels", r.scored_pixels},
          {"mean_iou", detail::opt_json(r.mean_iou)},
          {"mean_iou_all_categories", detail::opt_json(r.mean_iou_all)},
          {"frequency_weighted_iou", detail::opt_json(r.frequency_weighted_iou)},
          {"mean_definition", "macro mean over categories with non-empty union"}};
}

/// Nearest-centroid color classifier used as the built-in model under test.
struct BaselineModel {
  std::vector<std::optional<std::array<double, 3>>> centroids;  // indexed by category id

  bool fitted(std::size_t c) const { return c < centroids.size() && centroids[c].has_value(); }

  nlohmann::json to_json() const {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& c : centroids)
      out.push_back(c ? nlohmann::json{(*c)[0], (*c)[1], (*c)[2]} : nlohmann::json(nullptr));
    return {{"centroids", out}};
  }
  static BaselineModel from_json(const nlohmann::json& j) {
    BaselineModel m;
    for (const auto& c : j.at("centroids")) {
      if (c.is_null()) m.centroids.emplace_back();
      else m.centroids.emplace_back(std::array<double, 3>{c.at(0).get<double>(), c.at(1).get<double>(), c.at(2).get<double>()});
    }
    return m;
  }
};

inline BaselineModel fit_baseline(const std::vector<Scene>& scenes, const CategoryRegistry& registry) {
  if (scenes.empty()) throw DataError("fit_baseline: no scenes");
  const std::size_t c_count = registry.size();
  std::vector<std::array<double, 3>> sums(c_count, {0.0, 0.0, 0.0});
  std::vector<std::uint64_t> counts(c_count, 0);
  for (const auto& s : scenes) {
    for (std::size_t i = 0; i < s.mask.size(); ++i) {
      std::uint8_t c = s.mask[i];
      if (!registry.is_category(c)) continue;
      ++counts[c];
      for (int ch = 0; ch < 3; ++ch) sums[c][ch] += s.image.at(i, ch);
    }
  }
  BaselineModel m;
  m.centroids.resize(c_count);
  for (std::size_t c = 0; c < c_count; ++c) {
    if (counts[c] == 0) continue;
    std::array<double, 3> mean{};
    for (int ch = 0; ch < 3; ++ch) mean[ch] = sums[c][ch] / static_cast<double>(counts[c]);
    m.centroids[c] = mean;
  }
  return m;
}

/// Each pixel gets the fitted category whose centroid is nearest in RGB;
/// ties go to the lowest category id.
inline SemanticMask predict_baseline(const BaselineModel& model, const SceneImage& image) {
  bool any = false;
  for (const auto& c : model.centroids) any = any || c.has_value();
  if (!any) throw AdapterError("baseline: model has no fitted categories");
  SemanticMask out(image.width(), image.height(), 0);
  for (std::size_t p = 0; p < image.pixel_count(); ++p) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_c = 0;
    for (std::size_t c = 0; c < model.centroids.size(); ++c) {
      if (!model.centroids[c]) continue;
      double d = 0.0;
      for (int ch = 0; ch < 3; ++ch) {
        double t = image.at(p, ch) - (*model.centroids[c])[ch];
        d += t * t;
      }
      if (d < best) {
        best = d;
        best_c = c;
      }
    }
    out[p] = static_cast<std::uint8_t>(best_c);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Model adapters

enum class AdapterKind { kBuiltinBaseline, kExternalCommand };

struct ModelAdapter {
  AdapterKind kind = AdapterKind::kBuiltinBaseline;
  std::string command;
  std::string working_dir;
  double timeout_seconds = 300.0;

  std::string identity() const {
    return kind == AdapterKind::kBuiltinBaseline ? std::string("builtin-baseline")
                                                 : "external:" + command + "@" + working_dir;
  }
};

struct PredictionRequest {
  std::string sample_id;
  const SceneImage* image = nullptr;
};

struct PredictionOutcome {
  std::optional<SemanticMask> mask;
  std::string error;
  bool ok() const { return mask.has_value(); }
};

/// The model under test. Implementations must be safe to call from one
/// thread at a time.
class Segmenter {
 public:
  virtual ~Segmenter() = default;
  virtual std::vector<PredictionOutcome> predict_batch(const std::vector<PredictionRequest>& batch) = 0;
  virtual std::string identity() const = 0;

  SemanticMask predict(const SceneImage& image, const std::string& sample_id = "sample") {
    auto out = predict_batch({{sample_id, &image}});
    if (!out.at(0).ok()) throw AdapterError(out[0].error);
    return std::move(*out[0].mask);
  }
};

class BaselineSegmenter : public Segmenter {
 public:
  explicit BaselineSegmenter(BaselineModel model) : model_(std::move(model)) {}
  std::vector<PredictionOutcome> predict_batch(const std::vector<PredictionRequest>& batch) override {
    std::vector<PredictionOutcome> out;
    for (const auto& req : batch) out.push_back({predict_baseline(model_, *req.image), {}});
    return out;
  }
  std::string identity() const override { return "builtin-baseline"; }
  const BaselineModel& model() const { return model_; }

 private:
  BaselineModel model_;
};

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "oddforge-XXXXXX").string();
    if (!::mkdtemp(tmpl.data())) throw StoreError("cannot create temporary directory");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// Batch protocol: `<cmd> --input <dir> --output <dir>`; the command must
/// write `<id>.png` (8-bit gray mask) for every `<id>.png` it was given and
/// exit 0.
class ExternalSegmenter : public Segmenter {
 public:
  ExternalSegmenter(ModelAdapter adapter, CategoryRegistry registry)
      : adapter_(std::move(adapter)), registry_(std::move(registry)) {
    if (adapter_.command.empty()) throw AdapterError("external adapter: empty command");
  }

  std::vector<PredictionOutcome> predict_batch(const std::vector<PredictionRequest>& batch) override {
    std::vector<PredictionOutcome> out(batch.size());
    if (batch.empty()) return out;
    TempDir tmp;
    auto in_dir = tmp.path() / "input", out_dir = tmp.path() / "output";
    std::filesystem::create_directories(in_dir);
    std::filesystem::create_directories(out_dir);
    std::vector<std::string> names;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "s%06zu", i);
      names.emplace_back(name);
      write_png_rgb((in_dir / (names.back() + ".png")).string(), *batch[i].image);
    }
    std::string cmd = adapter_.command + " --input " + shell_quote(in_dir.string()) +
                      " --output " + shell_quote(out_dir.string());
    CommandResult res = run_command(cmd, adapter_.working_dir, adapter_.timeout_seconds);
    std::string failure;
    if (res.timed_out) {
      failure = "command '" + adapter_.command + "' timed out after " +
                std::to_string(adapter_.timeout_seconds) + " s";
    } else if (res.exit_code != 0) {
      failure = "command '" + adapter_.command + "' exited with code " +
                std::to_string(res.exit_code);
    }
    if (!failure.empty()) {
      if (!res.output.empty()) failure += ": " + res.output;
      for (auto& o : out) o.error = failure;
      return out;
    }
    for (std::size_t i = 0; i < batch.size(); ++i) {
      auto path = out_dir / (names[i] + ".png");
      try {
        if (!std::filesystem::exists(path))
          throw AdapterError("command '" + adapter_.command + "' wrote no mask for sample " +
                             batch[i].sample_id);
        SemanticMask m = read_png_mask(path.string());
        if (m.width() != batch[i].image->width() || m.height() != batch[i].image->height())
          throw AdapterError("command '" + adapter_.command + "' returned a " +
                             std::to_string(m.width()) + "x" + std::to_string(m.height()) +
                             " mask for sample " + batch[i].sample_id);
        m.validate(registry_, "adapter output for " + batch[i].sample_id);
        out[i].mask = std::move(m);
      } catch (const Error& e) {
        out[i].error = e.what();
      }
    }
    return out;
  }

  std::string identity() const override { return adapter_.identity(); }

 private:
  ModelAdapter adapter_;
  CategoryRegistry registry_;
};

inline std::unique_ptr<Segmenter> make_segmenter(const ModelAdapter& adapter,
                                                 const std::optional<BaselineModel>& baseline,
                                                 const CategoryRegistry& registry) {
  if (adapter.kind == AdapterKind::kBuiltinBaseline) {
    if (!baseline) throw AdapterError("builtin adapter requires a fitted baseline model");
    return std::make_unique<BaselineSegmenter>(*baseline);
  }
  return std::make_unique<ExternalSegmenter>(adapter, registry);
}

}  // namespace oddforge
