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

#include <cstdlib>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <tuple>
#include <vector>

#include "httplib.h"
#include "json.hpp"
#include "oddforge/error.hpp"
#include "oddforge/hash.hpp"
#include "oddforge/pipeline.hpp"
#include "oddforge/png_io.hpp"
#include "oddforge/store.hpp"

namespace oddforge {

struct ServiceOptions {
  std::filesystem::path ui_dir;  // built UI bundle; optional
};

/// HTTP facade for the audit loop. Only POST /api/runs/{run}/verdicts
/// mutates state; every other endpoint is a view over the store and the
/// deterministic renderer.
class AuditService {
 public:
  AuditService(Pipeline& pipeline, ServiceOptions options = {})
      : pipeline_(pipeline),
        options_(std::move(options)),
        adapter_slots_(static_cast<std::ptrdiff_t>(
            std::min<std::size_t>(pipeline.config().parallelism, 64))) {
    routes();
  }

  httplib::Server& server() { return server_; }

  /// Binds to `host:port` and serves until stop().
  bool listen(const std::string& host, int port) { return server_.listen(host, port); }
  int bind_to_any_port(const std::string& host) { return server_.bind_to_any_port(host); }
  bool listen_after_bind() { return server_.listen_after_bind(); }
  void stop() { server_.stop(); }

  struct RenderedFrame {
    std::string png;
    std::optional<double> focus_iou;
  };

 private:
  using Request = httplib::Request;
  using Response = httplib::Response;

  static void json_reply(Response& res, const nlohmann::json& body, int status = 200) {
    res.status = status;
    res.set_content(canonical_dump(body), "application/json; charset=utf-8");
  }

  static void error_reply(Response& res, int status, const std::string& code, const std::string& message) {
    json_reply(res, {{"status", status}, {"code", code}, {"message", message}}, status);
  }

  static void png_reply(Response& res, const std::string& png) {
    std::string etag = "\"" + sha256_hex(png).substr(0, 32) + "\"";
    res.set_header("ETag", etag);
    res.set_header("Cache-Control", "public, max-age=31536000, immutable");
    res.set_content(png, "image/png");
  }

  template <class Fn>
  static httplib::Server::Handler guarded(Fn fn) {
    return [fn](const Request& req, Response& res) {
      try {
        fn(req, res);
      } catch (const NotFoundError& e) {
        error_reply(res, 404, "not_found", e.what());
      } catch (const DataError& e) {
        error_reply(res, 422, "invalid", e.what());
      } catch (const AdapterError& e) {
        error_reply(res, 502, "adapter_failed", e.what());
      } catch (const std::exception& e) {
        error_reply(res, 500, "internal", e.what());
      }
    };
  }

  void require_run(const std::string& run) const {
    if (!pipeline_.store().has_run(run)) throw NotFoundError("unknown run '" + run + "'");
  }
  void require_served(const std::string& run) const {
    require_run(run);
    if (run != pipeline_.run_id())
      throw NotFoundError("run '" + run + "' is not the run served by this process (" +
                          pipeline_.run_id() + ")");
  }

  nlohmann::json suite_report(const std::string& run) const {
    require_run(run);
    return pipeline_.store().load_report(run, "suite");
  }

  void routes() {
    server_.Get("/api/runs", guarded([this](const Request&, Response& res) {
      nlohmann::json out = nlohmann::json::array();
      auto& store = pipeline_.store();
      for (const auto& id : store.runs()) {
        auto m = store.manifest(id);
        out.push_back({{"run_id", id},
                       {"created_at", m.created_at},
                       {"test_scenes", m.test_scene_ids.size()},
                       {"has_suite", store.has_report(id, "suite")},
                       {"served", id == pipeline_.run_id()}});
      }
      json_reply(res, out);
    }));

    server_.Get(R"(/api/runs/([^/]+)/scenes)", guarded([this](const Request& req, Response& res) {
      std::string run = req.matches[1];
      require_run(run);
      nlohmann::json out = nlohmann::json::array();
      if (pipeline_.store().has_report(run, "suite")) {
        std::map<std::string, std::size_t> counts;
        std::vector<std::string> order;
        auto report = suite_report(run);
        for (const auto& v : report.at("variants")) {
          auto scene = v.at("scene").get<std::string>();
          if (!counts.count(scene)) order.push_back(scene);
          ++counts[scene];
        }
        for (const auto& s : order) out.push_back({{"scene_id", s}, {"variants", counts[s]}});
      }
      json_reply(res, out);
    }));

    server_.Get(R"(/api/runs/([^/]+)/scenes/([^/]+)/variants)",
                guarded([this](const Request& req, Response& res) {
      std::string run = req.matches[1], scene = req.matches[2];
      auto report = suite_report(run);
      auto verdicts = pipeline_.store().effective_verdicts(run);
      nlohmann::json out = nlohmann::json::array();
      for (const auto& v : report.at("variants")) {
        if (v.at("scene") != scene) continue;
        auto cond = v.at("condition").get<std::string>();
        auto sample = variant_sample_id(scene, cond);
        nlohmann::json item = {{"condition", cond},
                               {"sample", sample},
                               {"status", v.at("status")},
                               {"verdict", to_string(verdicts.of(sample))},
                               {"audited", verdicts.audited(sample)},
                               {"image", "/api/runs/" + run + "/scenes/" + scene + "/overlay?variant=" + cond}};
        if (v.contains("iou")) {
          item["mean_iou"] = v["iou"].at("mean_iou");
          nlohmann::json per = nlohmann::json::object();
          const auto& cats = v["iou"].at("per_category");
          for (std::size_t c = 0; c < cats.size(); ++c)
            if (!cats[c].at("iou").is_null())
              per[pipeline_.registry().at(static_cast<CategoryId>(c)).name] = cats[c].at("iou");
          item["per_category"] = per;
        } else {
          item["error"] = v.value("error", "");
        }
        out.push_back(std::move(item));
      }
      if (out.empty()) throw NotFoundError("run " + run + " has no scene '" + scene + "'");
      json_reply(res, out);
    }));

    server_.Get(R"(/api/runs/([^/]+)/scenes/([^/]+)/render)",
                guarded([this](const Request& req, Response& res) {
      std::string run = req.matches[1], scene = req.matches[2];
      require_served(run);
      if (!req.has_param("from") || !req.has_param("to"))
        return error_reply(res, 400, "bad_request", "render needs from=, to= and lambda=");
      std::string from = req.get_param_value("from"), to = req.get_param_value("to");
      double lambda = 0.0;
      try {
        std::size_t used = 0;
        std::string text = req.get_param_value("lambda");
        lambda = std::stod(text, &used);
        if (used != text.size()) throw std::invalid_argument("trailing characters");
      } catch (const std::exception&) {
        return error_reply(res, 400, "bad_lambda", "lambda must be a number in [0,1]");
      }
      if (!(lambda >= 0.0 && lambda <= 1.0))
        return error_reply(res, 400, "bad_lambda", "lambda must be a number in [0,1]");
      std::optional<std::string> focus;
      if (req.has_param("focus")) focus = req.get_param_value("focus");
      auto frame = render_frame(scene, from, to, lambda, focus, res);
      if (!frame) return;
      res.set_header("X-Focus-Category",
                     pipeline_.registry().at(pipeline_.focus_category(focus)).name);
      if (frame->focus_iou) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", *frame->focus_iou);
        res.set_header("X-Focus-IoU", buf);
      } else {
        res.set_header("X-Focus-IoU", "absent");
      }
      png_reply(res, frame->png);
    }));

    server_.Get(R"(/api/runs/([^/]+)/scenes/([^/]+)/overlay)",
                guarded([this](const Request& req, Response& res) {
      std::string run = req.matches[1], scene = req.matches[2];
      require_run(run);
      std::string variant = req.get_param_value("variant");
      auto dir = pipeline_.store().run_dir(run);
      auto image_path = dir / Pipeline::variant_file(scene, variant);
      auto pred_path = dir / Pipeline::prediction_file(scene, variant);
      if (variant.empty() || !std::filesystem::exists(image_path) || !std::filesystem::exists(pred_path))
        throw NotFoundError("no prediction for variant '" + variant + "' of scene " + scene);
      png_reply(res, overlay_png(image_path, pred_path, pipeline_.registry()));
    }));

    server_.Post(R"(/api/runs/([^/]+)/verdicts)", guarded([this](const Request& req, Response& res) {
      std::string run = req.matches[1];
      require_served(run);
      Verdict v;
      try {
        v = Verdict::from_json(nlohmann::json::parse(req.body));
      } catch (const std::exception& e) {
        return error_reply(res, 422, "malformed_verdict", e.what());
      }
      v.run_id = run;
      std::lock_guard lock(pipeline_mutex_);
      bool has_suite = pipeline_.store().has_report(run, "suite");
      ComplianceReport before, after;
      if (has_suite) before = pipeline_.compliance();
      VerdictAck ack = pipeline_.store().record_verdict(v);
      if (has_suite) after = pipeline_.compliance();
      const auto& registry = pipeline_.registry();
      nlohmann::json affected = nlohmann::json::array(), changed = nlohmann::json::array();
      for (const auto& cell : after.cells) {
        if (cell.condition != v.sample) continue;
        affected.push_back(to_json(cell, registry));
        const auto* old = before.cell(cell.condition, cell.category_id);
        if (!old || old->iou != cell.iou || old->status != cell.status)
          changed.push_back(to_json(cell, registry));
      }
      json_reply(res, {{"verdict", ack.recorded.to_json()},
                       {"effective", to_string(ack.effective)},
                       {"history_length", ack.history_length},
                       {"overall", has_suite ? nlohmann::json(to_string(after.overall)) : nlohmann::json(nullptr)},
                       {"affected_cells", affected},
                       {"changed_cells", changed}});
    }));

    server_.Get(R"(/api/runs/([^/]+)/compliance)", guarded([this](const Request& req, Response& res) {
      std::string run = req.matches[1];
      require_run(run);
      if (run != pipeline_.run_id()) {
        json_reply(res, pipeline_.store().load_report(run, "compliance"));
        return;
      }
      std::lock_guard lock(pipeline_mutex_);
      json_reply(res, to_json(pipeline_.compliance(), pipeline_.registry()));
    }));

    std::error_code ec;
    if (!options_.ui_dir.empty() && std::filesystem::is_directory(options_.ui_dir, ec)) {
      server_.set_mount_point("/", options_.ui_dir.string());
    } else {
      server_.Get("/", [](const Request&, Response& res) {
        res.set_content(
            "<!doctype html><title>oddforge audit</title><p>The auditor UI bundle is not installed. "
            "The API is available under <code>/api</code>.</p>",
            "text/html; charset=utf-8");
      });
    }
  }

  std::optional<RenderedFrame> render_frame(const std::string& scene_id, const std::string& from,
                                            const std::string& to, double lambda,
                                            const std::optional<std::string>& focus, Response& res) {
    std::string adapter = pipeline_.config().adapter.identity();
    CategoryId focus_id = pipeline_.focus_category(focus);
    auto key = std::make_tuple(scene_id, from, to, lambda, adapter, focus_id);
    {
      std::lock_guard lock(cache_mutex_);
      auto it = cache_.find(key);
      if (it != cache_.end()) return it->second;
    }
    if (!adapter_slots_.try_acquire()) {
      res.set_header("Retry-After", "1");
      error_reply(res, 503, "computing", "the model is busy; retry shortly");
      return std::nullopt;
    }
    struct Release {
      std::counting_semaphore<64>& s;
      ~Release() { s.release(); }
    } release{adapter_slots_};

    Scene scene;
    StyleAssignment a, b;
    std::unique_ptr<Segmenter> seg;
    {
      std::lock_guard lock(pipeline_mutex_);
      scene = pipeline_.test_scene(scene_id);
      auto catalog = pipeline_.load_catalog();
      auto original = encode_scene(scene);
      a = condition_assignment(scene, original, catalog, pipeline_.odd().resolve(from));
      b = condition_assignment(scene, original, catalog, pipeline_.odd().resolve(to));
      seg = pipeline_.segmenter();
    }
    SceneImage image = render(scene, interpolate_assignment(a, b, lambda), pipeline_.render_params());
    RenderedFrame frame;
    frame.png = encode_png_rgb(image);
    SemanticMask pred = seg->predict(image, scene_id + "@" + std::to_string(lambda));
    frame.focus_iou = iou_from_matrix(confusion_accumulate(scene.mask, pred, pipeline_.registry())).iou(focus_id);
    std::lock_guard lock(cache_mutex_);
    return cache_.emplace(key, std::move(frame)).first->second;
  }

 public:
  /// Prediction colorized with registry colors, blended 50/50 over the image.
  static std::string overlay_png(const std::filesystem::path& image_path,
                                 const std::filesystem::path& pred_path,
                                 const CategoryRegistry& registry) {
    int w = 0, h = 0;
    auto rgb = read_png_rgb8(image_path.string(), w, h);
    SemanticMask pred = read_png_mask(pred_path.string());
    if (pred.width() != w || pred.height() != h)
      throw DataError("overlay: prediction and image sizes differ");
    for (std::size_t p = 0; p < pred.size(); ++p) {
      if (!registry.is_category(pred[p])) continue;
      const auto& color = registry.at(pred[p]).color;
      for (int c = 0; c < 3; ++c) {
        unsigned v = rgb[p * 3 + c];
        rgb[p * 3 + c] = static_cast<std::uint8_t>((v + color[c] + 1) / 2);
      }
    }
    return encode_png_rgb8(rgb, w, h);
  }

 private:
  Pipeline& pipeline_;
  ServiceOptions options_;
  httplib::Server server_;
  std::mutex pipeline_mutex_;
  std::mutex cache_mutex_;
  std::map<std::tuple<std::string, std::string, std::string, double, std::string, CategoryId>, RenderedFrame> cache_;
  std::counting_semaphore<64> adapter_slots_;
};

}  // namespace oddforge
