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

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "oddforge/error.hpp"
#include "oddforge/fsutil.hpp"
#include "oddforge/hash.hpp"
#include "oddforge/verdict.hpp"

namespace oddforge {

inline constexpr const char* kToolVersion = "0.3.0";

/// Canonical serialization used for every persisted report: sorted keys,
/// two-space indent, trailing newline.
inline std::string canonical_dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

inline std::string utc_timestamp() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  ::gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct RunManifest {
  std::string run_id;
  std::string tool_version = kToolVersion;
  std::string dataset_root;
  std::string registry_hash;
  std::string catalog_hash;
  std::string odd_hash;
  std::string config_hash;
  std::vector<std::string> style_scene_ids;
  std::vector<std::string> test_scene_ids;
  nlohmann::json seeds = nlohmann::json::object();
  std::string created_at;

  nlohmann::json to_json() const {
    return {{"run_id", run_id},
            {"tool_version", tool_version},
            {"dataset_root", dataset_root},
            {"registry_hash", registry_hash},
            {"catalog_hash", catalog_hash},
            {"odd_hash", odd_hash},
            {"config_hash", config_hash},
            {"style_scene_ids", style_scene_ids},
            {"test_scene_ids", test_scene_ids},
            {"seeds", seeds},
            {"created_at", created_at}};
  }
  static RunManifest from_json(const nlohmann::json& j) {
    RunManifest m;
    m.run_id = j.at("run_id").get<std::string>();
    m.tool_version = j.value("tool_version", "");
    m.dataset_root = j.value("dataset_root", "");
    m.registry_hash = j.value("registry_hash", "");
    m.catalog_hash = j.value("catalog_hash", "");
    m.odd_hash = j.value("odd_hash", "");
    m.config_hash = j.value("config_hash", "");
    m.style_scene_ids = j.value("style_scene_ids", std::vector<std::string>{});
    m.test_scene_ids = j.value("test_scene_ids", std::vector<std::string>{});
    m.seeds = j.value("seeds", nlohmann::json::object());
    m.created_at = j.value("created_at", "");
    return m;
  }
};

/// Content address of a run: hash over everything that determines its
/// outputs (config, input ids, input hashes, seeds).
inline std::string compute_run_id(const nlohmann::json& identity) {
  return sha256_hex(identity.dump()).substr(0, 16);
}

struct VerdictAck {
  Verdict recorded;
  VerdictKind effective = VerdictKind::kAccepted;
  std::size_t history_length = 0;  // verdicts recorded for this sample
};

/// Flat-file run store:
///   <root>/runs/<run_id>/manifest.json
///   <root>/runs/<run_id>/reports/<name>.json
///   <root>/runs/<run_id>/verdicts.ndjson
///   <root>/runs/<run_id>/renders/...
class ReportStore {
 public:
  explicit ReportStore(std::filesystem::path root) : root_(std::move(root)) {}

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path run_dir(const std::string& run_id) const { return root_ / "runs" / run_id; }

  bool has_run(const std::string& run_id) const {
    if (run_id.empty() || run_id.find('/') != std::string::npos || run_id.find("..") != std::string::npos)
      return false;
    std::error_code ec;
    return std::filesystem::exists(run_dir(run_id) / "manifest.json", ec);
  }

  std::vector<std::string> runs() const {
    std::vector<std::string> out;
    std::error_code ec;
    if (!std::filesystem::is_directory(root_ / "runs", ec)) return out;
    for (const auto& e : std::filesystem::directory_iterator(root_ / "runs"))
      if (e.is_directory() && std::filesystem::exists(e.path() / "manifest.json"))
        out.push_back(e.path().filename().string());
    std::sort(out.begin(), out.end());
    return out;
  }

  /// Creates or refreshes a run. An existing run keeps its creation time.
  void create_run(RunManifest manifest) {
    if (manifest.run_id.empty()) throw StoreError("create_run: empty run id");
    if (has_run(manifest.run_id)) {
      auto old = this->manifest(manifest.run_id);
      manifest.created_at = old.created_at;
      if (manifest.catalog_hash.empty()) manifest.catalog_hash = old.catalog_hash;
    }
    if (manifest.created_at.empty()) manifest.created_at = utc_timestamp();
    write_file_atomic(run_dir(manifest.run_id) / "manifest.json", canonical_dump(manifest.to_json()));
  }

  RunManifest manifest(const std::string& run_id) const {
    require_run(run_id);
    try {
      return RunManifest::from_json(nlohmann::json::parse(read_file(run_dir(run_id) / "manifest.json")));
    } catch (const nlohmann::json::exception& ex) {
      throw StoreError("run " + run_id + ": corrupt manifest: " + ex.what());
    }
  }

  std::filesystem::path persist_report(const std::string& run_id, const std::string& name,
                                       const nlohmann::json& report) {
    require_run(run_id);
    check_name(name);
    auto path = run_dir(run_id) / "reports" / (name + ".json");
    write_file_atomic(path, canonical_dump(report));
    return path;
  }

  bool has_report(const std::string& run_id, const std::string& name) const {
    return has_run(run_id) && std::filesystem::exists(run_dir(run_id) / "reports" / (name + ".json"));
  }

  nlohmann::json load_report(const std::string& run_id, const std::string& name) const {
    require_run(run_id);
    check_name(name);
    auto path = run_dir(run_id) / "reports" / (name + ".json");
    if (!std::filesystem::exists(path))
      throw NotFoundError("run " + run_id + " has no report '" + name + "'");
    try {
      return nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& ex) {
      throw StoreError("run " + run_id + ": corrupt report " + name + ": " + ex.what());
    }
  }

  std::vector<std::string> reports(const std::string& run_id) const {
    require_run(run_id);
    std::vector<std::string> out;
    std::error_code ec;
    auto dir = run_dir(run_id) / "reports";
    if (!std::filesystem::is_directory(dir, ec)) return out;
    for (const auto& e : std::filesystem::directory_iterator(dir))
      if (e.path().extension() == ".json") out.push_back(e.path().stem().string());
    std::sort(out.begin(), out.end());
    return out;
  }

  /// Writes an arbitrary artifact (e.g. renders/<file>.png) under the run.
  std::filesystem::path persist_file(const std::string& run_id, const std::filesystem::path& relative,
                                     std::string_view bytes) {
    require_run(run_id);
    check_relative(relative);
    auto path = run_dir(run_id) / relative;
    write_file_atomic(path, bytes);
    return path;
  }

  std::optional<std::string> read_artifact(const std::string& run_id,
                                           const std::filesystem::path& relative) const {
    require_run(run_id);
    check_relative(relative);
    auto path = run_dir(run_id) / relative;
    if (!std::filesystem::exists(path)) return std::nullopt;
    return read_file(path);
  }

  /// Adds sample ids that verdicts may refer to.
  void register_samples(const std::string& run_id, const std::vector<std::string>& samples) {
    std::lock_guard lock(mutex_);
    std::set<std::string> all = load_samples(run_id);
    all.insert(samples.begin(), samples.end());
    write_file_atomic(run_dir(run_id) / "samples.json",
                      canonical_dump(nlohmann::json(std::vector<std::string>(all.begin(), all.end()))));
  }

  bool sample_exists(const std::string& run_id, const std::string& sample_id) const {
    return load_samples(run_id).count(sample_id) != 0;
  }

  std::set<std::string> samples(const std::string& run_id) const { return load_samples(run_id); }

  /// Appends to the verdict log. Later verdicts supersede earlier ones for
  /// the same sample; the full history stays in the log.
  VerdictAck record_verdict(Verdict v) {
    std::lock_guard lock(mutex_);
    if (!sample_exists(v.run_id, v.sample_id()))
      throw NotFoundError("run " + v.run_id + " has no sample '" + v.sample_id() + "'");
    if (v.timestamp.empty()) v.timestamp = utc_timestamp();
    std::string line = v.to_json().dump() + "\n";
    auto path = run_dir(v.run_id) / "verdicts.ndjson";
    int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
    if (fd < 0) throw StoreError("cannot open " + path.string());
    ssize_t wrote = ::write(fd, line.data(), line.size());
    ::fsync(fd);
    ::close(fd);
    if (wrote != static_cast<ssize_t>(line.size())) throw StoreError("short write to " + path.string());
    VerdictAck ack;
    ack.recorded = v;
    for (const auto& old : verdict_log(v.run_id))
      if (old.sample_id() == v.sample_id()) {
        ++ack.history_length;
        ack.effective = old.verdict;
      }
    return ack;
  }

  /// Complete lines of the verdict log, oldest first. A trailing partial line
  /// (a write in progress) is ignored.
  std::vector<Verdict> verdict_log(const std::string& run_id) const {
    require_run(run_id);
    std::vector<Verdict> out;
    auto path = run_dir(run_id) / "verdicts.ndjson";
    if (!std::filesystem::exists(path)) return out;
    std::string data = read_file(path);
    std::size_t pos = 0;
    while (true) {
      auto nl = data.find('\n', pos);
      if (nl == std::string::npos) break;
      std::string line = data.substr(pos, nl - pos);
      pos = nl + 1;
      if (line.empty()) continue;
      try {
        out.push_back(Verdict::from_json(nlohmann::json::parse(line)));
      } catch (const std::exception& ex) {
        throw StoreError("run " + run_id + ": corrupt verdict log line: " + ex.what());
      }
    }
    return out;
  }

  VerdictSet effective_verdicts(const std::string& run_id) const {
    return fold_verdicts(verdict_log(run_id));
  }

 private:
  void require_run(const std::string& run_id) const {
    if (!has_run(run_id)) throw NotFoundError("unknown run '" + run_id + "'");
  }
  static void check_name(const std::string& name) {
    if (name.empty() || name.find('/') != std::string::npos || name.find("..") != std::string::npos)
      throw StoreError("invalid report name '" + name + "'");
  }
  static void check_relative(const std::filesystem::path& p) {
    if (p.is_absolute()) throw StoreError("artifact path must be relative");
    for (const auto& part : p)
      if (part == "..") throw StoreError("artifact path escapes the run directory");
  }
  std::set<std::string> load_samples(const std::string& run_id) const {
    require_run(run_id);
    auto path = run_dir(run_id) / "samples.json";
    if (!std::filesystem::exists(path)) return {};
    auto list = nlohmann::json::parse(read_file(path)).get<std::vector<std::string>>();
    return {list.begin(), list.end()};
  }

  std::filesystem::path root_;
  mutable std::mutex mutex_;
};

}  // namespace oddforge
