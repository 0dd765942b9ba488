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

// Drives the oddforge executable the way a user would: every step is a
// separate process and state lives only in the dataset and the store.

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "oddforge/seg_eval.hpp"
#include "oddforge/subprocess.hpp"
#include "oddforge/synthetic.hpp"

namespace oddforge::testing {

struct CliResult {
  int exit_code = -1;
  std::string output;
  nlohmann::json summary;  // last line parsed as JSON, when possible
};

class Cli {
 public:
  /// Creates a fresh demo dataset under a temp directory.
  Cli() : root_(tmp_.path() / "data") {
    auto r = raw({"synth", "--out", root_.string()});
    if (r.exit_code != 0) throw Error("synth failed: " + r.output);
  }

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path config() const { return root_ / "config.json"; }

  CliResult raw(const std::vector<std::string>& args) const {
    std::string cmd = shell_quote(ODDFORGE_CLI) + " --json";
    for (const auto& a : args) cmd += " " + shell_quote(a);
    auto res = run_command(cmd, tmp_.path().string(), 120);
    CliResult out{res.timed_out ? -1 : res.exit_code, res.output, nullptr};
    auto end = res.output.find_last_not_of('\n');
    if (end != std::string::npos) {
      auto start = res.output.rfind('\n', end);
      start = start == std::string::npos ? 0 : start + 1;
      out.summary = nlohmann::json::parse(res.output.substr(start, end - start + 1), nullptr, false);
    }
    return out;
  }

  /// Runs a command against `config` (default: the dataset's config.json).
  CliResult run(std::vector<std::string> args, const std::filesystem::path& config = {}) const {
    args.insert(args.begin(), {"--config", (config.empty() ? this->config() : config).string()});
    return raw(args);
  }

  /// encode, cluster, label every cluster by eye (nearest weather look),
  /// then render and score the suite. Returns the run id.
  std::string prepare(const std::filesystem::path& config = {}) const {
    auto enc = run({"encode"}, config);
    expect_ok(enc, "encode");
    expect_ok(run({"cluster"}, config), "cluster");
    auto cat = run({"catalog"}, config);
    expect_ok(cat, "catalog");
    StyleCatalog catalog = StyleCatalog::from_json(cat.summary);
    auto registry = default_registry();
    using synthetic::Weather;
    for (const auto& name : synthetic::drawn_categories()) {
      CategoryId id = registry.resolve(name);
      if (!catalog.has_category(id)) continue;
      for (Weather w : {Weather::kSunny, Weather::kCloudy, Weather::kNight, Weather::kSnow}) {
        auto index = synthetic::nearest_cluster(catalog, id, name, w);
        catalog = catalog.label(id, index, synthetic::to_string(w));
        expect_ok(run({"label", "--category", name, "--index", std::to_string(index), "--concept",
                       synthetic::to_string(w)},
                      config),
                  "label");
      }
    }
    expect_ok(run({"suite"}, config), "suite");
    return enc.summary.at("run_id").get<std::string>();
  }

  std::filesystem::path store() const { return root_ / "store"; }
  std::filesystem::path run_dir(const std::string& run_id) const { return store() / "runs" / run_id; }

  static void expect_ok(const CliResult& r, const std::string& what) {
    if (r.exit_code != 0) throw Error(what + " failed (" + std::to_string(r.exit_code) + "): " + r.output);
  }

  /// Writes a copy of config.json with `patch` merged in and returns its path.
  std::filesystem::path patched_config(const std::string& name, const nlohmann::json& patch) const {
    auto cfg = nlohmann::json::parse(read_file(config()));
    cfg.merge_patch(patch);
    auto path = root_ / name;
    write_file_atomic(path, cfg.dump(2) + "\n");
    return path;
  }

 private:
  TempDir tmp_;
  std::filesystem::path root_;
};

}  // namespace oddforge::testing
