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

#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "oddforge/error.hpp"

namespace oddforge {

enum class VerdictKind { kAccepted, kRejected };

inline std::string to_string(VerdictKind k) {
  return k == VerdictKind::kAccepted ? "accepted" : "rejected";
}

inline VerdictKind parse_verdict_kind(const std::string& s) {
  if (s == "accepted" || s == "accept") return VerdictKind::kAccepted;
  if (s == "rejected" || s == "reject") return VerdictKind::kRejected;
  throw DataError("verdict must be 'accepted' or 'rejected', got '" + s + "'");
}

/// Sample identifiers: "<scene>/<condition>" for suite variants and
/// "<scene>/sweep:<from>-><to>:<step>" for transition frames.
inline std::string variant_sample_id(const std::string& scene, const std::string& condition) {
  return scene + "/" + condition;
}
inline std::string sweep_sample_id(const std::string& scene, const std::string& from,
                                   const std::string& to, std::size_t step) {
  return scene + "/sweep:" + from + "->" + to + ":" + std::to_string(step);
}

struct Verdict {
  std::string run_id;
  std::string scene_id;
  std::string sample;  // condition or sweep step identifier within the scene
  VerdictKind verdict = VerdictKind::kAccepted;
  std::string reason;
  std::string author;
  std::string timestamp;

  std::string sample_id() const { return scene_id + "/" + sample; }

  nlohmann::json to_json() const {
    return {{"run_id", run_id}, {"scene_id", scene_id},   {"sample", sample},
            {"verdict", to_string(verdict)}, {"reason", reason}, {"author", author},
            {"timestamp", timestamp}};
  }
  static Verdict from_json(const nlohmann::json& j) {
    try {
      Verdict v;
      v.run_id = j.value("run_id", "");
      v.scene_id = j.at("scene_id").get<std::string>();
      v.sample = j.at("sample").get<std::string>();
      v.verdict = parse_verdict_kind(j.at("verdict").get<std::string>());
      v.reason = j.value("reason", "");
      v.author = j.value("author", "");
      v.timestamp = j.value("timestamp", "");
      if (v.scene_id.empty() || v.sample.empty()) throw DataError("verdict: empty scene or sample");
      return v;
    } catch (const nlohmann::json::exception& ex) {
      throw DataError(std::string("verdict: malformed: ") + ex.what());
    }
  }
};

/// Effective verdict per sample id. Samples absent from the set are accepted.
struct VerdictSet {
  std::map<std::string, VerdictKind> effective;

  VerdictKind of(const std::string& sample_id) const {
    auto it = effective.find(sample_id);
    return it == effective.end() ? VerdictKind::kAccepted : it->second;
  }
  bool audited(const std::string& sample_id) const { return effective.count(sample_id) != 0; }
  bool rejected(const std::string& sample_id) const { return of(sample_id) == VerdictKind::kRejected; }
};

/// Latest verdict wins, per sample.
inline VerdictSet fold_verdicts(const std::vector<Verdict>& log) {
  VerdictSet set;
  for (const auto& v : log) set.effective[v.sample_id()] = v.verdict;
  return set;
}

}  // namespace oddforge
