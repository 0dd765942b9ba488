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

// oddforge: command-line entry point for the ODD validation workflow.
//
//   oddforge synth    --out <dir>                 write a procedural demo dataset
//   oddforge validate --config <cfg>              check dataset layout and labels
//   oddforge encode   --config <cfg>              build the style space
//   oddforge cluster  --config <cfg> [--k --seed] cluster styles into a catalog
//   oddforge catalog  --config <cfg>              print cluster centers
//   oddforge label    --config <cfg> --category sky --index 2 --concept night
//   oddforge suite    --config <cfg>              render + score condition variants
//   oddforge sweep    --config <cfg> --scene <id> --from original --to night
//   oddforge comply   --config <cfg>              compliance report; exit 0/2/3
//   oddforge verdict  --config <cfg> --scene <id> --sample night --verdict rejected
//   oddforge serve    --config <cfg> [--addr 127.0.0.1:8787]

#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "oddforge/pipeline.hpp"
#include "oddforge/service.hpp"
#include "oddforge/synthetic.hpp"

namespace {

using oddforge::Pipeline;
using nlohmann::json;

struct Globals {
  std::string config = "config.json";
  bool json_output = false;
};

void summary(const Globals& g, const std::string& line, const json& body) {
  if (g.json_output) std::cout << body.dump() << "\n";
  else std::cout << line << "\n";
}

Pipeline open_pipeline(const Globals& g) { return Pipeline(oddforge::Config::load(g.config)); }

std::string fmt(const std::optional<double>& v) {
  if (!v) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", *v);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"oddforge - scenario-based ODD validation harness for rail-scene segmentation"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "Run configuration (JSON)");
  app.add_flag("--json", g.json_output, "Print a machine-readable summary");

  std::string synth_out;
  std::size_t synth_ref = 12, synth_test = 5;
  std::uint64_t synth_seed = 7;
  auto* synth = app.add_subcommand("synth", "Write a procedural demo dataset with config and ODD spec");
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--reference", synth_ref, "Reference (style) scenes");
  synth->add_option("--test", synth_test, "Test scenes");
  synth->add_option("--seed", synth_seed, "Layout seed");

  auto* validate = app.add_subcommand("validate", "Check the dataset layout and labels");
  auto* encode = app.add_subcommand("encode", "Encode region styles into the run's style space");

  std::optional<std::size_t> k;
  std::optional<std::uint64_t> seed;
  auto* cluster = app.add_subcommand("cluster", "Cluster the style space into a catalog");
  cluster->add_option("--k", k, "Clusters per category");
  cluster->add_option("--seed", seed, "Clustering seed");

  auto* catalog_cmd = app.add_subcommand("catalog", "Print the catalog's cluster centers");

  std::string category, concept_name;
  std::size_t index = 0;
  auto* label = app.add_subcommand("label", "Attach a concept name to a cluster");
  label->add_option("--category", category, "Category name or id")->required();
  label->add_option("--index", index, "Cluster index within the category")->required();
  label->add_option("--concept", concept_name, "Concept label, e.g. night")->required();

  auto* suite = app.add_subcommand("suite", "Render condition variants and score the model");

  std::string scene, from = "original", to = "night";
  std::optional<int> steps;
  std::optional<std::string> focus;
  auto* sweep = app.add_subcommand("sweep", "Score a transition between two conditions");
  sweep->add_option("--scene", scene, "Test scene id")->required();
  sweep->add_option("--from", from, "Start condition");
  sweep->add_option("--to", to, "End condition");
  sweep->add_option("--steps", steps, "Frames (>= 2)");
  sweep->add_option("--focus", focus, "Focus category");

  auto* comply = app.add_subcommand("comply", "Evaluate ODD compliance (exit 0 pass, 2 fail, 3 insufficient)");

  std::string sample, verdict_text, reason, author;
  auto* verdict = app.add_subcommand("verdict", "Record an auditor verdict on a sample");
  verdict->add_option("--scene", scene, "Scene id")->required();
  verdict->add_option("--sample", sample, "Condition, or sweep:<from>-><to>:<step>")->required();
  verdict->add_option("--verdict", verdict_text, "accepted | rejected")->required();
  verdict->add_option("--reason", reason, "Why");
  verdict->add_option("--author", author, "Who");

  std::string addr = "127.0.0.1:8787", ui_dir;
  auto* serve = app.add_subcommand("serve", "Run the audit HTTP service");
  serve->add_option("--addr", addr, "host:port to bind");
  serve->add_option("--ui-dir", ui_dir, "Built auditor UI bundle to serve at /");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      auto registry = oddforge::default_registry();
      auto layout = oddforge::synthetic::default_layout(synth_ref, synth_test, synth_seed);
      oddforge::synthetic::write_dataset(synth_out, layout, registry);
      summary(g, "wrote " + std::to_string(synth_ref + synth_test) + " scenes to " + synth_out,
              {{"scenes", synth_ref + synth_test}, {"root", synth_out}});
      return 0;
    }

    Pipeline pipeline = open_pipeline(g);

    if (validate->parsed()) {
      auto diags = oddforge::validate_dataset(pipeline.config().dataset_root, pipeline.registry());
      for (const auto& d : diags) std::cerr << d << "\n";
      summary(g, diags.empty() ? "dataset clean" : std::to_string(diags.size()) + " problem(s)",
              {{"diagnostics", diags}});
      return diags.empty() ? 0 : 1;
    }
    if (encode->parsed()) {
      auto space = pipeline.encode();
      summary(g, "encoded " + std::to_string(space.entries.size()) + " regions (run " + pipeline.run_id() + ")",
              {{"run_id", pipeline.run_id()}, {"entries", space.entries.size()}});
      return 0;
    }
    if (cluster->parsed()) {
      auto catalog = pipeline.cluster(k, seed);
      std::size_t clusters = 0;
      for (const auto& [c, cl] : catalog.categories()) clusters += cl.size();
      summary(g, "clustered " + std::to_string(catalog.categories().size()) + " categories into " +
                     std::to_string(clusters) + " clusters -> " + pipeline.catalog_path().string(),
              {{"run_id", pipeline.run_id()}, {"catalog", pipeline.catalog_path().string()},
               {"categories", catalog.categories().size()}, {"clusters", clusters}});
      return 0;
    }
    if (catalog_cmd->parsed()) {
      auto catalog = pipeline.load_catalog();
      if (g.json_output) {
        std::cout << catalog.to_json().dump() << "\n";
        return 0;
      }
      for (const auto& [cat, clusters] : catalog.categories()) {
        std::cout << pipeline.registry().at(cat).name << "\n";
        for (std::size_t i = 0; i < clusters.size(); ++i) {
          const auto& c = clusters[i];
          std::printf("  [%zu] n=%-4zu mean=(%.3f %.3f %.3f) std=(%.3f %.3f %.3f) %s\n", i, c.member_count,
                      c.center[0], c.center[1], c.center[2], c.center[3], c.center[4], c.center[5],
                      c.concept_label.value_or("").c_str());
        }
      }
      return 0;
    }
    if (label->parsed()) {
      pipeline.label(category, index, concept_name);
      summary(g, "labeled " + category + "[" + std::to_string(index) + "] as " + concept_name,
              {{"category", category}, {"index", index}, {"concept", concept_name}});
      return 0;
    }
    if (suite->parsed()) {
      auto out = pipeline.suite();
      std::string line = "suite: " + std::to_string(out.suite.variants.size()) + " variants";
      json conds = json::object();
      for (const auto& c : out.results.conditions) {
        auto agg = out.results.aggregate(c);
        std::optional<double> miou;
        if (agg) miou = oddforge::iou_from_matrix(*agg).mean_iou;
        line += ", " + c + " mIoU " + fmt(miou);
        conds[c] = miou ? json(*miou) : json(nullptr);
      }
      if (out.results.partial()) line += " (partial: some variants failed)";
      summary(g, line, {{"run_id", pipeline.run_id()}, {"variants", out.suite.variants.size()},
                        {"mean_iou", conds}, {"partial", out.results.partial()}});
      return 0;
    }
    if (sweep->parsed()) {
      auto res = pipeline.sweep(scene, from, to, steps, focus);
      std::string series;
      for (double v : res.focus_series) series += (series.empty() ? "" : " ") + fmt(v);
      std::string line = "sweep " + scene + " " + from + "->" + to + ": " +
                         std::to_string(res.frames.size()) + " frames, focus IoU [" + series + "], " +
                         std::to_string(res.flags.size()) + " flag(s)";
      json flags = json::array();
      for (const auto& f : res.flags) flags.push_back(f.to_json());
      summary(g, line, {{"run_id", pipeline.run_id()}, {"frames", res.frames.size()},
                        {"focus_series", res.focus_series}, {"flags", flags}});
      return 0;
    }
    if (comply->parsed()) {
      auto report = pipeline.comply();
      std::size_t failing = 0, insufficient = 0;
      for (const auto& c : report.cells) {
        failing += c.status == oddforge::CellStatus::kFail;
        insufficient += c.status == oddforge::CellStatus::kInsufficientEvidence;
      }
      summary(g, "compliance: " + oddforge::to_string(report.overall) + " (" + std::to_string(report.cells.size()) +
                     " cells, " + std::to_string(failing) + " failing, " + std::to_string(insufficient) +
                     " insufficient)",
              {{"run_id", pipeline.run_id()}, {"overall", oddforge::to_string(report.overall)},
               {"cells", report.cells.size()}, {"failing", failing}, {"insufficient", insufficient}});
      return oddforge::compliance_exit_code(report.overall);
    }
    if (verdict->parsed()) {
      auto ack = pipeline.verdict(scene, sample, oddforge::parse_verdict_kind(verdict_text), reason, author);
      summary(g, "verdict on " + ack.recorded.sample_id() + ": " + oddforge::to_string(ack.effective) +
                     " (history " + std::to_string(ack.history_length) + ")",
              {{"sample", ack.recorded.sample_id()}, {"effective", oddforge::to_string(ack.effective)},
               {"history_length", ack.history_length}});
      return 0;
    }
    if (serve->parsed()) {
      auto colon = addr.rfind(':');
      if (colon == std::string::npos) throw oddforge::DataError("--addr must be host:port");
      std::string host = addr.substr(0, colon);
      int port = std::stoi(addr.substr(colon + 1));
      oddforge::AuditService service(pipeline, {ui_dir});
      std::cerr << "serving run " << pipeline.run_id() << " on http://" << addr << "\n";
      if (!service.listen(host, port)) {
        std::cerr << "error: cannot bind " << addr << "\n";
        return 1;
      }
      return 0;
    }
  } catch (const oddforge::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
