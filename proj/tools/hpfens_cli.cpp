/*
 * Copyright 2026 The hpfens Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// hpfens command-line tool. Talks to the library only through the C API.
//
//   hpfens scan    --root DIR --labels lung [--out manifest.json]
//   hpfens extract --manifest manifest.json --backbone mock [--model FILE]
//   hpfens run     --config config.json [--output DIR] [--cache-dir DIR]
//   hpfens report  --result DIR [--out DIR]
//   hpfens predict --bundle DIR --image FILE
//   hpfens init    (prints a starting config)
//
// HPFENS_CACHE_DIR overrides the feature cache root unless --cache-dir is
// given. Exit codes: 0 ok, 2 config, 3 data, 4 model, 5 internal.

#include <cstdio>
#include <cstdlib>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "hpfens/hpfens.h"

namespace {

int report_failure(hpfens_status s) {
  std::fprintf(stderr, "error [%s]: %s\n", hpfens_status_name(s), hpfens_last_error());
  return hpfens_exit_code(s);
}

std::string take(char* s) {
  std::string out = s ? s : "";
  hpfens_string_free(s);
  return out;
}

std::string cache_dir_or(const std::string& flag, const std::string& fallback) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("HPFENS_CACHE_DIR"); env && *env) return env;
  return fallback;
}

int cmd_scan(const std::string& root, const std::string& labels, const std::string& out,
             const std::string& skip_report) {
  hpfens_manifest* m = nullptr;
  hpfens_status s = hpfens_scan_dataset(root.c_str(), labels.c_str(), &m);
  if (s != HPFENS_OK) return report_failure(s);
  s = hpfens_manifest_save(m, out.c_str());
  if (s == HPFENS_OK && !skip_report.empty()) {
    s = hpfens_manifest_write_skip_report(m, skip_report.c_str());
  }
  if (s == HPFENS_OK) {
    nlohmann::ordered_json j;
    j["manifest"] = out;
    j["dataset_id"] = hpfens_manifest_dataset_id(m);
    j["samples"] = hpfens_manifest_size(m);
    j["classes"] = hpfens_manifest_num_classes(m);
    j["skipped"] = hpfens_manifest_num_skipped(m);
    std::printf("%s\n", j.dump().c_str());
  }
  hpfens_manifest_free(m);
  return s == HPFENS_OK ? 0 : report_failure(s);
}

int cmd_extract(const std::string& manifest, const std::string& backbone, const std::string& model,
                const std::string& cache_dir, std::size_t batch) {
  hpfens_manifest* m = nullptr;
  hpfens_status s = hpfens_manifest_load(manifest.c_str(), &m);
  if (s != HPFENS_OK) return report_failure(s);
  nlohmann::ordered_json spec;
  spec["id"] = backbone;
  if (!model.empty()) spec["model_path"] = model;
  int hit = 0;
  double seconds = 0.0;
  std::size_t rows = 0, dim = 0;
  const std::string cache = cache_dir_or(cache_dir, "cache");
  s = hpfens_extract_features(m, spec.dump().c_str(), cache.c_str(), batch, &hit, &seconds, &rows,
                              &dim);
  hpfens_manifest_free(m);
  if (s != HPFENS_OK) return report_failure(s);
  nlohmann::ordered_json j;
  j["backbone"] = backbone;
  j["rows"] = rows;
  j["dim"] = dim;
  j["cache_hit"] = hit != 0;
  j["seconds"] = seconds;
  j["cache_dir"] = cache;
  std::printf("%s\n", j.dump().c_str());
  return 0;
}

int cmd_run(const std::string& config, const std::string& output, const std::string& cache_dir,
            bool no_report) {
  hpfens_config* c = nullptr;
  hpfens_status s = hpfens_config_load(config.c_str(), &c);
  if (s != HPFENS_OK) return report_failure(s);
  const std::string cache = cache_dir_or(cache_dir, "");
  if (!cache.empty()) s = hpfens_config_set_cache_dir(c, cache.c_str());
  if (s == HPFENS_OK && !output.empty()) s = hpfens_config_set_output_dir(c, output.c_str());
  hpfens_result* r = nullptr;
  if (s == HPFENS_OK) s = hpfens_run_experiment(c, no_report ? 0 : 1, &r);
  hpfens_config_free(c);
  if (s != HPFENS_OK) return report_failure(s);
  char* summary = nullptr;
  s = hpfens_result_summary_json(r, &summary);
  if (s == HPFENS_OK) {
    const auto j = nlohmann::ordered_json::parse(take(summary));
    nlohmann::ordered_json line;
    line["backbone"] = j["chosen_backbone"];
    line["mode"] = j["chosen_mode"];
    line["accuracy"] = hpfens_result_accuracy(r);
    line["selected"] = j["selection"]["selected"];
    std::printf("%s\n", line.dump().c_str());
  }
  hpfens_result_free(r);
  return s == HPFENS_OK ? 0 : report_failure(s);
}

int cmd_report(const std::string& result_dir, const std::string& out) {
  hpfens_result* r = nullptr;
  hpfens_status s = hpfens_result_load(result_dir.c_str(), &r);
  if (s != HPFENS_OK) return report_failure(s);
  const std::string dest = out.empty() ? result_dir + "/report" : out;
  char* files = nullptr;
  s = hpfens_result_emit_report(r, dest.c_str(), &files);
  hpfens_result_free(r);
  if (s != HPFENS_OK) return report_failure(s);
  nlohmann::ordered_json j;
  j["report_dir"] = dest;
  j["files"] = nlohmann::ordered_json::parse(take(files));
  std::printf("%s\n", j.dump().c_str());
  return 0;
}

int cmd_predict(const std::string& bundle, const std::string& image) {
  hpfens_prediction* p = nullptr;
  hpfens_status s = hpfens_predict_single(bundle.c_str(), image.c_str(), &p);
  if (s != HPFENS_OK) return report_failure(s);
  char* text = nullptr;
  s = hpfens_prediction_to_json(p, &text);
  hpfens_prediction_free(p);
  if (s != HPFENS_OK) return report_failure(s);
  std::printf("%s\n", take(text).c_str());
  return 0;
}

int cmd_init() {
  char* text = nullptr;
  const hpfens_status s = hpfens_config_default_json(&text);
  if (s != HPFENS_OK) return report_failure(s);
  std::printf("%s", take(text).c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Histopathology image classification with deep features and voting ensembles"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", hpfens_version());
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Suppress warnings");

  std::string root, labels = "lung", manifest_out = "manifest.json", skip_report;
  auto* scan = app.add_subcommand("scan", "Index a class-per-directory dataset");
  scan->add_option("--root", root, "Dataset root")->required();
  scan->add_option("--labels", labels, "Preset (lung, colon, lung_colon) or comma-separated classes");
  scan->add_option("--out", manifest_out, "Manifest file to write");
  scan->add_option("--skip-report", skip_report, "JSON-lines file listing skipped files");

  std::string manifest, backbone = "mock", model, cache_dir;
  std::size_t batch = 32;
  auto* extract = app.add_subcommand("extract", "Extract and cache features for a manifest");
  extract->add_option("--manifest", manifest, "Manifest from 'scan'")->required();
  extract->add_option("--backbone", backbone, "vgg16, vgg19, mobilenet, densenet169, densenet201 or mock");
  extract->add_option("--model", model, "ONNX model file (required for real backbones)");
  extract->add_option("--cache-dir", cache_dir, "Feature cache root");
  extract->add_option("--batch", batch, "Images per forward pass")->check(CLI::PositiveNumber);

  std::string config, output;
  bool no_report = false;
  auto* run = app.add_subcommand("run", "Run an experiment from a config file");
  run->add_option("--config", config, "Experiment config (JSON)")->required();
  run->add_option("--output", output, "Override the output directory");
  run->add_option("--cache-dir", cache_dir, "Override the feature cache root");
  run->add_flag("--no-report", no_report, "Skip tables and plots");

  std::string result_dir, report_out;
  auto* report = app.add_subcommand("report", "Write tables and plots for a finished run");
  report->add_option("--result", result_dir, "Output directory of 'run'")->required();
  report->add_option("--out", report_out, "Report directory (default: <result>/report)");

  std::string bundle, image;
  auto* predict = app.add_subcommand("predict", "Classify one image with a deployment bundle");
  predict->add_option("--bundle", bundle, "Bundle directory (<output>/bundle)")->required();
  predict->add_option("--image", image, "Image file")->required();

  auto* init = app.add_subcommand("init", "Print a starting config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  hpfens_set_warnings(quiet ? 0 : 1);

  if (*scan) return cmd_scan(root, labels, manifest_out, skip_report);
  if (*extract) return cmd_extract(manifest, backbone, model, cache_dir, batch);
  if (*run) return cmd_run(config, output, cache_dir, no_report);
  if (*report) return cmd_report(result_dir, report_out);
  if (*predict) return cmd_predict(bundle, image);
  if (*init) return cmd_init();
  return 2;
}
