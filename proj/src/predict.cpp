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

#include <cctype>
#include <chrono>

#include <json.hpp>

#include "hpfens/experiment.hpp"

namespace hpfens {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

std::string trimmed(std::string s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
  return s;
}

}  // namespace

void save_deployment_bundle(const BackboneSpec& backbone, const EnsembleModel& ensemble,
                            const LabelMap& label_map, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::kIOError, "cannot create bundle directory " + dir.string());
  const std::string backbone_text = backbone.to_json() + "\n";
  write_file_atomic(dir / "backbone.json", backbone_text);
  save_ensemble(ensemble, label_map, dir / "ensemble");
  json j;
  j["format"] = "hpfens-bundle-1";
  j["label_map"] = label_map.names();
  j["backbone_sha256"] = sha256_hex(backbone_text);
  j["extraction_hash"] = backbone.extraction_hash();
  j["ensemble_sha256"] = sha256_file_hex(dir / "ensemble" / "ensemble.json");
  j["feature_width"] = ensemble.members.front().feature_width();
  const std::string text = j.dump(2) + "\n";
  write_file_atomic(dir / "bundle.json", text);
  write_file_atomic(dir / "bundle.sha256", sha256_hex(text) + "\n");
}

SinglePrediction predict_single(const fs::path& bundle_dir, const fs::path& image_path) {
  const auto t0 = std::chrono::steady_clock::now();
  std::string text, recorded, backbone_text;
  try {
    text = read_file(bundle_dir / "bundle.json");
    recorded = read_file(bundle_dir / "bundle.sha256");
    backbone_text = read_file(bundle_dir / "backbone.json");
  } catch (const Error& e) {
    fail(ErrorCode::kBundleError, std::string("incomplete bundle: ") + e.what());
  }
  if (sha256_hex(text) != trimmed(recorded)) {
    fail(ErrorCode::kBundleError, "bundle.json hash mismatch in " + bundle_dir.string());
  }
  BackboneSpec spec;
  LabelMap label_map;
  std::size_t width = 0;
  try {
    const json j = json::parse(text);
    if (j.at("backbone_sha256").get<std::string>() != sha256_hex(backbone_text)) {
      fail(ErrorCode::kBundleError, "backbone.json hash mismatch");
    }
    if (j.at("ensemble_sha256").get<std::string>() !=
        sha256_file_hex(bundle_dir / "ensemble" / "ensemble.json")) {
      fail(ErrorCode::kBundleError, "ensemble.json hash mismatch");
    }
    spec = BackboneSpec::from_json(backbone_text);
    if (spec.extraction_hash() != j.at("extraction_hash").get<std::string>()) {
      fail(ErrorCode::kBundleError, "backbone model or preprocessing differs from training");
    }
    label_map = LabelMap(j.at("label_map").get<std::vector<std::string>>());
    width = j.at("feature_width").get<std::size_t>();
  } catch (const json::exception& e) {
    fail(ErrorCode::kBundleError, std::string("malformed bundle.json: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kBundleError) throw;
    fail(ErrorCode::kBundleError, e.what());
  }
  const EnsembleBundle ens = load_ensemble(bundle_dir / "ensemble");
  if (!(ens.label_map == label_map) || ens.model.members.front().feature_width() != width) {
    fail(ErrorCode::kBundleError, "ensemble does not match bundle metadata");
  }

  ImageSample sample;
  sample.path = image_path;
  sample.image = preprocess_image(image_path);
  const FeatureMatrix f = extract_features(spec, std::span<const ImageSample>(&sample, 1), 1);
  const EnsemblePrediction p = ensemble_predict(ens.model, f.values);

  SinglePrediction out;
  out.label_id = p.labels.front();
  out.class_name = label_map.name(out.label_id);
  out.probabilities.assign(p.probabilities.row(0).begin(), p.probabilities.row(0).end());
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace hpfens
