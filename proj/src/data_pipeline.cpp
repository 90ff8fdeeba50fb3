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

#include "hpfens/data_pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace hpfens {

namespace fs = std::filesystem;
using nlohmann::json;

LabelMap::LabelMap(std::vector<std::string> class_names)
    : names_(std::move(class_names)) {
  std::set<std::string> seen;
  for (const auto& n : names_) {
    if (n.empty()) fail(ErrorCode::kConfigError, "empty class name");
    if (!seen.insert(n).second) {
      fail(ErrorCode::kConfigError, "duplicate class name: " + n);
    }
  }
}

LabelMap LabelMap::preset(const std::string& name) {
  if (name == "lung") return LabelMap({"lung_aca", "lung_n", "lung_scc"});
  if (name == "colon") return LabelMap({"colon_aca", "colon_n"});
  if (name == "lung_colon") {
    return LabelMap({"lung_aca", "lung_n", "lung_scc", "colon_aca", "colon_n"});
  }
  fail(ErrorCode::kConfigError, "unknown label map preset: " + name);
}

const std::string& LabelMap::name(int label_id) const {
  if (label_id < 0 || static_cast<std::size_t>(label_id) >= names_.size()) {
    fail(ErrorCode::kLabelError,
         "label id " + std::to_string(label_id) + " not in label map");
  }
  return names_[static_cast<std::size_t>(label_id)];
}

std::optional<int> LabelMap::find(const std::string& class_name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == class_name) return static_cast<int>(i);
  }
  return std::nullopt;
}

Labels DatasetManifest::labels() const {
  Labels out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.label_id);
  return out;
}

std::string compute_dataset_id(std::vector<ManifestEntry> entries) {
  std::sort(entries.begin(), entries.end(),
            [](const ManifestEntry& a, const ManifestEntry& b) {
              return std::tie(a.path, a.label_id) < std::tie(b.path, b.label_id);
            });
  std::string buf;
  for (const auto& e : entries) {
    buf += e.path;
    buf += '\t';
    buf += std::to_string(e.label_id);
    buf += '\n';
  }
  return sha256_hex(buf).substr(0, 16);
}

namespace {

bool has_image_extension(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return ext == ".jpeg" || ext == ".jpg" || ext == ".png";
}

// Returns an empty string when the file looks like a readable image.
std::string probe_image_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return "unreadable";
  unsigned char head[8] = {};
  in.read(reinterpret_cast<char*>(head), sizeof(head));
  const auto got = in.gcount();
  if (got >= 3 && head[0] == 0xFF && head[1] == 0xD8 && head[2] == 0xFF) {
    return {};
  }
  static constexpr unsigned char kPng[8] = {0x89, 'P', 'N', 'G',
                                            0x0D, 0x0A, 0x1A, 0x0A};
  if (got == 8 && std::equal(head, head + 8, kPng)) return {};
  return got == 0 ? "empty file" : "not a JPEG or PNG stream";
}

}  // namespace

DatasetManifest scan_dataset(const fs::path& root, const LabelMap& label_map) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) {
    fail(ErrorCode::kMissingClassDir,
         "dataset root is not a directory: " + root.string());
  }
  if (label_map.size() == 0) fail(ErrorCode::kConfigError, "empty label map");

  DatasetManifest m;
  m.root = root;
  m.label_map = label_map;
  for (std::size_t id = 0; id < label_map.size(); ++id) {
    const std::string& cls = label_map.names()[id];
    const fs::path dir = root / cls;
    if (!fs::is_directory(dir, ec)) {
      fail(ErrorCode::kMissingClassDir, "missing class directory: " + dir.string());
    }
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (!entry.is_regular_file(ec)) continue;
      if (!has_image_extension(entry.path())) continue;
      files.push_back(entry.path().filename().string());
    }
    std::sort(files.begin(), files.end());
    std::size_t kept = 0;
    for (const auto& f : files) {
      const std::string rel = cls + "/" + f;
      if (std::string why = probe_image_file(dir / f); !why.empty()) {
        log_warning("skipping " + rel + ": " + why);
        m.skipped.push_back({rel, why});
        continue;
      }
      m.samples.push_back({rel, static_cast<int>(id)});
      ++kept;
    }
    if (kept == 0) fail(ErrorCode::kEmptyClass, "class has no images: " + cls);
    m.class_counts[cls] = kept;
  }
  std::sort(m.samples.begin(), m.samples.end(),
            [](const ManifestEntry& a, const ManifestEntry& b) {
              return a.path < b.path;
            });
  m.dataset_id = compute_dataset_id(m.samples);
  return m;
}

std::string manifest_to_json(const DatasetManifest& m) {
  json j;
  j["root"] = m.root.string();
  j["dataset_id"] = m.dataset_id;
  json lm = json::array();
  for (std::size_t i = 0; i < m.label_map.size(); ++i) {
    lm.push_back({{"class_name", m.label_map.names()[i]},
                  {"label_id", static_cast<int>(i)}});
  }
  j["label_map"] = lm;
  json counts = json::object();
  for (const auto& [k, v] : m.class_counts) counts[k] = v;
  j["class_counts"] = counts;
  json samples = json::array();
  for (const auto& s : m.samples) {
    samples.push_back({{"path", s.path}, {"label_id", s.label_id}});
  }
  j["samples"] = samples;
  j["skipped"] = m.skipped.size();
  return j.dump(2) + "\n";
}

DatasetManifest manifest_from_json(const std::string& text) {
  DatasetManifest m;
  try {
    const json j = json::parse(text);
    m.root = j.at("root").get<std::string>();
    m.dataset_id = j.at("dataset_id").get<std::string>();
    std::vector<std::pair<int, std::string>> lm;
    for (const auto& e : j.at("label_map")) {
      lm.emplace_back(e.at("label_id").get<int>(),
                      e.at("class_name").get<std::string>());
    }
    std::sort(lm.begin(), lm.end());
    std::vector<std::string> names;
    for (std::size_t i = 0; i < lm.size(); ++i) {
      if (lm[i].first != static_cast<int>(i)) {
        fail(ErrorCode::kConfigError, "label ids must be 0..K-1 without gaps");
      }
      names.push_back(lm[i].second);
    }
    m.label_map = LabelMap(std::move(names));
    for (const auto& [k, v] : j.at("class_counts").items()) {
      m.class_counts[k] = v.get<std::size_t>();
    }
    for (const auto& s : j.at("samples")) {
      m.samples.push_back(
          {s.at("path").get<std::string>(), s.at("label_id").get<int>()});
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kConfigError, std::string("malformed manifest: ") + e.what());
  }
  std::size_t total = 0;
  for (const auto& [k, v] : m.class_counts) total += v;
  if (total != m.samples.size()) {
    fail(ErrorCode::kConfigError, "manifest class counts do not sum to samples");
  }
  for (const auto& s : m.samples) {
    if (s.label_id < 0 || static_cast<std::size_t>(s.label_id) >= m.label_map.size()) {
      fail(ErrorCode::kLabelError, "manifest label outside label map: " + s.path);
    }
  }
  if (compute_dataset_id(m.samples) != m.dataset_id) {
    fail(ErrorCode::kConfigError, "manifest dataset_id does not match its samples");
  }
  return m;
}

void save_manifest(const DatasetManifest& manifest, const fs::path& path) {
  write_file_atomic(path, manifest_to_json(manifest));
}

DatasetManifest load_manifest(const fs::path& path) {
  return manifest_from_json(read_file(path));
}

void write_skip_report(const DatasetManifest& manifest, const fs::path& path) {
  std::string out;
  for (const auto& s : manifest.skipped) {
    out += json{{"path", s.path}, {"reason", s.reason}}.dump();
    out += '\n';
  }
  write_file_atomic(path, out);
}

std::string PreprocessConfig::to_json() const {
  json j;
  j["size"] = size;
  j["interpolation"] = "bilinear";
  j["antialias"] = false;
  j["channel_order"] = "rgb";
  j["scale"] = "1/255";
  j["imagenet_normalization"] = imagenet_normalization;
  return j.dump();
}

std::string PreprocessConfig::hash() const {
  return sha256_hex(to_json()).substr(0, 16);
}

Raster decode_image(const fs::path& path, ChannelOrder decode_as) {
  cv::Mat mat = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (mat.empty()) fail(ErrorCode::kDecodeError, "cannot decode " + path.string());
  if (mat.depth() != CV_8U) {
    fail(ErrorCode::kDecodeError, "unsupported bit depth in " + path.string());
  }
  if (mat.channels() != 3) {
    fail(ErrorCode::kChannelError, path.string() + " has " +
                                       std::to_string(mat.channels()) +
                                       " channels, expected 3");
  }
  Raster r;
  r.order = ChannelOrder::kBGR;
  if (decode_as == ChannelOrder::kRGB) {
    cv::cvtColor(mat, mat, cv::COLOR_BGR2RGB);
    r.order = ChannelOrder::kRGB;
  }
  if (!mat.isContinuous()) mat = mat.clone();
  r.height = mat.rows;
  r.width = mat.cols;
  r.channels = 3;
  r.data.assign(mat.data, mat.data + mat.total() * 3);
  return r;
}

Image preprocess_raster(const Raster& raster) {
  if (raster.channels != 3) {
    fail(ErrorCode::kChannelError, "expected a 3-channel raster");
  }
  if (raster.height <= 0 || raster.width <= 0 ||
      raster.data.size() != static_cast<std::size_t>(raster.height) *
                                raster.width * 3) {
    fail(ErrorCode::kDecodeError, "raster size does not match its shape");
  }
  cv::Mat src(raster.height, raster.width, CV_8UC3,
              const_cast<std::uint8_t*>(raster.data.data()));
  cv::Mat resized;
  cv::resize(src, resized, cv::Size(Image::kSize, Image::kSize), 0, 0,
             cv::INTER_LINEAR);
  if (raster.order == ChannelOrder::kBGR) {
    cv::cvtColor(resized, resized, cv::COLOR_BGR2RGB);
  }
  Image img;
  img.pixels.resize(Image::kValues);
  const std::uint8_t* p = resized.ptr<std::uint8_t>(0);
  for (std::size_t i = 0; i < Image::kValues; ++i) {
    img.pixels[i] = static_cast<float>(p[i]) / 255.0f;
  }
  return img;
}

Image preprocess_image(const fs::path& path, ChannelOrder decode_as) {
  return preprocess_raster(decode_image(path, decode_as));
}

namespace {

std::vector<std::vector<std::size_t>> indices_by_class(std::span<const int> labels) {
  int max_label = -1;
  for (int l : labels) {
    if (l < 0) fail(ErrorCode::kLabelError, "negative label");
    max_label = std::max(max_label, l);
  }
  std::vector<std::vector<std::size_t>> by_class(
      static_cast<std::size_t>(max_label + 1));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    by_class[static_cast<std::size_t>(labels[i])].push_back(i);
  }
  return by_class;
}

}  // namespace

Split stratified_split(std::span<const int> labels, double train_fraction,
                       std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    fail(ErrorCode::kConfigError, "train_fraction must lie in (0, 1)");
  }
  auto by_class = indices_by_class(labels);
  Rng rng(seed);
  Split s;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& idx = by_class[c];
    if (idx.empty()) continue;
    if (idx.size() < 2) {
      fail(ErrorCode::kTooFewSamples,
           "class " + std::to_string(c) + " has fewer than 2 samples");
    }
    const auto count = static_cast<long long>(idx.size());
    long long n_train = std::llround(train_fraction * static_cast<double>(count));
    n_train = std::clamp(n_train, 1LL, count - 1);
    rng.shuffle(idx);
    s.train.insert(s.train.end(), idx.begin(), idx.begin() + n_train);
    s.test.insert(s.test.end(), idx.begin() + n_train, idx.end());
  }
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

Split stratified_split(const DatasetManifest& manifest, double train_fraction,
                       std::uint64_t seed) {
  const Labels labels = manifest.labels();
  return stratified_split(labels, train_fraction, seed);
}

std::vector<std::size_t> FoldPlan::training_indices(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    if (f == fold) continue;
    out.insert(out.end(), folds[f].begin(), folds[f].end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

FoldPlan make_folds(std::span<const int> labels, int k, std::uint64_t seed) {
  if (k < 2) fail(ErrorCode::kFoldError, "k must be at least 2");
  auto by_class = indices_by_class(labels);
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    if (!by_class[c].empty() && by_class[c].size() < static_cast<std::size_t>(k)) {
      fail(ErrorCode::kFoldError,
           "k=" + std::to_string(k) + " exceeds the size of class " +
               std::to_string(c) + " (" + std::to_string(by_class[c].size()) + ")");
    }
  }
  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.folds.resize(static_cast<std::size_t>(k));
  Rng rng(seed);
  std::size_t next = 0;
  for (auto& idx : by_class) {
    rng.shuffle(idx);
    for (std::size_t i : idx) {
      plan.folds[next].push_back(i);
      next = (next + 1) % plan.folds.size();
    }
  }
  for (auto& f : plan.folds) std::sort(f.begin(), f.end());
  return plan;
}

FoldPlan make_folds(const DatasetManifest& manifest, int k, std::uint64_t seed) {
  const Labels labels = manifest.labels();
  return make_folds(labels, k, seed);
}

}  // namespace hpfens
