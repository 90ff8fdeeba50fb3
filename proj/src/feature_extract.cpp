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

#include "hpfens/feature_extract.hpp"

#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <ctime>
#include <mutex>

#include <json.hpp>
#include <opencv2/dnn.hpp>

#include "parallel.hpp"

namespace hpfens {

namespace fs = std::filesystem;
using nlohmann::json;

const char* backbone_name(BackboneId id) {
  switch (id) {
    case BackboneId::kVgg16: return "vgg16";
    case BackboneId::kVgg19: return "vgg19";
    case BackboneId::kMobileNet: return "mobilenet";
    case BackboneId::kDenseNet169: return "densenet169";
    case BackboneId::kDenseNet201: return "densenet201";
    case BackboneId::kMock: return "mock";
  }
  return "unknown";
}

BackboneId parse_backbone(const std::string& name) {
  for (auto id : {BackboneId::kVgg16, BackboneId::kVgg19, BackboneId::kMobileNet,
                  BackboneId::kDenseNet169, BackboneId::kDenseNet201,
                  BackboneId::kMock}) {
    if (name == backbone_name(id)) return id;
  }
  fail(ErrorCode::kConfigError, "unknown backbone: " + name);
}

std::string BackboneSpec::to_json() const {
  json j;
  j["id"] = backbone_name(id);
  if (model_path) j["model_path"] = model_path->string();
  if (!output_layer.empty()) j["output_layer"] = output_layer;
  j["input_layout"] = input_layout == TensorLayout::kNCHW ? "nchw" : "nhwc";
  j["imagenet_normalization"] = preprocess.imagenet_normalization;
  return j.dump();
}

BackboneSpec BackboneSpec::from_json(const std::string& text) {
  BackboneSpec s;
  try {
    const json j = json::parse(text);
    s.id = parse_backbone(j.at("id").get<std::string>());
    if (j.contains("model_path") && !j["model_path"].is_null()) {
      s.model_path = fs::path(j["model_path"].get<std::string>());
    }
    s.output_layer = j.value("output_layer", std::string{});
    const std::string layout = j.value("input_layout", std::string("nchw"));
    if (layout == "nchw") {
      s.input_layout = TensorLayout::kNCHW;
    } else if (layout == "nhwc") {
      s.input_layout = TensorLayout::kNHWC;
    } else {
      fail(ErrorCode::kConfigError, "input_layout must be nchw or nhwc");
    }
    s.preprocess.imagenet_normalization = j.value("imagenet_normalization", false);
  } catch (const json::exception& e) {
    fail(ErrorCode::kConfigError, std::string("malformed backbone spec: ") + e.what());
  }
  if (s.id != BackboneId::kMock && !s.model_path) {
    fail(ErrorCode::kConfigError,
         std::string("backbone ") + backbone_name(s.id) + " requires model_path");
  }
  return s;
}

std::string BackboneSpec::extraction_hash() const {
  std::string material = preprocess.to_json();
  material += "|layout=";
  material += input_layout == TensorLayout::kNCHW ? "nchw" : "nhwc";
  material += "|output=" + output_layer;
  if (id != BackboneId::kMock) {
    if (!model_path) {
      fail(ErrorCode::kBackboneLoadError, "backbone requires a model_path");
    }
    std::error_code ec;
    if (!fs::is_regular_file(*model_path, ec)) {
      fail(ErrorCode::kBackboneLoadError,
           "model file not found: " + model_path->string());
    }
    material += "|model=" + sha256_file_hex(*model_path);
  }
  return sha256_hex(material).substr(0, 16);
}

namespace {

constexpr int kGrid = 8;
constexpr int kCell = Image::kSize / kGrid;
constexpr std::size_t kPooled = kGrid * kGrid * Image::kChannels * 2;
constexpr std::uint64_t kMockProjectionSeed = 0x6D6F636B2D707231ULL;

const std::vector<double>& mock_projection() {
  static const std::vector<double> w = [] {
    std::vector<double> m(kMockFeatureDim * kPooled);
    Rng rng(kMockProjectionSeed);
    const double scale = 1.0 / std::sqrt(static_cast<double>(kPooled));
    for (auto& v : m) v = rng.normal() * scale;
    return m;
  }();
  return w;
}

class MockBackbone final : public Backbone {
 public:
  std::size_t feature_dim() const override { return kMockFeatureDim; }

  void forward(std::span<const Image> images, MatrixF& out,
               std::size_t first_row) const override {
    const auto& w = mock_projection();
    std::vector<double> pooled(kPooled);
    for (std::size_t n = 0; n < images.size(); ++n) {
      const Image& img = images[n];
      std::size_t p = 0;
      for (int gy = 0; gy < kGrid; ++gy) {
        for (int gx = 0; gx < kGrid; ++gx) {
          for (int c = 0; c < Image::kChannels; ++c) {
            double sum = 0.0, sq = 0.0;
            for (int y = gy * kCell; y < (gy + 1) * kCell; ++y) {
              for (int x = gx * kCell; x < (gx + 1) * kCell; ++x) {
                const double v = img.at(y, x, c);
                sum += v;
                sq += v * v;
              }
            }
            const double cnt = kCell * kCell;
            const double mean = sum / cnt;
            pooled[p++] = mean;
            pooled[p++] = std::max(0.0, sq / cnt - mean * mean);
          }
        }
      }
      auto row = out.row(first_row + n);
      for (std::size_t j = 0; j < kMockFeatureDim; ++j) {
        const double* wr = w.data() + j * kPooled;
        double acc = 0.0;
        for (std::size_t i = 0; i < kPooled; ++i) acc += wr[i] * pooled[i];
        row[j] = static_cast<float>(acc);
      }
    }
  }
};

class OnnxBackbone final : public Backbone {
 public:
  explicit OnnxBackbone(const BackboneSpec& spec) : spec_(spec) {
    const std::string path = spec.model_path ? spec.model_path->string() : "";
    if (path.empty()) fail(ErrorCode::kBackboneLoadError, "no model_path given");
    try {
      net_ = cv::dnn::readNetFromONNX(path);
    } catch (const cv::Exception& e) {
      fail(ErrorCode::kBackboneLoadError,
           "cannot load " + path + ": " + e.what());
    }
    if (net_.empty()) fail(ErrorCode::kBackboneLoadError, "empty network: " + path);
    net_.setPreferableBackend(cv::dnn::DNN_BACKEND_OPENCV);
    net_.setPreferableTarget(cv::dnn::DNN_TARGET_CPU);
    Image blank;
    blank.pixels.assign(Image::kValues, 0.0f);
    cv::Mat y = run(std::span<const Image>(&blank, 1));
    dim_ = y.total();
    if (dim_ == 0) fail(ErrorCode::kBackboneLoadError, "network produced no output");
  }

  std::size_t feature_dim() const override { return dim_; }

  void forward(std::span<const Image> images, MatrixF& out,
               std::size_t first_row) const override {
    if (images.empty()) return;
    cv::Mat y = run(images);
    if (y.total() != images.size() * dim_) {
      fail(ErrorCode::kShapeError, "backbone output size changed between batches");
    }
    const float* src = y.ptr<float>();
    std::memcpy(out.row(first_row).data(), src, y.total() * sizeof(float));
  }

 private:
  cv::Mat run(std::span<const Image> images) const {
    const int n = static_cast<int>(images.size());
    constexpr int s = Image::kSize;
    constexpr int ch = Image::kChannels;
    cv::Mat blob;
    if (spec_.input_layout == TensorLayout::kNCHW) {
      const int dims[4] = {n, ch, s, s};
      blob.create(4, dims, CV_32F);
      float* dst = blob.ptr<float>();
      for (int i = 0; i < n; ++i) {
        const float* px = images[static_cast<std::size_t>(i)].pixels.data();
        for (int c = 0; c < ch; ++c) {
          for (int p = 0; p < s * s; ++p) {
            dst[(static_cast<std::size_t>(i) * ch + c) * s * s + p] = px[p * ch + c];
          }
        }
      }
    } else {
      const int dims[4] = {n, s, s, ch};
      blob.create(4, dims, CV_32F);
      float* dst = blob.ptr<float>();
      for (int i = 0; i < n; ++i) {
        const auto& px = images[static_cast<std::size_t>(i)].pixels;
        std::memcpy(dst + static_cast<std::size_t>(i) * Image::kValues, px.data(),
                    Image::kValues * sizeof(float));
      }
    }
    std::lock_guard lock(mu_);
    try {
      net_.setInput(blob);
      cv::Mat y = spec_.output_layer.empty() ? net_.forward()
                                             : net_.forward(spec_.output_layer);
      if (y.depth() != CV_32F) y.convertTo(y, CV_32F);
      return y.clone();
    } catch (const cv::Exception& e) {
      fail(ErrorCode::kBackboneLoadError, std::string("forward failed: ") + e.what());
    }
  }

  BackboneSpec spec_;
  mutable std::mutex mu_;
  mutable cv::dnn::Net net_;
  std::size_t dim_ = 0;
};

Image normalized(const Image& img, const PreprocessConfig& cfg) {
  if (!cfg.imagenet_normalization) return img;
  static constexpr float kMean[3] = {0.485f, 0.456f, 0.406f};
  static constexpr float kStd[3] = {0.229f, 0.224f, 0.225f};
  Image out = img;
  for (std::size_t i = 0; i < out.pixels.size(); ++i) {
    const std::size_t c = i % Image::kChannels;
    out.pixels[i] = (out.pixels[i] - kMean[c]) / kStd[c];
  }
  return out;
}

void check_image(const Image& img, std::size_t index) {
  if (img.pixels.size() != Image::kValues) {
    fail(ErrorCode::kShapeError, "sample " + std::to_string(index) +
                                     " is not a preprocessed 128x128x3 image");
  }
}

void check_rows_finite(const MatrixF& m, std::size_t first, std::size_t count) {
  for (std::size_t r = first; r < first + count; ++r) {
    for (float v : m.row(r)) {
      if (!std::isfinite(v)) {
        fail(ErrorCode::kNumericError,
             "non-finite activation for sample " + std::to_string(r));
      }
    }
  }
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

std::unique_ptr<Backbone> load_backbone(const BackboneSpec& spec) {
  if (spec.id == BackboneId::kMock) return std::make_unique<MockBackbone>();
  return std::make_unique<OnnxBackbone>(spec);
}

std::size_t feature_dim(const BackboneSpec& spec) {
  return load_backbone(spec)->feature_dim();
}

FeatureMatrix extract_features(const BackboneSpec& spec,
                               std::span<const ImageSample> samples,
                               std::size_t batch_size,
                               const std::string& dataset_id) {
  if (batch_size == 0) fail(ErrorCode::kConfigError, "batch_size must be positive");
  auto backbone = load_backbone(spec);
  FeatureMatrix fm;
  fm.backbone = spec.id;
  fm.dataset_id = dataset_id;
  fm.preprocess_hash = spec.extraction_hash();
  fm.values = MatrixF(samples.size(), backbone->feature_dim());
  fm.labels.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    check_image(samples[i].image, i);
    fm.labels.push_back(samples[i].label_id);
  }
  std::vector<Image> batch;
  for (std::size_t first = 0; first < samples.size(); first += batch_size) {
    const std::size_t count = std::min(batch_size, samples.size() - first);
    batch.clear();
    for (std::size_t i = 0; i < count; ++i) {
      batch.push_back(normalized(samples[first + i].image, spec.preprocess));
    }
    backbone->forward(batch, fm.values, first);
    check_rows_finite(fm.values, first, count);
  }
  return fm;
}

FeatureMatrix extract_manifest_features(const BackboneSpec& spec,
                                        const DatasetManifest& manifest,
                                        std::size_t batch_size) {
  if (batch_size == 0) fail(ErrorCode::kConfigError, "batch_size must be positive");
  auto backbone = load_backbone(spec);
  FeatureMatrix fm;
  fm.backbone = spec.id;
  fm.dataset_id = manifest.dataset_id;
  fm.preprocess_hash = spec.extraction_hash();
  fm.labels = manifest.labels();
  fm.values = MatrixF(manifest.size(), backbone->feature_dim());
  std::vector<Image> batch;
  for (std::size_t first = 0; first < manifest.size(); first += batch_size) {
    const std::size_t count = std::min(batch_size, manifest.size() - first);
    batch.assign(count, Image{});
    internal::parallel_for(count, [&](std::size_t i) {
      batch[i] = normalized(preprocess_image(manifest.absolute_path(first + i)),
                            spec.preprocess);
    });
    backbone->forward(batch, fm.values, first);
    check_rows_finite(fm.values, first, count);
  }
  return fm;
}

fs::path CacheKey::directory(const fs::path& cache_dir) const {
  return cache_dir / dataset_id / backbone_id / preprocess_hash;
}

std::string CacheKey::to_string() const {
  return dataset_id + "/" + backbone_id + "/" + preprocess_hash;
}

CacheKey cache_key_for(const FeatureMatrix& m) {
  return {m.dataset_id, backbone_name(m.backbone), m.preprocess_hash};
}

CacheKey cache_features(const FeatureMatrix& m, const fs::path& cache_dir) {
  if (m.labels.size() != m.rows()) {
    fail(ErrorCode::kShapeError, "feature rows and labels disagree");
  }
  const CacheKey key = cache_key_for(m);
  if (key.dataset_id.empty() || key.preprocess_hash.empty()) {
    fail(ErrorCode::kConfigError, "feature matrix lacks cache key fields");
  }
  const fs::path dir = key.directory(cache_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::kIOError, "cannot create cache directory " + dir.string());

  std::string bytes(m.values.data().size() * sizeof(float), '\0');
  std::memcpy(bytes.data(), m.values.data().data(), bytes.size());
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < bytes.size(); i += 4) {
      std::swap(bytes[i], bytes[i + 3]);
      std::swap(bytes[i + 1], bytes[i + 2]);
    }
  }
  json meta;
  meta["n"] = m.rows();
  meta["d"] = m.width();
  meta["dtype"] = "float32";
  meta["byte_order"] = "little";
  meta["layout"] = "row-major";
  meta["backbone_id"] = key.backbone_id;
  meta["dataset_id"] = key.dataset_id;
  meta["preprocess_hash"] = key.preprocess_hash;
  meta["created_at"] = utc_timestamp();
  meta["labels"] = m.labels;
  // features.bin first: a reader only trusts an entry once meta.json exists.
  write_file_atomic(dir / "features.bin", bytes);
  write_file_atomic(dir / "meta.json", meta.dump(2) + "\n");
  return key;
}

FeatureMatrix load_features(const CacheKey& key, const fs::path& cache_dir) {
  const fs::path dir = key.directory(cache_dir);
  std::error_code ec;
  if (!fs::exists(dir / "meta.json", ec)) {
    const fs::path parent = cache_dir / key.dataset_id / key.backbone_id;
    if (fs::is_directory(parent, ec)) {
      for (const auto& e : fs::directory_iterator(parent)) {
        if (fs::exists(e.path() / "meta.json", ec)) {
          fail(ErrorCode::kStaleCache,
               "cached features for " + key.dataset_id + "/" + key.backbone_id +
                   " were built with preprocess hash " +
                   e.path().filename().string() + ", requested " +
                   key.preprocess_hash);
        }
      }
    }
    fail(ErrorCode::kCacheMiss, "no cached features for " + key.to_string());
  }
  FeatureMatrix fm;
  std::size_t n = 0, d = 0;
  try {
    const json meta = json::parse(read_file(dir / "meta.json"));
    if (meta.at("dataset_id") != key.dataset_id ||
        meta.at("backbone_id") != key.backbone_id ||
        meta.at("preprocess_hash") != key.preprocess_hash ||
        meta.at("dtype") != "float32") {
      fail(ErrorCode::kStaleCache, "cache metadata does not match " + key.to_string());
    }
    n = meta.at("n").get<std::size_t>();
    d = meta.at("d").get<std::size_t>();
    fm.labels = meta.at("labels").get<Labels>();
  } catch (const json::exception& e) {
    fail(ErrorCode::kStaleCache, std::string("unreadable cache metadata: ") + e.what());
  }
  std::string bytes = read_file(dir / "features.bin");
  if (bytes.size() != n * d * sizeof(float) || fm.labels.size() != n) {
    fail(ErrorCode::kStaleCache, "cached feature file size does not match metadata");
  }
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < bytes.size(); i += 4) {
      std::swap(bytes[i], bytes[i + 3]);
      std::swap(bytes[i + 1], bytes[i + 2]);
    }
  }
  std::vector<float> values(n * d);
  std::memcpy(values.data(), bytes.data(), bytes.size());
  fm.values = MatrixF(n, d, std::move(values));
  fm.backbone = parse_backbone(key.backbone_id);
  fm.dataset_id = key.dataset_id;
  fm.preprocess_hash = key.preprocess_hash;
  return fm;
}

CachedExtraction extract_or_load(const BackboneSpec& spec,
                                 const DatasetManifest& manifest,
                                 const fs::path& cache_dir,
                                 std::size_t batch_size) {
  const auto start = std::chrono::steady_clock::now();
  CachedExtraction out;
  const CacheKey key{manifest.dataset_id, backbone_name(spec.id),
                     spec.extraction_hash()};
  try {
    out.features = load_features(key, cache_dir);
    out.cache_hit = out.features.labels == manifest.labels();
    if (!out.cache_hit) log_warning("cached labels disagree with manifest; re-extracting");
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kCacheMiss && e.code() != ErrorCode::kStaleCache) throw;
  }
  if (!out.cache_hit) {
    out.features = extract_manifest_features(spec, manifest, batch_size);
    cache_features(out.features, cache_dir);
  }
  out.seconds = std::chrono::duration<double>(
                    std::chrono::steady_clock::now() - start).count();
  return out;
}

}  // namespace hpfens
