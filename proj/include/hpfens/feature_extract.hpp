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

// Deep feature extraction through truncated pretrained backbones.
//
// A real backbone is an ONNX graph that already ends at the truncation point
// (the final pooling block, classifier head removed). Its output for each
// image is flattened row-major into one feature row. The mock backbone needs
// no weights: it pools per-cell channel means and variances over an 8x8 grid
// and applies a fixed Gaussian projection to 256 dimensions.

#ifndef HPFENS_FEATURE_EXTRACT_HPP_
#define HPFENS_FEATURE_EXTRACT_HPP_

#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>

#include "hpfens/common.hpp"
#include "hpfens/data_pipeline.hpp"

namespace hpfens {

enum class BackboneId { kVgg16, kVgg19, kMobileNet, kDenseNet169, kDenseNet201, kMock };

const char* backbone_name(BackboneId id);
BackboneId parse_backbone(const std::string& name);

enum class TensorLayout { kNCHW, kNHWC };

inline constexpr std::size_t kMockFeatureDim = 256;

struct BackboneSpec {
  BackboneId id = BackboneId::kMock;
  // Required for every backbone except kMock.
  std::optional<std::filesystem::path> model_path;
  // Graph output to read; empty means the network's default output.
  std::string output_layer;
  TensorLayout input_layout = TensorLayout::kNCHW;
  PreprocessConfig preprocess;

  std::string to_json() const;
  static BackboneSpec from_json(const std::string& text);

  // Identifies everything that influences the feature values apart from the
  // dataset: preprocessing, input layout, output layer and the model file
  // contents.
  std::string extraction_hash() const;
};

class Backbone {
 public:
  virtual ~Backbone() = default;
  virtual std::size_t feature_dim() const = 0;
  // Writes one row per image into out[0..images.size()).
  virtual void forward(std::span<const Image> images, MatrixF& out,
                       std::size_t first_row) const = 0;
};

std::unique_ptr<Backbone> load_backbone(const BackboneSpec& spec);

struct FeatureMatrix {
  MatrixF values;
  BackboneId backbone = BackboneId::kMock;
  std::string dataset_id;
  Labels labels;
  std::string preprocess_hash;

  std::size_t rows() const { return values.rows(); }
  std::size_t width() const { return values.cols(); }
};

std::size_t feature_dim(const BackboneSpec& spec);

FeatureMatrix extract_features(const BackboneSpec& spec,
                               std::span<const ImageSample> samples,
                               std::size_t batch_size,
                               const std::string& dataset_id = {});

// Decodes and preprocesses manifest images batch by batch so that the full
// image tensor is never resident. Rows follow manifest order.
FeatureMatrix extract_manifest_features(const BackboneSpec& spec,
                                        const DatasetManifest& manifest,
                                        std::size_t batch_size);

struct CacheKey {
  std::string dataset_id;
  std::string backbone_id;
  std::string preprocess_hash;

  // cache_dir/<dataset_id>/<backbone_id>/<preprocess_hash>
  std::filesystem::path directory(const std::filesystem::path& cache_dir) const;
  std::string to_string() const;
  friend bool operator==(const CacheKey&, const CacheKey&) = default;
};

CacheKey cache_key_for(const FeatureMatrix& matrix);

// features.bin holds n*d little-endian float32 values, row-major; meta.json
// holds the shape and key fields. Both are written atomically.
CacheKey cache_features(const FeatureMatrix& matrix,
                        const std::filesystem::path& cache_dir);

// CacheMiss when nothing is stored for the dataset and backbone; StaleCache
// when entries exist only for a different preprocess hash, or when the stored
// metadata disagrees with the key.
FeatureMatrix load_features(const CacheKey& key,
                            const std::filesystem::path& cache_dir);

// Loads from cache when possible, otherwise extracts and stores.
struct CachedExtraction {
  FeatureMatrix features;
  bool cache_hit = false;
  double seconds = 0.0;
};
CachedExtraction extract_or_load(const BackboneSpec& spec,
                                 const DatasetManifest& manifest,
                                 const std::filesystem::path& cache_dir,
                                 std::size_t batch_size);

}  // namespace hpfens

#endif  // HPFENS_FEATURE_EXTRACT_HPP_
