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

// Dataset ingestion: class-labelled directory trees, the image preprocessing
// chain (resize to 128x128, BGR->RGB, scale by 1/255) and deterministic
// stratified holdout splits and k-fold plans.

#ifndef HPFENS_DATA_PIPELINE_HPP_
#define HPFENS_DATA_PIPELINE_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hpfens/common.hpp"

namespace hpfens {

// Ordered (class_name, label_id) pairs. Label ids are exactly 0..K-1 in list
// order; that order is also the tie-break order for votes.
class LabelMap {
 public:
  LabelMap() = default;
  // Ids are assigned in the order given.
  explicit LabelMap(std::vector<std::string> class_names);

  // lung: lung_aca=0, lung_n=1, lung_scc=2
  // colon: colon_aca=0, colon_n=1
  // lung_colon: the lung classes followed by the colon classes.
  static LabelMap preset(const std::string& name);

  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::string& name(int label_id) const;
  std::optional<int> find(const std::string& class_name) const;

  friend bool operator==(const LabelMap&, const LabelMap&) = default;

 private:
  std::vector<std::string> names_;
};

enum class ChannelOrder { kRGB, kBGR };

// Decoded 8-bit raster with its declared channel order, interleaved HWC.
struct Raster {
  int height = 0;
  int width = 0;
  int channels = 0;
  ChannelOrder order = ChannelOrder::kBGR;
  std::vector<std::uint8_t> data;
};

// Canonical network input: 128x128x3, RGB, values in [0, 1], HWC layout.
struct Image {
  static constexpr int kSize = 128;
  static constexpr int kChannels = 3;
  static constexpr std::size_t kValues =
      static_cast<std::size_t>(kSize) * kSize * kChannels;

  std::vector<float> pixels;

  float at(int y, int x, int c) const {
    return pixels[(static_cast<std::size_t>(y) * kSize + x) * kChannels + c];
  }
};

struct ImageSample {
  std::filesystem::path path;
  Image image;
  int label_id = 0;
  std::string class_name;
};

struct ManifestEntry {
  std::string path;  // relative to the dataset root, '/' separated
  int label_id = 0;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct SkippedFile {
  std::string path;
  std::string reason;
};

struct DatasetManifest {
  std::filesystem::path root;
  LabelMap label_map;
  std::vector<ManifestEntry> samples;  // sorted by path
  std::map<std::string, std::size_t> class_counts;
  std::string dataset_id;
  std::vector<SkippedFile> skipped;

  std::size_t size() const { return samples.size(); }
  Labels labels() const;
  std::filesystem::path absolute_path(std::size_t i) const {
    return root / samples[i].path;
  }
};

// Content hash of the sorted (relative path, label id) list.
std::string compute_dataset_id(std::vector<ManifestEntry> entries);

// Lists root/<class_name>/*.{jpeg,jpg,png} for each class in the label map.
// Files whose header is not a JPEG or PNG signature, or which cannot be
// opened, are skipped and recorded in DatasetManifest::skipped.
DatasetManifest scan_dataset(const std::filesystem::path& root,
                             const LabelMap& label_map);

std::string manifest_to_json(const DatasetManifest& manifest);
DatasetManifest manifest_from_json(const std::string& text);
void save_manifest(const DatasetManifest& manifest,
                   const std::filesystem::path& path);
DatasetManifest load_manifest(const std::filesystem::path& path);
// One JSON object per line: {"path": ..., "reason": ...}.
void write_skip_report(const DatasetManifest& manifest,
                       const std::filesystem::path& path);

struct PreprocessConfig {
  int size = Image::kSize;
  // Per-channel ImageNet mean/std normalization applied after /255. Off by
  // default; only /255 scaling is applied then.
  bool imagenet_normalization = false;

  std::string to_json() const;
  // Stable hash of the configuration, part of every feature-cache key.
  std::string hash() const;
};

// Decodes with OpenCV. The decoder natively yields BGR; requesting kRGB
// swaps channels at decode time and declares the raster RGB.
Raster decode_image(const std::filesystem::path& path,
                    ChannelOrder decode_as = ChannelOrder::kBGR);

// Bilinear resize (no antialiasing) to 128x128, conversion to RGB when the
// raster is BGR, then division by 255.
Image preprocess_raster(const Raster& raster);
Image preprocess_image(const std::filesystem::path& path,
                       ChannelOrder decode_as = ChannelOrder::kBGR);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Per class, round(train_fraction * count) samples (half away from zero,
// clamped to [1, count-1]) go to train. Both index lists are ascending.
Split stratified_split(const DatasetManifest& manifest, double train_fraction,
                       std::uint64_t seed);
Split stratified_split(std::span<const int> labels, double train_fraction,
                       std::uint64_t seed);

struct FoldPlan {
  int k = 0;
  std::uint64_t seed = 0;
  std::vector<std::vector<std::size_t>> folds;  // each ascending

  // Indices of every fold except `fold`, ascending.
  std::vector<std::size_t> training_indices(std::size_t fold) const;
};

// Stratified: each class is shuffled and dealt round-robin across folds,
// continuing from where the previous class stopped, so per-class counts per
// fold differ by at most one and fold sizes differ by at most one.
FoldPlan make_folds(const DatasetManifest& manifest, int k, std::uint64_t seed);
FoldPlan make_folds(std::span<const int> labels, int k, std::uint64_t seed);

}  // namespace hpfens

#endif  // HPFENS_DATA_PIPELINE_HPP_
