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

#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "hpfens/data_pipeline.hpp"
#include "image_fixtures.hpp"
#include "test_util.hpp"

namespace hpfens {
namespace {

class QuietTest : public ::testing::Test {
 protected:
  void SetUp() override { set_warnings_enabled(false); }
  void TearDown() override { set_warnings_enabled(true); }
};

Labels balanced_labels(int k, int per_class) {
  Labels y;
  for (int c = 0; c < k; ++c) y.insert(y.end(), static_cast<std::size_t>(per_class), c);
  return y;
}

TEST(LabelMap, Presets) {
  EXPECT_EQ(LabelMap::preset("lung").names(),
            (std::vector<std::string>{"lung_aca", "lung_n", "lung_scc"}));
  EXPECT_EQ(LabelMap::preset("colon").names(),
            (std::vector<std::string>{"colon_aca", "colon_n"}));
  const LabelMap both = LabelMap::preset("lung_colon");
  EXPECT_EQ(both.size(), 5u);
  EXPECT_EQ(both.find("colon_aca"), 3);
  EXPECT_EQ(both.find("nope"), std::nullopt);
  EXPECT_EQ(both.name(4), "colon_n");
  EXPECT_THROW(both.name(5), Error);
}

TEST(LabelMap, RejectsBadInput) {
  try {
    LabelMap::preset("brain");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConfigError);
  }
  EXPECT_THROW(LabelMap({"a", "a"}), Error);
  EXPECT_THROW(LabelMap({"a", ""}), Error);
}

TEST_F(QuietTest, ScanListsSortedSamplesAndSkipsBadFiles) {
  testing::TempDir dir;
  testing::write_image_dataset(dir.path(), {"a", "b"}, 3, 5.0, 1, 16);
  std::ofstream(dir / "a/bogus.png") << "not an image";
  std::ofstream(dir / "b/empty.jpg");
  std::ofstream(dir / "b/readme.txt") << "ignored";

  const DatasetManifest m = scan_dataset(dir.path(), LabelMap({"a", "b"}));
  ASSERT_EQ(m.size(), 6u);
  EXPECT_EQ(m.skipped.size(), 2u);
  EXPECT_EQ(m.class_counts.at("a"), 3u);
  EXPECT_EQ(m.samples.front().path, "a/img_0000.png");
  EXPECT_EQ(m.labels(), (Labels{0, 0, 0, 1, 1, 1}));
  for (std::size_t i = 1; i < m.size(); ++i) {
    EXPECT_LT(m.samples[i - 1].path, m.samples[i].path);
  }
  EXPECT_EQ(m.dataset_id, compute_dataset_id(m.samples));

  write_skip_report(m, dir / "skipped.jsonl");
  const std::string report = read_file(dir / "skipped.jsonl");
  EXPECT_NE(report.find("a/bogus.png"), std::string::npos);
  EXPECT_NE(report.find("b/empty.jpg"), std::string::npos);
}

TEST_F(QuietTest, ScanErrors) {
  testing::TempDir dir;
  try {
    scan_dataset(dir / "missing", LabelMap({"a"}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMissingClassDir);
  }
  testing::write_image_dataset(dir.path(), {"a"}, 2, 5.0, 1, 16);
  try {
    scan_dataset(dir.path(), LabelMap({"a", "b"}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMissingClassDir);
  }
  std::filesystem::create_directories(dir / "b");
  std::ofstream(dir / "b/bad.png") << "xx";
  try {
    scan_dataset(dir.path(), LabelMap({"a", "b"}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyClass);
  }
}

TEST(DatasetId, IndependentOfInputOrder) {
  std::vector<ManifestEntry> a = {{"x/1.png", 0}, {"y/2.png", 1}};
  std::vector<ManifestEntry> b = {{"y/2.png", 1}, {"x/1.png", 0}};
  EXPECT_EQ(compute_dataset_id(a), compute_dataset_id(b));
  b[0].label_id = 0;
  EXPECT_NE(compute_dataset_id(a), compute_dataset_id(b));
}

TEST_F(QuietTest, ManifestRoundTrip) {
  testing::TempDir dir;
  testing::write_image_dataset(dir.path(), {"a", "b", "c"}, 2, 5.0, 2, 16);
  const DatasetManifest m = scan_dataset(dir.path(), LabelMap({"a", "b", "c"}));
  save_manifest(m, dir / "manifest.json");
  const DatasetManifest r = load_manifest(dir / "manifest.json");
  EXPECT_EQ(r.samples, m.samples);
  EXPECT_EQ(r.label_map, m.label_map);
  EXPECT_EQ(r.dataset_id, m.dataset_id);
  EXPECT_EQ(r.class_counts, m.class_counts);

  std::string text = manifest_to_json(m);
  text.replace(text.find("a/img_0000.png"), 14, "a/img_9999.png");
  try {
    manifest_from_json(text);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConfigError);
  }
}

TEST(Preprocess, BgrToRgbScaledAndResized) {
  testing::TempDir dir;
  cv::Mat img(40, 60, CV_8UC3, cv::Scalar(10, 20, 30));  // B, G, R
  cv::imwrite((dir / "x.png").string(), img);

  const Raster bgr = decode_image(dir / "x.png");
  EXPECT_EQ(bgr.order, ChannelOrder::kBGR);
  EXPECT_EQ(bgr.data[0], 10);
  const Image a = preprocess_raster(bgr);
  ASSERT_EQ(a.pixels.size(), Image::kValues);
  EXPECT_FLOAT_EQ(a.at(0, 0, 0), 30.0f / 255.0f);
  EXPECT_FLOAT_EQ(a.at(64, 100, 1), 20.0f / 255.0f);
  EXPECT_FLOAT_EQ(a.at(127, 127, 2), 10.0f / 255.0f);

  // Decoding as RGB then preprocessing gives the same canonical image.
  const Raster rgb = decode_image(dir / "x.png", ChannelOrder::kRGB);
  EXPECT_EQ(rgb.order, ChannelOrder::kRGB);
  EXPECT_EQ(rgb.data[0], 30);
  EXPECT_EQ(preprocess_raster(rgb).pixels, a.pixels);
}

TEST(Preprocess, ValuesInUnitInterval) {
  testing::TempDir dir;
  testing::write_image_dataset(dir.path(), {"a"}, 1, 80.0, 4, 200);
  const Image img = preprocess_image(dir / "a/img_0000.png");
  for (float v : img.pixels) {
    ASSERT_GE(v, 0.0f);
    ASSERT_LE(v, 1.0f);
  }
}

TEST(Preprocess, ChannelAndDecodeErrors) {
  testing::TempDir dir;
  cv::imwrite((dir / "gray.png").string(), cv::Mat(8, 8, CV_8UC1, cv::Scalar(5)));
  try {
    decode_image(dir / "gray.png");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kChannelError);
  }
  std::ofstream(dir / "junk.png") << "junk";
  try {
    decode_image(dir / "junk.png");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDecodeError);
  }
}

TEST(PreprocessConfig, HashTracksSettings) {
  PreprocessConfig a, b;
  EXPECT_EQ(a.hash(), b.hash());
  b.imagenet_normalization = true;
  EXPECT_NE(a.hash(), b.hash());
}

TEST(Split, StratifiedCountsAndDisjoint) {
  Labels y = balanced_labels(3, 10);
  y.insert(y.end(), 5, 3);
  const Split s = stratified_split(y, 0.8, 11);
  EXPECT_EQ(s.train.size(), 8u * 3 + 4);
  EXPECT_EQ(s.test.size(), y.size() - s.train.size());
  std::set<std::size_t> all(s.train.begin(), s.train.end());
  for (std::size_t i : s.test) EXPECT_TRUE(all.insert(i).second);
  EXPECT_EQ(all.size(), y.size());
  EXPECT_TRUE(std::is_sorted(s.train.begin(), s.train.end()));
  EXPECT_TRUE(std::is_sorted(s.test.begin(), s.test.end()));

  const Split again = stratified_split(y, 0.8, 11);
  EXPECT_EQ(again.train, s.train);
  const Split other = stratified_split(y, 0.8, 12);
  EXPECT_NE(other.train, s.train);
}

TEST(Split, ClampsAndRejects) {
  const Labels y = {0, 0, 1, 1};
  const Split s = stratified_split(y, 0.99, 1);
  EXPECT_EQ(s.test.size(), 2u);
  EXPECT_THROW(stratified_split(y, 1.0, 1), Error);
  try {
    stratified_split(Labels{0, 0, 1}, 0.5, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTooFewSamples);
  }
}

TEST(Folds, PartitionAndBalance) {
  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const int k = 2 + static_cast<int>(rng.below(9));
    const int classes = 1 + static_cast<int>(rng.below(5));
    Labels y;
    std::vector<std::size_t> per(static_cast<std::size_t>(classes));
    for (int c = 0; c < classes; ++c) {
      per[static_cast<std::size_t>(c)] = static_cast<std::size_t>(k) + rng.below(40);
      y.insert(y.end(), per[static_cast<std::size_t>(c)], c);
    }
    rng.shuffle(y);
    const FoldPlan plan = make_folds(y, k, rng.next_u64());
    ASSERT_EQ(plan.folds.size(), static_cast<std::size_t>(k));
    std::set<std::size_t> all;
    std::size_t lo = y.size(), hi = 0;
    for (std::size_t f = 0; f < plan.folds.size(); ++f) {
      const auto& fold = plan.folds[f];
      EXPECT_TRUE(std::is_sorted(fold.begin(), fold.end()));
      lo = std::min(lo, fold.size());
      hi = std::max(hi, fold.size());
      for (std::size_t i : fold) EXPECT_TRUE(all.insert(i).second);
      for (int c = 0; c < classes; ++c) {
        const auto cnt = static_cast<std::size_t>(
            std::count_if(fold.begin(), fold.end(), [&](std::size_t i) { return y[i] == c; }));
        const std::size_t base = per[static_cast<std::size_t>(c)] / static_cast<std::size_t>(k);
        EXPECT_TRUE(cnt == base || cnt == base + 1);
      }
      const auto train = plan.training_indices(f);
      EXPECT_EQ(train.size() + fold.size(), y.size());
    }
    EXPECT_EQ(all.size(), y.size());
    EXPECT_LE(hi - lo, 1u);
  }
}

TEST(Folds, Errors) {
  const Labels y = balanced_labels(2, 3);
  EXPECT_THROW(make_folds(y, 1, 0), Error);
  try {
    make_folds(y, 4, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kFoldError);
  }
}

}  // namespace
}  // namespace hpfens
