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

#include <set>

#include <json.hpp>

#include "hpfens/experiment.hpp"
#include "image_fixtures.hpp"
#include "test_util.hpp"

#ifndef HPFENS_TEST_DATA_DIR
#error "HPFENS_TEST_DATA_DIR must be defined"
#endif

namespace hpfens {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// One noisy three-class dataset shared by the suite; runs write into their
// own output directories.
class ExperimentTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    set_warnings_enabled(false);
    dir_ = new testing::TempDir("exp");
    testing::write_image_dataset(dir_->path() / "ds", {"a", "b", "c"}, 30, 40.0, 101, 48);
  }
  static void TearDownTestSuite() {
    delete dir_;
    set_warnings_enabled(true);
  }

  static ExperimentConfig config(const std::string& out) {
    ExperimentConfig c;
    c.dataset_root = dir_->path() / "ds";
    c.label_map = LabelMap({"a", "b", "c"});
    c.backbones = {BackboneSpec{}};
    for (ClassifierId id : kClassifierRegistry) c.classifiers.push_back(ClassifierSpec{id, {}, 0});
    c.cache_dir = dir_->path() / "cache";
    c.output_dir = dir_->path() / out;
    return c;
  }

  static testing::TempDir* dir_;
};

testing::TempDir* ExperimentTest::dir_ = nullptr;

TEST(Config, JsonRoundTripAndDefaults) {
  ExperimentConfig c = default_config();
  EXPECT_EQ(c.classifiers.size(), 6u);
  EXPECT_EQ(c.backbones.size(), 5u);
  c.dataset_root = "/data";
  c.label_map = LabelMap::preset("lung");
  c.label_preset = "lung";
  c.backbones = {BackboneSpec{}};
  c.mode = EvaluationMode::kKFold;
  c.k = 4;
  c.weights = {1, 2, 3};
  c.classifiers[1].hyperparams["C"] = 3.0;
  c.classifiers[1].seed = 77;
  const std::string text = config_to_json(c);
  const ExperimentConfig r = config_from_json(text);
  EXPECT_EQ(config_to_json(r), text);
  EXPECT_EQ(r.hash(), c.hash());
  EXPECT_EQ(r.label_map, c.label_map);

  ExperimentConfig moved = r;
  moved.cache_dir = "elsewhere";
  moved.output_dir = "other";
  moved.batch_size = 7;
  EXPECT_EQ(moved.hash(), c.hash());
  moved.seed = 1;
  EXPECT_NE(moved.hash(), c.hash());
}

TEST(Config, RejectsInvalid) {
  auto code_of = [](const std::string& text) {
    try {
      config_from_json(text);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::kInternal;
  };
  const std::string base = R"("dataset":{"root":"d","labels":"colon"},"backbones":[{"id":"mock"}])";
  EXPECT_EQ(code_of("{" + base + "}"), ErrorCode::kInternal);
  EXPECT_EQ(code_of("{" + base + R"(,"typo":1})"), ErrorCode::kConfigError);
  EXPECT_EQ(code_of("{" + base + R"(,"hpf":{"top_k":9}})"), ErrorCode::kConfigError);
  EXPECT_EQ(code_of("{" + base + R"(,"ensemble":{"weights":[1,2]}})"), ErrorCode::kConfigError);
  EXPECT_EQ(code_of("{" + base + R"(,"classifiers":[{"id":"RF"},{"id":"RF"}],"hpf":{"top_k":1}})"),
            ErrorCode::kConfigError);
  EXPECT_EQ(code_of("{" + base + R"(,"classifiers":[{"id":"RF","hyperparams":{"depth":2}}]})"),
            ErrorCode::kConfigError);
  EXPECT_EQ(code_of("{" + base + R"(,"evaluation":{"mode":"loo"}})"), ErrorCode::kConfigError);
  EXPECT_EQ(code_of(R"({"dataset":{"root":"d","labels":"colon"},"backbones":[{"id":"vgg16"}]})"),
            ErrorCode::kConfigError);
  EXPECT_EQ(code_of("not json"), ErrorCode::kConfigError);
}

TEST(Config, RelativePathsResolveAgainstConfigFile) {
  testing::TempDir dir;
  fs::create_directories(dir / "sub");
  write_file_atomic(dir / "sub/c.json",
                    R"({"dataset":{"root":"ds","labels":["x","y"]},"backbones":[{"id":"mock"}],)"
                    R"("cache_dir":"/abs/cache","output_dir":"out"})");
  const ExperimentConfig c = load_config(dir / "sub/c.json");
  EXPECT_EQ(c.dataset_root, dir / "sub/ds");
  EXPECT_EQ(c.output_dir, dir / "sub/out");
  EXPECT_EQ(c.cache_dir, fs::path("/abs/cache"));
  try {
    load_config(dir / "missing.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConfigError);
  }
}

TEST_F(ExperimentTest, HoldoutRunStructure) {
  const ExperimentConfig cfg = config("holdout");
  const ExperimentResult r = run_experiment(cfg);
  EXPECT_EQ(r.num_samples, 90u);
  EXPECT_EQ(r.num_train, 72u);
  EXPECT_EQ(r.test_index.size(), 18u);
  EXPECT_EQ(r.test_actual.size(), 18u);
  EXPECT_EQ(r.leaderboard_source, "validation");
  ASSERT_EQ(r.backbones.size(), 1u);
  const BackboneRun& b = r.best();
  EXPECT_EQ(b.feature_dim, kMockFeatureDim);
  EXPECT_EQ(b.classifiers.size(), 6u);
  for (const ClassifierRun& c : b.classifiers) {
    EXPECT_EQ(c.test_pred.size(), 18u);
    EXPECT_EQ(c.val_pred.size(), 72u);
    EXPECT_TRUE(c.validation_accuracy().has_value());
  }
  EXPECT_EQ(r.selection.selected.size(), 3u);
  EXPECT_EQ(r.seeds.count("split"), 1u);
  ASSERT_EQ(b.ensembles.size(), 2u);
  const double hard = b.ensembles[0].metrics.classification.accuracy;
  const double soft = b.ensembles[1].metrics.classification.accuracy;
  EXPECT_EQ(b.chosen_mode, soft >= hard ? VoteMode::kSoft : VoteMode::kHard);
  EXPECT_EQ(r.final_metrics.classification.accuracy, std::max(hard, soft));

  // Ranking really follows the validation accuracies.
  std::vector<AccuracyCell> cells;
  for (const ClassifierRun& c : b.classifiers) cells.push_back({c.id, "mock", *c.validation_accuracy()});
  EXPECT_EQ(select_top_k(build_leaderboard(cells), 3).selected, r.selection.selected);

  for (const char* f : {"result.json", "summary.json", "manifest.json", "report/metrics.json",
                        "report/leaderboard.csv", "report/confusion.png", "report/roc.png",
                        "report/tables.md", "report/timing.csv", "report/report_manifest.json",
                        "bundle/bundle.json", "bundle/bundle.sha256"}) {
    EXPECT_TRUE(fs::exists(cfg.output_dir / f)) << f;
  }
  EXPECT_FALSE(fs::exists(cfg.output_dir / "FAILED.json"));
}

TEST_F(ExperimentTest, ResultReloadAndReportAreStable) {
  const ExperimentConfig cfg = config("reload");
  const ExperimentResult r = run_experiment(cfg);
  const ExperimentResult back = load_result(cfg.output_dir);
  EXPECT_EQ(summary_json(back), summary_json(r));
  EXPECT_EQ(result_to_json(back), result_to_json(r));
  EXPECT_EQ(back.final_metrics.classification.accuracy, r.final_metrics.classification.accuracy);

  const auto files = emit_report(back, cfg.output_dir / "again");
  EXPECT_FALSE(files.empty());
  for (const std::string& f : files) {
    EXPECT_EQ(read_file(cfg.output_dir / "again" / f), read_file(cfg.output_dir / "report" / f)) << f;
  }

  const json summary = json::parse(read_file(cfg.output_dir / "summary.json"));
  EXPECT_FALSE(summary.dump().find("seconds") != std::string::npos);
  EXPECT_FALSE(summary.dump().find("cache_hit") != std::string::npos);
}

TEST_F(ExperimentTest, PredictFromBundle) {
  const ExperimentConfig cfg = config("predict");
  const ExperimentResult r = run_experiment(cfg, false);
  const fs::path bundle = cfg.output_dir / "bundle";
  const fs::path image = dir_->path() / "ds" / r.test_paths.front();
  const SinglePrediction p = predict_single(bundle, image);
  ASSERT_EQ(p.probabilities.size(), 3u);
  double s = 0;
  for (double v : p.probabilities) s += v;
  EXPECT_NEAR(s, 1.0, 1e-9);
  EXPECT_EQ(p.class_name, cfg.label_map.name(p.label_id));
  // Same decision as the evaluated ensemble for that test image.
  EXPECT_EQ(p.label_id, r.best().chosen().pred.front());

  const std::string text = read_file(bundle / "backbone.json");
  write_file_atomic(bundle / "backbone.json", R"({"id":"mock","input_layout":"nhwc"})");
  try {
    predict_single(bundle, image);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kBundleError);
  }
  write_file_atomic(bundle / "backbone.json", text);
  predict_single(bundle, image);
  try {
    predict_single(bundle, dir_->path() / "nope.png");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDecodeError);
  }
}

TEST_F(ExperimentTest, KFoldPoolsEveryFold) {
  ExperimentConfig cfg = config("kfold");
  cfg.mode = EvaluationMode::kKFold;
  cfg.k = 3;
  cfg.validation_folds = 3;
  cfg.classifiers = {ClassifierSpec{ClassifierId::kSVM, {}, 0},
                     ClassifierSpec{ClassifierId::kLR, {}, 0},
                     ClassifierSpec{ClassifierId::kMLP, {}, 0}};
  cfg.modes = {VoteMode::kSoft};
  const ExperimentResult r = run_experiment(cfg, false);
  EXPECT_EQ(r.test_index.size(), 90u);
  EXPECT_EQ(std::set<std::size_t>(r.test_index.begin(), r.test_index.end()).size(), 90u);
  EXPECT_EQ(std::set<int>(r.test_fold.begin(), r.test_fold.end()), (std::set<int>{0, 1, 2}));
  const EnsembleRun& e = r.best().chosen();
  EXPECT_EQ(e.fold_metrics.size(), 3u);
  EXPECT_EQ(e.aggregate.count("accuracy"), 1u);
  EXPECT_TRUE(fs::exists(cfg.output_dir / "bundle/bundle.json"));
}

TEST_F(ExperimentTest, PaperFaithfulRanksOnTest) {
  ExperimentConfig cfg = config("faithful");
  cfg.paper_faithful = true;
  cfg.classifiers = {ClassifierSpec{ClassifierId::kRF, {}, 0},
                     ClassifierSpec{ClassifierId::kSVM, {}, 0},
                     ClassifierSpec{ClassifierId::kLR, {}, 0}};
  cfg.top_k = 2;
  const ExperimentResult r = run_experiment(cfg, false);
  EXPECT_EQ(r.leaderboard_source, "test");
  std::vector<AccuracyCell> cells;
  for (const ClassifierRun& c : r.best().classifiers) {
    EXPECT_TRUE(c.val_pred.empty());
    std::size_t hit = 0;
    for (std::size_t i = 0; i < c.test_pred.size(); ++i) hit += c.test_pred[i] == r.test_actual[i];
    cells.push_back({c.id, "mock", static_cast<double>(hit) / static_cast<double>(c.test_pred.size())});
  }
  const std::vector<ClassifierId> req = {ClassifierId::kRF, ClassifierId::kSVM, ClassifierId::kLR};
  EXPECT_EQ(select_top_k(build_leaderboard(cells, req), 2).selected, r.selection.selected);
}

TEST_F(ExperimentTest, TwoBackbonesPickTheBetterOne) {
  ExperimentConfig cfg = config("two");
  BackboneSpec onnx;
  onnx.id = BackboneId::kVgg16;
  onnx.model_path = fs::path(HPFENS_TEST_DATA_DIR) / "pool4x4x1024.onnx";
  cfg.backbones = {BackboneSpec{}, onnx};
  cfg.classifiers = {ClassifierSpec{ClassifierId::kRF, {}, 0},
                     ClassifierSpec{ClassifierId::kLR, {}, 0}};
  cfg.top_k = 2;
  cfg.modes = {VoteMode::kSoft};
  const ExperimentResult r = run_experiment(cfg, false);
  ASSERT_EQ(r.backbones.size(), 2u);
  EXPECT_EQ(r.backbones[1].feature_dim, 16384u);
  EXPECT_EQ(r.leaderboard.backbones, (std::vector<std::string>{"mock", "vgg16"}));
  const double a0 = r.backbones[0].chosen().metrics.classification.accuracy;
  const double a1 = r.backbones[1].chosen().metrics.classification.accuracy;
  EXPECT_EQ(r.chosen_backbone, a1 > a0 ? 1u : 0u);
}

TEST_F(ExperimentTest, FailureNamesStageAndLeavesMarker) {
  ExperimentConfig cfg = config("fail");
  cfg.dataset_root = dir_->path() / "no_such_dataset";
  try {
    run_experiment(cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMissingClassDir);
    EXPECT_EQ(std::string(e.what()).rfind("ingest: ", 0), 0u) << e.what();
  }
  const json marker = json::parse(read_file(cfg.output_dir / "FAILED.json"));
  EXPECT_EQ(marker.at("stage"), "ingest");
  EXPECT_EQ(marker.at("error"), "MissingClassDir");
}

TEST_F(ExperimentTest, DegenerateTrainingFoldIsReported) {
  ExperimentConfig cfg = config("tiny");
  cfg.classifiers = {ClassifierSpec{ClassifierId::kLR, {}, 0}};
  cfg.top_k = 1;
  cfg.validation_folds = 40;  // more folds than any class has training samples
  try {
    run_experiment(cfg, false);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kFoldError);
  }
  EXPECT_TRUE(fs::exists(cfg.output_dir / "FAILED.json"));
}

}  // namespace
}  // namespace hpfens
