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

#include <cmath>
#include <fstream>

#include "hpfens/classifier.hpp"
#include "test_util.hpp"

namespace hpfens {
namespace {

using testing::gaussian_blobs;

ClassifierSpec spec_for(ClassifierId id, std::uint64_t seed = 17) {
  ClassifierSpec s;
  s.id = id;
  s.seed = seed;
  return s;
}

double accuracy(const Labels& a, const Labels& b) {
  std::size_t hit = 0;
  for (std::size_t i = 0; i < a.size(); ++i) hit += a[i] == b[i];
  return static_cast<double>(hit) / static_cast<double>(a.size());
}

class EachClassifier : public ::testing::TestWithParam<ClassifierId> {};

INSTANTIATE_TEST_SUITE_P(Zoo, EachClassifier, ::testing::ValuesIn(kClassifierRegistry),
                         [](const auto& info) { return std::string(classifier_name(info.param)); });

TEST_P(EachClassifier, MemorizesTwoPoints) {
  MatrixF x(2, 3, std::vector<float>{0, 0, 0, 1, 1, 1});
  const Labels y = {0, 1};
  const TrainedModel m = train(spec_for(GetParam()), x, y);
  EXPECT_EQ(m.predict(x), y);
}

TEST_P(EachClassifier, SeparableBlobs) {
  MatrixF x, xt;
  Labels y, yt;
  gaussian_blobs(70, 3, 8, 4.0, 0.6, 1, x, y);
  gaussian_blobs(30, 3, 8, 4.0, 0.6, 2, xt, yt);
  const TrainedModel m = train(spec_for(GetParam()), x, y);
  EXPECT_GE(accuracy(m.predict(xt), yt), 0.95);
  EXPECT_EQ(m.num_classes(), 3);
  EXPECT_EQ(m.feature_width(), 8u);
}

TEST_P(EachClassifier, ProbabilitiesAreDistributionsConsistentWithPredict) {
  MatrixF x;
  Labels y;
  gaussian_blobs(30, 4, 5, 1.0, 1.0, 3, x, y);
  const TrainedModel m = train(spec_for(GetParam()), x, y);
  const MatrixD p = m.predict_proba(x);
  ASSERT_EQ(p.rows(), x.rows());
  ASSERT_EQ(p.cols(), 4u);
  for (std::size_t i = 0; i < p.rows(); ++i) {
    double s = 0;
    for (double v : p.row(i)) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
      s += v;
    }
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
  EXPECT_EQ(m.predict(x), argmax_rows(p));
}

TEST_P(EachClassifier, DeterministicUnderSeed) {
  MatrixF x;
  Labels y;
  gaussian_blobs(25, 3, 6, 1.5, 1.0, 4, x, y);
  const TrainedModel a = train(spec_for(GetParam()), x, y);
  const TrainedModel b = train(spec_for(GetParam()), x, y);
  EXPECT_EQ(a.predict_proba(x), b.predict_proba(x));
  EXPECT_EQ(a.serialize_state(), b.serialize_state());
}

TEST_P(EachClassifier, BundleRoundTrip) {
  testing::TempDir dir;
  MatrixF x;
  Labels y;
  gaussian_blobs(20, 3, 4, 2.0, 1.0, 5, x, y);
  const TrainedModel m = train(spec_for(GetParam()), x, y);
  const LabelMap labels({"a", "b", "c"});
  save_model_bundle(m, labels, dir / "m");
  const ModelBundle b = load_model_bundle(dir / "m");
  EXPECT_EQ(b.label_map, labels);
  EXPECT_EQ(b.model.spec(), m.spec());
  EXPECT_EQ(b.model.predict_proba(x), m.predict_proba(x));
}

TEST_P(EachClassifier, UnseenClassGetsZeroProbability) {
  MatrixF x;
  Labels y;
  gaussian_blobs(15, 2, 3, 3.0, 0.5, 6, x, y);
  for (int& l : y) l = l == 0 ? 0 : 2;
  const TrainedModel m = train(spec_for(GetParam()), x, y, 3);
  EXPECT_EQ(m.classes_seen(), (std::vector<int>{0, 2}));
  const MatrixD p = m.predict_proba(x);
  for (std::size_t i = 0; i < p.rows(); ++i) EXPECT_EQ(p(i, 1), 0.0);
  for (int l : m.predict(x)) EXPECT_NE(l, 1);
}

TEST(Classifier, NamesAndRegistry) {
  for (std::size_t i = 0; i < kClassifierRegistry.size(); ++i) {
    const ClassifierId id = kClassifierRegistry[i];
    EXPECT_EQ(parse_classifier(classifier_name(id)), id);
    EXPECT_EQ(registry_index(id), static_cast<int>(i));
  }
  EXPECT_STREQ(classifier_name(ClassifierId::kRF), "RF");
  EXPECT_STREQ(classifier_name(ClassifierId::kLGB), "LGB");
  EXPECT_THROW(parse_classifier("KNN"), Error);
}

TEST(Classifier, SpecValidation) {
  ClassifierSpec s = spec_for(ClassifierId::kSVM);
  EXPECT_EQ(s.param("C"), 1.0);
  s.hyperparams["C"] = 10.0;
  EXPECT_EQ(s.resolved().at("C"), 10.0);
  s.validate();
  s.hyperparams["bogus"] = 1.0;
  EXPECT_THROW(s.validate(), Error);
  s.hyperparams.erase("bogus");
  s.hyperparams["C"] = -1.0;
  EXPECT_THROW(s.validate(), Error);
  ClassifierSpec r = spec_for(ClassifierId::kRF);
  r.hyperparams["n_estimators"] = 2.5;
  EXPECT_THROW(r.validate(), Error);
}

TEST(Classifier, SpecJsonRoundTrip) {
  ClassifierSpec s = spec_for(ClassifierId::kXGB, 99);
  s.hyperparams["max_depth"] = 3;
  s.hyperparams["learning_rate"] = 0.05;
  EXPECT_EQ(spec_from_json(spec_to_json(s)), s);
}

TEST(Classifier, ArgmaxTiesGoLow) {
  MatrixD p(3, 3, std::vector<double>{0.4, 0.4, 0.2, 0.2, 0.4, 0.4, 1.0 / 3, 1.0 / 3, 1.0 / 3});
  EXPECT_EQ(argmax_rows(p), (Labels{0, 1, 0}));
}

TEST(Classifier, TrainingErrors) {
  MatrixF x(4, 2, 1.0f);
  try {
    train(spec_for(ClassifierId::kLR), x, Labels{1, 1, 1, 1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateLabels);
  }
  try {
    train(spec_for(ClassifierId::kLR), x, Labels{0, 1, 0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kShapeError);
  }
  x(2, 1) = std::nanf("");
  try {
    train(spec_for(ClassifierId::kLR), x, Labels{0, 1, 0, 1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNumericError);
  }
}

TEST(Classifier, PredictWidthMismatch) {
  MatrixF x;
  Labels y;
  gaussian_blobs(5, 2, 3, 3.0, 0.5, 7, x, y);
  const TrainedModel m = train(spec_for(ClassifierId::kLR), x, y);
  try {
    m.predict(MatrixF(2, 4));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kShapeError);
  }
}

TEST(Classifier, StandardizeOptionKeepsAccuracy) {
  MatrixF x, xt;
  Labels y, yt;
  gaussian_blobs(50, 3, 6, 4.0, 0.6, 8, x, y);
  gaussian_blobs(20, 3, 6, 4.0, 0.6, 9, xt, yt);
  for (ClassifierId id : {ClassifierId::kSVM, ClassifierId::kLR, ClassifierId::kMLP}) {
    ClassifierSpec s = spec_for(id);
    s.hyperparams["standardize"] = 1;
    const TrainedModel m = train(s, x, y);
    EXPECT_GE(accuracy(m.predict(xt), yt), 0.95) << classifier_name(id);
  }
}

TEST(ModelBundle, CorruptionDetected) {
  testing::TempDir dir;
  MatrixF x;
  Labels y;
  gaussian_blobs(10, 2, 3, 3.0, 0.5, 10, x, y);
  const TrainedModel m = train(spec_for(ClassifierId::kRF), x, y);
  save_model_bundle(m, LabelMap({"a", "b"}), dir / "m");

  auto expect_bundle_error = [&] {
    try {
      load_model_bundle(dir / "m");
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kBundleError);
    }
  };
  const std::string state = read_file(dir / "m/state.bin");
  std::string flipped = state;
  flipped[flipped.size() / 2] ^= 0x5a;
  write_file_atomic(dir / "m/state.bin", flipped);
  expect_bundle_error();
  write_file_atomic(dir / "m/state.bin", state);
  load_model_bundle(dir / "m");

  const std::string spec = read_file(dir / "m/spec.json");
  write_file_atomic(dir / "m/spec.json", spec + " ");
  expect_bundle_error();
  write_file_atomic(dir / "m/spec.json", spec);
  std::filesystem::remove(dir / "m/spec.sha256");
  expect_bundle_error();

  try {
    save_model_bundle(m, LabelMap({"a", "b", "c"}), dir / "n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kShapeError);
  }
}

TEST(Gbdt, BinaryAndMulticlassBoostingImproveOverRounds) {
  MatrixF x, xt;
  Labels y, yt;
  gaussian_blobs(60, 3, 4, 1.5, 1.0, 11, x, y);
  gaussian_blobs(60, 3, 4, 1.5, 1.0, 12, xt, yt);
  for (ClassifierId id : {ClassifierId::kXGB, ClassifierId::kLGB}) {
    ClassifierSpec few = spec_for(id), many = spec_for(id);
    few.hyperparams["n_estimators"] = 1;
    many.hyperparams["n_estimators"] = 50;
    const double a1 = accuracy(train(few, x, y).predict(x), y);
    const double a50 = accuracy(train(many, x, y).predict(x), y);
    EXPECT_GE(a50, a1) << classifier_name(id);
  }
}

TEST(Gbdt, SubsamplingIsSeeded) {
  MatrixF x;
  Labels y;
  gaussian_blobs(40, 2, 5, 1.0, 1.0, 13, x, y);
  ClassifierSpec s = spec_for(ClassifierId::kXGB, 5);
  s.hyperparams["subsample"] = 0.5;
  s.hyperparams["colsample_bytree"] = 0.6;
  const MatrixD a = train(s, x, y).predict_proba(x);
  EXPECT_EQ(a, train(s, x, y).predict_proba(x));
  s.seed = 6;
  EXPECT_NE(a, train(s, x, y).predict_proba(x));
}

}  // namespace
}  // namespace hpfens
