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
#include <sstream>

#include "hpfens/metrics.hpp"
#include "test_util.hpp"

namespace hpfens {
namespace {

TEST(Confusion, SmallExample) {
  const Labels actual = {0, 0, 1, 1}, pred = {0, 1, 1, 1};
  const ConfusionMatrix cm = confusion(actual, pred, 2);
  EXPECT_EQ(cm.counts, (Matrix<std::int64_t>(2, 2, std::vector<std::int64_t>{1, 1, 0, 2})));
  EXPECT_EQ(cm.tp(1), 2);
  EXPECT_EQ(cm.fp(1), 1);
  EXPECT_EQ(cm.fn(0), 1);
  EXPECT_EQ(cm.tn(0), 2);
  EXPECT_THROW(confusion(actual, Labels{0, 1}, 2), Error);
  try {
    confusion(actual, Labels{0, 1, 2, 1}, 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kLabelError);
  }
}

TEST(Classification, FromCounts) {
  ConfusionMatrix cm;
  cm.counts = Matrix<std::int64_t>(2, 2, std::vector<std::int64_t>{8, 2, 1, 9});
  cm.n = 20;
  const ClassificationMetrics m = classification_metrics(cm);
  EXPECT_DOUBLE_EQ(m.accuracy, 0.85);
  EXPECT_DOUBLE_EQ(m.per_class[0].precision, 8.0 / 9.0);
  EXPECT_DOUBLE_EQ(m.per_class[1].precision, 9.0 / 11.0);
  EXPECT_DOUBLE_EQ(m.per_class[0].recall, 0.8);
  EXPECT_DOUBLE_EQ(m.per_class[1].recall, 0.9);
  EXPECT_EQ(m.per_class[1].support, 10);
  EXPECT_NEAR(m.precision_macro, (8.0 / 9.0 + 9.0 / 11.0) / 2, 1e-15);
  EXPECT_NEAR(m.recall_macro, 0.85, 1e-15);
}

TEST(Classification, ZeroDivisionGivesZeroAndEmptyFails) {
  const Labels actual = {0, 0, 0}, pred = {0, 0, 0};
  const ClassificationMetrics m = classification_metrics(confusion(actual, pred, 3));
  EXPECT_EQ(m.per_class[1].precision, 0.0);
  EXPECT_EQ(m.per_class[1].recall, 0.0);
  EXPECT_EQ(m.per_class[1].f1, 0.0);
  EXPECT_NEAR(m.precision_macro, 1.0 / 3, 1e-15);
  try {
    classification_metrics(confusion(Labels{}, Labels{}, 2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyInput);
  }
}

TEST(Regression, Example) {
  const RegressionErrors e = regression_errors(Labels{0, 1, 2}, Labels{1, 1, 2});
  EXPECT_NEAR(e.mae, 1.0 / 3, 1e-15);
  EXPECT_NEAR(e.mse, 1.0 / 3, 1e-15);
  EXPECT_NEAR(e.rmse, 0.57735, 1e-5);
  EXPECT_THROW(regression_errors(Labels{}, Labels{}), Error);
  EXPECT_THROW(regression_errors(Labels{1}, Labels{1, 2}), Error);
}

// Per-sample counting oracle.
TEST(Classification, MatchesCountingOracle) {
  Rng rng(61);
  for (int trial = 0; trial < 1000; ++trial) {
    const int k = 2 + static_cast<int>(rng.below(5));
    const std::size_t n = 1 + rng.below(200);
    Labels a(n), p(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = static_cast<int>(rng.below(static_cast<std::uint64_t>(k)));
      p[i] = rng.uniform() < 0.6 ? a[i] : static_cast<int>(rng.below(static_cast<std::uint64_t>(k)));
    }
    const MetricsBundle m = evaluate(a, p, MatrixD(), k);
    double hits = 0, abs = 0, sq = 0;
    double pm = 0, rm = 0, fm = 0;
    for (int c = 0; c < k; ++c) {
      double tp = 0, fp = 0, fn = 0;
      for (std::size_t i = 0; i < n; ++i) {
        tp += a[i] == c && p[i] == c;
        fp += a[i] != c && p[i] == c;
        fn += a[i] == c && p[i] != c;
      }
      const double pr = tp + fp > 0 ? tp / (tp + fp) : 0.0;
      const double rc = tp + fn > 0 ? tp / (tp + fn) : 0.0;
      const double f1 = pr + rc > 0 ? 2 * pr * rc / (pr + rc) : 0.0;
      ASSERT_NEAR(m.classification.per_class[static_cast<std::size_t>(c)].precision, pr, 1e-12);
      ASSERT_NEAR(m.classification.per_class[static_cast<std::size_t>(c)].recall, rc, 1e-12);
      ASSERT_NEAR(m.classification.per_class[static_cast<std::size_t>(c)].f1, f1, 1e-12);
      pm += pr / k;
      rm += rc / k;
      fm += f1 / k;
    }
    for (std::size_t i = 0; i < n; ++i) {
      hits += a[i] == p[i];
      abs += std::abs(a[i] - p[i]);
      sq += (a[i] - p[i]) * (a[i] - p[i]);
    }
    ASSERT_NEAR(m.classification.accuracy, hits / static_cast<double>(n), 1e-12);
    ASSERT_NEAR(m.classification.precision_macro, pm, 1e-12);
    ASSERT_NEAR(m.classification.recall_macro, rm, 1e-12);
    ASSERT_NEAR(m.classification.f1_macro, fm, 1e-12);
    ASSERT_NEAR(m.errors.mae, abs / static_cast<double>(n), 1e-12);
    ASSERT_NEAR(m.errors.mse, sq / static_cast<double>(n), 1e-12);
    ASSERT_NEAR(m.errors.rmse, std::sqrt(m.errors.mse), 1e-12);
    ASSERT_LE(m.errors.mae, m.errors.rmse + 1e-15);
    if (k == 2) {
      ASSERT_NEAR(m.errors.mae, 1.0 - m.classification.accuracy, 1e-12);
      ASSERT_NEAR(m.errors.mse, m.errors.mae, 1e-12);
    }
  }
}

std::vector<bool> as_bools(std::initializer_list<int> v) {
  std::vector<bool> out;
  for (int x : v) out.push_back(x != 0);
  return out;
}

// std::vector<bool> has no contiguous storage; copy into a plain array.
std::optional<RocCurve> roc(const std::vector<bool>& pos, const std::vector<double>& s) {
  std::unique_ptr<bool[]> buf(new bool[pos.size()]);
  for (std::size_t i = 0; i < pos.size(); ++i) buf[i] = pos[i];
  return roc_curve(std::span<const bool>(buf.get(), pos.size()), s);
}

TEST(Roc, PerfectConstantReversed) {
  const auto pos = as_bools({0, 0, 1, 1});
  const auto perfect = roc(pos, {0.1, 0.2, 0.8, 0.9});
  ASSERT_TRUE(perfect);
  EXPECT_NEAR(perfect->auc, 1.0, 1e-12);
  const auto flat = roc(pos, {0.5, 0.5, 0.5, 0.5});
  EXPECT_NEAR(flat->auc, 0.5, 1e-12);
  EXPECT_EQ(flat->points.size(), 2u);
  const auto rev = roc(pos, {0.9, 0.8, 0.2, 0.1});
  EXPECT_NEAR(rev->auc, 0.0, 1e-12);
  EXPECT_FALSE(roc(as_bools({1, 1}), {0.2, 0.3}));
  EXPECT_FALSE(roc(as_bools({0, 0}), {0.2, 0.3}));
}

TEST(Roc, MatchesPairCountingAndProperties) {
  Rng rng(71);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 2 + rng.below(60);
    std::vector<bool> pos(n);
    std::vector<double> s(n), neg_s(n);
    for (std::size_t i = 0; i < n; ++i) {
      pos[i] = rng.uniform() < 0.4;
      s[i] = static_cast<double>(rng.below(8)) / 8.0;
      neg_s[i] = -s[i];
    }
    const auto c = roc(pos, s);
    double np = 0, nn = 0, wins = 0;
    for (std::size_t i = 0; i < n; ++i) {
      (pos[i] ? np : nn) += 1;
      for (std::size_t j = 0; j < n; ++j) {
        if (pos[i] && !pos[j]) wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
      }
    }
    if (np == 0 || nn == 0) {
      EXPECT_FALSE(c);
      continue;
    }
    ASSERT_TRUE(c);
    EXPECT_NEAR(c->auc, wins / (np * nn), 1e-9);
    EXPECT_NEAR(roc(pos, neg_s)->auc, 1.0 - c->auc, 1e-9);
    EXPECT_EQ(c->points.front(), std::make_pair(0.0, 0.0));
    EXPECT_EQ(c->points.back(), std::make_pair(1.0, 1.0));
    for (std::size_t i = 1; i < c->points.size(); ++i) {
      EXPECT_GE(c->points[i].first, c->points[i - 1].first);
      EXPECT_GE(c->points[i].second, c->points[i - 1].second);
    }
  }
}

TEST(Roc, MulticlassExcludesUndefinedClasses) {
  const Labels actual = {0, 0, 1, 1};
  MatrixD p(4, 3, std::vector<double>{0.8, 0.1, 0.1, 0.7, 0.2, 0.1, 0.1, 0.8, 0.1, 0.2, 0.7, 0.1});
  const RocResult r = roc_auc(actual, p, true);
  ASSERT_EQ(r.per_class.size(), 3u);
  EXPECT_TRUE(r.per_class[0]);
  EXPECT_FALSE(r.per_class[2]);
  EXPECT_NEAR(*r.auc_macro, 1.0, 1e-12);
  EXPECT_TRUE(r.micro);
  EXPECT_THROW(roc_auc(actual, MatrixD(3, 3), false), Error);
}

TEST(Report, ConfusionPercentagesSumTo100) {
  Rng rng(81);
  Labels a(57), p(57);
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = static_cast<int>(rng.below(3));
    p[i] = static_cast<int>(rng.below(3));
  }
  const ConfusionMatrix cm = confusion(a, p, 3);
  const LabelMap labels({"x", "y", "z"});
  auto numbers = [](const std::string& csv) {
    std::vector<std::vector<double>> rows;
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      std::istringstream ls(line);
      std::string cell;
      std::getline(ls, cell, ',');
      rows.emplace_back();
      while (std::getline(ls, cell, ',')) rows.back().push_back(std::stod(cell));
    }
    return rows;
  };
  double total = 0;
  for (const auto& row : numbers(confusion_csv(cm, labels, ConfusionForm::kRowPercent))) {
    double s = 0;
    for (double v : row) s += v;
    EXPECT_NEAR(s, 100.0, 1e-9);
  }
  for (const auto& row : numbers(confusion_csv(cm, labels, ConfusionForm::kTotalPercent))) {
    for (double v : row) total += v;
  }
  EXPECT_NEAR(total, 100.0, 1e-9);
  double count = 0;
  for (const auto& row : numbers(confusion_csv(cm, labels, ConfusionForm::kCounts))) {
    for (double v : row) count += v;
  }
  EXPECT_EQ(count, 57.0);
}

TEST(Report, ScalarMetricsAndJson) {
  const Labels a = {0, 1, 1, 0}, p = {0, 1, 0, 0};
  MatrixD probs(4, 2, std::vector<double>{0.9, 0.1, 0.2, 0.8, 0.6, 0.4, 0.7, 0.3});
  const MetricsBundle m = evaluate(a, p, probs, 2, 0.5);
  const auto s = scalar_metrics(m);
  EXPECT_EQ(s.at("accuracy"), 0.75);
  EXPECT_EQ(s.at("prediction_seconds"), 0.5);
  EXPECT_TRUE(s.count("auc_macro"));
  EXPECT_FALSE(scalar_metrics(evaluate(a, p, MatrixD(), 2)).count("auc_macro"));
  const std::string j = metrics_to_json(m, LabelMap({"neg", "pos"}));
  EXPECT_NE(j.find("\"neg\""), std::string::npos);
  EXPECT_NE(j.find("accuracy"), std::string::npos);
}

TEST(CrossValidate, MemorizingPipelineIsPerfect) {
  Labels y;
  for (int i = 0; i < 60; ++i) y.push_back(i % 3);
  const FoldPlan plan = make_folds(y, 5, 1);
  const CrossValidation cv = cross_validate(
      plan, 3, [&](int, std::span<const std::size_t>, std::span<const std::size_t> test) {
        FoldOutcome o;
        for (std::size_t i : test) {
          o.actual.push_back(y[i]);
          o.predicted.push_back(y[i]);
        }
        return o;
      });
  ASSERT_EQ(cv.folds.size(), 5u);
  EXPECT_EQ(cv.aggregate.at("accuracy").mean, 1.0);
  EXPECT_EQ(cv.aggregate.at("accuracy").std, 0.0);
  EXPECT_EQ(cv.aggregate.at("mae").mean, 0.0);
}

TEST(CrossValidate, AggregateIsFoldOrderInvariant) {
  Rng rng(91);
  std::vector<MetricsBundle> folds;
  for (int f = 0; f < 7; ++f) {
    Labels a(30), p(30);
    for (std::size_t i = 0; i < a.size(); ++i) {
      a[i] = static_cast<int>(rng.below(3));
      p[i] = static_cast<int>(rng.below(3));
    }
    folds.push_back(evaluate(a, p, MatrixD(), 3));
  }
  const auto base = aggregate_metrics(folds);
  std::vector<double> acc;
  for (const auto& f : folds) acc.push_back(f.classification.accuracy);
  double mean = 0;
  for (double v : acc) mean += v / 7.0;
  double var = 0;
  for (double v : acc) var += (v - mean) * (v - mean) / 7.0;
  EXPECT_NEAR(base.at("accuracy").mean, mean, 1e-12);
  EXPECT_NEAR(base.at("accuracy").std, std::sqrt(var), 1e-12);
  for (int t = 0; t < 10; ++t) {
    rng.shuffle(folds);
    const auto again = aggregate_metrics(folds);
    for (const auto& [name, s] : base) {
      EXPECT_EQ(again.at(name).mean, s.mean) << name;
      EXPECT_EQ(again.at(name).std, s.std) << name;
    }
  }
}

TEST(CrossValidate, FoldErrorsNameTheFold) {
  Labels y;
  for (int i = 0; i < 20; ++i) y.push_back(i % 2);
  const FoldPlan plan = make_folds(y, 4, 1);
  try {
    cross_validate(plan, 2, [](int fold, auto, auto) -> FoldOutcome {
      if (fold == 2) fail(ErrorCode::kDegenerateLabels, "boom");
      return FoldOutcome{{0, 1}, {0, 1}, {}, 0.0};
    });
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateLabels);
    EXPECT_EQ(std::string(e.what()).rfind("fold 2", 0), 0u) << e.what();
  }
}

}  // namespace
}  // namespace hpfens
