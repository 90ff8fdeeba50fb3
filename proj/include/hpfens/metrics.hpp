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

// Evaluation: confusion matrix, accuracy and macro precision / recall / F1,
// MAE / MSE / RMSE over integer label ids, one-vs-rest ROC / AUC, and
// stratified k-fold cross-validation.
//
// Conventions: rates are fractions; a ratio with a zero denominator is 0; a
// class with no positive or no negative samples has no ROC curve and is left
// out of the macro AUC.

#ifndef HPFENS_METRICS_HPP_
#define HPFENS_METRICS_HPP_

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hpfens/common.hpp"
#include "hpfens/data_pipeline.hpp"

namespace hpfens {

struct ConfusionMatrix {
  Matrix<std::int64_t> counts;  // rows = actual, columns = predicted
  std::int64_t n = 0;

  int num_classes() const { return static_cast<int>(counts.rows()); }
  std::int64_t tp(int c) const;
  std::int64_t fp(int c) const;
  std::int64_t fn(int c) const;
  std::int64_t tn(int c) const;
};

// ShapeError for length mismatch; LabelError for labels outside 0..K-1.
ConfusionMatrix confusion(std::span<const int> actual, std::span<const int> predicted, int k);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::int64_t support = 0;
};

struct ClassificationMetrics {
  double accuracy = 0.0;
  double precision_macro = 0.0;
  double recall_macro = 0.0;
  double f1_macro = 0.0;
  std::vector<ClassMetrics> per_class;
};

// EmptyInput when the matrix holds no samples.
ClassificationMetrics classification_metrics(const ConfusionMatrix& cm);

struct RegressionErrors {
  double mae = 0.0;
  double mse = 0.0;
  double rmse = 0.0;
};

// Over integer label ids. EmptyInput for empty input, ShapeError for a
// length mismatch.
RegressionErrors regression_errors(std::span<const int> actual, std::span<const int> predicted);

struct RocCurve {
  std::vector<std::pair<double, double>> points;  // (fpr, tpr), (0,0) .. (1,1)
  double auc = 0.0;
};

// Threshold sweep over distinct scores, highest first; tied scores form one
// step so a constant score gives the diagonal. nullopt when either class is
// empty.
std::optional<RocCurve> roc_curve(std::span<const bool> positive, std::span<const double> scores);

struct RocResult {
  std::vector<std::optional<RocCurve>> per_class;  // one-vs-rest, by label id
  std::optional<double> auc_macro;                // mean over defined classes
  std::optional<RocCurve> micro;                  // only when requested
};

// ShapeError when probs has the wrong row count; LabelError for bad labels.
RocResult roc_auc(std::span<const int> actual, const MatrixD& probs, bool micro = false);

struct MetricsBundle {
  ClassificationMetrics classification;
  RegressionErrors errors;
  RocResult roc;
  ConfusionMatrix confusion;
  double prediction_seconds = 0.0;
};

// probs may be 0x0 to skip ROC.
MetricsBundle evaluate(std::span<const int> actual, std::span<const int> predicted,
                       const MatrixD& probs, int k, double prediction_seconds = 0.0);

// Scalar view used for aggregation and reports: accuracy, precision_macro,
// recall_macro, f1_macro, mae, mse, rmse, auc_macro (absent when undefined),
// prediction_seconds.
std::map<std::string, double> scalar_metrics(const MetricsBundle& m);

std::string metrics_to_json(const MetricsBundle& m, const LabelMap& labels);

// counts; or percentages normalized per row (each non-empty row sums to 100)
// or over the whole matrix (sums to 100).
enum class ConfusionForm { kCounts, kRowPercent, kTotalPercent };
std::string confusion_csv(const ConfusionMatrix& cm, const LabelMap& labels, ConfusionForm form);
std::string roc_csv(const RocCurve& curve);

struct FoldOutcome {
  Labels actual;
  Labels predicted;
  MatrixD probs;  // may be empty
  double prediction_seconds = 0.0;
};

// Trains on train_idx and evaluates on test_idx for one fold.
using FoldPipeline = std::function<FoldOutcome(int fold, std::span<const std::size_t> train_idx,
                                               std::span<const std::size_t> test_idx)>;

struct MetricSummary {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
};

struct CrossValidation {
  std::vector<MetricsBundle> folds;
  std::map<std::string, MetricSummary> aggregate;
};

// Errors raised inside a fold are rethrown with the same code and the fold
// index prepended to the message.
CrossValidation cross_validate(const FoldPlan& plan, int k, const FoldPipeline& pipeline);

// Mean and std per scalar metric; sums run over sorted values so the result
// does not depend on fold order.
std::map<std::string, MetricSummary> aggregate_metrics(std::span<const MetricsBundle> folds);

}  // namespace hpfens

#endif  // HPFENS_METRICS_HPP_
