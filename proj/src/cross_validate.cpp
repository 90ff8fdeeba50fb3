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

#include <algorithm>
#include <cmath>

#include "hpfens/metrics.hpp"

namespace hpfens {

std::map<std::string, MetricSummary> aggregate_metrics(std::span<const MetricsBundle> folds) {
  std::map<std::string, std::vector<double>> values;
  for (const MetricsBundle& f : folds) {
    for (const auto& [name, v] : scalar_metrics(f)) values[name].push_back(v);
  }
  std::map<std::string, MetricSummary> out;
  for (auto& [name, v] : values) {
    std::sort(v.begin(), v.end());
    double sum = 0.0;
    for (double x : v) sum += x;
    const double mean = sum / static_cast<double>(v.size());
    std::vector<double> dev;
    for (double x : v) dev.push_back((x - mean) * (x - mean));
    std::sort(dev.begin(), dev.end());
    double ss = 0.0;
    for (double d : dev) ss += d;
    out[name] = {mean, std::sqrt(ss / static_cast<double>(v.size()))};
  }
  return out;
}

CrossValidation cross_validate(const FoldPlan& plan, int k, const FoldPipeline& pipeline) {
  CrossValidation cv;
  for (std::size_t f = 0; f < plan.folds.size(); ++f) {
    try {
      const std::vector<std::size_t> train_idx = plan.training_indices(f);
      FoldOutcome o = pipeline(static_cast<int>(f), train_idx, plan.folds[f]);
      cv.folds.push_back(evaluate(o.actual, o.predicted, o.probs, k, o.prediction_seconds));
    } catch (const Error& e) {
      throw Error(e.code(), "fold " + std::to_string(f) + ": " + e.what());
    }
  }
  cv.aggregate = aggregate_metrics(cv.folds);
  return cv;
}

}  // namespace hpfens
