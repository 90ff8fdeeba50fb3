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

#ifndef HPFENS_SRC_CLASSIFIERS_INTERNAL_HPP_
#define HPFENS_SRC_CLASSIFIERS_INTERNAL_HPP_

#include <algorithm>
#include <cmath>
#include <memory>
#include <span>

#include "hpfens/classifier.hpp"

namespace hpfens::internal {

enum class GrowthPolicy { kDepthWise, kLeafWise };

std::unique_ptr<Classifier> make_random_forest();
std::unique_ptr<Classifier> make_svm();
std::unique_ptr<Classifier> make_logistic_regression();
std::unique_ptr<Classifier> make_mlp();
std::unique_ptr<Classifier> make_gbdt(GrowthPolicy policy);

// In-place numerically stable softmax.
inline void softmax(std::span<double> z) {
  const double mx = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : z) v /= sum;
}

inline int param_int(const ClassifierSpec& spec, const char* name) {
  return static_cast<int>(spec.param(name));
}

}  // namespace hpfens::internal

#endif  // HPFENS_SRC_CLASSIFIERS_INTERNAL_HPP_
