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

// Fixed-size PNG charts for reports. The CSV files next to them carry the
// authoritative numbers.

#ifndef HPFENS_SRC_PLOT_HPP_
#define HPFENS_SRC_PLOT_HPP_

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "hpfens/metrics.hpp"

namespace hpfens::internal {

// values[s][c]: series s at category c, each in [0, y_max].
void write_bar_chart(const std::filesystem::path& path, const std::string& title,
                     const std::vector<std::string>& categories,
                     const std::vector<std::string>& series,
                     const std::vector<std::vector<double>>& values, double y_max);

void write_confusion_heatmap(const std::filesystem::path& path, const std::string& title,
                             const ConfusionMatrix& cm, const LabelMap& labels);

void write_roc_plot(const std::filesystem::path& path, const std::string& title,
                    const std::vector<std::pair<std::string, RocCurve>>& curves);

}  // namespace hpfens::internal

#endif  // HPFENS_SRC_PLOT_HPP_
