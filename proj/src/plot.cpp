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

#include "plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace hpfens::internal {
namespace {

constexpr int kWidth = 800;
constexpr int kHeight = 600;
constexpr int kLeft = 80, kRight = 20, kTop = 50, kBottom = 90;
const cv::Scalar kBlack(0, 0, 0);
const cv::Scalar kGrey(200, 200, 200);

const std::vector<cv::Scalar>& palette() {
  static const std::vector<cv::Scalar> p = {
      {180, 119, 31}, {14, 127, 255}, {44, 160, 44}, {40, 39, 214},
      {189, 103, 148}, {75, 86, 140}, {194, 119, 227}, {127, 127, 127}};
  return p;
}

void text(cv::Mat& img, const std::string& s, cv::Point at, double scale = 0.45) {
  cv::putText(img, s, at, cv::FONT_HERSHEY_SIMPLEX, scale, kBlack, 1, cv::LINE_AA);
}

std::string fixed(double v, int decimals) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

void save(const std::filesystem::path& path, const cv::Mat& img) {
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), img);
  } catch (const cv::Exception&) {
    ok = false;
  }
  if (!ok) fail(ErrorCode::kIOError, "cannot write " + path.string());
}

cv::Mat canvas(const std::string& title) {
  cv::Mat img(kHeight, kWidth, CV_8UC3, cv::Scalar(255, 255, 255));
  text(img, title, {kLeft, 30}, 0.6);
  return img;
}

void axes(cv::Mat& img, double y_max, const std::string& y_fmt_suffix, int decimals) {
  const int x0 = kLeft, y0 = kHeight - kBottom, y1 = kTop;
  for (int t = 0; t <= 5; ++t) {
    const int y = y0 - (y0 - y1) * t / 5;
    cv::line(img, {x0, y}, {kWidth - kRight, y}, kGrey, 1);
    text(img, fixed(y_max * t / 5.0, decimals) + y_fmt_suffix, {8, y + 4}, 0.4);
  }
  cv::line(img, {x0, y0}, {kWidth - kRight, y0}, kBlack, 1);
  cv::line(img, {x0, y0}, {x0, y1}, kBlack, 1);
}

}  // namespace

void write_bar_chart(const std::filesystem::path& path, const std::string& title,
                     const std::vector<std::string>& categories,
                     const std::vector<std::string>& series,
                     const std::vector<std::vector<double>>& values, double y_max) {
  cv::Mat img = canvas(title);
  if (!(y_max > 0.0)) y_max = 1.0;
  axes(img, y_max, "", 2);
  const int x0 = kLeft, y0 = kHeight - kBottom, y1 = kTop;
  const int plot_w = kWidth - kRight - kLeft;
  const int nc = std::max<int>(1, static_cast<int>(categories.size()));
  const int ns = std::max<int>(1, static_cast<int>(series.size()));
  const int group_w = plot_w / nc;
  const int bar_w = std::max(2, (group_w - 10) / ns);
  for (int c = 0; c < static_cast<int>(categories.size()); ++c) {
    const int gx = x0 + c * group_w + 5;
    for (int s = 0; s < static_cast<int>(series.size()); ++s) {
      const double v = std::clamp(values[static_cast<std::size_t>(s)][static_cast<std::size_t>(c)], 0.0, y_max);
      const int h = static_cast<int>(std::lround((y0 - y1) * v / y_max));
      const cv::Scalar color = palette()[static_cast<std::size_t>(s) % palette().size()];
      cv::rectangle(img, cv::Rect(gx + s * bar_w, y0 - h, bar_w - 1, h), color, cv::FILLED);
    }
    text(img, categories[static_cast<std::size_t>(c)], {gx, y0 + 18}, 0.4);
  }
  for (int s = 0; s < static_cast<int>(series.size()); ++s) {
    const int lx = x0 + s * 130;
    const cv::Scalar color = palette()[static_cast<std::size_t>(s) % palette().size()];
    cv::rectangle(img, cv::Rect(lx, kHeight - 40, 12, 12), color, cv::FILLED);
    text(img, series[static_cast<std::size_t>(s)], {lx + 16, kHeight - 29}, 0.4);
  }
  save(path, img);
}

void write_confusion_heatmap(const std::filesystem::path& path, const std::string& title,
                             const ConfusionMatrix& cm, const LabelMap& labels) {
  cv::Mat img = canvas(title);
  const int k = cm.num_classes();
  const int size = std::min(kWidth - 220, kHeight - kTop - 120);
  const int cell = std::max(1, size / std::max(1, k));
  const int x0 = 180, y0 = kTop + 20;
  for (int a = 0; a < k; ++a) {
    const auto row = cm.counts.row(static_cast<std::size_t>(a));
    std::int64_t total = 0;
    for (auto v : row) total += v;
    for (int p = 0; p < k; ++p) {
      const std::int64_t v = row[static_cast<std::size_t>(p)];
      const double frac = total > 0 ? static_cast<double>(v) / static_cast<double>(total) : 0.0;
      const int shade = static_cast<int>(std::lround(255.0 * (1.0 - frac)));
      const cv::Rect r(x0 + p * cell, y0 + a * cell, cell, cell);
      cv::rectangle(img, r, cv::Scalar(255, shade, shade), cv::FILLED);
      cv::rectangle(img, r, kGrey, 1);
      text(img, std::to_string(v), {r.x + cell / 2 - 12, r.y + cell / 2 + 5}, 0.45);
    }
    text(img, labels.name(a), {10, y0 + a * cell + cell / 2 + 5}, 0.45);
  }
  for (int p = 0; p < k; ++p) {
    text(img, labels.name(p), {x0 + p * cell + 4, y0 + k * cell + 20}, 0.4);
  }
  text(img, "rows: actual, columns: predicted", {x0, kHeight - 20}, 0.45);
  save(path, img);
}

void write_roc_plot(const std::filesystem::path& path, const std::string& title,
                    const std::vector<std::pair<std::string, RocCurve>>& curves) {
  cv::Mat img = canvas(title);
  axes(img, 1.0, "", 1);
  const int x0 = kLeft, y0 = kHeight - kBottom, y1 = kTop;
  const int w = kWidth - kRight - kLeft, h = y0 - y1;
  auto to_px = [&](double fpr, double tpr) {
    return cv::Point(x0 + static_cast<int>(std::lround(fpr * w)),
                     y0 - static_cast<int>(std::lround(tpr * h)));
  };
  cv::line(img, to_px(0, 0), to_px(1, 1), kGrey, 1);
  for (std::size_t c = 0; c < curves.size(); ++c) {
    const cv::Scalar color = palette()[c % palette().size()];
    const auto& pts = curves[c].second.points;
    for (std::size_t i = 1; i < pts.size(); ++i) {
      cv::line(img, to_px(pts[i - 1].first, pts[i - 1].second),
               to_px(pts[i].first, pts[i].second), color, 2, cv::LINE_AA);
    }
    const int lx = x0 + static_cast<int>(c % 3) * 230;
    const int ly = kHeight - 50 + static_cast<int>(c / 3) * 18;
    cv::rectangle(img, cv::Rect(lx, ly - 10, 12, 12), color, cv::FILLED);
    text(img, curves[c].first + " (AUC " + fixed(curves[c].second.auc, 4) + ")", {lx + 16, ly}, 0.4);
  }
  text(img, "false positive rate", {kWidth / 2 - 60, y0 + 18}, 0.4);
  save(path, img);
}

}  // namespace hpfens::internal
