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

#include "hpfens/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

namespace hpfens {

using json = nlohmann::ordered_json;

namespace {

double ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

void check_labels(std::span<const int> labels, int k) {
  for (int v : labels) {
    if (v < 0 || v >= k) {
      fail(ErrorCode::kLabelError, "label " + std::to_string(v) + " outside 0.." + std::to_string(k - 1));
    }
  }
}

}  // namespace

std::int64_t ConfusionMatrix::tp(int c) const {
  return counts(static_cast<std::size_t>(c), static_cast<std::size_t>(c));
}

std::int64_t ConfusionMatrix::fp(int c) const {
  std::int64_t s = 0;
  for (std::size_t a = 0; a < counts.rows(); ++a) s += counts(a, static_cast<std::size_t>(c));
  return s - tp(c);
}

std::int64_t ConfusionMatrix::fn(int c) const {
  const auto row = counts.row(static_cast<std::size_t>(c));
  return std::accumulate(row.begin(), row.end(), std::int64_t{0}) - tp(c);
}

std::int64_t ConfusionMatrix::tn(int c) const { return n - tp(c) - fp(c) - fn(c); }

ConfusionMatrix confusion(std::span<const int> actual, std::span<const int> predicted, int k) {
  if (actual.size() != predicted.size()) {
    fail(ErrorCode::kShapeError, "actual and predicted lengths differ");
  }
  if (k < 1) fail(ErrorCode::kLabelError, "confusion matrix needs at least one class");
  check_labels(actual, k);
  check_labels(predicted, k);
  ConfusionMatrix cm;
  cm.counts = Matrix<std::int64_t>(static_cast<std::size_t>(k), static_cast<std::size_t>(k), 0);
  for (std::size_t i = 0; i < actual.size(); ++i) {
    ++cm.counts(static_cast<std::size_t>(actual[i]), static_cast<std::size_t>(predicted[i]));
  }
  cm.n = static_cast<std::int64_t>(actual.size());
  return cm;
}

ClassificationMetrics classification_metrics(const ConfusionMatrix& cm) {
  if (cm.n <= 0) fail(ErrorCode::kEmptyInput, "confusion matrix is empty");
  ClassificationMetrics m;
  const int k = cm.num_classes();
  std::int64_t trace = 0;
  for (int c = 0; c < k; ++c) {
    trace += cm.tp(c);
    ClassMetrics pc;
    const auto tp = static_cast<double>(cm.tp(c));
    pc.precision = ratio(tp, tp + static_cast<double>(cm.fp(c)));
    pc.recall = ratio(tp, tp + static_cast<double>(cm.fn(c)));
    pc.f1 = ratio(2.0 * pc.precision * pc.recall, pc.precision + pc.recall);
    pc.support = cm.tp(c) + cm.fn(c);
    m.precision_macro += pc.precision;
    m.recall_macro += pc.recall;
    m.f1_macro += pc.f1;
    m.per_class.push_back(pc);
  }
  m.accuracy = static_cast<double>(trace) / static_cast<double>(cm.n);
  m.precision_macro /= k;
  m.recall_macro /= k;
  m.f1_macro /= k;
  return m;
}

RegressionErrors regression_errors(std::span<const int> actual, std::span<const int> predicted) {
  if (actual.size() != predicted.size()) {
    fail(ErrorCode::kShapeError, "actual and predicted lengths differ");
  }
  if (actual.empty()) fail(ErrorCode::kEmptyInput, "no samples");
  double abs_sum = 0.0, sq_sum = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    const double d = static_cast<double>(predicted[i]) - static_cast<double>(actual[i]);
    abs_sum += std::abs(d);
    sq_sum += d * d;
  }
  const auto n = static_cast<double>(actual.size());
  RegressionErrors e;
  e.mae = abs_sum / n;
  e.mse = sq_sum / n;
  e.rmse = std::sqrt(e.mse);
  return e;
}

std::optional<RocCurve> roc_curve(std::span<const bool> positive, std::span<const double> scores) {
  if (positive.size() != scores.size()) fail(ErrorCode::kShapeError, "label and score lengths differ");
  const auto p = static_cast<double>(std::count(positive.begin(), positive.end(), true));
  const auto nn = static_cast<double>(positive.size()) - p;
  if (p == 0.0 || nn == 0.0) return std::nullopt;
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  RocCurve c;
  c.points.emplace_back(0.0, 0.0);
  double tp = 0.0, fp = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    const double threshold = scores[order[i]];
    for (; i < order.size() && scores[order[i]] == threshold; ++i) {
      (positive[order[i]] ? tp : fp) += 1.0;
    }
    const auto& prev = c.points.back();
    const std::pair<double, double> pt{fp / nn, tp / p};
    c.auc += (pt.first - prev.first) * (pt.second + prev.second) * 0.5;
    c.points.push_back(pt);
  }
  return c;
}

RocResult roc_auc(std::span<const int> actual, const MatrixD& probs, bool micro) {
  if (probs.rows() != actual.size()) fail(ErrorCode::kShapeError, "probability rows differ from labels");
  const int k = static_cast<int>(probs.cols());
  check_labels(actual, k);
  RocResult r;
  std::vector<double> col(actual.size());
  double auc_sum = 0.0;
  int defined = 0;
  for (int c = 0; c < k; ++c) {
    std::unique_ptr<bool[]> pos(new bool[actual.size()]);
    for (std::size_t i = 0; i < actual.size(); ++i) {
      pos[i] = actual[i] == c;
      col[i] = probs(i, static_cast<std::size_t>(c));
    }
    auto curve = roc_curve(std::span<const bool>(pos.get(), actual.size()), col);
    if (curve) {
      auc_sum += curve->auc;
      ++defined;
    }
    r.per_class.push_back(std::move(curve));
  }
  if (defined > 0) r.auc_macro = auc_sum / defined;
  if (micro) {
    const std::size_t total = actual.size() * static_cast<std::size_t>(k);
    std::unique_ptr<bool[]> pos(new bool[total]);
    std::vector<double> scores(total);
    for (std::size_t i = 0; i < actual.size(); ++i) {
      for (int c = 0; c < k; ++c) {
        const std::size_t j = i * static_cast<std::size_t>(k) + static_cast<std::size_t>(c);
        pos[j] = actual[i] == c;
        scores[j] = probs(i, static_cast<std::size_t>(c));
      }
    }
    r.micro = roc_curve(std::span<const bool>(pos.get(), total), scores);
  }
  return r;
}

MetricsBundle evaluate(std::span<const int> actual, std::span<const int> predicted,
                       const MatrixD& probs, int k, double prediction_seconds) {
  MetricsBundle m;
  m.confusion = confusion(actual, predicted, k);
  m.classification = classification_metrics(m.confusion);
  m.errors = regression_errors(actual, predicted);
  if (probs.rows() > 0 || probs.cols() > 0) {
    if (probs.cols() != static_cast<std::size_t>(k)) {
      fail(ErrorCode::kShapeError, "probability columns differ from class count");
    }
    m.roc = roc_auc(actual, probs);
  }
  m.prediction_seconds = prediction_seconds;
  return m;
}

std::map<std::string, double> scalar_metrics(const MetricsBundle& m) {
  std::map<std::string, double> s{
      {"accuracy", m.classification.accuracy},
      {"precision_macro", m.classification.precision_macro},
      {"recall_macro", m.classification.recall_macro},
      {"f1_macro", m.classification.f1_macro},
      {"mae", m.errors.mae},
      {"mse", m.errors.mse},
      {"rmse", m.errors.rmse},
      {"prediction_seconds", m.prediction_seconds},
  };
  if (m.roc.auc_macro) s["auc_macro"] = *m.roc.auc_macro;
  return s;
}

std::string metrics_to_json(const MetricsBundle& m, const LabelMap& labels) {
  json j;
  j["accuracy"] = m.classification.accuracy;
  j["precision_macro"] = m.classification.precision_macro;
  j["recall_macro"] = m.classification.recall_macro;
  j["f1_macro"] = m.classification.f1_macro;
  j["mae"] = m.errors.mae;
  j["mse"] = m.errors.mse;
  j["rmse"] = m.errors.rmse;
  j["auc_macro"] = m.roc.auc_macro ? json(*m.roc.auc_macro) : json(nullptr);
  j["prediction_seconds"] = m.prediction_seconds;
  json per_class = json::array();
  for (std::size_t c = 0; c < m.classification.per_class.size(); ++c) {
    const ClassMetrics& pc = m.classification.per_class[c];
    json e;
    e["class"] = c < labels.size() ? labels.name(static_cast<int>(c)) : std::to_string(c);
    e["precision"] = pc.precision;
    e["recall"] = pc.recall;
    e["f1"] = pc.f1;
    e["support"] = pc.support;
    if (c < m.roc.per_class.size() && m.roc.per_class[c]) {
      e["auc"] = m.roc.per_class[c]->auc;
    } else {
      e["auc"] = nullptr;
    }
    per_class.push_back(e);
  }
  j["per_class"] = per_class;
  json cm = json::array();
  for (std::size_t r = 0; r < m.confusion.counts.rows(); ++r) {
    const auto row = m.confusion.counts.row(r);
    cm.push_back(std::vector<std::int64_t>(row.begin(), row.end()));
  }
  j["confusion"] = cm;
  json roc = json::object();
  for (std::size_t c = 0; c < m.roc.per_class.size(); ++c) {
    if (!m.roc.per_class[c]) continue;
    json pts = json::array();
    for (const auto& [f, t] : m.roc.per_class[c]->points) pts.push_back({f, t});
    roc[c < labels.size() ? labels.name(static_cast<int>(c)) : std::to_string(c)] = pts;
  }
  j["roc_points"] = roc;
  return j.dump(2);
}

std::string confusion_csv(const ConfusionMatrix& cm, const LabelMap& labels, ConfusionForm form) {
  const int k = cm.num_classes();
  auto name = [&](int c) {
    return static_cast<std::size_t>(c) < labels.size() ? labels.name(c) : std::to_string(c);
  };
  std::string out = "actual\\predicted";
  for (int c = 0; c < k; ++c) out += "," + name(c);
  out += "\n";
  for (int a = 0; a < k; ++a) {
    const auto row = cm.counts.row(static_cast<std::size_t>(a));
    const auto row_total = static_cast<double>(std::accumulate(row.begin(), row.end(), std::int64_t{0}));
    out += name(a);
    for (int p = 0; p < k; ++p) {
      const std::int64_t v = row[static_cast<std::size_t>(p)];
      out += ",";
      switch (form) {
        case ConfusionForm::kCounts: out += std::to_string(v); break;
        case ConfusionForm::kRowPercent:
          out += format_real(ratio(100.0 * static_cast<double>(v), row_total));
          break;
        case ConfusionForm::kTotalPercent:
          out += format_real(ratio(100.0 * static_cast<double>(v), static_cast<double>(cm.n)));
          break;
      }
    }
    out += "\n";
  }
  return out;
}

std::string roc_csv(const RocCurve& curve) {
  std::string out = "fpr,tpr\n";
  for (const auto& [f, t] : curve.points) out += format_real(f) + "," + format_real(t) + "\n";
  return out;
}

}  // namespace hpfens
