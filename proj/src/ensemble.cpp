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

#include "hpfens/ensemble.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

#include <json.hpp>

namespace hpfens {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::optional<double> Leaderboard::cell(ClassifierId c, const std::string& backbone) const {
  const auto row = cells.find(c);
  if (row == cells.end()) return std::nullopt;
  const auto it = row->second.find(backbone);
  if (it == row->second.end()) return std::nullopt;
  return it->second;
}

Leaderboard build_leaderboard(std::span<const AccuracyCell> results,
                              std::span<const ClassifierId> required) {
  Leaderboard board;
  for (const AccuracyCell& r : results) {
    if (!(r.accuracy >= 0.0 && r.accuracy <= 1.0)) {
      fail(ErrorCode::kNumericError, "accuracy outside [0, 1] for " +
                                         std::string(classifier_name(r.classifier)) + "/" +
                                         r.backbone);
    }
    board.cells[r.classifier][r.backbone] = r.accuracy;
    if (std::find(board.backbones.begin(), board.backbones.end(), r.backbone) ==
        board.backbones.end()) {
      board.backbones.push_back(r.backbone);
    }
  }
  for (ClassifierId c : required) {
    if (!board.cells.contains(c)) {
      fail(ErrorCode::kIncompleteGrid,
           std::string("no accuracy for classifier ") + classifier_name(c));
    }
  }
  for (ClassifierId c : kClassifierRegistry) {
    const auto row = board.cells.find(c);
    if (row == board.cells.end()) continue;
    board.classifiers.push_back(c);
    double sum = 0.0;
    for (const auto& [backbone, acc] : row->second) sum += acc;
    board.row_averages[c] = sum / static_cast<double>(row->second.size());
  }
  return board;
}

const char* criterion_name(SelectionCriterion c) {
  return c == SelectionCriterion::kPerBackbone ? "per_backbone" : "average_across_backbones";
}

SelectionCriterion parse_criterion(const std::string& name) {
  if (name == "average_across_backbones") return SelectionCriterion::kAverageAcrossBackbones;
  if (name == "per_backbone") return SelectionCriterion::kPerBackbone;
  fail(ErrorCode::kConfigError, "unknown selection criterion '" + name + "'");
}

double ranking_score(double accuracy, int score_decimals) {
  const double pct = accuracy * 100.0;
  if (score_decimals < 0) return pct;
  const double scale = std::pow(10.0, score_decimals);
  return std::round(pct * scale) / scale;
}

HPFSelection select_top_k(const Leaderboard& board, int k, SelectionCriterion criterion,
                          const std::string& backbone, int score_decimals) {
  if (k < 1 || static_cast<std::size_t>(k) > board.classifiers.size()) {
    fail(ErrorCode::kSelectionError, "top_k=" + std::to_string(k) + " but leaderboard has " +
                                         std::to_string(board.classifiers.size()) + " rows");
  }
  struct Ranked {
    ClassifierId id;
    double score;
  };
  std::vector<Ranked> ranked;
  for (ClassifierId c : board.classifiers) {
    double acc;
    if (criterion == SelectionCriterion::kAverageAcrossBackbones) {
      acc = board.row_averages.at(c);
    } else {
      const auto v = board.cell(c, backbone);
      if (!v) {
        fail(ErrorCode::kSelectionError, std::string("no ") + classifier_name(c) +
                                             " accuracy for backbone '" + backbone + "'");
      }
      acc = *v;
    }
    ranked.push_back({c, ranking_score(acc, score_decimals)});
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
    if (a.score != b.score) return a.score > b.score;
    return registry_index(a.id) < registry_index(b.id);
  });
  HPFSelection sel;
  sel.top_k = k;
  sel.criterion = criterion;
  sel.score_decimals = score_decimals;
  if (criterion == SelectionCriterion::kPerBackbone) sel.backbone = backbone;
  for (int i = 0; i < k; ++i) {
    sel.selected.push_back(ranked[static_cast<std::size_t>(i)].id);
    sel.scores.push_back(ranked[static_cast<std::size_t>(i)].score);
  }
  return sel;
}

Labels hard_vote(const Matrix<int>& votes) {
  if (votes.cols() == 0) fail(ErrorCode::kEnsembleError, "hard vote with no members");
  Labels out(votes.rows());
  std::vector<int> counts;
  for (std::size_t i = 0; i < votes.rows(); ++i) {
    counts.clear();
    for (int v : votes.row(i)) {
      if (v < 0) fail(ErrorCode::kLabelError, "negative label in votes");
      if (static_cast<std::size_t>(v) >= counts.size()) counts.resize(static_cast<std::size_t>(v) + 1, 0);
      ++counts[static_cast<std::size_t>(v)];
    }
    out[i] = static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
  }
  return out;
}

namespace {

double check_members(std::span<const MatrixD> probs, std::span<const double> weights) {
  if (probs.empty()) fail(ErrorCode::kEnsembleError, "soft vote with no members");
  if (weights.size() != probs.size()) {
    fail(ErrorCode::kShapeError, "weight count differs from member count");
  }
  for (const MatrixD& p : probs) {
    if (p.rows() != probs[0].rows() || p.cols() != probs[0].cols()) {
      fail(ErrorCode::kShapeError, "member probability shapes differ");
    }
  }
  double total = 0.0;
  for (double w : weights) {
    if (!std::isfinite(w) || w < 0.0) fail(ErrorCode::kWeightError, "weights must be finite and >= 0");
    total += w;
  }
  if (!(total > 0.0)) fail(ErrorCode::kWeightError, "weights sum to zero");
  return total;
}

MatrixD weighted_sum(std::span<const MatrixD> probs, std::span<const double> weights) {
  MatrixD sum(probs[0].rows(), probs[0].cols(), 0.0);
  for (std::size_t m = 0; m < probs.size(); ++m) {
    const auto& src = probs[m].data();
    auto& dst = sum.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += weights[m] * src[i];
  }
  return sum;
}

}  // namespace

Labels soft_vote(std::span<const MatrixD> probs, std::span<const double> weights) {
  check_members(probs, weights);
  return argmax_rows(weighted_sum(probs, weights));
}

MatrixD weighted_average(std::span<const MatrixD> probs, std::span<const double> weights) {
  const double total = check_members(probs, weights);
  MatrixD avg = weighted_sum(probs, weights);
  for (double& v : avg.data()) v /= total;
  return avg;
}

const char* vote_mode_name(VoteMode m) { return m == VoteMode::kHard ? "hard" : "soft"; }

VoteMode parse_vote_mode(const std::string& name) {
  if (name == "hard") return VoteMode::kHard;
  if (name == "soft") return VoteMode::kSoft;
  fail(ErrorCode::kConfigError, "unknown vote mode '" + name + "'");
}

std::vector<double> EnsembleModel::resolved_weights() const {
  if (weights.empty()) return std::vector<double>(members.size(), 1.0);
  return weights;
}

EnsemblePrediction ensemble_predict(const EnsembleModel& model, const MatrixF& features) {
  if (model.members.empty()) fail(ErrorCode::kEnsembleError, "ensemble has no members");
  const TrainedModel& first = model.members.front();
  for (const TrainedModel& m : model.members) {
    if (m.feature_width() != first.feature_width() || m.num_classes() != first.num_classes()) {
      fail(ErrorCode::kShapeError, "ensemble members disagree on feature width or classes");
    }
  }
  if (features.cols() != first.feature_width()) {
    fail(ErrorCode::kShapeError, "features have width " + std::to_string(features.cols()) +
                                     ", ensemble expects " + std::to_string(first.feature_width()));
  }
  std::vector<MatrixD> probs;
  probs.reserve(model.members.size());
  for (const TrainedModel& m : model.members) probs.push_back(m.predict_proba(features));
  return combine_members(model.mode, probs, model.resolved_weights());
}

EnsemblePrediction combine_members(VoteMode mode, std::span<const MatrixD> probs,
                                   std::span<const double> weights) {
  EnsemblePrediction out;
  if (mode == VoteMode::kSoft) {
    out.probabilities = weighted_average(probs, weights);
    out.labels = argmax_rows(out.probabilities);
    return out;
  }
  if (probs.empty()) fail(ErrorCode::kEnsembleError, "hard vote with no members");
  const std::size_t n = probs[0].rows();
  const std::size_t m = probs.size();
  const std::size_t k = probs[0].cols();
  for (const MatrixD& p : probs) {
    if (p.rows() != n || p.cols() != k) fail(ErrorCode::kShapeError, "member probability shapes differ");
  }
  Matrix<int> votes(n, m);
  for (std::size_t j = 0; j < m; ++j) {
    const Labels lj = argmax_rows(probs[j]);
    for (std::size_t i = 0; i < n; ++i) votes(i, j) = lj[i];
  }
  out.labels = hard_vote(votes);
  out.probabilities = MatrixD(n, k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (int v : votes.row(i)) {
      out.probabilities(i, static_cast<std::size_t>(v)) += 1.0 / static_cast<double>(m);
    }
  }
  return out;
}

std::string leaderboard_to_json(const Leaderboard& board) {
  json j;
  j["backbones"] = board.backbones;
  json rows = json::array();
  for (ClassifierId c : board.classifiers) {
    json cells = json::object();
    for (const std::string& b : board.backbones) {
      if (const auto v = board.cell(c, b)) cells[b] = *v;
    }
    rows.push_back({{"classifier", classifier_name(c)},
                    {"cells", cells},
                    {"average", board.row_averages.at(c)}});
  }
  j["rows"] = rows;
  return j.dump(2);
}

Leaderboard leaderboard_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    std::vector<AccuracyCell> cells;
    for (const json& row : j.at("rows")) {
      const ClassifierId c = parse_classifier(row.at("classifier").get<std::string>());
      for (const auto& [b, v] : row.at("cells").items()) cells.push_back({c, b, v.get<double>()});
    }
    Leaderboard board = build_leaderboard(cells, {});
    board.backbones = j.at("backbones").get<std::vector<std::string>>();
    return board;
  } catch (const json::exception& e) {
    fail(ErrorCode::kConfigError, std::string("malformed leaderboard: ") + e.what());
  }
}

std::string selection_to_json(const HPFSelection& s) {
  json j;
  std::vector<std::string> names;
  for (ClassifierId c : s.selected) names.emplace_back(classifier_name(c));
  j["selected"] = names;
  j["scores"] = s.scores;
  j["top_k"] = s.top_k;
  j["criterion"] = criterion_name(s.criterion);
  j["backbone"] = s.backbone;
  j["score_decimals"] = s.score_decimals;
  return j.dump(2);
}

HPFSelection selection_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    HPFSelection s;
    for (const json& n : j.at("selected")) s.selected.push_back(parse_classifier(n.get<std::string>()));
    s.scores = j.at("scores").get<std::vector<double>>();
    s.top_k = j.at("top_k").get<int>();
    s.criterion = parse_criterion(j.at("criterion").get<std::string>());
    s.backbone = j.at("backbone").get<std::string>();
    s.score_decimals = j.at("score_decimals").get<int>();
    if (s.scores.size() != s.selected.size() || s.selected.size() != static_cast<std::size_t>(s.top_k)) {
      fail(ErrorCode::kConfigError, "selection sizes disagree");
    }
    return s;
  } catch (const json::exception& e) {
    fail(ErrorCode::kConfigError, std::string("malformed selection: ") + e.what());
  }
}

namespace {

std::string member_dir_name(std::size_t i, ClassifierId id) {
  return "member_" + std::to_string(i) + "_" + classifier_name(id);
}

}  // namespace

void save_ensemble(const EnsembleModel& model, const LabelMap& label_map, const fs::path& dir) {
  if (model.members.empty()) fail(ErrorCode::kEnsembleError, "ensemble has no members");
  json j;
  j["mode"] = vote_mode_name(model.mode);
  j["weights"] = model.resolved_weights();
  json members = json::array();
  for (std::size_t i = 0; i < model.members.size(); ++i) {
    const TrainedModel& m = model.members[i];
    const std::string name = member_dir_name(i, m.id());
    save_model_bundle(m, label_map, dir / name);
    members.push_back({{"classifier", classifier_name(m.id())},
                       {"dir", name},
                       {"spec_sha256", sha256_file_hex(dir / name / "spec.json")}});
  }
  j["members"] = members;
  j["label_map"] = label_map.names();
  const std::string text = j.dump(2) + "\n";
  write_file_atomic(dir / "ensemble.json", text);
  write_file_atomic(dir / "ensemble.sha256", sha256_hex(text) + "\n");
}

EnsembleBundle load_ensemble(const fs::path& dir) {
  std::string text, recorded;
  try {
    text = read_file(dir / "ensemble.json");
    recorded = read_file(dir / "ensemble.sha256");
  } catch (const Error& e) {
    fail(ErrorCode::kBundleError, std::string("incomplete ensemble bundle: ") + e.what());
  }
  while (!recorded.empty() && std::isspace(static_cast<unsigned char>(recorded.back()))) {
    recorded.pop_back();
  }
  if (sha256_hex(text) != recorded) {
    fail(ErrorCode::kBundleError, "ensemble.json hash mismatch in " + dir.string());
  }
  try {
    const json j = json::parse(text);
    EnsembleBundle out;
    out.label_map = LabelMap(j.at("label_map").get<std::vector<std::string>>());
    out.model.mode = parse_vote_mode(j.at("mode").get<std::string>());
    out.model.weights = j.at("weights").get<std::vector<double>>();
    for (const json& m : j.at("members")) {
      const fs::path mdir = dir / m.at("dir").get<std::string>();
      if (sha256_file_hex(mdir / "spec.json") != m.at("spec_sha256").get<std::string>()) {
        fail(ErrorCode::kBundleError, "member spec hash mismatch in " + mdir.string());
      }
      ModelBundle b = load_model_bundle(mdir);
      if (!(b.label_map == out.label_map)) {
        fail(ErrorCode::kBundleError, "member label map differs from ensemble");
      }
      out.model.members.push_back(std::move(b.model));
    }
    if (out.model.members.empty() || out.model.weights.size() != out.model.members.size()) {
      fail(ErrorCode::kBundleError, "ensemble member/weight count mismatch");
    }
    return out;
  } catch (const json::exception& e) {
    fail(ErrorCode::kBundleError, std::string("malformed ensemble.json: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kBundleError) throw;
    fail(ErrorCode::kBundleError, e.what());
  }
}

}  // namespace hpfens
