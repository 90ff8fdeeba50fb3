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

// Classifier ranking (leaderboard + top-k filtering) and the hard / soft
// voting committee built from the selected classifiers.

#ifndef HPFENS_ENSEMBLE_HPP_
#define HPFENS_ENSEMBLE_HPP_

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hpfens/classifier.hpp"
#include "hpfens/common.hpp"

namespace hpfens {

struct AccuracyCell {
  ClassifierId classifier;
  std::string backbone;
  double accuracy;  // fraction in [0, 1]
};

struct Leaderboard {
  std::vector<ClassifierId> classifiers;  // registry order
  std::vector<std::string> backbones;     // first-seen order
  std::map<ClassifierId, std::map<std::string, double>> cells;
  std::map<ClassifierId, double> row_averages;

  std::optional<double> cell(ClassifierId c, const std::string& backbone) const;
};

// IncompleteGrid when a required classifier has no cell; NumericError for
// accuracies outside [0, 1]. Duplicate cells keep the last value.
Leaderboard build_leaderboard(std::span<const AccuracyCell> results,
                              std::span<const ClassifierId> required = kClassifierRegistry);

enum class SelectionCriterion { kAverageAcrossBackbones, kPerBackbone };

const char* criterion_name(SelectionCriterion c);
SelectionCriterion parse_criterion(const std::string& name);

struct HPFSelection {
  std::vector<ClassifierId> selected;  // descending score, then registry order
  std::vector<double> scores;          // ranking scores, percent, quantized
  int top_k = 3;
  SelectionCriterion criterion = SelectionCriterion::kAverageAcrossBackbones;
  std::string backbone;  // per_backbone only
  int score_decimals = 2;

  friend bool operator==(const HPFSelection&, const HPFSelection&) = default;
};

// Ranking score: accuracy in percent rounded to score_decimals (negative =
// no rounding), so ties match the precision the scores are reported at.
double ranking_score(double accuracy, int score_decimals);

// SelectionError when k < 1, k exceeds the leaderboard rows, or (per_backbone)
// the backbone has no column.
HPFSelection select_top_k(const Leaderboard& board, int k,
                          SelectionCriterion criterion =
                              SelectionCriterion::kAverageAcrossBackbones,
                          const std::string& backbone = "", int score_decimals = 2);

// votes is n x m (one column per member). Per row, the modal label; ties go
// to the lowest label. EnsembleError when m == 0; LabelError on negatives.
Labels hard_vote(const Matrix<int>& votes);

// Per row, argmax of sum_m w_m * p_m (ties to the lowest label).
// EnsembleError for no members, ShapeError for mismatched shapes or weight
// count, WeightError for negative, non-finite or all-zero weights.
Labels soft_vote(std::span<const MatrixD> probs, std::span<const double> weights);

// sum_m w_m p_m / sum_m w_m, with the same checks as soft_vote.
MatrixD weighted_average(std::span<const MatrixD> probs, std::span<const double> weights);

enum class VoteMode { kHard, kSoft };

const char* vote_mode_name(VoteMode m);
VoteMode parse_vote_mode(const std::string& name);

struct EnsembleModel {
  std::vector<TrainedModel> members;
  std::vector<double> weights;  // empty = uniform
  VoteMode mode = VoteMode::kSoft;

  std::vector<double> resolved_weights() const;
};

struct EnsemblePrediction {
  Labels labels;
  // Soft: the normalized weighted average. Hard: per-class vote shares.
  MatrixD probabilities;
};

// Soft: weighted average of the member probabilities. Hard: hard_vote over
// each member's argmax label, with per-class vote shares as probabilities;
// weights only apply to soft voting.
EnsemblePrediction combine_members(VoteMode mode, std::span<const MatrixD> member_probs,
                                   std::span<const double> weights);

// ShapeError when members disagree on feature width or class count, or the
// features have the wrong width.
EnsemblePrediction ensemble_predict(const EnsembleModel& model, const MatrixF& features);

std::string leaderboard_to_json(const Leaderboard& board);
Leaderboard leaderboard_from_json(const std::string& text);
std::string selection_to_json(const HPFSelection& selection);
HPFSelection selection_from_json(const std::string& text);

// Members are stored as model bundles in member_<i>_<name>/ next to
// ensemble.json (mode, weights, member ids).
void save_ensemble(const EnsembleModel& model, const LabelMap& label_map,
                   const std::filesystem::path& dir);
struct EnsembleBundle {
  EnsembleModel model;
  LabelMap label_map;
};
EnsembleBundle load_ensemble(const std::filesystem::path& dir);

}  // namespace hpfens

#endif  // HPFENS_ENSEMBLE_HPP_
