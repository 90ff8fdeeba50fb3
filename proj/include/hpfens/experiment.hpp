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

// End-to-end experiment: ingest, split, extract (per backbone, cached),
// train the classifier zoo, rank and select the top-k classifiers, build
// hard and soft ensembles, choose the best mode and backbone, evaluate,
// persist, report and bundle for deployment.

#ifndef HPFENS_EXPERIMENT_HPP_
#define HPFENS_EXPERIMENT_HPP_

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hpfens/classifier.hpp"
#include "hpfens/data_pipeline.hpp"
#include "hpfens/ensemble.hpp"
#include "hpfens/feature_extract.hpp"
#include "hpfens/metrics.hpp"

namespace hpfens {

enum class EvaluationMode { kHoldout, kKFold };

struct ExperimentConfig {
  std::filesystem::path dataset_root;
  LabelMap label_map;
  std::string label_preset;  // set when the labels came from a preset name

  std::vector<BackboneSpec> backbones;
  // Classifiers to train; a spec seed of 0 means "derive from the master seed".
  std::vector<ClassifierSpec> classifiers;

  EvaluationMode mode = EvaluationMode::kHoldout;
  int k = 10;
  double train_fraction = 0.8;
  std::uint64_t seed = 42;

  int top_k = 3;
  SelectionCriterion criterion = SelectionCriterion::kAverageAcrossBackbones;
  // Rank by test accuracy instead of inner cross-validation on the training
  // portion.
  bool paper_faithful = false;
  int validation_folds = 5;
  int score_decimals = 2;

  std::vector<double> weights;  // empty = uniform
  std::vector<VoteMode> modes = {VoteMode::kHard, VoteMode::kSoft};

  std::filesystem::path cache_dir = "cache";
  std::filesystem::path output_dir = "results";
  std::size_t batch_size = 32;

  // ConfigError on any inconsistency.
  void validate() const;
  // Hash of every field that affects results (excludes cache and output dirs).
  std::string hash() const;
};

std::string config_to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
// Defaults plus every backbone and classifier in registry order.
ExperimentConfig default_config();

const char* evaluation_mode_name(EvaluationMode m);

struct ClassifierRun {
  ClassifierId id = ClassifierId::kRF;
  std::uint64_t seed = 0;
  Labels test_pred;   // aligned with ExperimentResult::test_index
  MatrixD test_proba;
  // Pooled inner cross-validation predictions on the training portions
  // (empty when ranking by test accuracy).
  Labels val_actual;
  Labels val_pred;
  double train_seconds = 0.0;
  double predict_seconds = 0.0;

  std::optional<double> validation_accuracy() const;
};

struct EnsembleRun {
  VoteMode mode = VoteMode::kSoft;
  Labels pred;
  MatrixD proba;
  double predict_seconds = 0.0;
  MetricsBundle metrics;                  // over all test predictions
  std::vector<MetricsBundle> fold_metrics;  // k-fold only
  std::map<std::string, MetricSummary> aggregate;
};

struct BackboneRun {
  std::string name;
  BackboneSpec spec;
  std::size_t feature_dim = 0;
  bool cache_hit = false;
  double extract_seconds = 0.0;
  std::vector<ClassifierRun> classifiers;  // config order
  HPFSelection selection;
  std::vector<EnsembleRun> ensembles;  // config mode order
  VoteMode chosen_mode = VoteMode::kSoft;

  const EnsembleRun& chosen() const;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::string config_hash;
  std::string dataset_id;
  std::size_t num_samples = 0;
  std::size_t num_train = 0;  // holdout; per-fold training size varies in k-fold
  // Test sample dataset indices, paths and labels (fold order for k-fold).
  std::vector<std::size_t> test_index;
  std::vector<std::string> test_paths;
  Labels test_actual;
  std::vector<int> test_fold;  // fold of each test sample (0 for holdout)
  std::map<std::string, std::uint64_t> seeds;

  Leaderboard leaderboard;       // ranking source
  Leaderboard test_leaderboard;  // test accuracy
  std::string leaderboard_source;  // "validation" or "test"
  HPFSelection selection;          // global (or first backbone's) selection
  std::vector<BackboneRun> backbones;  // config order
  std::size_t chosen_backbone = 0;
  VoteMode chosen_mode = VoteMode::kSoft;
  MetricsBundle final_metrics;
  double total_seconds = 0.0;

  const BackboneRun& best() const { return backbones.at(chosen_backbone); }
};

// Runs every stage and writes result.json, summary.json, the report and the
// deployment bundle under config.output_dir. Errors carry the stage name in
// their message; FAILED.json is written before rethrowing.
ExperimentResult run_experiment(const ExperimentConfig& config, bool write_report = true);

// Stage-independent recomputation of every metric from the stored
// predictions; used on load.
void recompute_metrics(ExperimentResult& result);

std::string result_to_json(const ExperimentResult& result);
ExperimentResult result_from_json(const std::string& text);
void save_result(const ExperimentResult& result, const std::filesystem::path& dir);
ExperimentResult load_result(const std::filesystem::path& dir);

// Deterministic digest: no timings, no cache state.
std::string summary_json(const ExperimentResult& result);

// Writes tables, plots and summary; returns the relative paths written.
// IOError when out_dir cannot be written.
std::vector<std::string> emit_report(const ExperimentResult& result,
                                     const std::filesystem::path& out_dir);

// bundle_dir/{bundle.json, backbone.json, ensemble/}.
void save_deployment_bundle(const BackboneSpec& backbone, const EnsembleModel& ensemble,
                            const LabelMap& label_map, const std::filesystem::path& dir);

struct SinglePrediction {
  std::string class_name;
  int label_id = 0;
  std::vector<double> probabilities;  // one per label
  double seconds = 0.0;
};

// BundleError on hash mismatch or missing files, DecodeError for an
// unreadable image.
SinglePrediction predict_single(const std::filesystem::path& bundle_dir,
                                const std::filesystem::path& image_path);

}  // namespace hpfens

#endif  // HPFENS_EXPERIMENT_HPP_
