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

// The classifier zoo: random forest, RBF SVM, logistic regression, MLP and
// two gradient-boosted tree variants (depth-wise "XGB", leaf-wise "LGB"),
// all behind one train / predict / predict_proba interface.
//
// Every classifier predicts by taking the argmax of its probability row,
// with ties going to the lower label id, so predict() and predict_proba()
// never disagree.

#ifndef HPFENS_CLASSIFIER_HPP_
#define HPFENS_CLASSIFIER_HPP_

#include <array>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "hpfens/common.hpp"
#include "hpfens/data_pipeline.hpp"

namespace hpfens {

enum class ClassifierId { kRF, kSVM, kLR, kMLP, kXGB, kLGB };

// Registry order. Also the tie-break order for model selection.
inline constexpr std::array<ClassifierId, 6> kClassifierRegistry = {
    ClassifierId::kRF,  ClassifierId::kSVM, ClassifierId::kLR,
    ClassifierId::kMLP, ClassifierId::kXGB, ClassifierId::kLGB};

const char* classifier_name(ClassifierId id);
ClassifierId parse_classifier(const std::string& name);
int registry_index(ClassifierId id);

struct HyperparamInfo {
  std::string name;
  double default_value;
  double min_value;
  double max_value;
  bool integer;
  std::string help;
};

// Accepted hyperparameters and their defaults for one classifier.
const std::vector<HyperparamInfo>& hyperparam_schema(ClassifierId id);

struct ClassifierSpec {
  ClassifierId id = ClassifierId::kRF;
  // Overrides only; anything absent takes the schema default.
  std::map<std::string, double> hyperparams;
  std::uint64_t seed = 0;

  // Resolved value (override or default). ConfigError for unknown names.
  double param(const std::string& name) const;
  // Every hyperparameter with its resolved value.
  std::map<std::string, double> resolved() const;
  // ConfigError for unknown names, out-of-range or non-integer values.
  void validate() const;

  friend bool operator==(const ClassifierSpec&, const ClassifierSpec&) = default;
};

namespace internal {
class BinaryWriter;
class BinaryReader;
}  // namespace internal

// Fitted state of one classifier over C compact classes 0..C-1.
class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual void fit(const MatrixF& x, std::span<const int> y, int num_classes,
                   const ClassifierSpec& spec) = 0;
  // n x C probabilities.
  virtual MatrixD predict_proba(const MatrixF& x) const = 0;
  virtual void save(internal::BinaryWriter& out) const = 0;
  virtual void load(internal::BinaryReader& in) = 0;
};

std::unique_ptr<Classifier> make_classifier(ClassifierId id);

class TrainedModel {
 public:
  const ClassifierSpec& spec() const { return spec_; }
  ClassifierId id() const { return spec_.id; }
  // Number of probability columns: the size of the label space.
  int num_classes() const { return num_classes_; }
  std::size_t feature_width() const { return width_; }
  // Label ids present in the training labels, ascending.
  const std::vector<int>& classes_seen() const { return seen_; }
  double train_seconds() const { return train_seconds_; }

  // ShapeError when x.cols() differs from the training width.
  Labels predict(const MatrixF& x) const;
  // n x num_classes(); column j is label id j; unseen classes get 0.
  MatrixD predict_proba(const MatrixF& x) const;

  // Opaque fitted-state blob (excluding the spec).
  std::string serialize_state() const;

 private:
  friend TrainedModel train(const ClassifierSpec&, const MatrixF&,
                            std::span<const int>, int);
  friend TrainedModel restore_model(const ClassifierSpec&, int, std::size_t,
                                    std::vector<int>, const std::string&);

  MatrixF standardized(const MatrixF& x) const;

  ClassifierSpec spec_;
  std::shared_ptr<const Classifier> state_;
  int num_classes_ = 0;
  std::size_t width_ = 0;
  std::vector<int> seen_;
  std::vector<float> mean_, inv_std_;  // empty unless standardize=1
  double train_seconds_ = 0.0;
};

// num_classes <= 0 means max(label) + 1. DegenerateLabels when fewer than two
// distinct labels are present; NumericError for non-finite features.
TrainedModel train(const ClassifierSpec& spec, const MatrixF& x,
                   std::span<const int> y, int num_classes = 0);

TrainedModel restore_model(const ClassifierSpec& spec, int num_classes,
                           std::size_t width, std::vector<int> classes_seen,
                           const std::string& state_blob);

// Per-row argmax; ties go to the lowest column index.
Labels argmax_rows(const MatrixD& probs);

std::string spec_to_json(const ClassifierSpec& spec);
ClassifierSpec spec_from_json(const std::string& text);

// Bundle directory: spec.json (classifier id, hyperparameters, seed, feature
// width, label map, state hash), spec.sha256 (hash of spec.json) and
// state.bin. Loading verifies both hashes (BundleError on mismatch).
void save_model_bundle(const TrainedModel& model, const LabelMap& label_map,
                       const std::filesystem::path& dir);

struct ModelBundle {
  TrainedModel model;
  LabelMap label_map;
};
ModelBundle load_model_bundle(const std::filesystem::path& dir);

}  // namespace hpfens

#endif  // HPFENS_CLASSIFIER_HPP_
