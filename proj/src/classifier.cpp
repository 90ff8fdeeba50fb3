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

#include "hpfens/classifier.hpp"

#include <cctype>
#include <chrono>
#include <cmath>
#include <set>

#include <json.hpp>

#include "classifiers_internal.hpp"
#include "serialize.hpp"

namespace hpfens {

namespace fs = std::filesystem;
using nlohmann::json;

const char* classifier_name(ClassifierId id) {
  switch (id) {
    case ClassifierId::kRF: return "RF";
    case ClassifierId::kSVM: return "SVM";
    case ClassifierId::kLR: return "LR";
    case ClassifierId::kMLP: return "MLP";
    case ClassifierId::kXGB: return "XGB";
    case ClassifierId::kLGB: return "LGB";
  }
  return "unknown";
}

ClassifierId parse_classifier(const std::string& name) {
  for (auto id : kClassifierRegistry) {
    if (name == classifier_name(id)) return id;
  }
  fail(ErrorCode::kConfigError, "unknown classifier: " + name);
}

int registry_index(ClassifierId id) {
  for (std::size_t i = 0; i < kClassifierRegistry.size(); ++i) {
    if (kClassifierRegistry[i] == id) return static_cast<int>(i);
  }
  return -1;
}

const std::vector<HyperparamInfo>& hyperparam_schema(ClassifierId id) {
  static constexpr double kBig = 1e12;
  static const std::vector<HyperparamInfo> rf = {
      {"n_estimators", 100, 1, 1e5, true, "number of trees"},
      {"max_depth", 0, 0, 1000, true, "0 = grow until pure"},
      {"min_samples_split", 2, 2, kBig, true, "minimum samples to split a node"},
      {"min_samples_leaf", 1, 1, kBig, true, "minimum samples per leaf"},
      {"max_features", 0, 0, kBig, true, "features tried per split; 0 = sqrt(d)"},
      {"bootstrap", 1, 0, 1, true, "draw a bootstrap sample per tree"},
  };
  static const std::vector<HyperparamInfo> svm = {
      {"C", 1.0, 1e-12, kBig, false, "soft-margin penalty"},
      {"gamma", 0.0, 0.0, kBig, false, "RBF width; 0 = 1 / (d * var(X))"},
      {"tol", 1e-3, 1e-12, 1.0, false, "KKT violation tolerance"},
      {"max_iter", 1e7, 1, kBig, true, "SMO iteration cap per pair"},
      {"standardize", 0, 0, 1, true, "z-score features before fitting"},
  };
  static const std::vector<HyperparamInfo> lr = {
      {"C", 1.0, 1e-12, kBig, false, "inverse L2 strength"},
      {"max_iter", 100, 1, 1e6, true, "L-BFGS iterations"},
      {"tol", 1e-4, 0.0, 1.0, false, "gradient infinity-norm tolerance"},
      {"standardize", 0, 0, 1, true, "z-score features before fitting"},
  };
  static const std::vector<HyperparamInfo> mlp = {
      {"hidden_units", 100, 1, 1e5, true, "width of the single ReLU layer"},
      {"alpha", 1e-4, 0.0, kBig, false, "L2 penalty"},
      {"learning_rate", 1e-3, 1e-12, 10.0, false, "Adam step size"},
      {"batch_size", 200, 1, kBig, true, "minibatch size"},
      {"max_iter", 200, 1, 1e6, true, "epochs"},
      {"tol", 1e-4, 0.0, 1.0, false, "loss improvement tolerance"},
      {"n_iter_no_change", 10, 1, 1e6, true, "epochs without improvement"},
      {"standardize", 0, 0, 1, true, "z-score features before fitting"},
  };
  static const std::vector<HyperparamInfo> xgb = {
      {"n_estimators", 100, 1, 1e5, true, "boosting rounds"},
      {"learning_rate", 0.3, 1e-6, 1.0, false, "shrinkage"},
      {"max_depth", 6, 1, 64, true, "depth-wise growth limit"},
      {"reg_lambda", 1.0, 0.0, kBig, false, "L2 penalty on leaf values"},
      {"gamma", 0.0, 0.0, kBig, false, "minimum loss reduction to split"},
      {"min_child_weight", 0.1, 0.0, kBig, false, "minimum hessian per child"},
      {"max_bin", 256, 2, 256, true, "histogram bins per feature"},
      {"subsample", 1.0, 1e-6, 1.0, false, "row sampling per round"},
      {"colsample_bytree", 1.0, 1e-6, 1.0, false, "feature sampling per tree"},
  };
  static const std::vector<HyperparamInfo> lgb = {
      {"n_estimators", 100, 1, 1e5, true, "boosting rounds"},
      {"learning_rate", 0.1, 1e-6, 1.0, false, "shrinkage"},
      {"num_leaves", 31, 2, 1e5, true, "leaf-wise growth limit"},
      {"max_depth", 0, 0, 64, true, "0 = unlimited"},
      {"reg_lambda", 0.0, 0.0, kBig, false, "L2 penalty on leaf values"},
      {"min_child_samples", 1, 1, kBig, true, "minimum samples per leaf"},
      {"min_sum_hessian", 1e-3, 0.0, kBig, false, "minimum hessian per leaf"},
      {"max_bin", 255, 2, 256, true, "histogram bins per feature"},
      {"subsample", 1.0, 1e-6, 1.0, false, "row sampling per round"},
      {"colsample_bytree", 1.0, 1e-6, 1.0, false, "feature sampling per tree"},
  };
  switch (id) {
    case ClassifierId::kRF: return rf;
    case ClassifierId::kSVM: return svm;
    case ClassifierId::kLR: return lr;
    case ClassifierId::kMLP: return mlp;
    case ClassifierId::kXGB: return xgb;
    case ClassifierId::kLGB: return lgb;
  }
  fail(ErrorCode::kInternal, "no schema");
}

namespace {

const HyperparamInfo* find_param(ClassifierId id, const std::string& name) {
  for (const auto& p : hyperparam_schema(id)) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

}  // namespace

double ClassifierSpec::param(const std::string& name) const {
  const HyperparamInfo* info = find_param(id, name);
  if (!info) {
    fail(ErrorCode::kConfigError,
         std::string(classifier_name(id)) + " has no hyperparameter " + name);
  }
  auto it = hyperparams.find(name);
  return it == hyperparams.end() ? info->default_value : it->second;
}

std::map<std::string, double> ClassifierSpec::resolved() const {
  std::map<std::string, double> out;
  for (const auto& p : hyperparam_schema(id)) out[p.name] = param(p.name);
  return out;
}

void ClassifierSpec::validate() const {
  for (const auto& [name, value] : hyperparams) {
    const HyperparamInfo* info = find_param(id, name);
    if (!info) {
      fail(ErrorCode::kConfigError,
           std::string(classifier_name(id)) + " has no hyperparameter " + name);
    }
    if (!std::isfinite(value) || value < info->min_value || value > info->max_value) {
      fail(ErrorCode::kConfigError, std::string(classifier_name(id)) + "." + name +
                                        " out of range: " + format_real(value));
    }
    if (info->integer && value != std::floor(value)) {
      fail(ErrorCode::kConfigError,
           std::string(classifier_name(id)) + "." + name + " must be an integer");
    }
  }
}

std::unique_ptr<Classifier> make_classifier(ClassifierId id) {
  switch (id) {
    case ClassifierId::kRF: return internal::make_random_forest();
    case ClassifierId::kSVM: return internal::make_svm();
    case ClassifierId::kLR: return internal::make_logistic_regression();
    case ClassifierId::kMLP: return internal::make_mlp();
    case ClassifierId::kXGB: return internal::make_gbdt(internal::GrowthPolicy::kDepthWise);
    case ClassifierId::kLGB: return internal::make_gbdt(internal::GrowthPolicy::kLeafWise);
  }
  fail(ErrorCode::kInternal, "unknown classifier id");
}

Labels argmax_rows(const MatrixD& probs) {
  Labels out(probs.rows());
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    auto row = probs.row(i);
    std::size_t best = 0;
    for (std::size_t j = 1; j < row.size(); ++j) {
      if (row[j] > row[best]) best = j;
    }
    out[i] = static_cast<int>(best);
  }
  return out;
}

MatrixF TrainedModel::standardized(const MatrixF& x) const {
  if (mean_.empty()) return x;
  MatrixF out = x;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] = (r[j] - mean_[j]) * inv_std_[j];
  }
  return out;
}

Labels TrainedModel::predict(const MatrixF& x) const {
  return argmax_rows(predict_proba(x));
}

MatrixD TrainedModel::predict_proba(const MatrixF& x) const {
  if (x.rows() == 0) return MatrixD(0, static_cast<std::size_t>(num_classes_));
  if (x.cols() != width_) {
    fail(ErrorCode::kShapeError, std::string(classifier_name(spec_.id)) +
                                     " trained on width " + std::to_string(width_) +
                                     ", got " + std::to_string(x.cols()));
  }
  const MatrixD compact =
      mean_.empty() ? state_->predict_proba(x) : state_->predict_proba(standardized(x));
  MatrixD out(x.rows(), static_cast<std::size_t>(num_classes_), 0.0);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double sum = 0.0;
    for (std::size_t c = 0; c < seen_.size(); ++c) {
      double p = compact(i, c);
      if (!(p >= 0.0)) p = 0.0;  // also clears NaN
      out(i, static_cast<std::size_t>(seen_[c])) = p;
      sum += p;
    }
    auto row = out.row(i);
    if (sum > 0.0) {
      for (double& p : row) p /= sum;
    } else {
      for (std::size_t c = 0; c < seen_.size(); ++c) {
        row[static_cast<std::size_t>(seen_[c])] = 1.0 / static_cast<double>(seen_.size());
      }
    }
  }
  return out;
}

std::string TrainedModel::serialize_state() const {
  internal::BinaryWriter w;
  w.put<std::uint32_t>(0x48504631);  // format tag
  w.put_vector(mean_);
  w.put_vector(inv_std_);
  state_->save(w);
  return w.bytes();
}

TrainedModel train(const ClassifierSpec& spec, const MatrixF& x,
                   std::span<const int> y, int num_classes) {
  spec.validate();
  if (x.rows() != y.size()) {
    fail(ErrorCode::kShapeError, "feature rows and labels differ in length");
  }
  if (x.cols() == 0) fail(ErrorCode::kShapeError, "zero-width features");
  for (float v : x.data()) {
    if (!std::isfinite(v)) fail(ErrorCode::kNumericError, "non-finite training feature");
  }
  std::set<int> distinct;
  int max_label = -1;
  for (int l : y) {
    if (l < 0) fail(ErrorCode::kLabelError, "negative label");
    distinct.insert(l);
    max_label = std::max(max_label, l);
  }
  if (distinct.size() < 2) {
    fail(ErrorCode::kDegenerateLabels, "training labels contain fewer than 2 classes");
  }
  if (num_classes <= 0) num_classes = max_label + 1;
  if (max_label >= num_classes) fail(ErrorCode::kLabelError, "label exceeds num_classes");

  const auto start = std::chrono::steady_clock::now();
  TrainedModel m;
  m.spec_ = spec;
  m.num_classes_ = num_classes;
  m.width_ = x.cols();
  m.seen_.assign(distinct.begin(), distinct.end());

  std::vector<int> compact_of(static_cast<std::size_t>(num_classes), -1);
  for (std::size_t c = 0; c < m.seen_.size(); ++c) {
    compact_of[static_cast<std::size_t>(m.seen_[c])] = static_cast<int>(c);
  }
  std::vector<int> yc(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    yc[i] = compact_of[static_cast<std::size_t>(y[i])];
  }

  const bool standardize =
      find_param(spec.id, "standardize") && spec.param("standardize") != 0.0;
  if (standardize) {
    const std::size_t d = x.cols();
    std::vector<double> mean(d, 0.0), sq(d, 0.0);
    for (std::size_t i = 0; i < x.rows(); ++i) {
      auto r = x.row(i);
      for (std::size_t j = 0; j < d; ++j) {
        mean[j] += r[j];
        sq[j] += static_cast<double>(r[j]) * r[j];
      }
    }
    m.mean_.resize(d);
    m.inv_std_.resize(d);
    const double n = static_cast<double>(x.rows());
    for (std::size_t j = 0; j < d; ++j) {
      const double mu = mean[j] / n;
      const double var = std::max(0.0, sq[j] / n - mu * mu);
      m.mean_[j] = static_cast<float>(mu);
      m.inv_std_[j] = var > 0.0 ? static_cast<float>(1.0 / std::sqrt(var)) : 1.0f;
    }
  }

  auto clf = make_classifier(spec.id);
  if (standardize) {
    clf->fit(m.standardized(x), yc, static_cast<int>(m.seen_.size()), spec);
  } else {
    clf->fit(x, yc, static_cast<int>(m.seen_.size()), spec);
  }
  m.state_ = std::move(clf);
  m.train_seconds_ = std::chrono::duration<double>(
                         std::chrono::steady_clock::now() - start).count();
  return m;
}

TrainedModel restore_model(const ClassifierSpec& spec, int num_classes,
                           std::size_t width, std::vector<int> classes_seen,
                           const std::string& state_blob) {
  spec.validate();
  TrainedModel m;
  m.spec_ = spec;
  m.num_classes_ = num_classes;
  m.width_ = width;
  m.seen_ = std::move(classes_seen);
  if (m.seen_.size() < 2 || num_classes < 2) {
    fail(ErrorCode::kBundleError, "model bundle lists fewer than 2 classes");
  }
  for (int c : m.seen_) {
    if (c < 0 || c >= num_classes) fail(ErrorCode::kBundleError, "bad class id in bundle");
  }
  internal::BinaryReader r(state_blob);
  if (r.get<std::uint32_t>() != 0x48504631) {
    fail(ErrorCode::kBundleError, "unrecognised model state format");
  }
  m.mean_ = r.get_vector<float>();
  m.inv_std_ = r.get_vector<float>();
  if (!m.mean_.empty() && (m.mean_.size() != width || m.inv_std_.size() != width)) {
    fail(ErrorCode::kBundleError, "standardization vectors do not match width");
  }
  auto clf = make_classifier(spec.id);
  clf->load(r);
  if (!r.done()) fail(ErrorCode::kBundleError, "trailing bytes in model state");
  m.state_ = std::move(clf);
  return m;
}

std::string spec_to_json(const ClassifierSpec& spec) {
  json j;
  j["classifier_id"] = classifier_name(spec.id);
  json hp = json::object();
  for (const auto& [k, v] : spec.hyperparams) hp[k] = v;
  j["hyperparams"] = hp;
  j["seed"] = spec.seed;
  return j.dump();
}

namespace {

ClassifierSpec spec_from(const json& j) {
  ClassifierSpec s;
  s.id = parse_classifier(j.at("classifier_id").get<std::string>());
  if (j.contains("hyperparams")) {
    for (const auto& [k, v] : j.at("hyperparams").items()) {
      if (v.is_boolean()) {
        s.hyperparams[k] = v.get<bool>() ? 1.0 : 0.0;
      } else {
        s.hyperparams[k] = v.get<double>();
      }
    }
  }
  s.seed = j.value("seed", std::uint64_t{0});
  s.validate();
  return s;
}

}  // namespace

ClassifierSpec spec_from_json(const std::string& text) {
  try {
    return spec_from(json::parse(text));
  } catch (const json::exception& e) {
    fail(ErrorCode::kConfigError, std::string("malformed classifier spec: ") + e.what());
  }
}

void save_model_bundle(const TrainedModel& model, const LabelMap& label_map,
                       const fs::path& dir) {
  if (label_map.size() != static_cast<std::size_t>(model.num_classes())) {
    fail(ErrorCode::kShapeError, "label map size differs from model classes");
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::kIOError, "cannot create bundle directory " + dir.string());
  const std::string state = model.serialize_state();
  json j = json::parse(spec_to_json(model.spec()));
  json resolved = json::object();
  for (const auto& [k, v] : model.spec().resolved()) resolved[k] = v;
  j["resolved_hyperparams"] = resolved;
  j["feature_width"] = model.feature_width();
  j["num_classes"] = model.num_classes();
  j["classes_seen"] = model.classes_seen();
  j["label_map"] = label_map.names();
  j["state_sha256"] = sha256_hex(state);
  const std::string spec_text = j.dump(2) + "\n";
  write_file_atomic(dir / "state.bin", state);
  write_file_atomic(dir / "spec.json", spec_text);
  write_file_atomic(dir / "spec.sha256", sha256_hex(spec_text) + "\n");
}

ModelBundle load_model_bundle(const fs::path& dir) {
  std::string spec_text, recorded, state;
  try {
    spec_text = read_file(dir / "spec.json");
    recorded = read_file(dir / "spec.sha256");
    state = read_file(dir / "state.bin");
  } catch (const Error& e) {
    fail(ErrorCode::kBundleError, std::string("incomplete model bundle: ") + e.what());
  }
  while (!recorded.empty() && std::isspace(static_cast<unsigned char>(recorded.back()))) {
    recorded.pop_back();
  }
  if (sha256_hex(spec_text) != recorded) {
    fail(ErrorCode::kBundleError, "spec.json hash mismatch in " + dir.string());
  }
  try {
    const json j = json::parse(spec_text);
    if (j.at("state_sha256").get<std::string>() != sha256_hex(state)) {
      fail(ErrorCode::kBundleError, "state.bin hash mismatch in " + dir.string());
    }
    ClassifierSpec spec = spec_from(j);
    LabelMap lm(j.at("label_map").get<std::vector<std::string>>());
    TrainedModel model = restore_model(
        spec, j.at("num_classes").get<int>(), j.at("feature_width").get<std::size_t>(),
        j.at("classes_seen").get<std::vector<int>>(), state);
    if (lm.size() != static_cast<std::size_t>(model.num_classes())) {
      fail(ErrorCode::kBundleError, "label map size differs from model classes");
    }
    return {std::move(model), std::move(lm)};
  } catch (const json::exception& e) {
    fail(ErrorCode::kBundleError, std::string("malformed spec.json: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kBundleError) throw;
    fail(ErrorCode::kBundleError, e.what());
  }
}

}  // namespace hpfens
