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

#include "hpfens/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <set>

#include <json.hpp>

namespace hpfens {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double accuracy_of(std::span<const int> actual, std::span<const int> pred) {
  if (actual.empty()) return 0.0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < actual.size(); ++i) hit += actual[i] == pred[i];
  return static_cast<double>(hit) / static_cast<double>(actual.size());
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) fail(ErrorCode::kConfigError, where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      fail(ErrorCode::kConfigError, "unknown key '" + key + "' in " + where);
    }
  }
}

}  // namespace

const char* evaluation_mode_name(EvaluationMode m) {
  return m == EvaluationMode::kKFold ? "kfold" : "holdout";
}

void ExperimentConfig::validate() const {
  auto bad = [](const std::string& msg) { fail(ErrorCode::kConfigError, msg); };
  if (label_map.size() < 2) bad("at least two classes are required");
  if (backbones.empty()) bad("at least one backbone is required");
  std::set<std::string> names;
  for (const BackboneSpec& b : backbones) {
    if (!names.insert(backbone_name(b.id)).second) {
      bad(std::string("backbone listed twice: ") + backbone_name(b.id));
    }
    if (b.id != BackboneId::kMock && !b.model_path) {
      bad(std::string("backbone ") + backbone_name(b.id) + " requires model_path");
    }
  }
  if (classifiers.empty()) bad("at least one classifier is required");
  std::set<ClassifierId> ids;
  for (const ClassifierSpec& c : classifiers) {
    if (!ids.insert(c.id).second) bad(std::string("classifier listed twice: ") + classifier_name(c.id));
    c.validate();
  }
  if (top_k < 1 || static_cast<std::size_t>(top_k) > classifiers.size()) {
    bad("hpf.top_k must be between 1 and the number of classifiers");
  }
  if (mode == EvaluationMode::kKFold && k < 2) bad("evaluation.k must be >= 2");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) bad("evaluation.train_fraction must be in (0, 1)");
  if (!paper_faithful && validation_folds < 2) bad("hpf.validation_folds must be >= 2");
  if (score_decimals < -1 || score_decimals > 12) bad("hpf.score_decimals must be in [-1, 12]");
  if (!weights.empty()) {
    if (weights.size() != static_cast<std::size_t>(top_k)) bad("ensemble.weights must have top_k entries");
    double sum = 0.0;
    for (double w : weights) {
      if (!std::isfinite(w) || w < 0.0) bad("ensemble.weights must be finite and >= 0");
      sum += w;
    }
    if (!(sum > 0.0)) bad("ensemble.weights must not all be zero");
  }
  if (modes.empty()) bad("ensemble.modes must not be empty");
  if (std::set<VoteMode>(modes.begin(), modes.end()).size() != modes.size()) {
    bad("ensemble.modes lists a mode twice");
  }
  if (batch_size < 1) bad("batch_size must be >= 1");
}

std::string config_to_json(const ExperimentConfig& c) {
  json j;
  json labels = c.label_preset.empty() ? json(c.label_map.names()) : json(c.label_preset);
  j["dataset"] = {{"root", c.dataset_root.string()}, {"labels", labels}};
  json backbones = json::array();
  for (const BackboneSpec& b : c.backbones) backbones.push_back(json::parse(b.to_json()));
  j["backbones"] = backbones;
  json classifiers = json::array();
  for (const ClassifierSpec& s : c.classifiers) {
    json e;
    e["id"] = classifier_name(s.id);
    e["hyperparams"] = json::object();
    for (const auto& [k, v] : s.hyperparams) e["hyperparams"][k] = v;
    if (s.seed != 0) e["seed"] = s.seed;
    classifiers.push_back(e);
  }
  j["classifiers"] = classifiers;
  j["evaluation"] = {{"mode", evaluation_mode_name(c.mode)},
                     {"k", c.k},
                     {"train_fraction", c.train_fraction},
                     {"seed", c.seed}};
  j["hpf"] = {{"top_k", c.top_k},
              {"criterion", criterion_name(c.criterion)},
              {"paper_faithful", c.paper_faithful},
              {"validation_folds", c.validation_folds},
              {"score_decimals", c.score_decimals}};
  std::vector<std::string> modes;
  for (VoteMode m : c.modes) modes.emplace_back(vote_mode_name(m));
  j["ensemble"] = {{"weights", c.weights}, {"modes", modes}};
  j["cache_dir"] = c.cache_dir.string();
  j["output_dir"] = c.output_dir.string();
  j["batch_size"] = c.batch_size;
  return j.dump(2) + "\n";
}

ExperimentConfig default_config() {
  ExperimentConfig c;
  c.label_preset = "lung";
  c.label_map = LabelMap::preset("lung");
  for (BackboneId id : {BackboneId::kVgg16, BackboneId::kVgg19, BackboneId::kMobileNet,
                        BackboneId::kDenseNet169, BackboneId::kDenseNet201}) {
    BackboneSpec b;
    b.id = id;
    b.model_path = fs::path("models") / (std::string(backbone_name(id)) + ".onnx");
    c.backbones.push_back(b);
  }
  for (ClassifierId id : kClassifierRegistry) c.classifiers.push_back(ClassifierSpec{id, {}, 0});
  return c;
}

ExperimentConfig config_from_json(const std::string& text) {
  ExperimentConfig c;
  try {
    const json j = json::parse(text);
    check_keys(j, {"dataset", "backbones", "classifiers", "evaluation", "hpf", "ensemble",
                   "cache_dir", "output_dir", "batch_size"},
               "config");
    const json& ds = j.at("dataset");
    check_keys(ds, {"root", "labels"}, "dataset");
    c.dataset_root = ds.at("root").get<std::string>();
    const json& labels = ds.at("labels");
    if (labels.is_string()) {
      c.label_preset = labels.get<std::string>();
      c.label_map = LabelMap::preset(c.label_preset);
    } else {
      c.label_map = LabelMap(labels.get<std::vector<std::string>>());
    }
    c.backbones.clear();
    for (const json& b : j.at("backbones")) c.backbones.push_back(BackboneSpec::from_json(b.dump()));
    c.classifiers.clear();
    if (j.contains("classifiers")) {
      for (const json& e : j["classifiers"]) {
        check_keys(e, {"id", "hyperparams", "seed"}, "classifier entry");
        ClassifierSpec s;
        s.id = parse_classifier(e.at("id").get<std::string>());
        if (e.contains("hyperparams")) {
          for (const auto& [k, v] : e["hyperparams"].items()) s.hyperparams[k] = v.get<double>();
        }
        s.seed = e.value("seed", std::uint64_t{0});
        c.classifiers.push_back(s);
      }
    } else {
      for (ClassifierId id : kClassifierRegistry) c.classifiers.push_back(ClassifierSpec{id, {}, 0});
    }
    if (j.contains("evaluation")) {
      const json& ev = j["evaluation"];
      check_keys(ev, {"mode", "k", "train_fraction", "seed"}, "evaluation");
      const std::string mode = ev.value("mode", std::string("holdout"));
      if (mode == "holdout") {
        c.mode = EvaluationMode::kHoldout;
      } else if (mode == "kfold") {
        c.mode = EvaluationMode::kKFold;
      } else {
        fail(ErrorCode::kConfigError, "evaluation.mode must be holdout or kfold");
      }
      c.k = ev.value("k", c.k);
      c.train_fraction = ev.value("train_fraction", c.train_fraction);
      c.seed = ev.value("seed", c.seed);
    }
    if (j.contains("hpf")) {
      const json& h = j["hpf"];
      check_keys(h, {"top_k", "criterion", "paper_faithful", "validation_folds", "score_decimals"},
                 "hpf");
      c.top_k = h.value("top_k", c.top_k);
      if (h.contains("criterion")) c.criterion = parse_criterion(h["criterion"].get<std::string>());
      c.paper_faithful = h.value("paper_faithful", c.paper_faithful);
      c.validation_folds = h.value("validation_folds", c.validation_folds);
      c.score_decimals = h.value("score_decimals", c.score_decimals);
    }
    if (j.contains("ensemble")) {
      const json& en = j["ensemble"];
      check_keys(en, {"weights", "modes"}, "ensemble");
      c.weights = en.value("weights", std::vector<double>{});
      if (en.contains("modes")) {
        c.modes.clear();
        for (const json& m : en["modes"]) c.modes.push_back(parse_vote_mode(m.get<std::string>()));
      }
    }
    c.cache_dir = j.value("cache_dir", c.cache_dir.string());
    c.output_dir = j.value("output_dir", c.output_dir.string());
    c.batch_size = j.value("batch_size", c.batch_size);
  } catch (const json::exception& e) {
    fail(ErrorCode::kConfigError, std::string("malformed config: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error& e) {
    fail(ErrorCode::kConfigError, e.what());
  }
  ExperimentConfig c = config_from_json(text);
  // Relative paths are taken relative to the config file.
  const fs::path base = path.parent_path();
  auto rebase = [&](fs::path& p) {
    if (p.is_relative()) p = base / p;
  };
  rebase(c.dataset_root);
  rebase(c.cache_dir);
  rebase(c.output_dir);
  for (BackboneSpec& b : c.backbones) {
    if (b.model_path) rebase(*b.model_path);
  }
  return c;
}

std::string ExperimentConfig::hash() const {
  json j = json::parse(config_to_json(*this));
  j.erase("cache_dir");
  j.erase("output_dir");
  j.erase("batch_size");
  j["dataset"].erase("root");
  // Model files enter through their content hash, not their location.
  for (std::size_t i = 0; i < backbones.size(); ++i) {
    j["backbones"][i].erase("model_path");
    if (backbones[i].id != BackboneId::kMock && backbones[i].model_path &&
        fs::is_regular_file(*backbones[i].model_path)) {
      j["backbones"][i]["extraction_hash"] = backbones[i].extraction_hash();
    }
  }
  return sha256_hex(j.dump()).substr(0, 16);
}

std::optional<double> ClassifierRun::validation_accuracy() const {
  if (val_actual.empty()) return std::nullopt;
  return accuracy_of(val_actual, val_pred);
}

const EnsembleRun& BackboneRun::chosen() const {
  for (const EnsembleRun& e : ensembles) {
    if (e.mode == chosen_mode) return e;
  }
  fail(ErrorCode::kInternal, "chosen mode missing from backbone run " + name);
}

namespace {

struct SplitPlan {
  std::vector<std::vector<std::size_t>> train;
  std::vector<std::vector<std::size_t>> test;
};

std::uint64_t classifier_seed(const ExperimentConfig& cfg, const ClassifierSpec& spec) {
  return spec.seed != 0 ? spec.seed
                        : derive_seed(cfg.seed, std::string("classifier/") + classifier_name(spec.id));
}

Labels gather(const Labels& labels, std::span<const std::size_t> idx) {
  Labels out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(labels[i]);
  return out;
}

void append_rows(MatrixD& dst, const MatrixD& src) {
  if (dst.rows() == 0) {
    dst = src;
    return;
  }
  std::vector<double> data = dst.data();
  data.insert(data.end(), src.data().begin(), src.data().end());
  dst = MatrixD(dst.rows() + src.rows(), dst.cols(), std::move(data));
}

MatrixD select_rows(const MatrixD& m, std::span<const std::size_t> rows) {
  MatrixD out(rows.size(), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy(m.row(rows[i]).begin(), m.row(rows[i]).end(), out.row(i).begin());
  }
  return out;
}

struct Trained {
  TrainedModel model;
  Labels pred;
  MatrixD proba;
  double train_seconds;
  double predict_seconds;
};

Trained fit_and_predict(const ClassifierSpec& spec, const MatrixF& x, const Labels& y,
                        std::span<const std::size_t> train_idx,
                        std::span<const std::size_t> test_idx, int k) {
  const MatrixF xtr = x.select_rows(train_idx);
  const Labels ytr = gather(y, train_idx);
  TrainedModel model = train(spec, xtr, ytr, k);
  const MatrixF xte = x.select_rows(test_idx);
  const auto t0 = std::chrono::steady_clock::now();
  MatrixD proba = model.predict_proba(xte);
  const double predict_seconds = seconds_since(t0);
  Labels pred = argmax_rows(proba);
  const double train_seconds = model.train_seconds();
  return {std::move(model), std::move(pred), std::move(proba), train_seconds, predict_seconds};
}

void write_failure(const fs::path& out_dir, const std::string& stage, ErrorCode code,
                   const std::string& message) {
  try {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    json j;
    j["stage"] = stage;
    j["error"] = error_code_name(code);
    j["message"] = message;
    write_file_atomic(out_dir / "FAILED.json", j.dump(2) + "\n");
  } catch (...) {
    // Nothing more can be recorded when the output directory is unusable.
  }
}

void rebuild_leaderboards(ExperimentResult& r) {
  std::vector<AccuracyCell> test_cells, val_cells;
  std::vector<ClassifierId> required;
  for (const ClassifierSpec& s : r.config.classifiers) required.push_back(s.id);
  for (const BackboneRun& b : r.backbones) {
    for (const ClassifierRun& c : b.classifiers) {
      test_cells.push_back({c.id, b.name, accuracy_of(r.test_actual, c.test_pred)});
      if (const auto v = c.validation_accuracy()) val_cells.push_back({c.id, b.name, *v});
    }
  }
  r.test_leaderboard = build_leaderboard(test_cells, required);
  r.leaderboard = r.leaderboard_source == "test" ? r.test_leaderboard
                                                 : build_leaderboard(val_cells, required);
}

}  // namespace

void recompute_metrics(ExperimentResult& r) {
  const int k = static_cast<int>(r.config.label_map.size());
  rebuild_leaderboards(r);
  for (BackboneRun& b : r.backbones) {
    for (EnsembleRun& e : b.ensembles) {
      e.metrics = evaluate(r.test_actual, e.pred, e.proba, k, e.predict_seconds);
      e.fold_metrics.clear();
      e.aggregate.clear();
      if (r.config.mode == EvaluationMode::kKFold) {
        const int folds = r.test_fold.empty() ? 0 : *std::max_element(r.test_fold.begin(), r.test_fold.end()) + 1;
        for (int f = 0; f < folds; ++f) {
          std::vector<std::size_t> rows;
          for (std::size_t i = 0; i < r.test_fold.size(); ++i) {
            if (r.test_fold[i] == f) rows.push_back(i);
          }
          const Labels actual = gather(r.test_actual, rows);
          const Labels pred = gather(e.pred, rows);
          e.fold_metrics.push_back(evaluate(actual, pred, select_rows(e.proba, rows), k));
        }
        e.aggregate = aggregate_metrics(e.fold_metrics);
      }
    }
  }
  r.final_metrics = r.best().chosen().metrics;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, bool write_report) {
  const auto t_start = std::chrono::steady_clock::now();
  std::string stage = "config";
  try {
    cfg.validate();
    std::error_code ec;
    fs::create_directories(cfg.output_dir, ec);
    if (ec) fail(ErrorCode::kIOError, "cannot create output directory " + cfg.output_dir.string());
    fs::remove(cfg.output_dir / "FAILED.json", ec);

    ExperimentResult r;
    r.config = cfg;
    r.config_hash = cfg.hash();
    r.leaderboard_source = cfg.paper_faithful ? "test" : "validation";
    r.seeds["master"] = cfg.seed;

    stage = "ingest";
    const DatasetManifest manifest = scan_dataset(cfg.dataset_root, cfg.label_map);
    save_manifest(manifest, cfg.output_dir / "manifest.json");
    write_skip_report(manifest, cfg.output_dir / "skipped.jsonl");
    r.dataset_id = manifest.dataset_id;
    r.num_samples = manifest.size();
    const Labels labels = manifest.labels();
    const int k = static_cast<int>(cfg.label_map.size());

    stage = "split";
    SplitPlan plan;
    if (cfg.mode == EvaluationMode::kHoldout) {
      const std::uint64_t s = derive_seed(cfg.seed, "split");
      r.seeds["split"] = s;
      Split sp = stratified_split(manifest, cfg.train_fraction, s);
      r.num_train = sp.train.size();
      plan.train.push_back(std::move(sp.train));
      plan.test.push_back(std::move(sp.test));
    } else {
      const std::uint64_t s = derive_seed(cfg.seed, "folds");
      r.seeds["folds"] = s;
      const FoldPlan fp = make_folds(manifest, cfg.k, s);
      for (std::size_t f = 0; f < fp.folds.size(); ++f) {
        plan.train.push_back(fp.training_indices(f));
        plan.test.push_back(fp.folds[f]);
      }
    }
    for (std::size_t f = 0; f < plan.test.size(); ++f) {
      for (std::size_t i : plan.test[f]) {
        r.test_index.push_back(i);
        r.test_paths.push_back(manifest.samples[i].path);
        r.test_actual.push_back(labels[i]);
        r.test_fold.push_back(static_cast<int>(f));
      }
    }
    for (const ClassifierSpec& s : cfg.classifiers) {
      r.seeds[std::string("classifier/") + classifier_name(s.id)] = classifier_seed(cfg, s);
    }

    // Holdout keeps fitted models for the deployment bundle.
    std::vector<std::map<ClassifierId, TrainedModel>> kept(cfg.backbones.size());
    std::vector<MatrixF> features(cfg.backbones.size());

    for (std::size_t bi = 0; bi < cfg.backbones.size(); ++bi) {
      const BackboneSpec& spec = cfg.backbones[bi];
      BackboneRun b;
      b.name = backbone_name(spec.id);
      b.spec = spec;
      stage = "extract:" + b.name;
      CachedExtraction ext = extract_or_load(spec, manifest, cfg.cache_dir, cfg.batch_size);
      b.cache_hit = ext.cache_hit;
      b.extract_seconds = ext.seconds;
      b.feature_dim = ext.features.width();
      const MatrixF& x = ext.features.values;

      stage = "train:" + b.name;
      for (const ClassifierSpec& base : cfg.classifiers) {
        ClassifierSpec spec_c = base;
        spec_c.seed = classifier_seed(cfg, base);
        ClassifierRun run;
        run.id = spec_c.id;
        run.seed = spec_c.seed;
        for (std::size_t f = 0; f < plan.test.size(); ++f) {
          const auto& tr = plan.train[f];
          if (!cfg.paper_faithful) {
            const Labels ytr = gather(labels, tr);
            const FoldPlan inner =
                make_folds(ytr, cfg.validation_folds, derive_seed(spec_c.seed, "inner/" + std::to_string(f)));
            for (std::size_t g = 0; g < inner.folds.size(); ++g) {
              std::vector<std::size_t> itr, ite;
              for (std::size_t j : inner.training_indices(g)) itr.push_back(tr[j]);
              for (std::size_t j : inner.folds[g]) ite.push_back(tr[j]);
              Trained t = fit_and_predict(spec_c, x, labels, itr, ite, k);
              const Labels act = gather(labels, ite);
              run.val_actual.insert(run.val_actual.end(), act.begin(), act.end());
              run.val_pred.insert(run.val_pred.end(), t.pred.begin(), t.pred.end());
            }
          }
          Trained t = fit_and_predict(spec_c, x, labels, tr, plan.test[f], k);
          run.test_pred.insert(run.test_pred.end(), t.pred.begin(), t.pred.end());
          append_rows(run.test_proba, t.proba);
          run.train_seconds += t.train_seconds;
          run.predict_seconds += t.predict_seconds;
          if (cfg.mode == EvaluationMode::kHoldout) kept[bi].emplace(run.id, std::move(t.model));
        }
        b.classifiers.push_back(std::move(run));
      }
      if (cfg.mode == EvaluationMode::kKFold) features[bi] = std::move(ext.features.values);
      r.backbones.push_back(std::move(b));
    }

    stage = "select";
    rebuild_leaderboards(r);
    const Leaderboard& board = r.leaderboard;
    for (BackboneRun& b : r.backbones) {
      b.selection = select_top_k(board, cfg.top_k, cfg.criterion,
                                 cfg.criterion == SelectionCriterion::kPerBackbone ? b.name : "",
                                 cfg.score_decimals);
    }
    r.selection = r.backbones.front().selection;

    std::vector<double> weights =
        cfg.weights.empty() ? std::vector<double>(static_cast<std::size_t>(cfg.top_k), 1.0) : cfg.weights;
    for (BackboneRun& b : r.backbones) {
      stage = "ensemble:" + b.name;
      std::vector<MatrixD> member_probs;
      double member_seconds = 0.0;
      for (ClassifierId id : b.selection.selected) {
        const auto it = std::find_if(b.classifiers.begin(), b.classifiers.end(),
                                     [&](const ClassifierRun& c) { return c.id == id; });
        member_probs.push_back(it->test_proba);
        member_seconds += it->predict_seconds;
      }
      for (VoteMode mode : cfg.modes) {
        EnsembleRun e;
        e.mode = mode;
        const auto t0 = std::chrono::steady_clock::now();
        EnsemblePrediction p = combine_members(mode, member_probs, weights);
        e.predict_seconds = member_seconds + seconds_since(t0);
        e.pred = std::move(p.labels);
        e.proba = std::move(p.probabilities);
        b.ensembles.push_back(std::move(e));
      }
    }
    for (BackboneRun& b : r.backbones) {
      for (EnsembleRun& e : b.ensembles) {
        e.metrics = evaluate(r.test_actual, e.pred, e.proba, k, e.predict_seconds);
      }
      // Best mode per backbone; soft wins ties.
      const EnsembleRun* best = nullptr;
      for (const EnsembleRun& e : b.ensembles) {
        if (!best || e.metrics.classification.accuracy > best->metrics.classification.accuracy ||
            (e.metrics.classification.accuracy == best->metrics.classification.accuracy &&
             e.mode == VoteMode::kSoft)) {
          best = &e;
        }
      }
      b.chosen_mode = best->mode;
    }
    // Best backbone; earlier config order wins ties.
    r.chosen_backbone = 0;
    for (std::size_t i = 1; i < r.backbones.size(); ++i) {
      if (r.backbones[i].chosen().metrics.classification.accuracy >
          r.backbones[r.chosen_backbone].chosen().metrics.classification.accuracy) {
        r.chosen_backbone = i;
      }
    }
    r.chosen_mode = r.best().chosen_mode;
    recompute_metrics(r);

    stage = "bundle";
    {
      const BackboneRun& best = r.best();
      EnsembleModel ens;
      ens.mode = r.chosen_mode;
      ens.weights = weights;
      for (ClassifierId id : best.selection.selected) {
        if (cfg.mode == EvaluationMode::kHoldout) {
          ens.members.push_back(kept[r.chosen_backbone].at(id));
        } else {
          // k-fold: refit the selected members on every sample.
          const auto it = std::find_if(cfg.classifiers.begin(), cfg.classifiers.end(),
                                       [&](const ClassifierSpec& c) { return c.id == id; });
          ClassifierSpec s = *it;
          s.seed = classifier_seed(cfg, *it);
          ens.members.push_back(train(s, features[r.chosen_backbone], labels, k));
        }
      }
      save_deployment_bundle(best.spec, ens, cfg.label_map, cfg.output_dir / "bundle");
    }

    r.total_seconds = seconds_since(t_start);
    stage = "persist";
    save_result(r, cfg.output_dir);
    if (write_report) {
      stage = "report";
      emit_report(r, cfg.output_dir / "report");
    }
    return r;
  } catch (const Error& e) {
    write_failure(cfg.output_dir, stage, e.code(), e.what());
    throw Error(e.code(), stage + ": " + e.what());
  } catch (const std::exception& e) {
    write_failure(cfg.output_dir, stage, ErrorCode::kInternal, e.what());
    throw Error(ErrorCode::kInternal, stage + ": " + e.what());
  }
}

namespace {

json matrix_json(const MatrixD& m) {
  json rows = json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    rows.push_back(std::vector<double>(m.row(i).begin(), m.row(i).end()));
  }
  return rows;
}

MatrixD matrix_from(const json& rows, std::size_t cols) {
  MatrixD m(rows.size(), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto v = rows[i].get<std::vector<double>>();
    if (v.size() != cols) fail(ErrorCode::kShapeError, "probability row has the wrong width");
    std::copy(v.begin(), v.end(), m.row(i).begin());
  }
  return m;
}

json scalars_json(const MetricsBundle& m, bool with_timing) {
  json j;
  for (const auto& [name, v] : scalar_metrics(m)) {
    if (!with_timing && name == "prediction_seconds") continue;
    j[name] = v;
  }
  if (!m.roc.auc_macro) j["auc_macro"] = nullptr;
  return j;
}

json aggregate_json(const std::map<std::string, MetricSummary>& agg, bool with_timing) {
  json j = json::object();
  for (const auto& [name, s] : agg) {
    if (!with_timing && name == "prediction_seconds") continue;
    j[name] = {{"mean", s.mean}, {"std", s.std}};
  }
  return j;
}

json board_json(const Leaderboard& b) { return json::parse(leaderboard_to_json(b)); }

}  // namespace

std::string result_to_json(const ExperimentResult& r) {
  json j;
  j["format"] = "hpfens-result-1";
  j["config"] = json::parse(config_to_json(r.config));
  j["config_hash"] = r.config_hash;
  j["dataset_id"] = r.dataset_id;
  j["num_samples"] = r.num_samples;
  j["num_train"] = r.num_train;
  j["seeds"] = r.seeds;
  j["test_index"] = r.test_index;
  j["test_paths"] = r.test_paths;
  j["test_actual"] = r.test_actual;
  j["test_fold"] = r.test_fold;
  j["leaderboard_source"] = r.leaderboard_source;
  j["leaderboard"] = board_json(r.leaderboard);
  j["test_leaderboard"] = board_json(r.test_leaderboard);
  j["selection"] = json::parse(selection_to_json(r.selection));
  json backbones = json::array();
  for (const BackboneRun& b : r.backbones) {
    json jb;
    jb["name"] = b.name;
    jb["spec"] = json::parse(b.spec.to_json());
    jb["feature_dim"] = b.feature_dim;
    jb["cache_hit"] = b.cache_hit;
    jb["extract_seconds"] = b.extract_seconds;
    json cls = json::array();
    for (const ClassifierRun& c : b.classifiers) {
      json jc;
      jc["id"] = classifier_name(c.id);
      jc["seed"] = c.seed;
      jc["train_seconds"] = c.train_seconds;
      jc["predict_seconds"] = c.predict_seconds;
      jc["test_pred"] = c.test_pred;
      jc["test_proba"] = matrix_json(c.test_proba);
      jc["val_actual"] = c.val_actual;
      jc["val_pred"] = c.val_pred;
      cls.push_back(jc);
    }
    jb["classifiers"] = cls;
    jb["selection"] = json::parse(selection_to_json(b.selection));
    json ens = json::array();
    for (const EnsembleRun& e : b.ensembles) {
      json je;
      je["mode"] = vote_mode_name(e.mode);
      je["predict_seconds"] = e.predict_seconds;
      je["metrics"] = scalars_json(e.metrics, true);
      if (!e.aggregate.empty()) je["aggregate"] = aggregate_json(e.aggregate, true);
      je["pred"] = e.pred;
      je["proba"] = matrix_json(e.proba);
      ens.push_back(je);
    }
    jb["ensembles"] = ens;
    jb["chosen_mode"] = vote_mode_name(b.chosen_mode);
    backbones.push_back(jb);
  }
  j["backbones"] = backbones;
  j["chosen_backbone"] = r.best().name;
  j["chosen_mode"] = vote_mode_name(r.chosen_mode);
  j["final_metrics"] = json::parse(metrics_to_json(r.final_metrics, r.config.label_map));
  j["total_seconds"] = r.total_seconds;
  return j.dump(1) + "\n";
}

ExperimentResult result_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.at("format").get<std::string>() != "hpfens-result-1") {
      fail(ErrorCode::kConfigError, "unsupported result format");
    }
    ExperimentResult r;
    r.config = config_from_json(j.at("config").dump());
    r.config_hash = j.at("config_hash").get<std::string>();
    r.dataset_id = j.at("dataset_id").get<std::string>();
    r.num_samples = j.at("num_samples").get<std::size_t>();
    r.num_train = j.at("num_train").get<std::size_t>();
    r.seeds = j.at("seeds").get<std::map<std::string, std::uint64_t>>();
    r.test_index = j.at("test_index").get<std::vector<std::size_t>>();
    r.test_paths = j.at("test_paths").get<std::vector<std::string>>();
    r.test_actual = j.at("test_actual").get<Labels>();
    r.test_fold = j.at("test_fold").get<std::vector<int>>();
    r.leaderboard_source = j.at("leaderboard_source").get<std::string>();
    r.selection = selection_from_json(j.at("selection").dump());
    const std::size_t k = r.config.label_map.size();
    const std::size_t n = r.test_actual.size();
    for (const json& jb : j.at("backbones")) {
      BackboneRun b;
      b.name = jb.at("name").get<std::string>();
      b.spec = BackboneSpec::from_json(jb.at("spec").dump());
      b.feature_dim = jb.at("feature_dim").get<std::size_t>();
      b.cache_hit = jb.at("cache_hit").get<bool>();
      b.extract_seconds = jb.at("extract_seconds").get<double>();
      for (const json& jc : jb.at("classifiers")) {
        ClassifierRun c;
        c.id = parse_classifier(jc.at("id").get<std::string>());
        c.seed = jc.at("seed").get<std::uint64_t>();
        c.train_seconds = jc.at("train_seconds").get<double>();
        c.predict_seconds = jc.at("predict_seconds").get<double>();
        c.test_pred = jc.at("test_pred").get<Labels>();
        c.test_proba = matrix_from(jc.at("test_proba"), k);
        c.val_actual = jc.at("val_actual").get<Labels>();
        c.val_pred = jc.at("val_pred").get<Labels>();
        if (c.test_pred.size() != n || c.test_proba.rows() != n || c.val_actual.size() != c.val_pred.size()) {
          fail(ErrorCode::kShapeError, "stored classifier predictions have the wrong length");
        }
        b.classifiers.push_back(std::move(c));
      }
      b.selection = selection_from_json(jb.at("selection").dump());
      for (const json& je : jb.at("ensembles")) {
        EnsembleRun e;
        e.mode = parse_vote_mode(je.at("mode").get<std::string>());
        e.predict_seconds = je.at("predict_seconds").get<double>();
        e.pred = je.at("pred").get<Labels>();
        e.proba = matrix_from(je.at("proba"), k);
        if (e.pred.size() != n || e.proba.rows() != n) {
          fail(ErrorCode::kShapeError, "stored ensemble predictions have the wrong length");
        }
        b.ensembles.push_back(std::move(e));
      }
      b.chosen_mode = parse_vote_mode(jb.at("chosen_mode").get<std::string>());
      r.backbones.push_back(std::move(b));
    }
    const std::string chosen = j.at("chosen_backbone").get<std::string>();
    const auto it = std::find_if(r.backbones.begin(), r.backbones.end(),
                                 [&](const BackboneRun& b) { return b.name == chosen; });
    if (it == r.backbones.end()) fail(ErrorCode::kConfigError, "chosen backbone not in result");
    r.chosen_backbone = static_cast<std::size_t>(it - r.backbones.begin());
    r.chosen_mode = parse_vote_mode(j.at("chosen_mode").get<std::string>());
    r.total_seconds = j.at("total_seconds").get<double>();
    recompute_metrics(r);
    return r;
  } catch (const json::exception& e) {
    fail(ErrorCode::kConfigError, std::string("malformed result: ") + e.what());
  }
}

std::string summary_json(const ExperimentResult& r) {
  json j;
  j["config_hash"] = r.config_hash;
  j["dataset_id"] = r.dataset_id;
  j["evaluation"] = evaluation_mode_name(r.config.mode);
  j["num_samples"] = r.num_samples;
  j["num_test"] = r.test_actual.size();
  j["seeds"] = r.seeds;
  j["leaderboard_source"] = r.leaderboard_source;
  j["leaderboard"] = board_json(r.leaderboard);
  j["test_leaderboard"] = board_json(r.test_leaderboard);
  j["selection"] = json::parse(selection_to_json(r.selection));
  json backbones = json::array();
  for (const BackboneRun& b : r.backbones) {
    json jb;
    jb["name"] = b.name;
    jb["feature_dim"] = b.feature_dim;
    std::vector<std::string> sel;
    for (ClassifierId c : b.selection.selected) sel.emplace_back(classifier_name(c));
    jb["selected"] = sel;
    json ens = json::object();
    for (const EnsembleRun& e : b.ensembles) {
      json je = scalars_json(e.metrics, false);
      if (!e.aggregate.empty()) je["folds"] = aggregate_json(e.aggregate, false);
      ens[vote_mode_name(e.mode)] = je;
    }
    jb["ensembles"] = ens;
    jb["chosen_mode"] = vote_mode_name(b.chosen_mode);
    backbones.push_back(jb);
  }
  j["backbones"] = backbones;
  j["chosen_backbone"] = r.best().name;
  j["chosen_mode"] = vote_mode_name(r.chosen_mode);
  json fm = json::parse(metrics_to_json(r.final_metrics, r.config.label_map));
  fm.erase("prediction_seconds");
  j["final_metrics"] = fm;
  return j.dump(2) + "\n";
}

void save_result(const ExperimentResult& r, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::kIOError, "cannot create " + dir.string());
  write_file_atomic(dir / "result.json", result_to_json(r));
  write_file_atomic(dir / "summary.json", summary_json(r));
}

ExperimentResult load_result(const fs::path& dir) {
  return result_from_json(read_file(dir / "result.json"));
}

}  // namespace hpfens
