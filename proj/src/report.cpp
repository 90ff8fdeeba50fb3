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

#include <algorithm>
#include <cstdio>

#include <json.hpp>

#include "hpfens/experiment.hpp"
#include "plot.hpp"

namespace hpfens {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

std::string pct(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", fraction * 100.0);
  return buf;
}

std::string leaderboard_csv(const Leaderboard& b) {
  std::string out = "classifier";
  for (const std::string& name : b.backbones) out += "," + name;
  out += ",average\n";
  for (ClassifierId c : b.classifiers) {
    out += classifier_name(c);
    for (const std::string& name : b.backbones) {
      const auto v = b.cell(c, name);
      out += "," + (v ? format_real(*v) : std::string());
    }
    out += "," + format_real(b.row_averages.at(c)) + "\n";
  }
  return out;
}

std::string opt_real(const std::optional<double>& v) { return v ? format_real(*v) : std::string(); }

std::string selected_names(const HPFSelection& s) {
  std::string out;
  for (ClassifierId c : s.selected) {
    if (!out.empty()) out += ";";
    out += classifier_name(c);
  }
  return out;
}

std::string ensemble_csv(const ExperimentResult& r) {
  std::string out =
      "backbone,mode,accuracy,precision_macro,recall_macro,f1_macro,auc_macro,mae,mse,rmse,"
      "members,chosen\n";
  for (std::size_t bi = 0; bi < r.backbones.size(); ++bi) {
    const BackboneRun& b = r.backbones[bi];
    for (const EnsembleRun& e : b.ensembles) {
      const MetricsBundle& m = e.metrics;
      const bool chosen = bi == r.chosen_backbone && e.mode == r.chosen_mode;
      out += b.name + "," + vote_mode_name(e.mode) + "," + format_real(m.classification.accuracy) +
             "," + format_real(m.classification.precision_macro) + "," +
             format_real(m.classification.recall_macro) + "," +
             format_real(m.classification.f1_macro) + "," + opt_real(m.roc.auc_macro) + "," +
             format_real(m.errors.mae) + "," + format_real(m.errors.mse) + "," +
             format_real(m.errors.rmse) + "," + selected_names(b.selection) + "," +
             (chosen ? "1" : "0") + "\n";
    }
  }
  return out;
}

std::string timing_row(const std::string& stage, const std::string& backbone,
                       const std::string& model, double seconds) {
  return stage + "," + backbone + "," + model + "," + format_real(seconds) + "," +
         std::to_string(std::llround(seconds)) + "," +
         std::to_string(std::llround(seconds * 1000.0)) + "\n";
}

std::string timing_csv(const ExperimentResult& r) {
  std::string out = "stage,backbone,model,seconds,whole_seconds,milliseconds\n";
  for (const BackboneRun& b : r.backbones) {
    out += timing_row("extract", b.name, "", b.extract_seconds);
    for (const ClassifierRun& c : b.classifiers) {
      out += timing_row("train", b.name, classifier_name(c.id), c.train_seconds);
      out += timing_row("predict", b.name, classifier_name(c.id), c.predict_seconds);
    }
    for (const EnsembleRun& e : b.ensembles) {
      out += timing_row("predict", b.name, std::string("ensemble_") + vote_mode_name(e.mode),
                        e.predict_seconds);
    }
  }
  out += timing_row("final_predict", r.best().name,
                    std::string("ensemble_") + vote_mode_name(r.chosen_mode),
                    r.best().chosen().predict_seconds);
  return out;
}

std::string predictions_csv(const ExperimentResult& r) {
  const LabelMap& lm = r.config.label_map;
  const EnsembleRun& e = r.best().chosen();
  std::string out = "index,path,fold,actual,predicted";
  for (const std::string& n : lm.names()) out += ",p_" + n;
  out += "\n";
  for (std::size_t i = 0; i < r.test_actual.size(); ++i) {
    out += std::to_string(r.test_index[i]) + "," + r.test_paths[i] + "," +
           std::to_string(r.test_fold[i]) + "," + lm.name(r.test_actual[i]) + "," +
           lm.name(e.pred[i]);
    for (double p : e.proba.row(i)) out += "," + format_real(p);
    out += "\n";
  }
  return out;
}

std::string tables_md(const ExperimentResult& r) {
  std::string out = "# Experiment report\n\n";
  out += "Dataset `" + r.dataset_id + "`, " + std::to_string(r.num_samples) + " images, " +
         evaluation_mode_name(r.config.mode) + " evaluation, " +
         std::to_string(r.test_actual.size()) + " test predictions. Values in %.\n\n";
  auto board = [&](const Leaderboard& b, const std::string& heading) {
    out += "## " + heading + "\n\n| Algorithm |";
    for (const std::string& n : b.backbones) out += " " + n + " |";
    out += " Average |\n|---|";
    for (std::size_t i = 0; i <= b.backbones.size(); ++i) out += "---|";
    out += "\n";
    for (ClassifierId c : b.classifiers) {
      out += std::string("| ") + classifier_name(c) + " |";
      for (const std::string& n : b.backbones) {
        const auto v = b.cell(c, n);
        out += " " + (v ? pct(*v) : std::string("-")) + " |";
      }
      out += " " + pct(b.row_averages.at(c)) + " |\n";
    }
    out += "\n";
  };
  board(r.leaderboard, std::string("Classifier accuracy (") + r.leaderboard_source + ")");
  if (r.leaderboard_source != "test") board(r.test_leaderboard, "Classifier accuracy (test)");
  out += "Selected: " + selected_names(r.selection) + "\n\n";
  out += "## Ensembles\n\n| Backbone | Mode | Accuracy | Precision | Recall | F1 | AUC |\n";
  out += "|---|---|---|---|---|---|---|\n";
  for (const BackboneRun& b : r.backbones) {
    for (const EnsembleRun& e : b.ensembles) {
      const auto& m = e.metrics;
      out += "| " + b.name + " | " + vote_mode_name(e.mode) + " | " +
             pct(m.classification.accuracy) + " | " + pct(m.classification.precision_macro) +
             " | " + pct(m.classification.recall_macro) + " | " + pct(m.classification.f1_macro) +
             " | " + (m.roc.auc_macro ? pct(*m.roc.auc_macro) : std::string("-")) + " |\n";
    }
  }
  const MetricsBundle& f = r.final_metrics;
  out += "\n## Final model: " + r.best().name + " + " + vote_mode_name(r.chosen_mode) +
         " voting\n\n| Metric | Value |\n|---|---|\n";
  out += "| Accuracy | " + pct(f.classification.accuracy) + " |\n";
  out += "| Precision | " + pct(f.classification.precision_macro) + " |\n";
  out += "| Recall | " + pct(f.classification.recall_macro) + " |\n";
  out += "| F1 | " + pct(f.classification.f1_macro) + " |\n";
  out += "| MAE | " + pct(f.errors.mae) + " |\n";
  out += "| MSE | " + pct(f.errors.mse) + " |\n";
  out += "| RMSE | " + pct(f.errors.rmse) + " |\n";
  out += "| AUC | " + (f.roc.auc_macro ? pct(*f.roc.auc_macro) : std::string("-")) + " |\n";
  return out;
}

}  // namespace

std::vector<std::string> emit_report(const ExperimentResult& r, const fs::path& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir)) fail(ErrorCode::kIOError, "cannot create " + out_dir.string());
  const LabelMap& lm = r.config.label_map;
  std::vector<std::string> files;
  auto put = [&](const std::string& name, const std::string& body) {
    write_file_atomic(out_dir / name, body);
    files.push_back(name);
  };

  put("leaderboard.csv", leaderboard_csv(r.leaderboard));
  put("leaderboard_test.csv", leaderboard_csv(r.test_leaderboard));
  put("ensemble_accuracy.csv", ensemble_csv(r));

  json metrics = json::parse(metrics_to_json(r.final_metrics, lm));
  metrics["backbone"] = r.best().name;
  metrics["mode"] = vote_mode_name(r.chosen_mode);
  const EnsembleRun& chosen = r.best().chosen();
  if (!chosen.aggregate.empty()) {
    json agg = json::object();
    for (const auto& [name, s] : chosen.aggregate) agg[name] = {{"mean", s.mean}, {"std", s.std}};
    metrics["fold_aggregate"] = agg;
  }
  put("metrics.json", metrics.dump(2) + "\n");

  const ConfusionMatrix& cm = r.final_metrics.confusion;
  put("confusion_counts.csv", confusion_csv(cm, lm, ConfusionForm::kCounts));
  put("confusion_row_percent.csv", confusion_csv(cm, lm, ConfusionForm::kRowPercent));
  put("confusion_total_percent.csv", confusion_csv(cm, lm, ConfusionForm::kTotalPercent));
  internal::write_confusion_heatmap(out_dir / "confusion.png", "Confusion matrix", cm, lm);
  files.push_back("confusion.png");

  std::vector<std::pair<std::string, RocCurve>> curves;
  for (std::size_t c = 0; c < r.final_metrics.roc.per_class.size(); ++c) {
    const auto& curve = r.final_metrics.roc.per_class[c];
    if (!curve) continue;
    put("roc_" + lm.name(static_cast<int>(c)) + ".csv", roc_csv(*curve));
    curves.emplace_back(lm.name(static_cast<int>(c)), *curve);
  }
  internal::write_roc_plot(out_dir / "roc.png", "ROC (one-vs-rest)", curves);
  files.push_back("roc.png");

  {
    std::vector<std::string> cats, series;
    for (const BackboneRun& b : r.backbones) cats.push_back(b.name);
    for (VoteMode m : r.config.modes) series.emplace_back(vote_mode_name(m));
    std::vector<std::vector<double>> vals(series.size(), std::vector<double>(cats.size(), 0.0));
    for (std::size_t bi = 0; bi < r.backbones.size(); ++bi) {
      const auto& ens = r.backbones[bi].ensembles;
      for (std::size_t s = 0; s < ens.size() && s < series.size(); ++s) {
        vals[s][bi] = ens[s].metrics.classification.accuracy;
      }
    }
    internal::write_bar_chart(out_dir / "accuracy_bar.png", "Ensemble accuracy", cats, series,
                              vals, 1.0);
    files.push_back("accuracy_bar.png");

    const RegressionErrors& e = r.final_metrics.errors;
    const double ymax = std::max({e.mae, e.mse, e.rmse, 0.01});
    internal::write_bar_chart(out_dir / "error_bar.png", "Final model errors",
                              {"MAE", "MSE", "RMSE"}, {"error"}, {{e.mae, e.mse, e.rmse}},
                              ymax * 1.1);
    files.push_back("error_bar.png");
  }

  put("timing.csv", timing_csv(r));
  put("predictions.csv", predictions_csv(r));
  put("summary.json", summary_json(r));
  put("tables.md", tables_md(r));

  json manifest;
  json list = json::array();
  for (const std::string& f : files) {
    list.push_back({{"path", f},
                    {"bytes", fs::file_size(out_dir / f)},
                    {"sha256", sha256_file_hex(out_dir / f)}});
  }
  manifest["files"] = list;
  write_file_atomic(out_dir / "report_manifest.json", manifest.dump(2) + "\n");
  files.push_back("report_manifest.json");
  return files;
}

}  // namespace hpfens
