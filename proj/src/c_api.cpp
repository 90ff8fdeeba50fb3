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

#include "hpfens/hpfens.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "hpfens/experiment.hpp"

struct hpfens_manifest {
  hpfens::DatasetManifest value;
};

struct hpfens_config {
  hpfens::ExperimentConfig value;
};

struct hpfens_result {
  hpfens::ExperimentResult value;
};

struct hpfens_prediction {
  std::string image;
  hpfens::SinglePrediction value;
};

namespace {

using json = nlohmann::ordered_json;

thread_local std::string g_last_error;

hpfens_status to_status(hpfens::ErrorCode code) { return static_cast<hpfens_status>(code); }

template <typename Fn>
hpfens_status guarded(Fn&& fn) {
  try {
    fn();
    return HPFENS_OK;
  } catch (const hpfens::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return HPFENS_E_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return HPFENS_E_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return HPFENS_E_INTERNAL;
  }
}

void require(const void* p, const char* what) {
  if (!p) hpfens::fail(hpfens::ErrorCode::kConfigError, std::string(what) + " is NULL");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

hpfens::LabelMap parse_labels(const std::string& spec) {
  if (spec.find(',') == std::string::npos) {
    try {
      return hpfens::LabelMap::preset(spec);
    } catch (const hpfens::Error&) {
      // Not a preset: a single class name is rejected below.
    }
  }
  std::vector<std::string> names;
  std::stringstream ss(spec);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) names.push_back(item);
  }
  if (names.size() < 2) {
    hpfens::fail(hpfens::ErrorCode::kConfigError,
                 "labels must be a preset name or at least two comma-separated classes");
  }
  return hpfens::LabelMap(std::move(names));
}

}  // namespace

extern "C" {

const char* hpfens_version(void) { return "0.1.0"; }

const char* hpfens_last_error(void) { return g_last_error.c_str(); }

const char* hpfens_status_name(hpfens_status status) {
  if (status == HPFENS_OK) return "OK";
  if (status < HPFENS_E_MISSING_CLASS_DIR || status > HPFENS_E_INTERNAL) return "Unknown";
  return hpfens::error_code_name(static_cast<hpfens::ErrorCode>(status));
}

int hpfens_exit_code(hpfens_status status) {
  if (status == HPFENS_OK) return 0;
  if (status < HPFENS_E_MISSING_CLASS_DIR || status > HPFENS_E_INTERNAL) return 5;
  return hpfens::exit_code_for(static_cast<hpfens::ErrorCode>(status));
}

void hpfens_set_warnings(int enabled) { hpfens::set_warnings_enabled(enabled != 0); }

void hpfens_string_free(char* s) { std::free(s); }

hpfens_status hpfens_scan_dataset(const char* root, const char* labels, hpfens_manifest** out) {
  return guarded([&] {
    require(root, "root");
    require(labels, "labels");
    require(out, "out");
    *out = nullptr;
    auto m = std::make_unique<hpfens_manifest>();
    m->value = hpfens::scan_dataset(root, parse_labels(labels));
    *out = m.release();
  });
}

hpfens_status hpfens_manifest_load(const char* path, hpfens_manifest** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = nullptr;
    auto m = std::make_unique<hpfens_manifest>();
    m->value = hpfens::load_manifest(path);
    *out = m.release();
  });
}

hpfens_status hpfens_manifest_save(const hpfens_manifest* m, const char* path) {
  return guarded([&] {
    require(m, "manifest");
    require(path, "path");
    hpfens::save_manifest(m->value, path);
  });
}

hpfens_status hpfens_manifest_write_skip_report(const hpfens_manifest* m, const char* path) {
  return guarded([&] {
    require(m, "manifest");
    require(path, "path");
    hpfens::write_skip_report(m->value, path);
  });
}

size_t hpfens_manifest_size(const hpfens_manifest* m) { return m ? m->value.size() : 0; }

size_t hpfens_manifest_num_classes(const hpfens_manifest* m) {
  return m ? m->value.label_map.size() : 0;
}

size_t hpfens_manifest_num_skipped(const hpfens_manifest* m) {
  return m ? m->value.skipped.size() : 0;
}

const char* hpfens_manifest_dataset_id(const hpfens_manifest* m) {
  return m ? m->value.dataset_id.c_str() : "";
}

void hpfens_manifest_free(hpfens_manifest* m) { delete m; }

hpfens_status hpfens_extract_features(const hpfens_manifest* m, const char* backbone_json,
                                      const char* cache_dir, size_t batch_size, int* cache_hit,
                                      double* seconds, size_t* rows, size_t* dim) {
  return guarded([&] {
    require(m, "manifest");
    require(backbone_json, "backbone_json");
    require(cache_dir, "cache_dir");
    if (batch_size == 0) hpfens::fail(hpfens::ErrorCode::kConfigError, "batch_size must be >= 1");
    const hpfens::BackboneSpec spec = hpfens::BackboneSpec::from_json(backbone_json);
    const hpfens::CachedExtraction r = hpfens::extract_or_load(spec, m->value, cache_dir, batch_size);
    if (cache_hit) *cache_hit = r.cache_hit ? 1 : 0;
    if (seconds) *seconds = r.seconds;
    if (rows) *rows = r.features.rows();
    if (dim) *dim = r.features.width();
  });
}

hpfens_status hpfens_config_load(const char* path, hpfens_config** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = nullptr;
    auto c = std::make_unique<hpfens_config>();
    c->value = hpfens::load_config(path);
    *out = c.release();
  });
}

hpfens_status hpfens_config_parse(const char* text, hpfens_config** out) {
  return guarded([&] {
    require(text, "json");
    require(out, "out");
    *out = nullptr;
    auto c = std::make_unique<hpfens_config>();
    c->value = hpfens::config_from_json(text);
    *out = c.release();
  });
}

hpfens_status hpfens_config_set_cache_dir(hpfens_config* c, const char* dir) {
  return guarded([&] {
    require(c, "config");
    require(dir, "dir");
    c->value.cache_dir = dir;
  });
}

hpfens_status hpfens_config_set_output_dir(hpfens_config* c, const char* dir) {
  return guarded([&] {
    require(c, "config");
    require(dir, "dir");
    c->value.output_dir = dir;
  });
}

hpfens_status hpfens_config_to_json(const hpfens_config* c, char** out) {
  return guarded([&] {
    require(c, "config");
    require(out, "out");
    *out = dup_string(hpfens::config_to_json(c->value));
  });
}

hpfens_status hpfens_config_default_json(char** out) {
  return guarded([&] {
    require(out, "out");
    *out = dup_string(hpfens::config_to_json(hpfens::default_config()));
  });
}

void hpfens_config_free(hpfens_config* c) { delete c; }

hpfens_status hpfens_run_experiment(const hpfens_config* c, int write_report, hpfens_result** out) {
  return guarded([&] {
    require(c, "config");
    require(out, "out");
    *out = nullptr;
    auto r = std::make_unique<hpfens_result>();
    r->value = hpfens::run_experiment(c->value, write_report != 0);
    *out = r.release();
  });
}

hpfens_status hpfens_result_load(const char* dir, hpfens_result** out) {
  return guarded([&] {
    require(dir, "dir");
    require(out, "out");
    *out = nullptr;
    auto r = std::make_unique<hpfens_result>();
    r->value = hpfens::load_result(dir);
    *out = r.release();
  });
}

hpfens_status hpfens_result_summary_json(const hpfens_result* r, char** out) {
  return guarded([&] {
    require(r, "result");
    require(out, "out");
    *out = dup_string(hpfens::summary_json(r->value));
  });
}

hpfens_status hpfens_result_emit_report(const hpfens_result* r, const char* out_dir,
                                        char** files_json) {
  return guarded([&] {
    require(r, "result");
    require(out_dir, "out_dir");
    const std::vector<std::string> files = hpfens::emit_report(r->value, out_dir);
    if (files_json) *files_json = dup_string(json(files).dump());
  });
}

double hpfens_result_accuracy(const hpfens_result* r) {
  return r ? r->value.final_metrics.classification.accuracy
           : std::numeric_limits<double>::quiet_NaN();
}

void hpfens_result_free(hpfens_result* r) { delete r; }

hpfens_status hpfens_predict_single(const char* bundle_dir, const char* image_path,
                                    hpfens_prediction** out) {
  return guarded([&] {
    require(bundle_dir, "bundle_dir");
    require(image_path, "image_path");
    require(out, "out");
    *out = nullptr;
    auto p = std::make_unique<hpfens_prediction>();
    p->image = image_path;
    p->value = hpfens::predict_single(bundle_dir, image_path);
    *out = p.release();
  });
}

const char* hpfens_prediction_class(const hpfens_prediction* p) {
  return p ? p->value.class_name.c_str() : "";
}

int hpfens_prediction_label(const hpfens_prediction* p) { return p ? p->value.label_id : -1; }

size_t hpfens_prediction_num_classes(const hpfens_prediction* p) {
  return p ? p->value.probabilities.size() : 0;
}

double hpfens_prediction_probability(const hpfens_prediction* p, size_t label) {
  if (!p || label >= p->value.probabilities.size()) return std::numeric_limits<double>::quiet_NaN();
  return p->value.probabilities[label];
}

double hpfens_prediction_seconds(const hpfens_prediction* p) { return p ? p->value.seconds : 0.0; }

hpfens_status hpfens_prediction_to_json(const hpfens_prediction* p, char** out) {
  return guarded([&] {
    require(p, "prediction");
    require(out, "out");
    json j;
    j["image"] = p->image;
    j["class"] = p->value.class_name;
    j["label"] = p->value.label_id;
    j["probabilities"] = p->value.probabilities;
    j["seconds"] = p->value.seconds;
    *out = dup_string(j.dump());
  });
}

void hpfens_prediction_free(hpfens_prediction* p) { delete p; }

hpfens_status hpfens_hard_vote(const int* votes, size_t n, size_t m, int* out) {
  return guarded([&] {
    if (n > 0) {
      require(votes, "votes");
      require(out, "out");
    }
    hpfens::Matrix<int> v(n, m);
    if (n * m > 0) std::copy(votes, votes + n * m, v.data().begin());
    const hpfens::Labels labels = hpfens::hard_vote(v);
    std::copy(labels.begin(), labels.end(), out);
  });
}

hpfens_status hpfens_soft_vote(const double* probs, size_t m, size_t n, size_t k,
                               const double* weights, int* out) {
  return guarded([&] {
    if (m > 0) require(weights, "weights");
    if (m * n * k > 0) require(probs, "probs");
    if (n > 0) require(out, "out");
    std::vector<hpfens::MatrixD> mats;
    for (size_t j = 0; j < m; ++j) {
      std::vector<double> data(probs + j * n * k, probs + (j + 1) * n * k);
      mats.emplace_back(n, k, std::move(data));
    }
    const hpfens::Labels labels =
        hpfens::soft_vote(mats, std::span<const double>(weights, weights ? m : 0));
    std::copy(labels.begin(), labels.end(), out);
  });
}

hpfens_status hpfens_evaluate(const int* actual, const int* predicted, const double* probs,
                              size_t n, int k, hpfens_metrics* out) {
  return guarded([&] {
    require(out, "out");
    if (n > 0) {
      require(actual, "actual");
      require(predicted, "predicted");
    }
    hpfens::MatrixD p;
    if (probs && k > 0) {
      p = hpfens::MatrixD(n, static_cast<std::size_t>(k),
                          std::vector<double>(probs, probs + n * static_cast<std::size_t>(k)));
    }
    const hpfens::MetricsBundle m = hpfens::evaluate(std::span<const int>(actual, n),
                                                     std::span<const int>(predicted, n), p, k);
    out->accuracy = m.classification.accuracy;
    out->precision_macro = m.classification.precision_macro;
    out->recall_macro = m.classification.recall_macro;
    out->f1_macro = m.classification.f1_macro;
    out->mae = m.errors.mae;
    out->mse = m.errors.mse;
    out->rmse = m.errors.rmse;
    out->auc_macro = m.roc.auc_macro ? *m.roc.auc_macro : std::numeric_limits<double>::quiet_NaN();
  });
}

}  // extern "C"
