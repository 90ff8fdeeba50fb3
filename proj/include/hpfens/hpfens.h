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

/* C interface to the hpfens library.
 *
 * Every function that can fail returns an hpfens_status. On failure the
 * calling thread's hpfens_last_error() describes the problem until the next
 * failing call on that thread. Objects are opaque handles released with the
 * matching _free function; strings returned through char** are released with
 * hpfens_string_free. */

#ifndef HPFENS_H_
#define HPFENS_H_

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum hpfens_status {
  HPFENS_OK = 0,
  HPFENS_E_MISSING_CLASS_DIR = 1,
  HPFENS_E_EMPTY_CLASS = 2,
  HPFENS_E_DECODE = 3,
  HPFENS_E_CHANNEL = 4,
  HPFENS_E_TOO_FEW_SAMPLES = 5,
  HPFENS_E_FOLD = 6,
  HPFENS_E_BACKBONE_LOAD = 7,
  HPFENS_E_NUMERIC = 8,
  HPFENS_E_CACHE_MISS = 9,
  HPFENS_E_STALE_CACHE = 10,
  HPFENS_E_DEGENERATE_LABELS = 11,
  HPFENS_E_SHAPE = 12,
  HPFENS_E_INCOMPLETE_GRID = 13,
  HPFENS_E_SELECTION = 14,
  HPFENS_E_ENSEMBLE = 15,
  HPFENS_E_WEIGHT = 16,
  HPFENS_E_LABEL = 17,
  HPFENS_E_EMPTY_INPUT = 18,
  HPFENS_E_BUNDLE = 19,
  HPFENS_E_IO = 20,
  HPFENS_E_CONFIG = 21,
  HPFENS_E_INTERNAL = 22
} hpfens_status;

const char* hpfens_version(void);
const char* hpfens_last_error(void);
/* Stable name such as "ConfigError"; "OK" for HPFENS_OK. */
const char* hpfens_status_name(hpfens_status status);
/* Process exit code: 0 ok, 2 config, 3 data, 4 model, 5 internal. */
int hpfens_exit_code(hpfens_status status);
/* Toggles warnings (skipped files and similar) on standard error. */
void hpfens_set_warnings(int enabled);
void hpfens_string_free(char* s);

/* Dataset manifests. */
typedef struct hpfens_manifest hpfens_manifest;

/* labels: a preset name ("lung", "colon", "lung_colon") or a comma-separated
 * list of class directory names in label-id order. */
hpfens_status hpfens_scan_dataset(const char* root, const char* labels, hpfens_manifest** out);
hpfens_status hpfens_manifest_load(const char* path, hpfens_manifest** out);
hpfens_status hpfens_manifest_save(const hpfens_manifest* m, const char* path);
hpfens_status hpfens_manifest_write_skip_report(const hpfens_manifest* m, const char* path);
size_t hpfens_manifest_size(const hpfens_manifest* m);
size_t hpfens_manifest_num_classes(const hpfens_manifest* m);
size_t hpfens_manifest_num_skipped(const hpfens_manifest* m);
/* Valid until the manifest is freed. */
const char* hpfens_manifest_dataset_id(const hpfens_manifest* m);
void hpfens_manifest_free(hpfens_manifest* m);

/* Extracts (or loads cached) features for every manifest image.
 * backbone_json: e.g. {"id":"mock"} or {"id":"vgg16","model_path":"..."}.
 * Any output pointer may be NULL. */
hpfens_status hpfens_extract_features(const hpfens_manifest* m, const char* backbone_json,
                                      const char* cache_dir, size_t batch_size,
                                      int* cache_hit, double* seconds, size_t* rows,
                                      size_t* dim);

/* Experiment configuration. */
typedef struct hpfens_config hpfens_config;

/* Relative paths in a config file are resolved against its directory. */
hpfens_status hpfens_config_load(const char* path, hpfens_config** out);
hpfens_status hpfens_config_parse(const char* json, hpfens_config** out);
hpfens_status hpfens_config_set_cache_dir(hpfens_config* c, const char* dir);
hpfens_status hpfens_config_set_output_dir(hpfens_config* c, const char* dir);
hpfens_status hpfens_config_to_json(const hpfens_config* c, char** out);
/* A starting-point config listing every backbone and classifier. */
hpfens_status hpfens_config_default_json(char** out);
void hpfens_config_free(hpfens_config* c);

/* Experiment results. */
typedef struct hpfens_result hpfens_result;

hpfens_status hpfens_run_experiment(const hpfens_config* c, int write_report,
                                    hpfens_result** out);
/* Loads result.json from a run's output directory. */
hpfens_status hpfens_result_load(const char* dir, hpfens_result** out);
hpfens_status hpfens_result_summary_json(const hpfens_result* r, char** out);
/* Writes the report; files_json receives a JSON array of written paths
 * (may be NULL). */
hpfens_status hpfens_result_emit_report(const hpfens_result* r, const char* out_dir,
                                        char** files_json);
double hpfens_result_accuracy(const hpfens_result* r);
void hpfens_result_free(hpfens_result* r);

/* Single-image prediction from a deployment bundle. */
typedef struct hpfens_prediction hpfens_prediction;

hpfens_status hpfens_predict_single(const char* bundle_dir, const char* image_path,
                                    hpfens_prediction** out);
const char* hpfens_prediction_class(const hpfens_prediction* p);
int hpfens_prediction_label(const hpfens_prediction* p);
size_t hpfens_prediction_num_classes(const hpfens_prediction* p);
double hpfens_prediction_probability(const hpfens_prediction* p, size_t label);
double hpfens_prediction_seconds(const hpfens_prediction* p);
/* {"image":..., "class":..., "label":..., "probabilities":{...}, "seconds":...} */
hpfens_status hpfens_prediction_to_json(const hpfens_prediction* p, char** out);
void hpfens_prediction_free(hpfens_prediction* p);

/* Voting and metrics over raw arrays. */

/* votes: n x m row-major member labels; out: n labels. */
hpfens_status hpfens_hard_vote(const int* votes, size_t n, size_t m, int* out);
/* probs: m consecutive n x k row-major matrices; weights: m values;
 * out: n labels. */
hpfens_status hpfens_soft_vote(const double* probs, size_t m, size_t n, size_t k,
                               const double* weights, int* out);

typedef struct hpfens_metrics {
  double accuracy;
  double precision_macro;
  double recall_macro;
  double f1_macro;
  double mae;
  double mse;
  double rmse;
  double auc_macro; /* NaN when undefined or no probabilities given */
} hpfens_metrics;

/* probs may be NULL (n x k row-major otherwise). */
hpfens_status hpfens_evaluate(const int* actual, const int* predicted, const double* probs,
                              size_t n, int k, hpfens_metrics* out);

#ifdef __cplusplus
}
#endif

#endif /* HPFENS_H_ */
