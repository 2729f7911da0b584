/* C interface to the full-duplex holographic-MIMO ISAC simulator. */
#ifndef HMIMO_HMIMO_H
#define HMIMO_HMIMO_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(HMIMO_BUILDING_LIBRARY)
#define HMIMO_API __attribute__((visibility("default")))
#else
#define HMIMO_API
#endif

typedef enum hmimo_status {
  HMIMO_OK = 0,
  HMIMO_ERR_INVALID_ARGUMENT = 1,
  HMIMO_ERR_DIMENSION = 2,
  HMIMO_ERR_INFEASIBLE = 3,
  HMIMO_ERR_PARSE = 4,
  HMIMO_ERR_IO = 5,
  HMIMO_ERR_INTERNAL = 99
} hmimo_status;

/* Opaque handles. */
typedef struct hmimo_config hmimo_config;
typedef struct hmimo_result hmimo_result;

/* One (p_max, n_rf) cell of an experiment. NaN marks undefined averages. */
typedef struct hmimo_metrics {
  double p_max_dbm;
  int n_rf;
  double rmse_range_m;
  double rmse_elev_deg;
  double rmse_azim_deg;
  double mean_sum_rate_bpshz;
  int trials_used;
  int infeasible_count;
} hmimo_metrics;

HMIMO_API const char* hmimo_version(void);

/* Message of the last failed call on this thread ("" if none). */
HMIMO_API const char* hmimo_last_error(void);

/* Configuration. full_scale != 0 makes the default metamaterial count 512. */
HMIMO_API hmimo_status hmimo_config_load_file(const char* path, int full_scale,
                                              hmimo_config** out);
HMIMO_API hmimo_status hmimo_config_load_string(const char* json, int full_scale,
                                                hmimo_config** out);
HMIMO_API hmimo_status hmimo_config_set_seed(hmimo_config* config, uint64_t seed);
HMIMO_API hmimo_status hmimo_config_set_trials(hmimo_config* config, int trials);
HMIMO_API hmimo_status hmimo_config_set_workers(hmimo_config* config, int workers);
/* Copies the resolved configuration as JSON, NUL-terminated, into buf when
 * cap is large enough; *needed receives the required size including NUL. */
HMIMO_API hmimo_status hmimo_config_to_json(const hmimo_config* config, char* buf,
                                            size_t cap, size_t* needed);
HMIMO_API void hmimo_config_free(hmimo_config* config);

/* Runs the Monte Carlo experiment described by config. */
HMIMO_API hmimo_status hmimo_run(const hmimo_config* config, hmimo_result** out);
HMIMO_API size_t hmimo_result_count(const hmimo_result* result);
HMIMO_API hmimo_status hmimo_result_get(const hmimo_result* result, size_t index,
                                        hmimo_metrics* out);
/* Number of trials that aborted with an error across all cells. */
HMIMO_API size_t hmimo_result_failed_trials(const hmimo_result* result);
/* Writes metrics.csv, manifest.json and, when verbose, trials.csv. */
HMIMO_API hmimo_status hmimo_result_write(const hmimo_result* result, const char* dir,
                                          int verbose);
HMIMO_API void hmimo_result_free(hmimo_result* result);

#ifdef __cplusplus
}
#endif

#endif /* HMIMO_HMIMO_H */
