#ifndef FLEETCER_H
#define FLEETCER_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define FC_API __declspec(dllexport)
#else
#define FC_API __attribute__((visibility("default")))
#endif

typedef enum fc_status {
  FC_OK = 0,
  FC_ERR_INTERNAL = 1,
  FC_ERR_INVALID_ARGUMENT = 2,
  FC_ERR_IO = 3,
  FC_ERR_PARSE = 4,
  FC_ERR_CONTRACT = 5,
  FC_ERR_NO_RECORDS = 6
} fc_status;

/* Message of the last failed call on this thread ("" when none). */
FC_API const char* fc_last_error(void);
FC_API const char* fc_status_name(fc_status status);
/* Frees strings returned through char** out-parameters. */
FC_API void fc_string_free(char* s);

/* ---- run configuration: key=value settings ---- */
typedef struct fc_config fc_config;

FC_API fc_status fc_config_new(fc_config** out);
FC_API void fc_config_free(fc_config* cfg);
FC_API fc_status fc_config_set(fc_config* cfg, const char* key, const char* value);
/* Reads a key=value file; its entries replace existing ones. */
FC_API fc_status fc_config_load(fc_config* cfg, const char* path);
/* FC_ERR_INVALID_ARGUMENT when the key is not set. */
FC_API fc_status fc_config_get(const fc_config* cfg, const char* key, char** out);
/* Checks that the settings form a valid run configuration. */
FC_API fc_status fc_config_validate(const fc_config* cfg);

/* ---- full pipeline ---- */
typedef struct fc_report fc_report;

FC_API fc_status fc_run_pipeline(const fc_config* cfg, fc_report** out);
/* Recognition only, over an event CSV (any order; replayed by arrival). */
FC_API fc_status fc_recognize(const fc_config* cfg, const char* events_csv, fc_report** out);
FC_API void fc_report_free(fc_report* report);
FC_API fc_status fc_report_json(const fc_report* report, char** out);
FC_API fc_status fc_report_intervals_csv(const fc_report* report, char** out);
FC_API fc_status fc_report_metrics_csv(const fc_report* report, char** out);
FC_API size_t fc_report_query_count(const fc_report* report);
FC_API double fc_report_avg_recognition_ms(const fc_report* report);

/* One CSV table row per combination; failed combinations carry an error. */
FC_API fc_status fc_sweep(const fc_config* cfg, const int64_t* windows_secs, size_t n_windows,
                          const unsigned* workers, size_t n_workers, const double* delay_fractions,
                          size_t n_fractions, char** csv_out);

/* ---- single stages over files ---- */
typedef struct fc_stage_counts {
  size_t read;
  size_t written;
  size_t rejected;
} fc_stage_counts;

/* attributes: comma-separated weather attribute names (NULL: defaults). */
FC_API fc_status fc_enrich_weather(const char* vehicles_csv, const char* weather_dir, const char* attributes,
                                   const char* out_csv, fc_stage_counts* counts);
FC_API fc_status fc_enrich_poi(const char* enriched_csv, const char* poi_csv, double theta_meters,
                               const char* out_csv, fc_stage_counts* counts);
/* ice_predicate NULL: default predicate. */
FC_API fc_status fc_derive_events(const char* enriched_csv, const char* ice_predicate, const char* out_csv,
                                  fc_stage_counts* counts);
FC_API fc_status fc_inject_delays(const char* events_csv, const char* out_csv, double fraction, uint64_t seed,
                                  double unit_scale_secs, fc_stage_counts* counts);
/* Writes vehicles.csv, pois.csv and weather/ for a synthetic fleet. */
FC_API fc_status fc_generate_sample(const char* dir, size_t vehicles, int64_t duration_secs, uint64_t seed);

/* ---- patterns and a single engine ---- */
typedef struct fc_patterns fc_patterns;
typedef struct fc_engine fc_engine;

FC_API fc_status fc_patterns_builtin(fc_patterns** out);
FC_API fc_status fc_patterns_parse(const char* text, fc_patterns** out);
/* Replaces the threshold registry (threshold CSV text). */
FC_API fc_status fc_patterns_set_thresholds(fc_patterns* patterns, const char* text);
FC_API fc_status fc_patterns_serialize(const fc_patterns* patterns, char** out);
FC_API void fc_patterns_free(fc_patterns* patterns);

/* The engine keeps its own copy of the patterns. first_query < 0: data-driven. */
FC_API fc_status fc_engine_new(const fc_patterns* patterns, int64_t window_secs, int64_t slide_secs,
                               int64_t first_query, fc_engine** out);
FC_API fc_status fc_engine_ingest(fc_engine* engine, const char* event_type, const char* vehicle, const double* args,
                                  size_t n_args, int64_t occurrence, int64_t arrival, int* retained);
/* Result rows as CSV (with header). incremental: 0 batch, otherwise incremental. */
FC_API fc_status fc_engine_evaluate(fc_engine* engine, int64_t query_time, int incremental, char** csv_out);
FC_API size_t fc_engine_dropped(const fc_engine* engine);
FC_API void fc_engine_free(fc_engine* engine);

#ifdef __cplusplus
}
#endif

#endif
