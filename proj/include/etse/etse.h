/*
 * C interface to the etse engine.
 *
 * All functions return an etse_status. On failure, etse_last_error() returns
 * a message for the calling thread that stays valid until its next call into
 * the library. Handles are opaque and owned by the caller.
 */
#ifndef ETSE_H
#define ETSE_H

#include <stddef.h>
#include <stdint.h>

#if defined(ETSE_BUILDING_LIBRARY)
#define ETSE_API __attribute__((visibility("default")))
#else
#define ETSE_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum etse_status {
  ETSE_OK = 0,
  ETSE_ERR_ARGUMENT = 1,
  ETSE_ERR_CONFIG = 2,
  ETSE_ERR_SIMULATION = 3,
  ETSE_ERR_ASSERTION = 4,
  ETSE_ERR_NUMERICAL = 5,
  ETSE_ERR_INTERNAL = 6
} etse_status;

typedef struct etse_scenario etse_scenario;
typedef struct etse_report etse_report;

typedef struct etse_iet_stats {
  size_t events;
  size_t intervals;
  double min;
  double mean;
  double max;
} etse_iet_stats;

typedef struct etse_event {
  int node; /* 1-based */
  double time;
  int jump_index;
  double inter_event_time;
} etse_event;

ETSE_API const char *etse_last_error(void);
ETSE_API const char *etse_version(void);

/* Minimum inter-event time for growth L >= 0, gain gamma > 0, lambda in (0,1). */
ETSE_API etse_status etse_miet(double L, double gamma, double lambda, double *out);
/* Same quantity from integrating the timer ODE, localized to `tol` seconds. */
ETSE_API etse_status etse_miet_oracle(double L, double gamma, double lambda, double tol, double *out);

ETSE_API etse_status etse_scenario_load_file(const char *path, etse_scenario **out);
ETSE_API etse_status etse_scenario_load_json(const char *json_text, etse_scenario **out);
ETSE_API void etse_scenario_free(etse_scenario *scenario);
ETSE_API etse_status etse_scenario_node_count(const etse_scenario *scenario, int *out);
ETSE_API etse_status etse_scenario_tau_miet(const etse_scenario *scenario, int node, double *out);
/* Output directory named in the config; empty string if none. */
ETSE_API const char *etse_scenario_output_dir(const etse_scenario *scenario);
/* Overrides the noise amplitude of every node (and the bound of noise-aware nodes). */
ETSE_API etse_status etse_scenario_set_noise_amplitude(etse_scenario *scenario, double amplitude);

ETSE_API etse_status etse_run(const etse_scenario *scenario, etse_report **out);
ETSE_API void etse_report_free(etse_report *report);
/* Writes events.csv, trace.csv and summary.json into `dir`. */
ETSE_API etse_status etse_report_write(const etse_report *report, const char *dir);
/* Pointer valid for the lifetime of the report. */
ETSE_API const char *etse_report_summary_json(const etse_report *report);
ETSE_API etse_status etse_report_iet_stats(const etse_report *report, int node, etse_iet_stats *out);
ETSE_API etse_status etse_report_event_count(const etse_report *report, size_t *out);
ETSE_API etse_status etse_report_event(const etse_report *report, size_t index, etse_event *out);
ETSE_API etse_status etse_report_error_norm(const etse_report *report, double *final_error,
                                            double *ultimate_bound);
/* monitored is set to 0 when no Lyapunov matrix was available. */
ETSE_API etse_status etse_report_lyapunov(const etse_report *report, int *monitored, size_t *violations,
                                          size_t *jump_checks);

/* Solves for P on the scenario's LMI data. `json_out` receives an allocated
 * string (free with etse_string_free) holding P and the verification report. */
ETSE_API etse_status etse_design_lti(const etse_scenario *scenario, int *feasible, char **json_out);
/* Verifies a user-supplied row-major n x n matrix P against the scenario's LMI. */
ETSE_API etse_status etse_verify_lmi(const etse_scenario *scenario, const double *P, int n, int *feasible,
                                     double *max_eigenvalue, double *tolerance);
ETSE_API void etse_string_free(char *text);

/* One run per amplitude (ascending, first entry 0); bounds_out has `count` entries. */
ETSE_API etse_status etse_sweep(const etse_scenario *scenario, const double *amplitudes, size_t count,
                                double *bounds_out);

#ifdef __cplusplus
}
#endif

#endif /* ETSE_H */
