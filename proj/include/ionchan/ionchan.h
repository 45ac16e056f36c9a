#ifndef IONCHAN_H
#define IONCHAN_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define IONCH_API __declspec(dllexport)
#else
#define IONCH_API __attribute__((visibility("default")))
#endif

typedef enum ionch_status {
  IONCH_OK = 0,
  IONCH_INVALID_ARG = 1,
  IONCH_PARSE = 2,       /* config text malformed or unknown key */
  IONCH_RANGE = 3,       /* config value outside its declared range */
  IONCH_MODEL = 4,
  IONCH_BOUND = 5,       /* thinning probability exceeded one */
  IONCH_INTEGRATION = 6,
  IONCH_IO = 7,
  IONCH_VIOLATION = 8,   /* run finished but flagged invariant violations */
  IONCH_INTERNAL = 9
} ionch_status;

typedef struct ionch_config ionch_config;
typedef struct ionch_model ionch_model;
typedef struct ionch_trajectory ionch_trajectory;

typedef struct ionch_run_summary {
  int exit_code;
  int64_t rows;
  int64_t violations;
  int has_slope;
  double slope;
  char line[512];     /* one-line summary, NUL terminated */
  char out_dir[1024];
} ionch_run_summary;

typedef void (*ionch_log_fn)(const char* line, void* user);

IONCH_API const char* ionch_version(void);
IONCH_API const char* ionch_status_name(ionch_status status);
/* Message of the last failed call on this thread; "" when none. */
IONCH_API const char* ionch_last_error(void);

/* Config handles. */
IONCH_API ionch_status ionch_config_parse(const char* text, ionch_config** out);
IONCH_API ionch_status ionch_config_load(const char* path, ionch_config** out);
/* Sets one "section.key" value with the same validation as the file parser. */
IONCH_API ionch_status ionch_config_set(ionch_config* config, const char* path, const char* value);
IONCH_API ionch_status ionch_config_set_subcommand(ionch_config* config, const char* name);
IONCH_API ionch_status ionch_config_set_seed(ionch_config* config, uint64_t seed);
IONCH_API ionch_status ionch_config_set_workers(ionch_config* config, int workers);
/* A fixed output directory also disables the environment override. */
IONCH_API ionch_status ionch_config_set_out_dir(ionch_config* config, const char* dir);
/* Copies the resolved config text into buf, truncating to capacity - 1 bytes
   plus the terminator; *needed receives the full length including the
   terminator. buf may be NULL when capacity is 0. */
IONCH_API ionch_status ionch_config_emit(const ionch_config* config, char* buf, size_t capacity, size_t* needed);
IONCH_API void ionch_config_free(ionch_config* config);

/* Runs the configured subcommand. Returns IONCH_VIOLATION (with the summary
   filled) when the run completed but flagged violations. */
IONCH_API ionch_status ionch_run(const ionch_config* config, ionch_log_fn log, void* user, ionch_run_summary* summary);

/* Model from the config's [model] and [lattice] sections. */
IONCH_API ionch_status ionch_model_create(const ionch_config* config, ionch_model** out);
IONCH_API int ionch_model_sites(const ionch_model* model);
IONCH_API int ionch_model_types(const ionch_model* model);
IONCH_API int ionch_model_configs(const ionch_model* model);
/* Rate bound Lambda of the whole lattice. */
IONCH_API ionch_status ionch_model_rate_bound(const ionch_model* model, double* Lambda);
IONCH_API void ionch_model_free(ionch_model* model);

/* algorithm: "pet", "il" or "oracle"; step is dt_max, tau or dt respectively. */
IONCH_API ionch_status ionch_simulate(const ionch_model* model, const char* algorithm, double T, double step,
                                      uint64_t seed, ionch_trajectory** out);
IONCH_API size_t ionch_trajectory_rows(const ionch_trajectory* traj);
IONCH_API size_t ionch_trajectory_events(const ionch_trajectory* traj);
IONCH_API double ionch_trajectory_time(const ionch_trajectory* traj, size_t row);
/* Copies the voltage row (ionch_model_sites values) into out. */
IONCH_API ionch_status ionch_trajectory_voltage(const ionch_trajectory* traj, size_t row, double* out);
IONCH_API ionch_status ionch_trajectory_write_csv(const ionch_trajectory* traj, const char* path);
IONCH_API void ionch_trajectory_free(ionch_trajectory* traj);

/* Averaging window size and the three corrector ceilings {l1, diff, jump}. */
IONCH_API ionch_status ionch_window_size(double h, double p, int* N);
IONCH_API ionch_status ionch_corrector_ceilings(int N, double D, double out[3]);
IONCH_API ionch_status ionch_heat_kernel(double t, double x, double y, double D, double L, double* out);

#ifdef __cplusplus
}
#endif

#endif
