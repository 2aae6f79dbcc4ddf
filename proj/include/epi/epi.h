#ifndef EPI_EPI_H
#define EPI_EPI_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define EPI_API __declspec(dllexport)
#else
#define EPI_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum epi_status {
    EPI_OK = 0,
    EPI_ERR_NUMERICAL = 1,
    EPI_ERR_CONFIG = 2,
    EPI_ERR_IO = 3,
    EPI_ERR_DOMAIN = 4,
    EPI_ERR_ARGUMENT = 5,
    EPI_ERR_INTERNAL = 6
} epi_status;

typedef struct epi_scenario epi_scenario;
typedef struct epi_trajectory epi_trajectory;

typedef struct epi_run_options {
    const char* command;       /* simulate | steady | stability | ledger | sweep */
    const char* scenario_path;
    const char* out_dir;       /* NULL: EPI_OUT_DIR, then [run].out_dir, then "out" */
    uint64_t seed;
    int has_seed;
    int threads;               /* >= 1 */
} epi_run_options;

typedef struct epi_scenario_info {
    int n;
    int delta;
    int age_intervals;
    double a_max;
    double T_end;
    int steps;
} epi_scenario_info;

typedef struct epi_step_summary {
    double t;
    double mass_S;
    double mass_I;
    double sup_S;
    double renewal_norm;
} epi_step_summary;

/* Message for the last failing call on this thread; never NULL. */
EPI_API const char* epi_last_error(void);
EPI_API const char* epi_status_string(int status);
/* Process exit code for a status: 0 ok, 1 numerical or I/O, 2 configuration. */
EPI_API int epi_exit_code(int status);

EPI_API int epi_run(const epi_run_options* options);

EPI_API int epi_scenario_load(const char* path, uint64_t seed, epi_scenario** out);
EPI_API void epi_scenario_free(epi_scenario* scenario);
EPI_API int epi_scenario_get_info(const epi_scenario* scenario, epi_scenario_info* out);

EPI_API int epi_basic_reproduction_number(const epi_scenario* scenario, double* out);
EPI_API int epi_spectral_bound(const epi_scenario* scenario, double* out);

EPI_API int epi_simulate(const epi_scenario* scenario, epi_trajectory** out);
EPI_API void epi_trajectory_free(epi_trajectory* trajectory);
EPI_API size_t epi_trajectory_length(const epi_trajectory* trajectory);
EPI_API int epi_trajectory_summary(const epi_trajectory* trajectory, size_t index, epi_step_summary* out);

#ifdef __cplusplus
}
#endif

#endif
