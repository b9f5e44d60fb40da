/* C interface for the mapflow laboratory.
 *
 * Usage pattern:
 *
 *     mapflow_experiment *exp = NULL;
 *     mapflow_result *res = NULL;
 *     if (mapflow_experiment_load("kink_1d.toml", &exp) != MAPFLOW_OK) {
 *         fprintf(stderr, "%s\n", mapflow_last_error_message());
 *         return 1;
 *     }
 *     if (mapflow_experiment_run(exp, "artifacts/kink", &res) == MAPFLOW_OK) {
 *         puts(mapflow_result_summary(res));
 *     }
 *     mapflow_result_free(res);
 *     mapflow_experiment_free(exp);
 *
 * All handles are opaque and must be released with the matching _free
 * function. Strings returned by the library are NUL-terminated UTF-8 and
 * remain owned by the library (error message: valid until the next call on
 * the same thread; result strings: valid until the result is freed).
 */

#ifndef MAPFLOW_H
#define MAPFLOW_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes (aligned with the lab CLI exit codes). */
#define MAPFLOW_OK 0
#define MAPFLOW_ERR_PARSE 2      /* config text is not valid TOML / schema */
#define MAPFLOW_ERR_CONFIG 3     /* config is well-formed but invalid */
#define MAPFLOW_ERR_CHART_EXIT 4 /* map left the target coordinate chart */
#define MAPFLOW_ERR_UNSTABLE 5   /* energy audit detected instability */
#define MAPFLOW_ERR_IO 6         /* filesystem error */
#define MAPFLOW_ERR_PANIC 100    /* internal error */

typedef struct mapflow_experiment mapflow_experiment;
typedef struct mapflow_result mapflow_result;

/* Message for the most recent error on this thread; empty string when the
 * last call succeeded. */
const char *mapflow_last_error_message(void);

/* Parse and validate an experiment description. On success, *out owns the
 * new handle. */
int32_t mapflow_experiment_load(const char *path, mapflow_experiment **out);
int32_t mapflow_experiment_parse(const char *toml_text, mapflow_experiment **out);

/* Run the experiment: initial data, optional gradient flow, diagnostics,
 * assertions. artifact_dir may be NULL to skip writing artifacts. */
int32_t mapflow_experiment_run(const mapflow_experiment *experiment,
                               const char *artifact_dir,
                               mapflow_result **out);

/* Result accessors. A NULL result yields 1 / NaN / NULL respectively. */
int32_t mapflow_result_any_fail(const mapflow_result *result);
double mapflow_result_energy(const mapflow_result *result);
double mapflow_result_residual_sup(const mapflow_result *result);
double mapflow_result_sup_dphi(const mapflow_result *result);
const char *mapflow_result_summary(const mapflow_result *result);
const char *mapflow_result_report_json(const mapflow_result *result);

void mapflow_experiment_free(mapflow_experiment *experiment);
void mapflow_result_free(mapflow_result *result);

#ifdef __cplusplus
}
#endif

#endif /* MAPFLOW_H */
