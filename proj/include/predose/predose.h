#ifndef PREDOSE_H
#define PREDOSE_H

/*
 * C API of the preclinical dose-prediction library.
 *
 * All functions return a predose_status; on failure the message of the
 * most recent error on the calling thread is available through
 * predose_last_error(). Handles are opaque and must be released with
 * their matching free function.
 */

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum predose_status {
    PREDOSE_OK = 0,
    PREDOSE_ERROR = 1,          /* generic runtime failure */
    PREDOSE_CONFIG_ERROR = 2,   /* invalid configuration or arguments */
    PREDOSE_CAMPAIGN_ERROR = 3, /* too many failed replications */
    PREDOSE_IO_ERROR = 4        /* file read/write failure */
} predose_status;

const char* predose_version(void);

/* Message of the last failure on this thread ("" if none). */
const char* predose_last_error(void);

/* ------------------------------------------------------------------ */
/* configuration                                                       */

typedef struct predose_config predose_config;

/* Default configuration (scenario 1, 50 replications, MTD target). */
predose_config* predose_config_create(void);

/* Configuration from a JSON document; NULL on error (see last_error). */
predose_config* predose_config_from_json(const char* json_text);

void predose_config_free(predose_config* cfg);

/* Override a single setting. Keys: scenario, replications, seed,
 * targets ("mtd" | "med" | "mtd,med"), estimator ("bayes" | "hybrid"),
 * threshold.mtd, threshold.med, default_study, omega_v, omega_ic50,
 * omega_ke, mouse_sigma_c (0 = estimate), dose_draws, med_subjects,
 * med_horizon_h, grid_points,
 * threads, out_dir, mcmc.chains, mcmc.burn_in, mcmc.iters,
 * mcmc.sampler ("mwg" | "hmc"), paper_scale ("true" | "false"). */
predose_status predose_config_set(predose_config* cfg, const char* key, const char* value);

/* Effective configuration as JSON; release with predose_string_free. */
char* predose_config_to_json(const predose_config* cfg);

void predose_string_free(char* s);

/* ------------------------------------------------------------------ */
/* commands                                                            */

/* Simulate one study dataset ("mouse" | "rat" | "dog") and write it as
 * CSV. */
predose_status predose_simulate(const predose_config* cfg, const char* species,
                                const char* out_csv_path);

/* Fit one study and write the posterior draws as CSV. When
 * dataset_csv_path is NULL a dataset is simulated first (same seed
 * derivation as predose_simulate). */
predose_status predose_fit(const predose_config* cfg, const char* species,
                           const char* dataset_csv_path, const char* out_draws_csv_path);

/* One full pipeline replication; writes replication_<i>.csv plus the
 * merged dose distribution (CSV + JSON summary) per target into out_dir. */
predose_status predose_pipeline(const predose_config* cfg, int replication_index,
                                const char* out_dir);

/* All replications; writes replication files, distances.csv and
 * aggregate.json into the configured out_dir. */
predose_status predose_campaign(const predose_config* cfg);

/* Accuracy-versus-threshold calibration pooled over scenarios
 * (comma-separated list, e.g. "1,2"); writes threshold_curve.csv. */
predose_status predose_calibrate_threshold(const predose_config* cfg, const char* scenarios,
                                           const char* target);

/* ------------------------------------------------------------------ */
/* direct computations                                                 */

/* Closed-form maximum tolerated dose. */
predose_status predose_mtd_analytic(double mu_cl, double omega_cl, double tau_t, double p_t,
                                    double mu_alpha, double omega_alpha, double* out_mtd);

/* Hellinger distance between the kernel density estimates of two sample
 * sets on a shared grid. */
predose_status predose_hellinger(const double* a, size_t n_a, const double* b, size_t n_b,
                                 size_t grid_points, double* out_distance);

#ifdef __cplusplus
}
#endif

#endif /* PREDOSE_H */
