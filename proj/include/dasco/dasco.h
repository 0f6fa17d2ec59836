#ifndef DASCO_DASCO_H
#define DASCO_DASCO_H

/* C interface to the DASCO toy lab. Every function returns a dasco_status;
 * on failure dasco_last_error() describes the problem. Status values double
 * as process exit codes. Strings returned through char** out-parameters are
 * owned by the caller and released with dasco_string_free. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define DASCO_API __declspec(dllexport)
#else
#define DASCO_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dasco_status {
  DASCO_OK = 0,
  DASCO_ERR_CONTRACT = 2, /* invalid argument, config or state */
  DASCO_ERR_IO = 3,       /* missing or malformed file */
  DASCO_ERR_NUMERIC = 4,  /* non-finite value during computation */
  DASCO_ERR_INTERNAL = 5
} dasco_status;

typedef struct dasco_dataset dasco_dataset;
typedef struct dasco_policy dasco_policy;

/* Message for the most recent failure on this thread; "" if none. */
DASCO_API const char* dasco_last_error(void);
DASCO_API const char* dasco_version(void);
DASCO_API void dasco_string_free(char* s);

/* ---- datasets ---- */

typedef struct dasco_dataset_info {
  size_t transitions;
  size_t episodes;
  size_t obs_dim;
  size_t act_dim;
  uint64_t seed;
  double behavior_success_rate;
} dasco_dataset_info;

/* env: a built-in maze or "toy-reacher"; variant: clean, noisy or biased. */
DASCO_API dasco_status dasco_dataset_generate(const char* env, const char* variant, int episodes, uint64_t seed,
                                              dasco_dataset** out);
/* Same from a JSON config: {env, variant, episodes, seed, layout?, cell_size?,
 * max_episode_steps?}. A layout (array of rows using # . S G) replaces the
 * built-in maze named by env. The resolved config is returned when
 * out_resolved is non-NULL; with out == NULL the config is only validated. */
DASCO_API dasco_status dasco_dataset_generate_config(const char* config_json, dasco_dataset** out, char** out_resolved);
DASCO_API dasco_status dasco_dataset_read(const char* path, dasco_dataset** out);
DASCO_API dasco_status dasco_dataset_write(const dasco_dataset* ds, const char* path);
DASCO_API dasco_status dasco_dataset_info_get(const dasco_dataset* ds, dasco_dataset_info* out);
/* JSON object with env, variant, seed, generator_version, behavior_success_rate. */
DASCO_API dasco_status dasco_dataset_metadata_json(const dasco_dataset* ds, char** out_json);
/* Divides rewards by the spread of episode returns. */
DASCO_API dasco_status dasco_dataset_standardize_rewards(dasco_dataset* ds);
DASCO_API void dasco_dataset_free(dasco_dataset* ds);

/* ---- agent configuration ---- */

/* Applies `overrides_json` (may be NULL) on top of a preset ("maze" or
 * "dense") and returns the validated config with every derived field filled
 * in for `act_dim`. Unknown keys are rejected. */
DASCO_API dasco_status dasco_agent_config_resolve(const char* preset, const char* overrides_json, size_t act_dim,
                                                  char** out_json);

/* ---- training ---- */

typedef struct dasco_metrics_row {
  int64_t step;
  double q1_loss, q2_loss, policy_loss, aux_loss, disc_loss;
  double mean_weight, mean_d_real, mean_d_fake;
  double eval_return, eval_success;
} dasco_metrics_row;

typedef void (*dasco_metrics_callback)(const dasco_metrics_row* row, void* user);

/* Trains with the resolved config JSON from dasco_agent_config_resolve.
 * Writes config.json, metrics.csv and one NNC1 file per network to out_dir.
 * eval_env may be NULL to use the dataset's environment. Returns
 * DASCO_ERR_NUMERIC on a numeric abort; files from the last evaluation stay. */
DASCO_API dasco_status dasco_train(const dasco_dataset* ds, const char* config_json, uint64_t seed,
                                   const char* out_dir, const char* eval_env, dasco_metrics_callback callback,
                                   void* user);

/* ---- evaluation ---- */

typedef struct dasco_eval_result {
  double mean_return;
  double success_rate;
  int episodes;
} dasco_eval_result;

DASCO_API dasco_status dasco_policy_load(const char* checkpoint_dir, dasco_policy** out);
/* Deterministic tanh(mean) actions; episode k resets with a seed derived from (seed, k). */
DASCO_API dasco_status dasco_policy_evaluate(const dasco_policy* policy, const char* env, int episodes, uint64_t seed,
                                             dasco_eval_result* out);
/* The scripted waypoint controller through the same harness (maze envs only). */
DASCO_API dasco_status dasco_behavior_evaluate(const char* env, int episodes, uint64_t seed, dasco_eval_result* out);
DASCO_API void dasco_policy_free(dasco_policy* policy);

/* ---- theory ---- */

/* Two-action worked example as a JSON report. */
DASCO_API dasco_status dasco_theory_example_1d(char** out_json);

typedef struct dasco_theory_summary {
  size_t instances;
  size_t passed;
  double max_tv;
  double max_kkt_residual;
  double max_objective_gap;
} dasco_theory_summary;

/* Random instances with n in [2, max_n]; writes the per-instance CSV.
 * maximize != 0 negates the sampled objective. */
DASCO_API dasco_status dasco_theory_check(size_t instances, uint64_t seed, size_t max_n, int maximize, char** out_csv,
                                          dasco_theory_summary* out);
/* Single- and dual-generator optima for a user distribution and objective. */
DASCO_API dasco_status dasco_theory_solve(const double* p_data, const double* f, size_t n, int maximize,
                                          char** out_json);

/* ---- GAN demo ---- */

typedef struct dasco_gan_summary {
  double in_support_rate;
  double primary_mean_f;
  double data_mean_f;
  double mixture_jsd_estimate;
  int aborted;
} dasco_gan_summary;

/* Resolves a GAN demo config (keys: data{modes, weights, stddev, sample_count,
 * objective, target, threshold}, gan{...}, seed, use_aux) over the defaults. */
DASCO_API dasco_status dasco_gan_config_resolve(const char* overrides_json, char** out_json);
/* Writes metrics.csv, primary_samples.txt, aux_samples.txt, data_samples.txt
 * and histogram.svg to out_dir. Returns DASCO_ERR_NUMERIC after writing the
 * last good metrics when training aborts. */
DASCO_API dasco_status dasco_gan_demo(const char* config_json, const char* out_dir, dasco_gan_summary* out);

#ifdef __cplusplus
}
#endif

#endif /* DASCO_DASCO_H */
