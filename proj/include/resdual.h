/*
 * resdual — C API for the residual-stream duality laboratory.
 *
 * Conventions:
 *   - Every fallible call returns rd_status; RD_OK is 0. On failure,
 *     rd_last_error() returns a thread-local human-readable message.
 *   - Objects come back through out-parameters as opaque handles the caller
 *     must release with the matching *_release function.
 *   - Buffers are dense row-major doubles; a hidden stack is (L+1) layer
 *     slices of T*d scalars, layer-major.
 *   - Window sizes are positive integers or RD_WINDOW_FULL.
 *   - Strings returned from a report handle stay valid until the handle is
 *     released. Canonical JSON excludes wall-time unless include_timing = 1,
 *     so identical inputs yield identical bytes.
 */

#ifndef RESDUAL_H
#define RESDUAL_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum rd_status {
    RD_OK = 0,
    RD_ERR_NULL_ARGUMENT = 1,
    RD_ERR_DIMENSION = 2,
    RD_ERR_BOUNDS = 3,
    RD_ERR_PARAMETER = 4,
    RD_ERR_CONFIG = 5,
    RD_ERR_INVARIANT = 6,
    RD_ERR_CONTRACT = 7,
    RD_ERR_IO = 8,
    RD_ERR_UNKNOWN = 9
} rd_status;

typedef enum rd_mixer {
    RD_MIXER_STANDARD = 0,
    RD_MIXER_SEQ_SHORTSWA = 1,
    RD_MIXER_DEPTH_ATTN = 2,
    RD_MIXER_ELC = 3,
    RD_MIXER_DENSEFORMER = 4
} rd_mixer;

typedef enum rd_dtype { RD_DTYPE_F64 = 0, RD_DTYPE_F32 = 1 } rd_dtype;

typedef enum rd_check_mode { RD_CHECK_BIT_EXACT = 0, RD_CHECK_TOLERANCE = 1 } rd_check_mode;

typedef enum rd_stack_recipe { RD_STACK_FORWARD = 0, RD_STACK_RANDOM = 1 } rd_stack_recipe;

#define RD_WINDOW_FULL ((int64_t)-1)

typedef struct rd_model rd_model;
typedef struct rd_report rd_report;

const char* rd_version(void);

/* thread-local message describing this thread's most recent failure */
const char* rd_last_error(void);

/* ---- models ---- */

typedef struct rd_model_config {
    int64_t L;
    int64_t T;
    int64_t d;
    int64_t mlp_hidden; /* 0 -> 4*d */
    rd_mixer mixer;
    int64_t window; /* w (seq mixer) or K (depth mixer); RD_WINDOW_FULL allowed */
    int depth_params_shared;
    uint64_t seed;
} rd_model_config;

/* creates a model with deterministically initialized weights */
rd_status rd_model_create(const rd_model_config* config, rd_model** out);

rd_status rd_model_config_get(const rd_model* model, rd_model_config* out);

/* input: T*d scalars; output: (L+1)*T*d scalars, layer slice 0 = the input */
rd_status rd_model_forward(const rd_model* model, const double* input, double* output);

rd_status rd_model_save(const rd_model* model, const char* path);
rd_status rd_model_load(const char* path, rd_model** out);
void rd_model_release(rd_model* model);

/* ---- duality verification ---- */

typedef struct rd_duality_opts {
    int64_t L;
    int64_t T;
    int64_t d;
    uint64_t seed;
    rd_mixer mixer;       /* drives the forward stack recipe */
    int64_t mixer_window; /* the model's own w/K; RD_WINDOW_FULL for none */
    rd_stack_recipe stack;
    int64_t K; /* depth window under test; RD_WINDOW_FULL allowed */
    rd_check_mode mode;
    rd_dtype dtype;
    double tolerance; /* < 0 -> dtype default (1e-12 f64, 1e-6 f32) */
    int include_timing;
} rd_duality_opts;

rd_status rd_duality_check(const rd_duality_opts* opts, rd_report** out);

/* the K = layer+1 limit against a dense masked-score oracle; opts->K ignored */
rd_status rd_duality_full_window(const rd_duality_opts* opts, rd_report** out);

/* one report aggregating n independent cells; passes iff every cell passes */
rd_status rd_duality_sweep(const rd_duality_opts* cells, size_t n, rd_report** out);

/* ---- cost models ---- */

rd_status rd_cost_flops_seq(int64_t T, int64_t w, int64_t d, int64_t dk, int64_t dv,
                            uint64_t seed, rd_report** out);
rd_status rd_cost_flops_depth(int64_t T, int64_t K, int64_t L, int64_t d, int64_t dk, int64_t dv,
                              uint64_t seed, rd_report** out);

rd_status rd_simulate_decode(rd_mixer mixer, int64_t L, int64_t window, int64_t d, int64_t dk,
                             int64_t dv, int64_t steps, int64_t bytes_per_scalar,
                             rd_report** out);

/* stage_sizes may be NULL (near-even default split); else n_stages == P */
rd_status rd_pipeline_transfers(rd_mixer mixer, int64_t L, int64_t P, const int64_t* stage_sizes,
                                size_t n_stages, int64_t K, rd_report** out);

/* ---- reports ---- */

int rd_report_passed(const rd_report* report);
const char* rd_report_json(const rd_report* report);
const char* rd_report_csv(const rd_report* report);
/* human-readable table, including the worst cell for failed duality checks */
const char* rd_report_summary(const rd_report* report);
void rd_report_release(rd_report* report);

#ifdef __cplusplus
}
#endif

#endif /* RESDUAL_H */
