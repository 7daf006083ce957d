#ifndef PARROTGATE_H
#define PARROTGATE_H

/* C interface to the parrotgate toolkit.
 *
 * Every function returns a pg_status. On failure the message for the calling
 * thread is available from pg_last_error() until the next call into the
 * library. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  define PG_API __declspec(dllexport)
#else
#  define PG_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum pg_status {
    PG_OK = 0,
    PG_ERR_CONFIG = 1,
    PG_ERR_INCOMPATIBLE = 2,
    PG_ERR_IO = 3,
    PG_ERR_NUMERIC = 4,
    PG_ERR_DIMENSION = 5,
    PG_ERR_CONTRACT = 6,
    PG_ERR_DEGENERATE_INPUT = 7,
    PG_ERR_UNSATISFIABLE = 8,
    PG_ERR_NO_DRAWING_PIXELS = 9,
    PG_ERR_INVALID_ARGUMENT = 10,
    PG_ERR_INTERNAL = 11
} pg_status;

typedef struct pg_run pg_run;

typedef void (*pg_log_fn)(const char* message, void* user_data);

typedef struct pg_split_counts {
    size_t train, mod1, mod2, novel;
} pg_split_counts;

typedef struct pg_eval_options {
    const char* checkpoint; /* NULL: checkpoints/final.ckpt */
    const char* threshold;  /* NULL: threshold.json */
    const char* splits;     /* comma-separated, NULL or "": all four */
    int plot;               /* nonzero: write plots/<split>.svg */
} pg_eval_options;

typedef struct pg_eval_result {
    double tau;
    double train_rate, mod1_rate, mod2_rate, nov_pass_rate; /* NaN when the split was not evaluated */
} pg_eval_result;

typedef struct pg_sweep_grid {
    const double* p_mask;
    size_t n_p_mask;
    const int* weight_decay;
    size_t n_weight_decay;
    const int* augmentation;
    size_t n_augmentation;
    const uint64_t* epochs;
    size_t n_epochs;
} pg_sweep_grid;

PG_API const char* pg_version(void);
PG_API const char* pg_last_error(void);
PG_API const char* pg_status_string(pg_status status);

/* Run handles. A handle owns a validated configuration. */
PG_API pg_status pg_run_open(const char* config_path, pg_run** out);
PG_API pg_status pg_run_open_json(const char* config_json, pg_run** out);
PG_API void pg_run_close(pg_run* run);
/* Sets a dotted key ("train.epochs") to a JSON value ("3000", "true", "\"out\""). */
PG_API pg_status pg_run_set(pg_run* run, const char* dotted_key, const char* json_value);
PG_API void pg_run_set_logger(pg_run* run, pg_log_fn fn, void* user_data);
/* Pointers stay valid until the handle is modified or closed. */
PG_API const char* pg_run_fingerprint(const pg_run* run);
PG_API const char* pg_run_config_json(const pg_run* run);

/* Pipeline stages. */
PG_API pg_status pg_gen_data(pg_run* run, pg_split_counts* counts);
PG_API pg_status pg_train(pg_run* run, int resume, double* final_loss);
PG_API pg_status pg_calibrate(pg_run* run, const char* checkpoint, double* tau);
PG_API pg_status pg_eval(pg_run* run, const pg_eval_options* options, pg_eval_result* result);
PG_API pg_status pg_sweep(pg_run* run, const pg_sweep_grid* grid, size_t* n_rows);

/* Stateless helpers. */
PG_API pg_status pg_detect(double loss, double tau, int* parroted);
/* Images are row-major width*height arrays in [0,1]. */
PG_API pg_status pg_masked_mse(const double* x, const double* x_hat, size_t width, size_t height,
                               double white_threshold, double* loss);
PG_API pg_status pg_mean_threshold(const double* scores, size_t n, double* tau);

#ifdef __cplusplus
}
#endif

#endif
