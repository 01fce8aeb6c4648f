#ifndef BICMIX_BICMIX_H
#define BICMIX_BICMIX_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define BICMIX_API __declspec(dllexport)
#else
#define BICMIX_API __attribute__((visibility("default")))
#endif

/* Status codes double as process exit codes of the command line tool. */
typedef enum bicmix_status {
  BICMIX_OK = 0,
  BICMIX_ERR_USAGE = 2,
  BICMIX_ERR_DATA = 3,
  BICMIX_ERR_NUMERICAL = 4,
  BICMIX_ERR_INTERNAL = 5
} bicmix_status;

typedef struct bicmix_options bicmix_options;
typedef struct bicmix_matrix bicmix_matrix;
typedef struct bicmix_fit bicmix_fit;

/* Called after each completed sweep with (iteration, target, user_data). */
typedef void (*bicmix_progress_fn)(size_t iteration, size_t target, void* user_data);

BICMIX_API const char* bicmix_version(void);

/* Message of the last failing call on this thread; "" after a success. */
BICMIX_API const char* bicmix_last_error(void);

/* Warnings raised by the last call on this thread. Strings stay valid until
   the next call on the same thread. */
BICMIX_API size_t bicmix_warning_count(void);
BICMIX_API const char* bicmix_warning(size_t index);

/* Option bag: keys are long flag names without dashes ("k", "iterations",
   "seed", "a-x", ...). set replaces, add appends to a list-valued key. */
BICMIX_API bicmix_status bicmix_options_create(bicmix_options** out);
BICMIX_API bicmix_status bicmix_options_set(bicmix_options* opts, const char* key, const char* value);
BICMIX_API bicmix_status bicmix_options_add(bicmix_options* opts, const char* key, const char* value);
BICMIX_API void bicmix_options_free(bicmix_options* opts);

/* Runs a pipeline command: simulate, fit, score, network or normalize. */
BICMIX_API bicmix_status bicmix_run(const char* command, const bicmix_options* opts,
                                    bicmix_progress_fn progress, void* user_data);

/* Repeats the run recorded in a manifest. out_override may be NULL. */
BICMIX_API bicmix_status bicmix_rerun(const char* manifest_path, const char* out_override,
                                      bicmix_progress_fn progress, void* user_data);

/* Matrices are genes x samples, exchanged in column-major order. */
BICMIX_API bicmix_status bicmix_matrix_create(size_t rows, size_t cols, const double* values,
                                              bicmix_matrix** out);
BICMIX_API bicmix_status bicmix_matrix_read_tsv(const char* path, bicmix_matrix** out);
BICMIX_API bicmix_status bicmix_matrix_write_tsv(const bicmix_matrix* m, const char* path);
BICMIX_API bicmix_status bicmix_matrix_shape(const bicmix_matrix* m, size_t* rows, size_t* cols);
BICMIX_API bicmix_status bicmix_matrix_copy_values(const bicmix_matrix* m, double* out);
BICMIX_API bicmix_status bicmix_matrix_quantile_normalize(const bicmix_matrix* m,
                                                          bicmix_matrix** out);
BICMIX_API void bicmix_matrix_free(bicmix_matrix* m);

/* In-memory fit. Options accept the fit hyperparameter and config keys. The
   matrix must outlive the fit handle. */
BICMIX_API bicmix_status bicmix_fit_start(const bicmix_matrix* data, const bicmix_options* opts,
                                          bicmix_fit** out);
BICMIX_API bicmix_status bicmix_fit_run(bicmix_fit* fit, size_t until_iteration);
BICMIX_API bicmix_status bicmix_fit_iteration(const bicmix_fit* fit, size_t* out);
BICMIX_API bicmix_status bicmix_fit_components(const bicmix_fit* fit, size_t* out);
/* genes x K, column-major */
BICMIX_API bicmix_status bicmix_fit_copy_loadings(const bicmix_fit* fit, double* out);
/* K x samples, column-major */
BICMIX_API bicmix_status bicmix_fit_copy_factors(const bicmix_fit* fit, double* out);
/* K entries each; 1 = sparse */
BICMIX_API bicmix_status bicmix_fit_copy_indicators(const bicmix_fit* fit, double* z, double* o);
BICMIX_API bicmix_status bicmix_fit_copy_noise(const bicmix_fit* fit, double* psi);
BICMIX_API bicmix_status bicmix_fit_save_checkpoint(const bicmix_fit* fit, const char* path);
/* Restores a fit of the same matrix from a checkpoint. */
BICMIX_API bicmix_status bicmix_fit_load_checkpoint(const char* path, const bicmix_matrix* data,
                                                    bicmix_fit** out);
BICMIX_API void bicmix_fit_free(bicmix_fit* fit);

#ifdef __cplusplus
}
#endif

#endif
