/*
 * cyclecluster — semi-supervised classification by cyclic cluster-prediction
 * regularisation and graph-propagated pseudo-label training.
 *
 * C API of the shared library. All functions return cc_status; CC_OK means
 * success. On failure cc_last_error() returns a message for the calling
 * thread. Objects are opaque handles released with their cc_*_free function.
 * Strings returned through char** are owned by the caller and released with
 * cc_string_free.
 */

#ifndef CYCLECLUSTER_H
#define CYCLECLUSTER_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define CC_API __declspec(dllexport)
#else
#define CC_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cc_status {
    CC_OK = 0,
    CC_ERROR_INVALID_ARGUMENT = 1,
    CC_ERROR_CONFIG = 2,
    CC_ERROR_DATA = 3,
    CC_ERROR_NUMERIC = 4,
    CC_ERROR_IO = 5
} cc_status;

typedef struct cc_pool cc_pool;     /* immutable sample pool */
typedef struct cc_config cc_config; /* experiment configuration */

CC_API const char* cc_version(void);
CC_API const char* cc_status_name(cc_status status);

/* Message for the most recent failure on this thread; empty string if none. */
CC_API const char* cc_last_error(void);

CC_API void cc_string_free(char* s);

/* ---- pools ---------------------------------------------------------- */

CC_API cc_status cc_pool_generate_two_moons(int64_t n, double noise, uint64_t seed,
                                            cc_pool** out);
CC_API cc_status cc_pool_generate_blobs(int64_t n, int32_t class_count, int32_t dim,
                                        double separation, uint64_t seed, cc_pool** out);
CC_API cc_status cc_pool_load_csv(const char* path, cc_pool** out);
CC_API cc_status cc_pool_load_idx(const char* images_path, const char* labels_path,
                                  cc_pool** out);
CC_API cc_status cc_pool_save_csv(const cc_pool* pool, const char* path);
/* rows*cols must equal the feature dimension; features are quantized to bytes. */
CC_API cc_status cc_pool_save_idx(const cc_pool* pool, const char* images_path,
                                  const char* labels_path, int32_t rows, int32_t cols);

CC_API int64_t cc_pool_size(const cc_pool* pool);
CC_API int32_t cc_pool_feature_dim(const cc_pool* pool);
CC_API int32_t cc_pool_class_count(const cc_pool* pool);
CC_API uint64_t cc_pool_fingerprint(const cc_pool* pool);
CC_API void cc_pool_free(cc_pool* pool);

/* ---- configuration --------------------------------------------------- */

/* JSON configuration; `K` is required, everything else has defaults.
 * Unknown keys are rejected. */
CC_API cc_status cc_config_load_file(const char* path, cc_config** out);
CC_API cc_status cc_config_parse(const char* json_text, cc_config** out);

/* Replaces one key with a JSON value, e.g. ("epochs", "40") or
 * ("data", "{\"kind\":\"csv\",\"path\":\"pool.csv\"}"). */
CC_API cc_status cc_config_set(cc_config* config, const char* key, const char* json_value);

/* Effective config with defaults materialized, as a JSON string. */
CC_API cc_status cc_config_dump(const cc_config* config, char** json_out);
CC_API void cc_config_free(cc_config* config);

/* ---- runs ------------------------------------------------------------ */

/* Trains per the config (data section included). When out_dir is non-NULL,
 * writes manifest.json, epochs.jsonl, per-split checkpoints and summary.json
 * there. summary_json_out (optional) receives the summary JSON text. */
CC_API cc_status cc_train(const cc_config* config, const char* out_dir, char** summary_json_out);

/* Error rate of a saved checkpoint on a pool with ground-truth labels. */
CC_API cc_status cc_evaluate(const char* checkpoint_path, const cc_pool* pool,
                             double* error_rate_out);

/* Runs the config's sweep grid with up to `jobs` concurrent runs; format is
 * "csv" or "json". table_out receives the rendered table. */
CC_API cc_status cc_sweep(const cc_config* config, int32_t jobs, const char* format,
                          char** table_out);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* CYCLECLUSTER_H */
