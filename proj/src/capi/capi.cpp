#include "cyclecluster.h"

#include "core/config.hpp"
#include "core/dataset.hpp"
#include "core/experiment.hpp"
#include "core/model.hpp"
#include "core/trainer.hpp"

#include <cstdlib>
#include <cstring>
#include <string>

using namespace cyclecluster;

struct cc_pool {
    dataset::Pool pool;
};

struct cc_config {
    nlohmann::json raw;  // user keys; re-parsed after every mutation
};

namespace {

thread_local std::string g_last_error;

void clear_last_error() { g_last_error.clear(); }

cc_status fail(cc_status status, const std::string& message) {
    g_last_error = message;
    return status;
}

// Maps the core exception taxonomy onto status codes.
cc_status handle_exception() {
    try {
        throw;
    } catch (const ConfigError& e) {
        return fail(CC_ERROR_CONFIG, e.what());
    } catch (const DataError& e) {
        return fail(CC_ERROR_DATA, e.what());
    } catch (const NumericError& e) {
        return fail(CC_ERROR_NUMERIC, e.what());
    } catch (const std::invalid_argument& e) {
        return fail(CC_ERROR_INVALID_ARGUMENT, e.what());
    } catch (const std::exception& e) {
        return fail(CC_ERROR_IO, e.what());
    } catch (...) {
        return fail(CC_ERROR_IO, "unknown error");
    }
}

char* copy_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (out) std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

cc_status make_pool(dataset::Pool pool, cc_pool** out) {
    *out = new cc_pool{std::move(pool)};
    clear_last_error();
    return CC_OK;
}

}  // namespace

extern "C" {

const char* cc_version(void) { return kArtifactVersion; }

const char* cc_status_name(cc_status status) {
    switch (status) {
        case CC_OK: return "ok";
        case CC_ERROR_INVALID_ARGUMENT: return "invalid_argument";
        case CC_ERROR_CONFIG: return "config_error";
        case CC_ERROR_DATA: return "data_error";
        case CC_ERROR_NUMERIC: return "numeric_error";
        case CC_ERROR_IO: return "io_error";
    }
    return "unknown";
}

const char* cc_last_error(void) { return g_last_error.c_str(); }

void cc_string_free(char* s) { std::free(s); }

cc_status cc_pool_generate_two_moons(int64_t n, double noise, uint64_t seed, cc_pool** out) {
    if (!out) return fail(CC_ERROR_INVALID_ARGUMENT, "out pointer is null");
    try {
        return make_pool(dataset::generate_two_moons(static_cast<int>(n), noise, seed), out);
    } catch (...) {
        return handle_exception();
    }
}

cc_status cc_pool_generate_blobs(int64_t n, int32_t class_count, int32_t dim, double separation,
                                 uint64_t seed, cc_pool** out) {
    if (!out) return fail(CC_ERROR_INVALID_ARGUMENT, "out pointer is null");
    try {
        return make_pool(
            dataset::generate_blobs(static_cast<int>(n), class_count, dim, separation, seed), out);
    } catch (...) {
        return handle_exception();
    }
}

cc_status cc_pool_load_csv(const char* path, cc_pool** out) {
    if (!path || !out) return fail(CC_ERROR_INVALID_ARGUMENT, "null argument");
    try {
        return make_pool(dataset::load_csv(path), out);
    } catch (...) {
        return handle_exception();
    }
}

cc_status cc_pool_load_idx(const char* images_path, const char* labels_path, cc_pool** out) {
    if (!images_path || !labels_path || !out) return fail(CC_ERROR_INVALID_ARGUMENT, "null argument");
    try {
        return make_pool(dataset::load_idx_images(images_path, labels_path), out);
    } catch (...) {
        return handle_exception();
    }
}

cc_status cc_pool_save_csv(const cc_pool* pool, const char* path) {
    if (!pool || !path) return fail(CC_ERROR_INVALID_ARGUMENT, "null argument");
    try {
        dataset::save_csv(pool->pool, path);
        clear_last_error();
        return CC_OK;
    } catch (...) {
        return handle_exception();
    }
}

cc_status cc_pool_save_idx(const cc_pool* pool, const char* images_path, const char* labels_path,
                           int32_t rows, int32_t cols) {
    if (!pool || !images_path || !labels_path) {
        return fail(CC_ERROR_INVALID_ARGUMENT, "null argument");
    }
    try {
        dataset::save_idx_images(pool->pool, images_path, labels_path, rows, cols);
        clear_last_error();
        return CC_OK;
    } catch (...) {
        return handle_exception();
    }
}

int64_t cc_pool_size(const cc_pool* pool) { return pool ? pool->pool.size() : 0; }

int32_t cc_pool_feature_dim(const cc_pool* pool) { return pool ? pool->pool.dim() : 0; }

int32_t cc_pool_class_count(const cc_pool* pool) { return pool ? pool->pool.class_count : 0; }

uint64_t cc_pool_fingerprint(const cc_pool* pool) { return pool ? pool->pool.fingerprint() : 0; }

void cc_pool_free(cc_pool* pool) { delete pool; }

cc_status cc_config_load_file(const char* path, cc_config** out) {
    if (!path || !out) return fail(CC_ERROR_INVALID_ARGUMENT, "null argument");
    try {
        ExperimentConfig parsed = load_config_file(path);
        *out = new cc_config{config_to_json(parsed)};
        clear_last_error();
        return CC_OK;
    } catch (...) {
        return handle_exception();
    }
}

cc_status cc_config_parse(const char* json_text, cc_config** out) {
    if (!json_text || !out) return fail(CC_ERROR_INVALID_ARGUMENT, "null argument");
    try {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(json_text);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("config JSON is invalid: ") + e.what());
        }
        ExperimentConfig parsed = parse_config(j);
        *out = new cc_config{config_to_json(parsed)};
        clear_last_error();
        return CC_OK;
    } catch (...) {
        return handle_exception();
    }
}

cc_status cc_config_set(cc_config* config, const char* key, const char* json_value) {
    if (!config || !key || !json_value) return fail(CC_ERROR_INVALID_ARGUMENT, "null argument");
    try {
        nlohmann::json value;
        try {
            value = nlohmann::json::parse(json_value);
        } catch (const nlohmann::json::exception&) {
            // Treat unparseable scalars as strings ("csv" etc).
            value = std::string(json_value);
        }
        nlohmann::json candidate = config->raw;
        candidate[key] = value;
        parse_config(candidate);  // validate before committing
        config->raw = std::move(candidate);
        clear_last_error();
        return CC_OK;
    } catch (...) {
        return handle_exception();
    }
}

cc_status cc_config_dump(const cc_config* config, char** json_out) {
    if (!config || !json_out) return fail(CC_ERROR_INVALID_ARGUMENT, "null argument");
    try {
        const std::string text = config_to_json(parse_config(config->raw)).dump(2) + "\n";
        *json_out = copy_string(text);
        clear_last_error();
        return CC_OK;
    } catch (...) {
        return handle_exception();
    }
}

void cc_config_free(cc_config* config) { delete config; }

cc_status cc_train(const cc_config* config, const char* out_dir, char** summary_json_out) {
    if (!config) return fail(CC_ERROR_INVALID_ARGUMENT, "config is null");
    try {
        const ExperimentConfig parsed = parse_config(config->raw);
        const std::string summary = run_training_command(parsed, out_dir ? out_dir : "");
        if (summary_json_out) *summary_json_out = copy_string(summary);
        clear_last_error();
        return CC_OK;
    } catch (...) {
        return handle_exception();
    }
}

cc_status cc_evaluate(const char* checkpoint_path, const cc_pool* pool, double* error_rate_out) {
    if (!checkpoint_path || !pool || !error_rate_out) {
        return fail(CC_ERROR_INVALID_ARGUMENT, "null argument");
    }
    try {
        const model::Checkpoint cp = model::load_checkpoint(checkpoint_path);
        if (cp.params.input_dim() != pool->pool.dim()) {
            throw DataError("checkpoint expects d_in=" + std::to_string(cp.params.input_dim()) +
                            " but pool has d_in=" + std::to_string(pool->pool.dim()));
        }
        if (cp.params.head_width() < pool->pool.class_count) {
            throw DataError("checkpoint head width " + std::to_string(cp.params.head_width()) +
                            " is smaller than pool class count " +
                            std::to_string(pool->pool.class_count));
        }
        *error_rate_out = trainer::evaluate(cp.params, pool->pool.features, pool->pool.truth,
                                            pool->pool.class_count);
        clear_last_error();
        return CC_OK;
    } catch (...) {
        return handle_exception();
    }
}

cc_status cc_sweep(const cc_config* config, int32_t jobs, const char* format, char** table_out) {
    if (!config || !table_out) return fail(CC_ERROR_INVALID_ARGUMENT, "null argument");
    try {
        const std::string fmt = format ? format : "csv";
        if (fmt != "csv" && fmt != "json") {
            throw ConfigError("format must be csv or json, got '" + fmt + "'");
        }
        const ExperimentConfig parsed = parse_config(config->raw);
        const auto rows = run_sweep(parsed, jobs < 1 ? 1 : jobs);
        *table_out = copy_string(fmt == "csv" ? sweep_to_csv(rows) : sweep_to_json(rows));
        clear_last_error();
        return CC_OK;
    } catch (...) {
        return handle_exception();
    }
}

}  // extern "C"
