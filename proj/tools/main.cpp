// cyclecluster command line: train / eval / sweep / gen-data.
// Talks to the engine exclusively through the C API in cyclecluster.h.

#include "cyclecluster.h"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>

namespace {

int exit_code_for(cc_status status) {
    switch (status) {
        case CC_OK: return 0;
        case CC_ERROR_INVALID_ARGUMENT:
        case CC_ERROR_CONFIG: return 2;
        case CC_ERROR_DATA:
        case CC_ERROR_IO: return 3;
        case CC_ERROR_NUMERIC: return 4;
    }
    return 1;
}

int report_failure(cc_status status) {
    std::cerr << "error (" << cc_status_name(status) << "): " << cc_last_error() << "\n";
    return exit_code_for(status);
}

struct ConfigHandle {
    cc_config* ptr = nullptr;
    ~ConfigHandle() { cc_config_free(ptr); }
};

struct PoolHandle {
    cc_pool* ptr = nullptr;
    ~PoolHandle() { cc_pool_free(ptr); }
};

struct StringHandle {
    char* ptr = nullptr;
    ~StringHandle() { cc_string_free(ptr); }
};

// Applies --seed/--purely-graphical/--data overrides to a loaded config.
cc_status apply_overrides(cc_config* config, const std::string& data_arg, bool purely_graphical,
                          bool seed_given, std::uint64_t seed) {
    cc_status status = CC_OK;
    if (!data_arg.empty()) {
        std::string value = data_arg;
        if (value.front() != '{') {
            // path shorthand: *.csv or images.idx:labels.idx
            const auto colon = value.find(':');
            if (colon != std::string::npos && value.find(".idx") != std::string::npos) {
                value = "{\"kind\":\"idx\",\"images\":\"" + value.substr(0, colon) +
                        "\",\"labels\":\"" + value.substr(colon + 1) + "\"}";
            } else {
                value = "{\"kind\":\"csv\",\"path\":\"" + value + "\"}";
            }
        }
        status = cc_config_set(config, "data", value.c_str());
        if (status != CC_OK) return status;
    }
    if (purely_graphical) {
        status = cc_config_set(config, "purely_graphical", "true");
        if (status != CC_OK) return status;
    }
    if (seed_given) {
        const std::string seeds = "{\"model\":" + std::to_string(seed) +
                                  ",\"split\":" + std::to_string(seed + 1) +
                                  ",\"shuffle\":" + std::to_string(seed + 2) +
                                  ",\"kmeans\":" + std::to_string(seed + 3) + "}";
        status = cc_config_set(config, "seeds", seeds.c_str());
    }
    return status;
}

cc_status load_pool_arg(const std::string& data_arg, cc_pool** out) {
    const auto colon = data_arg.find(':');
    if (data_arg.find(".idx") != std::string::npos && colon != std::string::npos) {
        return cc_pool_load_idx(data_arg.substr(0, colon).c_str(),
                                data_arg.substr(colon + 1).c_str(), out);
    }
    return cc_pool_load_csv(data_arg.c_str(), out);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cyclecluster: semi-supervised training with cluster-prediction "
                 "regularisation and graph pseudo-labels"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(cc_version()));

    std::string config_path;
    std::string out_path;
    std::string data_arg;
    std::string format = "csv";
    std::uint64_t seed = 0;
    bool purely_graphical = false;
    int jobs = 1;

    auto* train = app.add_subcommand("train", "Train per a JSON config and write artifacts");
    train->add_option("--config", config_path, "JSON config file")->required();
    train->add_option("--out", out_path, "Output directory for artifacts");
    train->add_option("--data", data_arg, "Dataset override: pool.csv, images.idx:labels.idx, or JSON");
    train->add_option("--seed", seed, "Base seed override (derives model/split/shuffle/kmeans)");
    train->add_flag("--purely-graphical", purely_graphical, "Disable the clustering pass");

    std::string checkpoint_path;
    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a labeled dataset");
    eval->add_option("checkpoint", checkpoint_path, "Checkpoint JSON file")->required();
    eval->add_option("--data", data_arg, "Dataset: pool.csv or images.idx:labels.idx")->required();
    eval->add_option("--out", out_path, "Optional JSON result file");

    auto* sweep = app.add_subcommand("sweep", "Run the config's sweep grid and emit a table");
    sweep->add_option("--config", config_path, "JSON config file with a sweep section")->required();
    sweep->add_option("--out", out_path, "Output table file (stdout if omitted)");
    sweep->add_option("--format", format, "Table format: csv or json")
        ->check(CLI::IsMember({"csv", "json"}));
    sweep->add_option("--jobs", jobs, "Concurrent grid points")->check(CLI::PositiveNumber);
    sweep->add_option("--seed", seed, "Base seed override");
    sweep->add_option("--data", data_arg, "Dataset override");
    sweep->add_flag("--purely-graphical", purely_graphical,
                    "Force the purely graphical mode for every grid point");

    std::string kind = "two_moons";
    std::int64_t gen_n = 1000;
    double gen_noise = 0.1;
    int gen_classes = 3;
    int gen_dim = 2;
    double gen_separation = 10.0;
    auto* gen = app.add_subcommand("gen-data", "Generate a synthetic pool as CSV");
    gen->add_option("--kind", kind, "two_moons or blobs")
        ->check(CLI::IsMember({"two_moons", "blobs"}));
    gen->add_option("--n", gen_n, "Sample count");
    gen->add_option("--noise", gen_noise, "Moon noise stddev");
    gen->add_option("--classes", gen_classes, "Blob class count");
    gen->add_option("--dim", gen_dim, "Blob dimension");
    gen->add_option("--separation", gen_separation, "Blob center separation");
    gen->add_option("--seed", seed, "Generator seed");
    gen->add_option("--out", out_path, "Output CSV path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;  // flag/arg problems are config errors
    }

    if (train->parsed()) {
        ConfigHandle config;
        cc_status status = cc_config_load_file(config_path.c_str(), &config.ptr);
        if (status != CC_OK) return report_failure(status);
        status = apply_overrides(config.ptr, data_arg, purely_graphical,
                                 train->count("--seed") > 0, seed);
        if (status != CC_OK) return report_failure(status);
        StringHandle summary;
        status = cc_train(config.ptr, out_path.empty() ? nullptr : out_path.c_str(), &summary.ptr);
        if (status != CC_OK) return report_failure(status);
        std::cout << summary.ptr;
        return 0;
    }

    if (eval->parsed()) {
        PoolHandle pool;
        cc_status status = load_pool_arg(data_arg, &pool.ptr);
        if (status != CC_OK) return report_failure(status);
        double error_rate = 0.0;
        status = cc_evaluate(checkpoint_path.c_str(), pool.ptr, &error_rate);
        if (status != CC_OK) return report_failure(status);
        std::printf("%.4f\n", error_rate);
        if (!out_path.empty()) {
            std::ofstream out(out_path);
            if (!out) {
                std::cerr << "error: cannot write '" << out_path << "'\n";
                return 3;
            }
            out << "{\"checkpoint\":\"" << checkpoint_path << "\",\"n\":" << cc_pool_size(pool.ptr)
                << ",\"error_rate\":" << error_rate << "}\n";
        }
        return 0;
    }

    if (sweep->parsed()) {
        ConfigHandle config;
        cc_status status = cc_config_load_file(config_path.c_str(), &config.ptr);
        if (status != CC_OK) return report_failure(status);
        status = apply_overrides(config.ptr, data_arg, purely_graphical,
                                 sweep->count("--seed") > 0, seed);
        if (status != CC_OK) return report_failure(status);
        StringHandle table;
        status = cc_sweep(config.ptr, jobs, format.c_str(), &table.ptr);
        if (status != CC_OK) return report_failure(status);
        if (out_path.empty()) {
            std::cout << table.ptr;
        } else {
            std::ofstream out(out_path);
            if (!out) {
                std::cerr << "error: cannot write '" << out_path << "'\n";
                return 3;
            }
            out << table.ptr;
        }
        return 0;
    }

    // gen-data
    PoolHandle pool;
    cc_status status;
    if (kind == "two_moons") {
        status = cc_pool_generate_two_moons(gen_n, gen_noise, seed, &pool.ptr);
    } else {
        status = cc_pool_generate_blobs(gen_n, gen_classes, gen_dim, gen_separation, seed, &pool.ptr);
    }
    if (status != CC_OK) return report_failure(status);
    status = cc_pool_save_csv(pool.ptr, out_path.c_str());
    if (status != CC_OK) return report_failure(status);
    std::cout << "wrote " << cc_pool_size(pool.ptr) << " samples to " << out_path << "\n";
    return 0;
}
