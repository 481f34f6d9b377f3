#pragma once

#include "core/dataset.hpp"
#include "core/trainer.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace cyclecluster {

inline constexpr const char* kArtifactName = "cyclecluster";
inline constexpr const char* kArtifactVersion = "0.1.0";

// Where a pool comes from: a synthetic generator or a file pair.
struct DataSpec {
    enum class Kind { kTwoMoons, kBlobs, kCsv, kIdx };
    Kind kind = Kind::kTwoMoons;
    int n = 1000;
    double noise = 0.1;
    std::uint64_t seed = 7;
    int classes = 3;
    int dim = 2;
    double separation = 10.0;
    std::string path;
    std::string images_path;
    std::string labels_path;
};

dataset::Pool load_data(const DataSpec& spec);
nlohmann::json data_spec_to_json(const DataSpec& spec);
DataSpec data_spec_from_json(const nlohmann::json& j, const std::string& where);

// Parses "k=v,k=v" or "kind:k=v,..." CLI shorthand, a *.csv path, or an
// images.idx:labels.idx pair into a DataSpec.
DataSpec data_spec_from_cli(const std::string& arg);

struct SweepSpec {
    std::vector<int> cluster_counts;  // empty -> just the base K
    std::vector<int> labeled_counts;  // empty -> just the base n_labeled
    bool include_purely_graphical = false;
};

struct ExperimentConfig {
    DataSpec data;
    std::optional<DataSpec> holdout;
    int n_labeled = 10;
    int splits = 1;
    trainer::TrainConfig train;
    bool dump_diagnostics = false;
    SweepSpec sweep;

    void validate() const;  // throws ConfigError naming the offending field
};

// Strict parse: unknown keys and wrong types are ConfigErrors naming the key.
// `K` is the one key without a default.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config_file(const std::string& path);

// Effective config with all defaults materialized; parse_config(round-trip)
// reproduces the same experiment.
nlohmann::json config_to_json(const ExperimentConfig& config);

std::uint64_t config_fingerprint(const ExperimentConfig& config);

}  // namespace cyclecluster
