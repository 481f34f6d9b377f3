#pragma once

#include "core/config.hpp"

#include <functional>
#include <string>
#include <vector>

namespace cyclecluster {

struct SplitOutcome {
    int split = 0;
    std::uint64_t split_seed = 0;
    double init_error = 0.0;   // unlabeled error right after supervised init
    double final_error = 0.0;  // unlabeled error after the last epoch
    double test_error = -1.0;  // holdout error, -1 when absent
};

struct ErrorStats {
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation; 0 for a single value
};

ErrorStats summarize_errors(const std::vector<double>& errors);

struct ExperimentSummary {
    std::vector<SplitOutcome> splits;
    ErrorStats unlabeled;
    ErrorStats init;
    bool purely_graphical = false;
};

// Called after every epoch; trace is non-null only when diagnostics are on.
using EpochSink = std::function<void(int split, const trainer::EpochReport&,
                                     const trainer::EpochTrace*)>;
// Called once per finished split with the trained model and optimizer.
using SplitSink = std::function<void(int split, const model::ModelParams&,
                                     const model::OptimizerState&)>;

// Trains one independent run per split (stratified, seeded) and aggregates
// final unlabeled errors.
ExperimentSummary run_experiment(const ExperimentConfig& config, const dataset::Pool& pool,
                                 const dataset::Pool* holdout, const EpochSink& epoch_sink = {},
                                 const SplitSink& split_sink = {});

// cmd_train backend: loads data from the config, trains, and (when out_dir is
// nonempty) writes manifest.json, epochs.jsonl, checkpoints, summary.json and
// optional diagnostics.jsonl. Returns the summary JSON text.
std::string run_training_command(const ExperimentConfig& config, const std::string& out_dir);

struct SweepRow {
    std::string mode;  // "cyclecluster" or "purely_graphical"
    int cluster_count = 0;  // meaningful for cyclecluster rows
    int n_labeled = 0;
    double mean_error = 0.0;
    double stddev_error = 0.0;
};

// One run_experiment per (K, n_labeled) grid point, plus a purely-graphical
// baseline per n_labeled when requested. Grid points may run concurrently.
std::vector<SweepRow> run_sweep(const ExperimentConfig& config, int jobs);

std::string sweep_to_csv(const std::vector<SweepRow>& rows);
std::string sweep_to_json(const std::vector<SweepRow>& rows);

}  // namespace cyclecluster
