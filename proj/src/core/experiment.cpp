#include "core/experiment.hpp"

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace cyclecluster {

using nlohmann::json;

ErrorStats summarize_errors(const std::vector<double>& errors) {
    if (errors.empty()) throw std::invalid_argument("summarize_errors: empty error list");
    ErrorStats stats;
    for (double e : errors) stats.mean += e;
    stats.mean /= static_cast<double>(errors.size());
    if (errors.size() > 1) {
        double ss = 0.0;
        for (double e : errors) ss += (e - stats.mean) * (e - stats.mean);
        stats.stddev = std::sqrt(ss / static_cast<double>(errors.size() - 1));
    }
    return stats;
}

namespace {

// Per-split seeds so the runs are independent but reproducible.
trainer::TrainConfig split_train_config(const trainer::TrainConfig& base, int split) {
    trainer::TrainConfig cfg = base;
    cfg.seeds.model = derive_seed(base.seeds.model, static_cast<std::uint64_t>(split));
    cfg.seeds.shuffle = derive_seed(base.seeds.shuffle, static_cast<std::uint64_t>(split));
    cfg.seeds.kmeans = derive_seed(base.seeds.kmeans, static_cast<std::uint64_t>(split));
    return cfg;
}

}  // namespace

ExperimentSummary run_experiment(const ExperimentConfig& config, const dataset::Pool& pool,
                                 const dataset::Pool* holdout, const EpochSink& epoch_sink,
                                 const SplitSink& split_sink) {
    config.validate();
    ExperimentSummary summary;
    summary.purely_graphical = config.train.purely_graphical;

    std::vector<double> final_errors;
    std::vector<double> init_errors;
    for (int s = 0; s < config.splits; ++s) {
        const std::uint64_t split_seed = config.train.seeds.split + static_cast<std::uint64_t>(s);
        dataset::Pool run_pool = pool;
        run_pool.split = dataset::make_split(run_pool, config.n_labeled, split_seed);

        trainer::Trainer t(run_pool, split_train_config(config.train, s), holdout);
        t.supervised_init();

        SplitOutcome outcome;
        outcome.split = s;
        outcome.split_seed = split_seed;
        outcome.init_error = t.unlabeled_error();

        for (int epoch = 0; epoch < config.train.epochs; ++epoch) {
            trainer::EpochTrace trace;
            trainer::EpochTrace* trace_ptr = config.dump_diagnostics ? &trace : nullptr;
            const auto report = t.run_epoch(epoch, trace_ptr);
            outcome.final_error = report.unlabeled_error;
            outcome.test_error = report.test_error;
            if (epoch_sink) epoch_sink(s, report, trace_ptr);
        }

        if (split_sink) split_sink(s, t.params(), t.optimizer());
        final_errors.push_back(outcome.final_error);
        init_errors.push_back(outcome.init_error);
        summary.splits.push_back(outcome);
    }

    summary.unlabeled = summarize_errors(final_errors);
    summary.init = summarize_errors(init_errors);
    return summary;
}

namespace {

json summary_to_json(const ExperimentConfig& config, const dataset::Pool& pool,
                     const ExperimentSummary& summary) {
    json j;
    j["artifact"] = kArtifactName;
    j["version"] = kArtifactVersion;
    j["config_fingerprint"] = hex_fingerprint(config_fingerprint(config));
    j["dataset_fingerprint"] = hex_fingerprint(pool.fingerprint());
    j["purely_graphical"] = summary.purely_graphical;
    j["n_splits"] = static_cast<int>(summary.splits.size());
    j["splits"] = json::array();
    for (const auto& s : summary.splits) {
        json sj;
        sj["split"] = s.split;
        sj["split_seed"] = s.split_seed;
        sj["init_error"] = s.init_error;
        sj["final_error"] = s.final_error;
        if (s.test_error >= 0.0) {
            sj["test_error"] = s.test_error;
        } else {
            sj["test_error"] = nullptr;
        }
        j["splits"].push_back(sj);
    }
    j["mean_error"] = summary.unlabeled.mean;
    j["stddev_error"] = summary.unlabeled.stddev;
    j["mean_init_error"] = summary.init.mean;
    j["stddev_init_error"] = summary.init.stddev;
    return j;
}

json epoch_report_to_json(int split, const trainer::EpochReport& r) {
    json j;
    j["split"] = split;
    j["epoch"] = r.epoch;
    j["mean_cluster_loss"] = r.mean_cluster_loss;
    j["mean_ssl_loss"] = r.mean_ssl_loss;
    j["unlabeled_error"] = r.unlabeled_error;
    if (r.test_error >= 0.0) {
        j["test_error"] = r.test_error;
    } else {
        j["test_error"] = nullptr;
    }
    j["kmeans_inertia"] = r.kmeans_inertia;
    j["lp_residual"] = r.lp_residual;
    j["cluster_steps"] = r.cluster_steps;
    j["ssl_steps"] = r.ssl_steps;
    j["kmeans_calls"] = r.kmeans_calls;
    j["propagate_calls"] = r.propagate_calls;
    j["wall_time_s"] = r.wall_time_s;
    return j;
}

json trace_to_json(int split, int epoch, const trainer::EpochTrace& trace) {
    json j;
    j["split"] = split;
    j["epoch"] = epoch;
    j["pseudo_labels"] = trace.propagation.pseudo_labels;
    j["entropy_weights"] = std::vector<double>(
        trace.propagation.entropy.data(),
        trace.propagation.entropy.data() + trace.propagation.entropy.size());
    j["class_weights"] = std::vector<double>(
        trace.propagation.class_weight.data(),
        trace.propagation.class_weight.data() + trace.propagation.class_weight.size());
    j["lp_residual"] = trace.propagation.max_residual;
    j["kmeans"] = {{"inertia", trace.kmeans_inertia},
                   {"iterations", trace.kmeans_iterations},
                   {"assignments", trace.cluster_assignments}};
    return j;
}

}  // namespace

std::string run_training_command(const ExperimentConfig& config, const std::string& out_dir) {
    const dataset::Pool pool = load_data(config.data);
    std::optional<dataset::Pool> holdout;
    if (config.holdout) holdout = load_data(*config.holdout);

    const bool write = !out_dir.empty();
    namespace fs = std::filesystem;
    std::ofstream epochs_out;
    std::ofstream diag_out;
    std::vector<std::string> checkpoint_names;
    if (write) {
        fs::create_directories(out_dir);
        epochs_out.open(fs::path(out_dir) / "epochs.jsonl");
        if (!epochs_out) throw DataError("cannot open '" + out_dir + "/epochs.jsonl' for writing");
        if (config.dump_diagnostics) {
            diag_out.open(fs::path(out_dir) / "diagnostics.jsonl");
            if (!diag_out) throw DataError("cannot open '" + out_dir + "/diagnostics.jsonl' for writing");
        }
    }

    EpochSink epoch_sink;
    if (write) {
        epoch_sink = [&](int split, const trainer::EpochReport& report,
                         const trainer::EpochTrace* trace) {
            epochs_out << epoch_report_to_json(split, report).dump() << "\n";
            if (trace && diag_out.is_open()) {
                diag_out << trace_to_json(split, report.epoch, *trace).dump() << "\n";
            }
        };
    }
    SplitSink split_sink;
    if (write) {
        split_sink = [&](int split, const model::ModelParams& params,
                         const model::OptimizerState& opt) {
            const std::string name = "checkpoint_split" + std::to_string(split) + ".json";
            model::save_checkpoint((fs::path(out_dir) / name).string(), params, opt);
            checkpoint_names.push_back(name);
        };
    }

    const ExperimentSummary summary =
        run_experiment(config, pool, holdout ? &*holdout : nullptr, epoch_sink, split_sink);
    const json summary_json = summary_to_json(config, pool, summary);
    const std::string summary_text = summary_json.dump(2) + "\n";

    if (write) {
        json manifest;
        manifest["artifact"] = kArtifactName;
        manifest["version"] = kArtifactVersion;
        manifest["config"] = config_to_json(config);
        manifest["dataset"] = {{"fingerprint", hex_fingerprint(pool.fingerprint())},
                               {"n", pool.size()},
                               {"d_in", pool.dim()},
                               {"classes", pool.class_count}};
        json outputs;
        outputs["summary"] = "summary.json";
        outputs["epochs"] = "epochs.jsonl";
        outputs["checkpoints"] = checkpoint_names;
        if (config.dump_diagnostics) outputs["diagnostics"] = "diagnostics.jsonl";
        manifest["outputs"] = outputs;

        std::ofstream mf(fs::path(out_dir) / "manifest.json");
        if (!mf) throw DataError("cannot open '" + out_dir + "/manifest.json' for writing");
        mf << manifest.dump(2) << "\n";

        std::ofstream sf(fs::path(out_dir) / "summary.json");
        if (!sf) throw DataError("cannot open '" + out_dir + "/summary.json' for writing");
        sf << summary_text;
    }
    return summary_text;
}

std::vector<SweepRow> run_sweep(const ExperimentConfig& config, int jobs) {
    if (jobs < 1) throw std::invalid_argument("run_sweep: jobs must be >= 1");
    config.validate();

    std::vector<int> ks = config.sweep.cluster_counts;
    if (ks.empty()) ks.push_back(config.train.cluster_count);
    std::vector<int> nls = config.sweep.labeled_counts;
    if (nls.empty()) nls.push_back(config.n_labeled);

    struct Point {
        bool purely_graphical;
        int cluster_count;
        int n_labeled;
    };
    std::vector<Point> points;
    for (int nl : nls) {
        if (config.sweep.include_purely_graphical) {
            points.push_back({true, config.train.cluster_count, nl});
        }
        for (int k : ks) points.push_back({false, k, nl});
    }

    const dataset::Pool pool = load_data(config.data);
    std::optional<dataset::Pool> holdout;
    if (config.holdout) holdout = load_data(*config.holdout);

    std::vector<SweepRow> rows(points.size());
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr failure;
    std::mutex failure_mutex;

    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= points.size() || failed.load()) return;
            try {
                ExperimentConfig point_config = config;
                point_config.train.purely_graphical = points[i].purely_graphical;
                point_config.train.cluster_count = points[i].cluster_count;
                point_config.n_labeled = points[i].n_labeled;
                const auto summary =
                    run_experiment(point_config, pool, holdout ? &*holdout : nullptr);
                rows[i] = {points[i].purely_graphical ? "purely_graphical" : "cyclecluster",
                           points[i].cluster_count, points[i].n_labeled, summary.unlabeled.mean,
                           summary.unlabeled.stddev};
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                failed.store(true);
                if (!failure) failure = std::current_exception();
            }
        }
    };

    const int thread_count = std::min<int>(jobs, static_cast<int>(points.size()));
    if (thread_count <= 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (int t = 0; t < thread_count; ++t) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }
    if (failure) std::rethrow_exception(failure);
    return rows;
}

std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
    std::ostringstream out;
    out << "mode,K,n_labeled,mean_error,stddev_error\n";
    out.precision(10);
    for (const auto& r : rows) {
        out << r.mode << ",";
        if (r.mode == "purely_graphical") {
            out << "";
        } else {
            out << r.cluster_count;
        }
        out << "," << r.n_labeled << "," << r.mean_error << "," << r.stddev_error << "\n";
    }
    return out.str();
}

std::string sweep_to_json(const std::vector<SweepRow>& rows) {
    json j;
    j["rows"] = json::array();
    for (const auto& r : rows) {
        json rj;
        rj["mode"] = r.mode;
        if (r.mode == "purely_graphical") {
            rj["K"] = nullptr;
        } else {
            rj["K"] = r.cluster_count;
        }
        rj["n_labeled"] = r.n_labeled;
        rj["mean_error"] = r.mean_error;
        rj["stddev_error"] = r.stddev_error;
        j["rows"].push_back(rj);
    }
    return j.dump(2) + "\n";
}

}  // namespace cyclecluster
