#include "core/experiment.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace cyclecluster;
using nlohmann::json;

namespace {

json tiny_config_json() {
    return json::parse(R"({
        "data": {"kind": "blobs", "n": 48, "classes": 2, "dim": 2, "separation": 6.0, "seed": 3},
        "n_labeled": 6,
        "splits": 2,
        "K": 3,
        "epochs": 2,
        "init_epochs": 3,
        "batch": 16,
        "batch_labeled": 8,
        "batch_unlabeled": 8,
        "anneal_epochs": 4,
        "k_nn": 5,
        "hidden": [16],
        "embed_dim": 8
    })");
}

std::filesystem::path temp_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("cyclecluster_exp_" + name);
    std::filesystem::remove_all(dir);
    return dir;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

}  // namespace

TEST_CASE("error summary arithmetic") {
    const auto single = summarize_errors({0.3});
    CHECK(single.mean == 0.3);
    CHECK(single.stddev == 0.0);

    const auto pair = summarize_errors({0.10, 0.20});
    CHECK(pair.mean == doctest::Approx(0.15).epsilon(1e-15));
    CHECK(pair.stddev == doctest::Approx(0.070710678).epsilon(1e-6));
}

TEST_CASE("minimal config fills defaults and keeps K") {
    const auto config = parse_config(json::parse(R"({"K": 2})"));
    CHECK(config.train.cluster_count == 2);
    CHECK(config.data.kind == DataSpec::Kind::kTwoMoons);
    CHECK(config.train.epochs == 30);
    CHECK(config.train.anneal_epochs >= config.train.epochs);
    CHECK(config.splits == 1);
}

TEST_CASE("missing K is a config error that names the key") {
    CHECK_THROWS_WITH_AS(parse_config(json::parse(R"({"epochs": 5})")), doctest::Contains("K"),
                         ConfigError);
}

TEST_CASE("unknown keys are rejected by name") {
    CHECK_THROWS_WITH_AS(parse_config(json::parse(R"({"K": 2, "epohcs": 5})")),
                         doctest::Contains("epohcs"), ConfigError);
    CHECK_THROWS_WITH_AS(parse_config(json::parse(R"({"K": 2, "data": {"kind": "blobs", "sep": 1}})")),
                         doctest::Contains("sep"), ConfigError);
}

TEST_CASE("type errors name the key") {
    CHECK_THROWS_WITH_AS(parse_config(json::parse(R"({"K": "two"})")), doctest::Contains("K"),
                         ConfigError);
    CHECK_THROWS_WITH_AS(parse_config(json::parse(R"({"K": 2, "alpha": "big"})")),
                         doctest::Contains("alpha"), ConfigError);
}

TEST_CASE("config round trip preserves the fingerprint") {
    const auto config = parse_config(tiny_config_json());
    const auto again = parse_config(config_to_json(config));
    CHECK(config_fingerprint(config) == config_fingerprint(again));
}

TEST_CASE("data specs parse from CLI shorthand") {
    const auto csv = data_spec_from_cli("pool.csv");
    CHECK(csv.kind == DataSpec::Kind::kCsv);
    CHECK(csv.path == "pool.csv");

    const auto idx = data_spec_from_cli("imgs.idx:labels.idx");
    CHECK(idx.kind == DataSpec::Kind::kIdx);
    CHECK(idx.images_path == "imgs.idx");
    CHECK(idx.labels_path == "labels.idx");

    const auto inline_json = data_spec_from_cli(R"({"kind":"blobs","n":30,"classes":3})");
    CHECK(inline_json.kind == DataSpec::Kind::kBlobs);
    CHECK(inline_json.n == 30);

    CHECK_THROWS_AS(data_spec_from_cli("pool.tsv"), ConfigError);
}

TEST_CASE("run_experiment reports one outcome per split") {
    const auto config = parse_config(tiny_config_json());
    const auto pool = load_data(config.data);
    int epochs_seen = 0;
    const auto summary = run_experiment(config, pool, nullptr,
                                        [&](int, const trainer::EpochReport&,
                                            const trainer::EpochTrace*) { ++epochs_seen; });
    CHECK(summary.splits.size() == 2);
    CHECK(epochs_seen == 2 * config.train.epochs);
    CHECK(summary.unlabeled.mean >= 0.0);
    CHECK(summary.splits[0].split_seed != summary.splits[1].split_seed);
}

TEST_CASE("a single split reports zero stddev") {
    auto config = parse_config(tiny_config_json());
    config.splits = 1;
    const auto pool = load_data(config.data);
    const auto summary = run_experiment(config, pool, nullptr);
    CHECK(summary.unlabeled.stddev == 0.0);
}

TEST_CASE("run_experiment is reproducible") {
    const auto config = parse_config(tiny_config_json());
    const auto pool = load_data(config.data);
    const auto a = run_experiment(config, pool, nullptr);
    const auto b = run_experiment(config, pool, nullptr);
    REQUIRE(a.splits.size() == b.splits.size());
    for (std::size_t i = 0; i < a.splits.size(); ++i) {
        CHECK(a.splits[i].final_error == b.splits[i].final_error);
        CHECK(a.splits[i].init_error == b.splits[i].init_error);
    }
}

TEST_CASE("training command writes the full artifact set") {
    const auto config = parse_config(tiny_config_json());
    const auto dir = temp_dir("artifacts");
    const std::string summary_text = run_training_command(config, dir.string());

    const json summary = json::parse(summary_text);
    CHECK(summary.at("mean_error").is_number());
    CHECK(summary.at("splits").size() == 2);
    CHECK(summary.at("splits")[0].contains("init_error"));

    CHECK(std::filesystem::exists(dir / "manifest.json"));
    CHECK(std::filesystem::exists(dir / "summary.json"));
    CHECK(std::filesystem::exists(dir / "epochs.jsonl"));
    CHECK(std::filesystem::exists(dir / "checkpoint_split0.json"));
    CHECK(std::filesystem::exists(dir / "checkpoint_split1.json"));
    CHECK(read_file(dir / "summary.json") == summary_text);

    const json manifest = json::parse(read_file(dir / "manifest.json"));
    CHECK(manifest.at("config").at("K") == 3);
    CHECK(manifest.at("dataset").at("n") == 48);

    // jsonl line count = splits * epochs
    std::istringstream lines(read_file(dir / "epochs.jsonl"));
    int count = 0;
    std::string line;
    while (std::getline(lines, line)) {
        if (!line.empty()) {
            CHECK(json::accept(line));
            ++count;
        }
    }
    CHECK(count == 4);
    std::filesystem::remove_all(dir);
}

TEST_CASE("a rerun of the training command is byte-identical") {
    const auto config = parse_config(tiny_config_json());
    const std::string a = run_training_command(config, "");
    const std::string b = run_training_command(config, "");
    CHECK(a == b);
}

TEST_CASE("the manifest alone reproduces the run") {
    const auto config = parse_config(tiny_config_json());
    const auto dir = temp_dir("manifest_rerun");
    const std::string first = run_training_command(config, dir.string());
    const json manifest = json::parse(read_file(dir / "manifest.json"));
    const auto replayed = parse_config(manifest.at("config"));
    const std::string second = run_training_command(replayed, "");
    CHECK(first == second);
    std::filesystem::remove_all(dir);
}

TEST_CASE("diagnostics dump captures pseudo-labels and weights") {
    auto config = parse_config(tiny_config_json());
    config.dump_diagnostics = true;
    config.splits = 1;
    const auto dir = temp_dir("diag");
    run_training_command(config, dir.string());
    std::istringstream lines(read_file(dir / "diagnostics.jsonl"));
    std::string line;
    REQUIRE(std::getline(lines, line));
    const json diag = json::parse(line);
    CHECK(diag.at("pseudo_labels").size() == 48);
    CHECK(diag.at("entropy_weights").size() == 48);
    CHECK(diag.at("class_weights").size() == 2);
    CHECK(diag.at("kmeans").at("assignments").size() == 48);
    std::filesystem::remove_all(dir);
}

TEST_CASE("sweep emits one row per grid point plus the baseline") {
    auto config = parse_config(tiny_config_json());
    config.sweep.cluster_counts = {2, 4};
    config.sweep.include_purely_graphical = true;
    config.train.epochs = 1;
    config.splits = 1;

    const auto rows = run_sweep(config, 1);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].mode == "purely_graphical");
    CHECK(rows[1].mode == "cyclecluster");
    CHECK(rows[1].cluster_count == 2);
    CHECK(rows[2].cluster_count == 4);

    const std::string csv = sweep_to_csv(rows);
    CHECK(csv.rfind("mode,K,n_labeled,mean_error,stddev_error\n", 0) == 0);
    std::istringstream lines(csv);
    int count = 0;
    std::string line;
    while (std::getline(lines, line)) {
        if (!line.empty()) ++count;
    }
    CHECK(count == 4);  // header + 3 rows

    const json table = json::parse(sweep_to_json(rows));
    CHECK(table.at("rows").size() == 3);
    CHECK(table.at("rows")[0].at("K").is_null());
}

TEST_CASE("sweep results are identical across job counts") {
    auto config = parse_config(tiny_config_json());
    config.sweep.cluster_counts = {2, 3};
    config.train.epochs = 1;
    config.splits = 1;
    const auto serial = run_sweep(config, 1);
    const auto parallel = run_sweep(config, 4);
    REQUIRE(serial.size() == parallel.size());
    for (std::size_t i = 0; i < serial.size(); ++i) {
        CHECK(serial[i].mean_error == parallel[i].mean_error);
        CHECK(serial[i].mode == parallel[i].mode);
    }
}
