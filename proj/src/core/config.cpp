#include "core/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace cyclecluster {

using nlohmann::json;

namespace {

[[noreturn]] void bad_key(const std::string& key, const std::string& what) {
    throw ConfigError("config key `" + key + "` " + what);
}

void require_known_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (!allowed.count(key)) {
            throw ConfigError("unknown config key `" + (where.empty() ? key : where + "." + key) + "`");
        }
    }
}

int get_int(const json& j, const std::string& key, int fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number_integer()) bad_key(key, "must be an integer");
    return j[key].get<int>();
}

double get_double(const json& j, const std::string& key, double fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number()) bad_key(key, "must be a number");
    return j[key].get<double>();
}

bool get_bool(const json& j, const std::string& key, bool fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_boolean()) bad_key(key, "must be a boolean");
    return j[key].get<bool>();
}

std::uint64_t get_seed(const json& j, const std::string& key, std::uint64_t fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number_integer()) bad_key(key, "must be an integer seed");
    return j[key].get<std::uint64_t>();
}

std::string get_string(const json& j, const std::string& key, const std::string& fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_string()) bad_key(key, "must be a string");
    return j[key].get<std::string>();
}

std::vector<int> get_int_list(const json& j, const std::string& key, std::vector<int> fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_array()) bad_key(key, "must be an array of integers");
    std::vector<int> out;
    for (const auto& v : j[key]) {
        if (!v.is_number_integer()) bad_key(key, "must be an array of integers");
        out.push_back(v.get<int>());
    }
    return out;
}

}  // namespace

dataset::Pool load_data(const DataSpec& spec) {
    switch (spec.kind) {
        case DataSpec::Kind::kTwoMoons:
            return dataset::generate_two_moons(spec.n, spec.noise, spec.seed);
        case DataSpec::Kind::kBlobs:
            return dataset::generate_blobs(spec.n, spec.classes, spec.dim, spec.separation, spec.seed);
        case DataSpec::Kind::kCsv:
            return dataset::load_csv(spec.path);
        case DataSpec::Kind::kIdx:
            return dataset::load_idx_images(spec.images_path, spec.labels_path);
    }
    throw std::logic_error("unreachable data kind");
}

json data_spec_to_json(const DataSpec& spec) {
    json j;
    switch (spec.kind) {
        case DataSpec::Kind::kTwoMoons:
            j["kind"] = "two_moons";
            j["n"] = spec.n;
            j["noise"] = spec.noise;
            j["seed"] = spec.seed;
            break;
        case DataSpec::Kind::kBlobs:
            j["kind"] = "blobs";
            j["n"] = spec.n;
            j["classes"] = spec.classes;
            j["dim"] = spec.dim;
            j["separation"] = spec.separation;
            j["seed"] = spec.seed;
            break;
        case DataSpec::Kind::kCsv:
            j["kind"] = "csv";
            j["path"] = spec.path;
            break;
        case DataSpec::Kind::kIdx:
            j["kind"] = "idx";
            j["images"] = spec.images_path;
            j["labels"] = spec.labels_path;
            break;
    }
    return j;
}

DataSpec data_spec_from_json(const json& j, const std::string& where) {
    if (!j.is_object()) throw ConfigError("config key `" + where + "` must be an object");
    const std::string kind = get_string(j, "kind", "");
    DataSpec spec;
    if (kind == "two_moons") {
        require_known_keys(j, {"kind", "n", "noise", "seed"}, where);
        spec.kind = DataSpec::Kind::kTwoMoons;
        spec.n = get_int(j, "n", spec.n);
        spec.noise = get_double(j, "noise", spec.noise);
        spec.seed = get_seed(j, "seed", spec.seed);
    } else if (kind == "blobs") {
        require_known_keys(j, {"kind", "n", "classes", "dim", "separation", "seed"}, where);
        spec.kind = DataSpec::Kind::kBlobs;
        spec.n = get_int(j, "n", spec.n);
        spec.classes = get_int(j, "classes", spec.classes);
        spec.dim = get_int(j, "dim", spec.dim);
        spec.separation = get_double(j, "separation", spec.separation);
        spec.seed = get_seed(j, "seed", spec.seed);
    } else if (kind == "csv") {
        require_known_keys(j, {"kind", "path"}, where);
        spec.kind = DataSpec::Kind::kCsv;
        spec.path = get_string(j, "path", "");
        if (spec.path.empty()) bad_key(where + ".path", "is required for kind csv");
    } else if (kind == "idx") {
        require_known_keys(j, {"kind", "images", "labels"}, where);
        spec.kind = DataSpec::Kind::kIdx;
        spec.images_path = get_string(j, "images", "");
        spec.labels_path = get_string(j, "labels", "");
        if (spec.images_path.empty() || spec.labels_path.empty()) {
            bad_key(where + ".images/labels", "are required for kind idx");
        }
    } else {
        bad_key(where + ".kind", "must be one of two_moons, blobs, csv, idx");
    }
    return spec;
}

DataSpec data_spec_from_cli(const std::string& arg) {
    if (arg.empty()) throw ConfigError("empty --data argument");
    if (arg.front() == '{') {
        json j;
        try {
            j = json::parse(arg);
        } catch (const json::exception& e) {
            throw ConfigError(std::string("--data JSON is invalid: ") + e.what());
        }
        return data_spec_from_json(j, "data");
    }
    // images.idx:labels.idx pair
    const auto colon = arg.find(':');
    if (colon != std::string::npos && arg.find(".idx") != std::string::npos) {
        DataSpec spec;
        spec.kind = DataSpec::Kind::kIdx;
        spec.images_path = arg.substr(0, colon);
        spec.labels_path = arg.substr(colon + 1);
        return spec;
    }
    if (arg.size() >= 4 && arg.substr(arg.size() - 4) == ".csv") {
        DataSpec spec;
        spec.kind = DataSpec::Kind::kCsv;
        spec.path = arg;
        return spec;
    }
    throw ConfigError("--data must be a .csv path, images.idx:labels.idx pair, or a JSON object");
}

void ExperimentConfig::validate() const {
    if (n_labeled < 2) throw ConfigError("n_labeled must be >= 2");
    if (splits < 1) throw ConfigError("splits must be >= 1");
    train.validate();
    for (int k : sweep.cluster_counts) {
        if (k < 1) throw ConfigError("sweep.K entries must be >= 1");
    }
    for (int nl : sweep.labeled_counts) {
        if (nl < 2) throw ConfigError("sweep.n_labeled entries must be >= 2");
    }
}

ExperimentConfig parse_config(const json& j) {
    if (!j.is_object()) throw ConfigError("config root must be a JSON object");
    static const std::set<std::string> kTopKeys = {
        "data",       "holdout",       "n_labeled",      "splits",        "K",
        "epochs",     "init_epochs",   "batch",          "batch_labeled", "batch_unlabeled",
        "lr0",        "anneal_epochs", "momentum",       "weight_decay",  "k_nn",
        "gamma",      "alpha",         "kmeans_iters",   "cg_tol",        "cg_max_iters",
        "hidden",     "embed_dim",     "leaky_slope",    "seeds",         "purely_graphical",
        "warm_start_kmeans", "dump_diagnostics", "sweep"};
    require_known_keys(j, kTopKeys, "");

    ExperimentConfig config;
    if (j.contains("data")) config.data = data_spec_from_json(j["data"], "data");
    if (j.contains("holdout")) config.holdout = data_spec_from_json(j["holdout"], "holdout");
    config.n_labeled = get_int(j, "n_labeled", config.n_labeled);
    config.splits = get_int(j, "splits", config.splits);

    auto& t = config.train;
    if (!j.contains("K")) throw ConfigError("missing required config key `K`");
    t.cluster_count = get_int(j, "K", 0);
    t.epochs = get_int(j, "epochs", t.epochs);
    t.init_epochs = get_int(j, "init_epochs", t.init_epochs);
    t.batch = get_int(j, "batch", t.batch);
    t.batch_labeled = get_int(j, "batch_labeled", t.batch_labeled);
    t.batch_unlabeled = get_int(j, "batch_unlabeled", t.batch_unlabeled);
    if (j.contains("batch") && !j.contains("batch_labeled") && !j.contains("batch_unlabeled")) {
        t.batch_labeled = t.batch / 2;
        t.batch_unlabeled = t.batch - t.batch_labeled;
    }
    t.base_lr = get_double(j, "lr0", t.base_lr);
    // Default anneal horizon extends past the training length, as in a
    // 180-epoch run annealed over 210.
    t.anneal_epochs = get_int(j, "anneal_epochs", t.epochs + (t.epochs + 5) / 6);
    t.momentum = get_double(j, "momentum", t.momentum);
    t.weight_decay = get_double(j, "weight_decay", t.weight_decay);
    t.knn = get_int(j, "k_nn", t.knn);
    t.gamma = get_double(j, "gamma", t.gamma);
    t.alpha = get_double(j, "alpha", t.alpha);
    t.kmeans_iters = get_int(j, "kmeans_iters", t.kmeans_iters);
    t.cg_tol = get_double(j, "cg_tol", t.cg_tol);
    t.cg_max_iters = get_int(j, "cg_max_iters", t.cg_max_iters);
    t.hidden = get_int_list(j, "hidden", t.hidden);
    t.embed_dim = get_int(j, "embed_dim", t.embed_dim);
    t.leaky_slope = get_double(j, "leaky_slope", t.leaky_slope);
    t.purely_graphical = get_bool(j, "purely_graphical", false);
    t.warm_start_kmeans = get_bool(j, "warm_start_kmeans", false);

    if (j.contains("seeds")) {
        const auto& s = j["seeds"];
        if (!s.is_object()) bad_key("seeds", "must be an object");
        require_known_keys(s, {"model", "split", "shuffle", "kmeans"}, "seeds");
        t.seeds.model = get_seed(s, "model", t.seeds.model);
        t.seeds.split = get_seed(s, "split", t.seeds.split);
        t.seeds.shuffle = get_seed(s, "shuffle", t.seeds.shuffle);
        t.seeds.kmeans = get_seed(s, "kmeans", t.seeds.kmeans);
    }

    config.dump_diagnostics = get_bool(j, "dump_diagnostics", false);

    if (j.contains("sweep")) {
        const auto& s = j["sweep"];
        if (!s.is_object()) bad_key("sweep", "must be an object");
        require_known_keys(s, {"K", "n_labeled", "include_purely_graphical"}, "sweep");
        config.sweep.cluster_counts = get_int_list(s, "K", {});
        config.sweep.labeled_counts = get_int_list(s, "n_labeled", {});
        config.sweep.include_purely_graphical = get_bool(s, "include_purely_graphical", false);
    }

    config.validate();
    return config;
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config file '" + path + "': cannot open");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config file '" + path + "': invalid JSON: " + e.what());
    }
    return parse_config(j);
}

json config_to_json(const ExperimentConfig& config) {
    const auto& t = config.train;
    json j;
    j["data"] = data_spec_to_json(config.data);
    if (config.holdout) j["holdout"] = data_spec_to_json(*config.holdout);
    j["n_labeled"] = config.n_labeled;
    j["splits"] = config.splits;
    j["K"] = t.cluster_count;
    j["epochs"] = t.epochs;
    j["init_epochs"] = t.init_epochs;
    j["batch"] = t.batch;
    j["batch_labeled"] = t.batch_labeled;
    j["batch_unlabeled"] = t.batch_unlabeled;
    j["lr0"] = t.base_lr;
    j["anneal_epochs"] = t.anneal_epochs;
    j["momentum"] = t.momentum;
    j["weight_decay"] = t.weight_decay;
    j["k_nn"] = t.knn;
    j["gamma"] = t.gamma;
    j["alpha"] = t.alpha;
    j["kmeans_iters"] = t.kmeans_iters;
    j["cg_tol"] = t.cg_tol;
    j["cg_max_iters"] = t.cg_max_iters;
    j["hidden"] = t.hidden;
    j["embed_dim"] = t.embed_dim;
    j["leaky_slope"] = t.leaky_slope;
    j["seeds"] = {{"model", t.seeds.model},
                  {"split", t.seeds.split},
                  {"shuffle", t.seeds.shuffle},
                  {"kmeans", t.seeds.kmeans}};
    j["purely_graphical"] = t.purely_graphical;
    j["warm_start_kmeans"] = t.warm_start_kmeans;
    j["dump_diagnostics"] = config.dump_diagnostics;
    if (!config.sweep.cluster_counts.empty() || !config.sweep.labeled_counts.empty() ||
        config.sweep.include_purely_graphical) {
        json s;
        if (!config.sweep.cluster_counts.empty()) s["K"] = config.sweep.cluster_counts;
        if (!config.sweep.labeled_counts.empty()) s["n_labeled"] = config.sweep.labeled_counts;
        s["include_purely_graphical"] = config.sweep.include_purely_graphical;
        j["sweep"] = s;
    }
    return j;
}

std::uint64_t config_fingerprint(const ExperimentConfig& config) {
    const std::string dump = config_to_json(config).dump();
    return fnv1a(dump.data(), dump.size());
}

}  // namespace cyclecluster
