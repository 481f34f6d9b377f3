// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Oracles here are independent of the library paths they check
// (dense solves via full-pivot LU, finite differences, closed-form weights,
// brute-force partitions).

#include "core/dataset.hpp"
#include "core/experiment.hpp"
#include "core/kmeans.hpp"
#include "core/model.hpp"
#include "core/propagation.hpp"
#include "core/trainer.hpp"

#include "cyclecluster.h"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

using namespace cyclecluster;
namespace lp = cyclecluster::propagation;

namespace {

struct Outcome {
    bool passed = false;
    std::string detail;
};

int g_failures = 0;

void report(int id, const std::string& name, const Outcome& outcome) {
    std::printf("[%s] criterion %d: %s%s%s\n", outcome.passed ? "PASS" : "FAIL", id, name.c_str(),
                outcome.detail.empty() ? "" : " — ", outcome.detail.c_str());
    std::fflush(stdout);
    if (!outcome.passed) ++g_failures;
}

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Matrix random_unit_rows(int n, int d, Rng& rng) {
    Matrix v(n, d);
    for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = rng.normal();
    for (Eigen::Index i = 0; i < v.rows(); ++i) v.row(i).normalize();
    return v;
}

// --- criterion 1: label propagation vs dense oracle -----------------------

Outcome lp_oracle_equivalence() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(20250101);
    double worst_gap = 0.0;
    double worst_grad = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 8 + static_cast<int>(rng.below(43));       // <= 50
        const int c = 2 + static_cast<int>(rng.below(4));        // <= 5
        const int knn = 2 + static_cast<int>(rng.below(4));
        const double alpha = rng.uniform(0.5, 0.99);
        const Matrix v = random_unit_rows(n, 4, rng);
        const auto graph = lp::build_graph(v, std::min(knn, n - 1), 3.0);

        std::vector<std::pair<int, int>> labeled;
        const int n_l = c + static_cast<int>(rng.below(3));
        for (int i = 0; i < n_l; ++i) {
            labeled.emplace_back(static_cast<int>(rng.below(n)), i % c);
        }
        const Matrix y = lp::label_seed(n, c, labeled);

        // Independent oracle: explicit dense inverse of (I - alpha*S).
        const Matrix a = Matrix::Identity(n, n) - alpha * Matrix(graph.normalized);
        const Matrix f_star = a.fullPivLu().solve((1.0 - alpha) * y);

        const double tol = 1e-10;
        for (const auto solver : {lp::Solver::kConjugateGradient, lp::Solver::kDense}) {
            const auto out = lp::propagate(graph, y, alpha, tol, 5000, solver);
            worst_gap = std::max(worst_gap, (out.f - f_star).cwiseAbs().maxCoeff());

            // Eq-(2) stationarity: grad Q = 2(I-S)F + mu(F-Y) with the
            // fidelity weight mu = 2(1-alpha)/alpha implied by the solve.
            const double mu = 2.0 * (1.0 - alpha) / alpha;
            const Matrix s = Matrix(graph.normalized);
            const Matrix grad = 2.0 * (out.f - s * out.f) + mu * (out.f - y);
            worst_grad = std::max(worst_grad, grad.cwiseAbs().maxCoeff());
        }
    }
    const double elapsed = seconds_since(t0);
    Outcome out;
    out.passed = worst_gap <= 1e-8 && worst_grad <= 1e-8 && elapsed < 5.0;
    std::ostringstream detail;
    detail << "max |F - F*| = " << worst_gap << ", max |grad Q| = " << worst_grad << ", "
           << elapsed << " s";
    out.detail = detail.str();
    return out;
}

// --- criterion 2: weight formulas vs hand arithmetic ----------------------

Outcome weight_formulas() {
    double worst = 0.0;
    int cases = 0;

    // Entropy weights on crafted rows with closed-form entropies.
    const double probs[] = {0.05, 0.1, 0.2, 0.25, 0.3, 0.4, 0.45, 0.15, 0.35, 0.12};
    for (int i = 0; i < 10; ++i) {
        const int c = 2 + (i % 4);  // 2..5 classes
        const double a = probs[i];
        Matrix f = Matrix::Zero(4, c);
        f(0, i % c) = 1.0;                      // one-hot: omega = 1
        f.row(1).setConstant(1.0 / c);          // uniform: omega = 0
        f(2, 0) = a;                            // two-mass row
        f(2, (i % (c - 1)) + 1) = 1.0 - a;
        f.row(3) = 7.25 * f.row(2);             // scale invariance

        const Vector omega = lp::entropy_weights(f);
        const double h2 = -a * std::log(a) - (1.0 - a) * std::log(1.0 - a);
        const double expect2 = 1.0 - h2 / std::log(static_cast<double>(c));
        worst = std::max(worst, std::abs(omega[0] - 1.0));
        worst = std::max(worst, std::abs(omega[1] - 0.0));
        worst = std::max(worst, std::abs(omega[2] - expect2));
        worst = std::max(worst, std::abs(omega[3] - expect2));
        ++cases;
    }

    // Class weights on crafted multisets.
    Rng rng(77);
    for (int i = 0; i < 10; ++i) {
        const int c = 2 + (i % 3);
        std::vector<int> labeled, pseudo;
        std::vector<int> counts(static_cast<std::size_t>(c), 0);
        const int nl = 1 + static_cast<int>(rng.below(6));
        const int nu = static_cast<int>(rng.below(8));
        for (int k = 0; k < nl; ++k) {
            const int cls = static_cast<int>(rng.below(static_cast<std::size_t>(c)));
            labeled.push_back(cls);
            counts[static_cast<std::size_t>(cls)] += 1;
        }
        for (int k = 0; k < nu; ++k) {
            const int cls = static_cast<int>(rng.below(static_cast<std::size_t>(c)));
            pseudo.push_back(cls);
            counts[static_cast<std::size_t>(cls)] += 1;
        }
        const Vector zeta = lp::class_weights(labeled, pseudo, c);
        for (int j = 0; j < c; ++j) {
            const double expect = counts[static_cast<std::size_t>(j)] > 0
                                      ? 1.0 / counts[static_cast<std::size_t>(j)]
                                      : 1.0;
            worst = std::max(worst, std::abs(zeta[j] - expect));
        }
        ++cases;
    }

    Outcome out;
    out.passed = worst <= 1e-12 && cases == 20;
    std::ostringstream detail;
    detail << cases << " cases, max deviation " << worst;
    out.detail = detail.str();
    return out;
}

// --- criterion 3: gradient correctness -------------------------------------

Outcome gradient_correctness() {
    const auto t0 = std::chrono::steady_clock::now();
    model::ModelParams params = model::init_params(6, {8}, 4, 5, 0.01, 424242);
    Rng rng(424243);
    Matrix batch(10, 6);
    for (Eigen::Index i = 0; i < batch.size(); ++i) batch.data()[i] = rng.normal();
    std::vector<int> targets;
    for (int i = 0; i < 10; ++i) targets.push_back(static_cast<int>(rng.below(5)));
    Vector weights(10);
    for (int i = 0; i < 10; ++i) weights[i] = rng.uniform(0.2, 1.5);

    model::ForwardTrace trace;
    const Matrix scores = model::forward(params, batch, 5, &trace);
    const auto loss = model::cross_entropy_loss(scores, targets, weights);
    const auto grads = model::backward(params, trace, loss.grad_scores);

    std::vector<double*> cells;
    std::vector<double> analytic;
    auto collect = [&cells](model::Layer& layer) {
        for (Eigen::Index i = 0; i < layer.w.size(); ++i) cells.push_back(layer.w.data() + i);
        for (Eigen::Index i = 0; i < layer.b.size(); ++i) cells.push_back(layer.b.data() + i);
    };
    auto flatten = [&analytic](const model::Layer& layer) {
        analytic.insert(analytic.end(), layer.w.data(), layer.w.data() + layer.w.size());
        analytic.insert(analytic.end(), layer.b.data(), layer.b.data() + layer.b.size());
    };
    for (auto& l : params.extractor) collect(l);
    collect(params.head);
    for (const auto& l : grads.extractor) flatten(l);
    flatten(grads.head);

    auto loss_at = [&]() {
        return model::cross_entropy_loss(model::forward(params, batch, 5), targets, weights).loss;
    };
    const double h = 1e-5;
    double worst = 0.0;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const double saved = *cells[i];
        *cells[i] = saved + h;
        const double up = loss_at();
        *cells[i] = saved - h;
        const double down = loss_at();
        *cells[i] = saved;
        const double fd = (up - down) / (2.0 * h);
        const double rel =
            std::abs(analytic[i] - fd) / std::max({std::abs(analytic[i]), std::abs(fd), 1e-4});
        worst = std::max(worst, rel);
    }
    const double elapsed = seconds_since(t0);
    Outcome out;
    out.passed = worst <= 1e-4 && elapsed < 10.0;
    std::ostringstream detail;
    detail << cells.size() << " parameters, worst relative gap " << worst << ", " << elapsed
           << " s";
    out.detail = detail.str();
    return out;
}

// --- criterion 4: k-means soundness ----------------------------------------

Outcome kmeans_soundness() {
    const auto pool = dataset::generate_blobs(45, 3, 2, 12.0, 31415);
    std::vector<int> truth(pool.truth.data(), pool.truth.data() + pool.truth.size());

    int recovered = 0;
    bool monotone = true;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto result = kmeans::lloyd(pool.features, 3, 100, seed);
        for (std::size_t t = 1; t < result.inertia_history.size(); ++t) {
            if (result.inertia_history[t] > result.inertia_history[t - 1] + 1e-12) monotone = false;
        }
        std::map<int, int> fwd, bwd;
        bool same = true;
        for (std::size_t i = 0; i < truth.size() && same; ++i) {
            const int a = result.assignments[i];
            const int b = truth[i];
            if (fwd.count(a) && fwd[a] != b) same = false;
            if (bwd.count(b) && bwd[b] != a) same = false;
            fwd[a] = b;
            bwd[b] = a;
        }
        if (same) ++recovered;
    }
    Outcome out;
    out.passed = monotone && recovered >= 95;
    std::ostringstream detail;
    detail << "recovered " << recovered << "/100 seeds, inertia "
           << (monotone ? "monotone" : "NOT monotone");
    out.detail = detail.str();
    return out;
}

// --- criteria 5 and 6: desk-scale method behaviour -------------------------

ExperimentConfig moons_config() {
    ExperimentConfig config;
    config.data.kind = DataSpec::Kind::kTwoMoons;
    config.data.n = 1000;
    config.data.noise = 0.1;
    config.data.seed = 7;
    config.n_labeled = 6;
    config.splits = 5;
    auto& t = config.train;
    t.cluster_count = 4;
    t.epochs = 30;
    t.init_epochs = 10;
    t.batch = 50;
    t.batch_labeled = 10;
    t.batch_unlabeled = 40;
    t.base_lr = 0.05;
    t.anneal_epochs = 35;
    t.knn = 10;
    t.hidden = {64};
    t.embed_dim = 16;
    return config;
}

Outcome method_over_baseline() {
    const auto t0 = std::chrono::steady_clock::now();
    ExperimentConfig config = moons_config();
    const auto pool = load_data(config.data);

    const auto full = run_experiment(config, pool, nullptr);
    ExperimentConfig graphical = config;
    graphical.train.purely_graphical = true;
    const auto baseline = run_experiment(graphical, pool, nullptr);

    const double elapsed = seconds_since(t0);
    Outcome out;
    out.passed = full.unlabeled.mean <= 0.05 && full.unlabeled.mean < full.init.mean &&
                 full.unlabeled.mean <= baseline.unlabeled.mean && elapsed < 120.0;
    std::ostringstream detail;
    detail << "full " << full.unlabeled.mean << " (init-only " << full.init.mean
           << ", purely graphical " << baseline.unlabeled.mean << "), " << elapsed << " s";
    out.detail = detail.str();
    return out;
}

Outcome over_clustering_robustness() {
    const auto t0 = std::chrono::steady_clock::now();
    ExperimentConfig config;
    config.data.kind = DataSpec::Kind::kBlobs;
    config.data.n = 600;
    config.data.classes = 3;
    config.data.dim = 2;
    config.data.separation = 3.0;
    config.data.seed = 12;
    config.n_labeled = 9;
    config.splits = 3;
    auto& t = config.train;
    t.cluster_count = 3;
    t.epochs = 25;
    t.init_epochs = 10;
    t.batch = 50;
    t.batch_labeled = 10;
    t.batch_unlabeled = 40;
    t.base_lr = 0.05;
    t.anneal_epochs = 30;
    t.knn = 10;
    t.hidden = {64};
    t.embed_dim = 16;
    config.sweep.cluster_counts = {3, 10, 30};
    config.sweep.include_purely_graphical = true;

    const auto rows = run_sweep(config, 1);
    double graphical_error = -1.0;
    double lo = 1.0, hi = 0.0;
    bool beats = true;
    for (const auto& row : rows) {
        if (row.mode == "purely_graphical") {
            graphical_error = row.mean_error;
        } else {
            lo = std::min(lo, row.mean_error);
            hi = std::max(hi, row.mean_error);
        }
    }
    for (const auto& row : rows) {
        if (row.mode != "purely_graphical" && row.mean_error >= graphical_error) beats = false;
    }
    const double elapsed = seconds_since(t0);
    Outcome out;
    out.passed = (hi - lo) <= 0.03 && beats && elapsed < 300.0;
    std::ostringstream detail;
    detail << "K-spread " << (hi - lo) << " (worst " << hi << ", best " << lo
           << "), purely graphical " << graphical_error << ", " << elapsed << " s";
    out.detail = detail.str();
    return out;
}

// --- criterion 7: manifest determinism through the C API -------------------

Outcome cmd_train_determinism() {
    namespace fs = std::filesystem;
    const std::string config_text = R"({
        "data": {"kind": "two_moons", "n": 120, "noise": 0.1, "seed": 7},
        "n_labeled": 6,
        "splits": 2,
        "K": 3,
        "epochs": 3,
        "init_epochs": 5,
        "batch": 20,
        "batch_labeled": 10,
        "batch_unlabeled": 10,
        "anneal_epochs": 5,
        "k_nn": 6,
        "hidden": [16],
        "embed_dim": 8
    })";

    cc_config* config = nullptr;
    Outcome out;
    if (cc_config_parse(config_text.c_str(), &config) != CC_OK) {
        out.detail = std::string("config parse failed: ") + cc_last_error();
        return out;
    }

    const auto dir_a = fs::temp_directory_path() / "cyclecluster_acc_det_a";
    const auto dir_b = fs::temp_directory_path() / "cyclecluster_acc_det_b";
    fs::remove_all(dir_a);
    fs::remove_all(dir_b);
    char* summary_a = nullptr;
    char* summary_b = nullptr;
    const bool ok_a = cc_train(config, dir_a.string().c_str(), &summary_a) == CC_OK;
    const bool ok_b = cc_train(config, dir_b.string().c_str(), &summary_b) == CC_OK;

    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream s;
        s << in.rdbuf();
        return s.str();
    };
    bool same = false;
    if (ok_a && ok_b) {
        const std::string file_a = slurp(dir_a / "summary.json");
        const std::string file_b = slurp(dir_b / "summary.json");
        same = !file_a.empty() && file_a == file_b && std::string(summary_a) == std::string(summary_b) &&
               file_a == std::string(summary_a);
    }
    cc_string_free(summary_a);
    cc_string_free(summary_b);
    cc_config_free(config);
    fs::remove_all(dir_a);
    fs::remove_all(dir_b);

    out.passed = same;
    out.detail = same ? "summary JSON byte-identical across runs" : "summaries differ";
    return out;
}

// --- criterion 8: pass-structure audit --------------------------------------

Outcome pass_structure_audit() {
    struct Case {
        int n, n_labeled, batch, batch_labeled, batch_unlabeled;
    };
    const Case cases[] = {{40, 4, 40, 20, 20}, {50, 5, 16, 8, 8}, {64, 6, 20, 5, 15}};
    bool all_ok = true;
    std::ostringstream detail;
    for (const auto& c : cases) {
        dataset::Pool pool = dataset::generate_blobs(c.n, 2, 2, 6.0, 77);
        pool.split = dataset::make_split(pool, c.n_labeled, 3);
        trainer::TrainConfig cfg;
        cfg.cluster_count = 3;
        cfg.epochs = 1;
        cfg.init_epochs = 2;
        cfg.batch = c.batch;
        cfg.batch_labeled = c.batch_labeled;
        cfg.batch_unlabeled = c.batch_unlabeled;
        cfg.anneal_epochs = 2;
        cfg.knn = 5;
        cfg.hidden = {16};
        cfg.embed_dim = 8;

        trainer::Trainer t(pool, cfg);
        t.supervised_init();
        const auto report = t.run_epoch(0);
        const bool ok = report.kmeans_calls == 1 && report.propagate_calls == 1 &&
                        report.cluster_steps == c.n / c.batch &&
                        report.ssl_steps == (c.n - c.n_labeled) / c.batch_unlabeled;
        if (!ok) all_ok = false;
        detail << "(n=" << c.n << ": " << report.cluster_steps << " L_C, " << report.ssl_steps
               << " L_W) ";
    }
    Outcome out;
    out.passed = all_ok;
    out.detail = detail.str();
    return out;
}

}  // namespace

int main() {
    report(1, "label propagation matches the dense oracle", lp_oracle_equivalence());
    report(2, "entropy and class weights match hand arithmetic", weight_formulas());
    report(3, "analytic gradients match finite differences", gradient_correctness());
    report(4, "k-means is monotone and recovers separated blobs", kmeans_soundness());
    report(5, "cycle training beats both baselines on two moons", method_over_baseline());
    report(6, "error is robust to over-clustering and beats the graphical baseline",
           over_clustering_robustness());
    report(7, "identical manifests give identical summaries", cmd_train_determinism());
    report(8, "per-epoch pass structure matches the prescribed counts", pass_structure_audit());

    if (g_failures > 0) {
        std::printf("%d criterion(s) failed\n", g_failures);
        return 1;
    }
    std::printf("all acceptance criteria passed\n");
    return 0;
}
