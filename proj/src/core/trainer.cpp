#include "core/trainer.hpp"

#include <chrono>
#include <numeric>

namespace cyclecluster::trainer {

void TrainConfig::validate() const {
    auto fail = [](const std::string& msg) { throw ConfigError(msg); };
    if (epochs < 1) fail("epochs must be >= 1");
    if (init_epochs < 0) fail("init_epochs must be >= 0");
    if (batch < 1) fail("batch must be >= 1");
    if (batch_labeled < 1) fail("batch_labeled must be >= 1");
    if (batch_unlabeled < 1) fail("batch_unlabeled must be >= 1");
    if (batch != batch_labeled + batch_unlabeled) {
        fail("batch must equal batch_labeled + batch_unlabeled");
    }
    if (base_lr <= 0.0) fail("lr0 must be > 0");
    if (anneal_epochs < epochs) fail("anneal_epochs must be >= epochs");
    if (momentum < 0.0 || momentum >= 1.0) fail("momentum must be in [0, 1)");
    if (weight_decay < 0.0) fail("weight_decay must be >= 0");
    if (cluster_count < 1) fail("K must be >= 1");
    if (knn < 1) fail("k_nn must be >= 1");
    if (gamma <= 0.0) fail("gamma must be > 0");
    if (alpha <= 0.0 || alpha >= 1.0) fail("alpha must be in (0, 1)");
    if (kmeans_iters < 1) fail("kmeans_iters must be >= 1");
    if (cg_tol <= 0.0) fail("cg_tol must be > 0");
    if (cg_max_iters < 1) fail("cg_max_iters must be >= 1");
    if (embed_dim < 1) fail("embed_dim must be >= 1");
    for (int h : hidden) {
        if (h < 1) fail("hidden sizes must be >= 1");
    }
}

double evaluate(const model::ModelParams& params, const Matrix& features,
                const IndexVector& truth, int class_count) {
    if (features.rows() == 0) throw std::invalid_argument("evaluate: empty feature matrix");
    if (features.rows() != truth.size()) throw std::invalid_argument("evaluate: truth size mismatch");
    const Matrix scores = model::forward(params, features, class_count);
    int wrong = 0;
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
        int best = 0;
        for (Eigen::Index j = 1; j < scores.cols(); ++j) {
            if (scores(i, j) > scores(i, best)) best = static_cast<int>(j);
        }
        if (best != truth[i]) ++wrong;
    }
    return static_cast<double>(wrong) / static_cast<double>(scores.rows());
}

double evaluate_subset(const model::ModelParams& params, const dataset::Pool& pool,
                       const std::vector<int>& ids) {
    if (ids.empty()) throw std::invalid_argument("evaluate_subset: empty id list");
    Matrix features(static_cast<Eigen::Index>(ids.size()), pool.dim());
    IndexVector truth(static_cast<Eigen::Index>(ids.size()));
    for (std::size_t i = 0; i < ids.size(); ++i) {
        features.row(static_cast<Eigen::Index>(i)) = pool.features.row(ids[i]);
        truth[static_cast<Eigen::Index>(i)] = pool.truth[ids[i]];
    }
    return evaluate(params, features, truth, pool.class_count);
}

Vector ssl_batch_weights(const std::vector<double>& labeled_zeta,
                         const std::vector<double>& unlabeled_zeta_omega) {
    const auto bl = static_cast<Eigen::Index>(labeled_zeta.size());
    const auto bu = static_cast<Eigen::Index>(unlabeled_zeta_omega.size());
    if (bl < 1 || bu < 1) throw std::invalid_argument("ssl_batch_weights: both sub-batches must be nonempty");
    const double b = static_cast<double>(bl + bu);
    Vector w(bl + bu);
    for (Eigen::Index i = 0; i < bl; ++i) w[i] = labeled_zeta[i] * b / bl;
    for (Eigen::Index i = 0; i < bu; ++i) w[bl + i] = unlabeled_zeta_omega[i] * b / bu;
    return w;
}

Trainer::Trainer(const dataset::Pool& pool, TrainConfig config, const dataset::Pool* holdout)
    : pool_(pool), holdout_(holdout), cfg_(std::move(config)) {
    cfg_.validate();
    if (!pool_.split) throw std::invalid_argument("trainer: pool has no split");
    if (pool_.class_count < 2) throw std::invalid_argument("trainer: need at least two classes");
    if (holdout_ && holdout_->dim() != pool_.dim()) {
        throw DataError("trainer: holdout feature dimension " + std::to_string(holdout_->dim()) +
                        " does not match training dimension " + std::to_string(pool_.dim()));
    }

    std::vector<int> per_class(static_cast<std::size_t>(pool_.class_count), 0);
    for (int id : pool_.split->labeled_ids) per_class[static_cast<std::size_t>(pool_.truth[id])] += 1;
    for (int k = 0; k < pool_.class_count; ++k) {
        if (per_class[static_cast<std::size_t>(k)] == 0) {
            throw std::invalid_argument("trainer: class " + std::to_string(k) + " has no labeled sample");
        }
    }

    params_ = model::init_params(pool_.dim(), cfg_.hidden, cfg_.embed_dim,
                                 cfg_.head_width(pool_.class_count), cfg_.leaky_slope,
                                 cfg_.seeds.model);
    opt_ = model::make_optimizer(params_, cfg_.momentum, cfg_.weight_decay, cfg_.base_lr,
                                 cfg_.anneal_epochs);
}

void Trainer::fit_batch(const std::vector<int>& ids, const std::vector<int>& targets,
                        const Vector& weights, int head_width, double lr, double* loss_out) {
    Matrix batch(static_cast<Eigen::Index>(ids.size()), pool_.dim());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        batch.row(static_cast<Eigen::Index>(i)) = pool_.features.row(ids[i]);
    }
    model::ForwardTrace trace;
    const Matrix scores = model::forward(params_, batch, head_width, &trace);
    const auto loss = model::cross_entropy_loss(scores, targets, weights);
    const auto grads = model::backward(params_, trace, loss.grad_scores);
    model::sgd_step(params_, grads, opt_, lr);
    if (loss_out) *loss_out = loss.loss;
}

void Trainer::supervised_init() {
    const auto& labeled = pool_.split->labeled_ids;
    const int n_l = static_cast<int>(labeled.size());
    const int batch = std::min(cfg_.batch, n_l);
    const int steps = n_l / batch;

    for (int pass = 0; pass < cfg_.init_epochs; ++pass) {
        Rng rng(derive_seed(cfg_.seeds.shuffle, 0x696e6974, static_cast<std::uint64_t>(pass)));
        std::vector<int> order = labeled;
        rng.shuffle(order);
        for (int s = 0; s < steps; ++s) {
            std::vector<int> ids(order.begin() + s * batch, order.begin() + (s + 1) * batch);
            std::vector<int> targets(ids.size());
            for (std::size_t i = 0; i < ids.size(); ++i) targets[i] = pool_.truth[ids[i]];
            fit_batch(ids, targets, Vector::Ones(static_cast<Eigen::Index>(ids.size())),
                      pool_.class_count, cfg_.base_lr, nullptr);
        }
    }
}

EpochReport Trainer::run_epoch(int epoch, EpochTrace* trace) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto& split = *pool_.split;
    const int n = pool_.size();
    const int n_l = static_cast<int>(split.labeled_ids.size());
    const int c = pool_.class_count;
    const double lr = model::cosine_lr(epoch, cfg_.base_lr, cfg_.anneal_epochs);

    EpochReport report;
    report.epoch = epoch;

    // All pseudo-labels for this epoch come from the parameters as they stand
    // now; the two optimisation passes below do not regenerate them.
    const Matrix embeddings = model::embed(params_, pool_.features);

    std::vector<int> cluster_targets;
    if (!cfg_.purely_graphical) {
        kmeans::ClusterResult clusters =
            (cfg_.warm_start_kmeans && warm_centroids_)
                ? kmeans::lloyd_from(embeddings, *warm_centroids_, cfg_.kmeans_iters)
                : kmeans::lloyd(embeddings, cfg_.cluster_count, cfg_.kmeans_iters,
                                derive_seed(cfg_.seeds.kmeans, static_cast<std::uint64_t>(epoch)));
        report.kmeans_calls = 1;
        report.kmeans_inertia = clusters.inertia;
        warm_centroids_ = clusters.centroids;
        if (trace) {
            trace->cluster_assignments = clusters.assignments;
            trace->kmeans_inertia = clusters.inertia;
            trace->kmeans_iterations = clusters.iterations_run;
        }
        cluster_targets = std::move(clusters.assignments);
    }

    const auto graph = propagation::build_graph(embeddings, cfg_.knn, cfg_.gamma);
    std::vector<std::pair<int, int>> labeled_pairs;
    labeled_pairs.reserve(split.labeled_ids.size());
    for (int id : split.labeled_ids) labeled_pairs.emplace_back(id, pool_.truth[id]);
    const Matrix seed = propagation::label_seed(n, c, labeled_pairs);
    const auto lp = propagation::propagate(graph, seed, cfg_.alpha, cfg_.cg_tol, cfg_.cg_max_iters);
    report.propagate_calls = 1;
    report.lp_residual = lp.max_residual;

    const std::vector<int> pseudo = propagation::extract_pseudo_labels(lp.f);
    const Vector omega = propagation::entropy_weights(lp.f);
    std::vector<int> labeled_truth;
    std::vector<int> unlabeled_pseudo;
    for (int id : split.labeled_ids) labeled_truth.push_back(pool_.truth[id]);
    for (int id : split.unlabeled_ids) unlabeled_pseudo.push_back(pseudo[static_cast<std::size_t>(id)]);
    const Vector zeta = propagation::class_weights(labeled_truth, unlabeled_pseudo, c);

    if (trace) {
        trace->propagation.f = lp.f;
        trace->propagation.pseudo_labels = pseudo;
        trace->propagation.entropy = omega;
        trace->propagation.class_weight = zeta;
        trace->propagation.alpha = cfg_.alpha;
        trace->propagation.max_residual = lp.max_residual;
    }

    // Cluster-prediction pass over the whole dataset (head width K).
    if (!cfg_.purely_graphical) {
        Rng rng(derive_seed(cfg_.seeds.shuffle, static_cast<std::uint64_t>(epoch), 1));
        std::vector<int> order(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), 0);
        rng.shuffle(order);
        const int steps = n / cfg_.batch;
        double loss_sum = 0.0;
        for (int s = 0; s < steps; ++s) {
            std::vector<int> ids(order.begin() + s * cfg_.batch, order.begin() + (s + 1) * cfg_.batch);
            std::vector<int> targets(ids.size());
            for (std::size_t i = 0; i < ids.size(); ++i) {
                targets[i] = cluster_targets[static_cast<std::size_t>(ids[i])];
            }
            double loss = 0.0;
            fit_batch(ids, targets, Vector::Ones(static_cast<Eigen::Index>(ids.size())),
                      cfg_.cluster_count, lr, &loss);
            loss_sum += loss;
        }
        report.cluster_steps = steps;
        report.mean_cluster_loss = steps > 0 ? loss_sum / steps : 0.0;
    }

    // Weighted SSL pass over the unlabeled pool (head width C).
    {
        Rng rng(derive_seed(cfg_.seeds.shuffle, static_cast<std::uint64_t>(epoch), 2));
        std::vector<int> unlabeled_order = split.unlabeled_ids;
        rng.shuffle(unlabeled_order);
        const int steps = (n - n_l) / cfg_.batch_unlabeled;

        // Labeled ids are consumed without replacement when the pool is large
        // enough for every step, otherwise drawn with replacement.
        const bool with_replacement = n_l < cfg_.batch_labeled * steps;
        std::vector<int> labeled_order = split.labeled_ids;
        rng.shuffle(labeled_order);

        double loss_sum = 0.0;
        for (int s = 0; s < steps; ++s) {
            std::vector<int> ids;
            std::vector<int> targets;
            std::vector<double> labeled_zeta;
            std::vector<double> unlabeled_zeta_omega;
            for (int i = 0; i < cfg_.batch_labeled; ++i) {
                const int id = with_replacement
                                   ? split.labeled_ids[rng.below(split.labeled_ids.size())]
                                   : labeled_order[static_cast<std::size_t>(s * cfg_.batch_labeled + i)];
                ids.push_back(id);
                targets.push_back(pool_.truth[id]);
                labeled_zeta.push_back(zeta[pool_.truth[id]]);
            }
            for (int i = 0; i < cfg_.batch_unlabeled; ++i) {
                const int id = unlabeled_order[static_cast<std::size_t>(s * cfg_.batch_unlabeled + i)];
                const int target = pseudo[static_cast<std::size_t>(id)];
                ids.push_back(id);
                targets.push_back(target);
                unlabeled_zeta_omega.push_back(zeta[target] * omega[id]);
            }
            double loss = 0.0;
            fit_batch(ids, targets, ssl_batch_weights(labeled_zeta, unlabeled_zeta_omega), c, lr, &loss);
            loss_sum += loss;
        }
        report.ssl_steps = steps;
        report.mean_ssl_loss = steps > 0 ? loss_sum / steps : 0.0;
    }

    report.unlabeled_error = unlabeled_error();
    if (holdout_) report.test_error = evaluate(params_, holdout_->features, holdout_->truth, c);
    report.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

std::vector<EpochReport> Trainer::train(EpochTrace* last_trace) {
    supervised_init();
    std::vector<EpochReport> reports;
    reports.reserve(static_cast<std::size_t>(cfg_.epochs));
    for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
        const bool last = epoch + 1 == cfg_.epochs;
        reports.push_back(run_epoch(epoch, last && last_trace ? last_trace : nullptr));
        opt_.epoch = epoch + 1;
    }
    return reports;
}

double Trainer::unlabeled_error() const {
    const auto& unlabeled = pool_.split->unlabeled_ids;
    if (unlabeled.empty()) return 0.0;
    return evaluate_subset(params_, pool_, unlabeled);
}

double Trainer::holdout_error() const {
    if (!holdout_) throw std::invalid_argument("trainer: no holdout pool");
    return evaluate(params_, holdout_->features, holdout_->truth, pool_.class_count);
}

}  // namespace cyclecluster::trainer
