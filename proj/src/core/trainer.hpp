#pragma once

#include "core/common.hpp"
#include "core/dataset.hpp"
#include "core/kmeans.hpp"
#include "core/model.hpp"
#include "core/propagation.hpp"

#include <optional>
#include <vector>

namespace cyclecluster::trainer {

struct Seeds {
    std::uint64_t model = 1;
    std::uint64_t split = 2;
    std::uint64_t shuffle = 3;
    std::uint64_t kmeans = 4;
};

struct TrainConfig {
    int epochs = 30;
    int init_epochs = 10;
    int batch = 50;
    int batch_labeled = 25;
    int batch_unlabeled = 25;
    double base_lr = 0.05;
    int anneal_epochs = 35;
    double momentum = 0.9;
    double weight_decay = 2e-4;
    int cluster_count = 0;  // K
    int knn = 10;
    double gamma = 3.0;
    double alpha = 0.99;
    int kmeans_iters = 100;
    double cg_tol = 1e-10;
    int cg_max_iters = 1000;
    std::vector<int> hidden{128};
    int embed_dim = 32;
    double leaky_slope = 0.01;
    Seeds seeds;
    bool purely_graphical = false;
    bool warm_start_kmeans = false;

    int head_width(int class_count) const { return std::max(cluster_count, class_count); }

    // Throws ConfigError naming the offending field.
    void validate() const;
};

struct EpochReport {
    int epoch = 0;
    double mean_cluster_loss = 0.0;  // L_C
    double mean_ssl_loss = 0.0;      // L_W
    double unlabeled_error = 0.0;
    double test_error = -1.0;  // -1 when no holdout pool was given
    double kmeans_inertia = 0.0;
    double lp_residual = 0.0;
    double wall_time_s = 0.0;
    int cluster_steps = 0;
    int ssl_steps = 0;
    int kmeans_calls = 0;
    int propagate_calls = 0;
};

// Pseudo-label state of one epoch, captured on request for diagnostics.
struct EpochTrace {
    std::vector<int> cluster_assignments;
    double kmeans_inertia = 0.0;
    int kmeans_iterations = 0;
    propagation::PropagationResult propagation;
};

// Error rate of argmax class predictions (first C head outputs) against truth.
double evaluate(const model::ModelParams& params, const Matrix& features,
                const IndexVector& truth, int class_count);
double evaluate_subset(const model::ModelParams& params, const dataset::Pool& pool,
                       const std::vector<int>& ids);

// Per-sample weights for a combined SSL batch (labeled rows first) such that
// the batch-mean cross entropy equals the sum of the two sub-batch means:
// (1/b_l) sum zeta_y * l_s  +  (1/b_u) sum zeta_yhat * omega * l_s.
Vector ssl_batch_weights(const std::vector<double>& labeled_zeta,
                         const std::vector<double>& unlabeled_zeta_omega);

// Runs the cyclic optimisation on one pool + split. The per-epoch sequence is:
// embed everything, k-means pseudo-labels, graph pseudo-labels and weights,
// one cluster-prediction pass over the whole set, one weighted SSL pass over
// the unlabeled set. Pseudo-labels are regenerated only at epoch start.
class Trainer {
public:
    Trainer(const dataset::Pool& pool, TrainConfig config, const dataset::Pool* holdout = nullptr);

    // Plain cross-entropy over the labeled samples for init_epochs passes.
    void supervised_init();

    EpochReport run_epoch(int epoch, EpochTrace* trace = nullptr);

    // supervised_init + all epochs; reports in epoch order.
    std::vector<EpochReport> train(EpochTrace* last_trace = nullptr);

    double unlabeled_error() const;
    double holdout_error() const;

    const model::ModelParams& params() const { return params_; }
    const model::OptimizerState& optimizer() const { return opt_; }

private:
    void fit_batch(const std::vector<int>& ids, const std::vector<int>& targets,
                   const Vector& weights, int head_width, double lr, double* loss_out);

    const dataset::Pool& pool_;
    const dataset::Pool* holdout_;
    TrainConfig cfg_;
    model::ModelParams params_;
    model::OptimizerState opt_;
    std::optional<Matrix> warm_centroids_;
};

}  // namespace cyclecluster::trainer
