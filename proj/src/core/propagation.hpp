#pragma once

#include "core/common.hpp"

#include <Eigen/Sparse>

#include <utility>
#include <vector>

namespace cyclecluster::propagation {

using SparseMatrix = Eigen::SparseMatrix<double>;

// Symmetric nonnegative kNN affinity graph over L2-normalized embeddings.
struct AffinityGraph {
    SparseMatrix weights;     // W, zero diagonal
    SparseMatrix normalized;  // S = D^{-1/2} W D^{-1/2}
    Vector degrees;           // D_ii = sum_j W_ij, all > 0 after the isolated-node guard
    int knn = 0;
    double gamma = 1.0;

    int size() const { return static_cast<int>(weights.rows()); }
};

// W_ij = max(0, <v_i, v_j>)^gamma when j is among the knn nearest neighbors of
// i or vice versa. Isolated nodes get an epsilon edge to their nearest
// neighbor so every degree is positive.
AffinityGraph build_graph(const Matrix& embeddings, int knn, double gamma);

// One-hot seed matrix Y: row i is e_{class} for labeled i, zero otherwise.
Matrix label_seed(int n, int class_count, const std::vector<std::pair<int, int>>& labeled);

enum class Solver { kAuto, kDense, kConjugateGradient };

struct PropagateResult {
    Matrix f;                  // n x C
    double max_residual = 0.0; // worst relative residual across class columns
    int max_iterations = 0;    // worst CG iteration count (0 on the dense path)
};

// Solves (I - alpha*S) F = (1 - alpha) Y per class column. Auto uses the
// dense factorization for n <= 500 and conjugate gradient above that.
PropagateResult propagate(const AffinityGraph& graph, const Matrix& seed, double alpha,
                          double tol, int max_cg_iters, Solver solver = Solver::kAuto);

// Row argmax, ties toward the lowest class index.
std::vector<int> extract_pseudo_labels(const Matrix& f);

// omega_i = 1 - H(p_i)/ln(C) with p_i the clamped, renormalized row of F.
// All-zero rows are treated as uniform (omega = 0).
Vector entropy_weights(const Matrix& f);

// zeta_j = 1 / (count of j among labeled truths + among unlabeled pseudo-labels),
// 1 for classes absent from both.
Vector class_weights(const std::vector<int>& labeled_truth,
                     const std::vector<int>& unlabeled_pseudo, int class_count);

// Full per-epoch pseudo-labeling bundle, assembled by the trainer.
struct PropagationResult {
    Matrix f;
    std::vector<int> pseudo_labels;
    Vector entropy;
    Vector class_weight;
    double alpha = 0.0;
    double max_residual = 0.0;
};

}  // namespace cyclecluster::propagation
