#include "core/propagation.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

namespace cyclecluster::propagation {

namespace {

constexpr double kIsolatedEdgeWeight = 1e-8;
constexpr int kDenseSolveLimit = 500;

// Indices of the `count` most similar rows to `row`, self excluded,
// ties broken toward the lower index.
std::vector<int> top_neighbors(const Vector& sims, int row, int count) {
    std::vector<int> idx(sims.size());
    std::iota(idx.begin(), idx.end(), 0);
    idx.erase(idx.begin() + row);
    const auto mid = idx.begin() + count;
    std::partial_sort(idx.begin(), mid, idx.end(), [&sims](int a, int b) {
        if (sims[a] != sims[b]) return sims[a] > sims[b];
        return a < b;
    });
    idx.resize(count);
    return idx;
}

}  // namespace

AffinityGraph build_graph(const Matrix& embeddings, int knn, double gamma) {
    const int n = static_cast<int>(embeddings.rows());
    if (knn < 1) throw std::invalid_argument("build_graph: knn must be >= 1");
    if (knn >= n) throw std::invalid_argument("build_graph: knn must be < number of samples");
    if (!embeddings.allFinite()) throw NumericError("build_graph: non-finite embeddings");

    // Cosine similarities (rows are L2-normalized); union of directed kNN
    // lists, stored once per unordered pair.
    std::map<std::pair<int, int>, double> edges;
    std::vector<int> nearest(n, -1);
    for (int i = 0; i < n; ++i) {
        const Vector sims = embeddings * embeddings.row(i).transpose();
        const std::vector<int> neighbors = top_neighbors(sims, i, knn);
        nearest[i] = neighbors.front();  // partial_sort leaves the prefix ordered
        for (int j : neighbors) {
            const double w = std::pow(std::max(0.0, sims[j]), gamma);
            if (w > 0.0) edges[{std::min(i, j), std::max(i, j)}] = w;
        }
    }

    Vector degrees = Vector::Zero(n);
    for (const auto& [key, w] : edges) {
        degrees[key.first] += w;
        degrees[key.second] += w;
    }

    // Isolated nodes (all clamped similarities zero) get an epsilon edge to
    // their nearest neighbor to keep D invertible.
    for (int i = 0; i < n; ++i) {
        if (degrees[i] > 0.0) continue;
        const int j = nearest[i];
        auto key = std::make_pair(std::min(i, j), std::max(i, j));
        if (edges.emplace(key, kIsolatedEdgeWeight).second) {
            degrees[i] += kIsolatedEdgeWeight;
            degrees[j] += kIsolatedEdgeWeight;
        }
    }

    AffinityGraph graph;
    graph.knn = knn;
    graph.gamma = gamma;
    graph.degrees = degrees;

    std::vector<Eigen::Triplet<double>> wt;
    std::vector<Eigen::Triplet<double>> st;
    wt.reserve(edges.size() * 2);
    st.reserve(edges.size() * 2);
    for (const auto& [key, w] : edges) {
        const auto [i, j] = key;
        const double s = w / std::sqrt(degrees[i] * degrees[j]);
        wt.emplace_back(i, j, w);
        wt.emplace_back(j, i, w);
        st.emplace_back(i, j, s);
        st.emplace_back(j, i, s);
    }
    graph.weights.resize(n, n);
    graph.weights.setFromTriplets(wt.begin(), wt.end());
    graph.normalized.resize(n, n);
    graph.normalized.setFromTriplets(st.begin(), st.end());
    return graph;
}

Matrix label_seed(int n, int class_count, const std::vector<std::pair<int, int>>& labeled) {
    if (class_count < 2) throw std::invalid_argument("label_seed: class_count must be >= 2");
    Matrix y = Matrix::Zero(n, class_count);
    for (const auto& [id, cls] : labeled) {
        if (id < 0 || id >= n) throw std::invalid_argument("label_seed: sample id out of range");
        if (cls < 0 || cls >= class_count) throw std::invalid_argument("label_seed: class out of range");
        y.row(id).setZero();
        y(id, cls) = 1.0;
    }
    return y;
}

namespace {

// CG on the SPD system (I - alpha*S) x = b, zero initial guess.
// Returns iterations used; final relative residual via out-param.
int conjugate_gradient(const SparseMatrix& s, double alpha, const Vector& b, double tol,
                       int max_iters, Vector& x, double& rel_residual) {
    const double b_norm = b.norm();
    x = Vector::Zero(b.size());
    if (b_norm == 0.0) {
        rel_residual = 0.0;
        return 0;
    }
    Vector r = b;
    Vector p = r;
    double rs = r.squaredNorm();
    for (int iter = 1; iter <= max_iters; ++iter) {
        const Vector ap = p - alpha * (s * p);
        const double denom = p.dot(ap);
        if (denom <= 0.0) throw NumericError("propagate: system lost positive definiteness");
        const double step = rs / denom;
        x += step * p;
        r -= step * ap;
        const double rs_next = r.squaredNorm();
        rel_residual = std::sqrt(rs_next) / b_norm;
        if (rel_residual <= tol) return iter;
        p = r + (rs_next / rs) * p;
        rs = rs_next;
    }
    std::ostringstream msg;
    msg << "propagate: conjugate gradient did not reach tolerance " << tol << " within "
        << max_iters << " iterations (final residual " << rel_residual << ")";
    throw NumericError(msg.str());
}

}  // namespace

PropagateResult propagate(const AffinityGraph& graph, const Matrix& seed, double alpha,
                          double tol, int max_cg_iters, Solver solver) {
    const int n = graph.size();
    if (seed.rows() != n) throw std::invalid_argument("propagate: seed row count mismatch");
    if (alpha <= 0.0 || alpha >= 1.0) throw std::invalid_argument("propagate: alpha must be in (0, 1)");
    if (tol <= 0.0) throw std::invalid_argument("propagate: tol must be > 0");

    const bool dense = solver == Solver::kDense || (solver == Solver::kAuto && n <= kDenseSolveLimit);
    PropagateResult result;
    result.f.resize(n, seed.cols());

    if (dense) {
        Matrix a = Matrix::Identity(n, n) - alpha * Matrix(graph.normalized);
        Eigen::LLT<Matrix> llt(a);
        if (llt.info() != Eigen::Success) throw NumericError("propagate: dense factorization failed");
        result.f = llt.solve((1.0 - alpha) * seed);
        for (Eigen::Index c = 0; c < seed.cols(); ++c) {
            const Vector b = (1.0 - alpha) * seed.col(c);
            const double b_norm = b.norm();
            if (b_norm == 0.0) continue;
            const double res = (b - (result.f.col(c) - alpha * (graph.normalized * result.f.col(c)))).norm() / b_norm;
            result.max_residual = std::max(result.max_residual, res);
        }
        return result;
    }

    for (Eigen::Index c = 0; c < seed.cols(); ++c) {
        const Vector b = (1.0 - alpha) * seed.col(c);
        Vector x;
        double res = 0.0;
        const int iters = conjugate_gradient(graph.normalized, alpha, b, tol, max_cg_iters, x, res);
        result.f.col(c) = x;
        result.max_residual = std::max(result.max_residual, res);
        result.max_iterations = std::max(result.max_iterations, iters);
    }
    return result;
}

std::vector<int> extract_pseudo_labels(const Matrix& f) {
    if (f.cols() < 1) throw std::invalid_argument("extract_pseudo_labels: F needs at least one column");
    std::vector<int> labels(static_cast<std::size_t>(f.rows()));
    for (Eigen::Index i = 0; i < f.rows(); ++i) {
        int best = 0;
        for (Eigen::Index j = 1; j < f.cols(); ++j) {
            if (f(i, j) > f(i, best)) best = static_cast<int>(j);
        }
        labels[static_cast<std::size_t>(i)] = best;
    }
    return labels;
}

Vector entropy_weights(const Matrix& f) {
    const auto c = f.cols();
    if (c < 2) throw std::invalid_argument("entropy_weights: need at least two classes");
    const double log_c = std::log(static_cast<double>(c));

    Vector omega(f.rows());
    for (Eigen::Index i = 0; i < f.rows(); ++i) {
        Vector p = f.row(i).cwiseMax(0.0).transpose();
        const double total = p.sum();
        if (total > 0.0) {
            p /= total;
        } else {
            p.setConstant(1.0 / c);
        }
        double h = 0.0;
        for (Eigen::Index j = 0; j < c; ++j) {
            if (p[j] > 0.0) h -= p[j] * std::log(p[j]);
        }
        omega[i] = std::clamp(1.0 - h / log_c, 0.0, 1.0);
    }
    return omega;
}

Vector class_weights(const std::vector<int>& labeled_truth,
                     const std::vector<int>& unlabeled_pseudo, int class_count) {
    if (class_count < 1) throw std::invalid_argument("class_weights: class_count must be >= 1");
    std::vector<int> counts(static_cast<std::size_t>(class_count), 0);
    for (int y : labeled_truth) {
        if (y < 0 || y >= class_count) throw std::invalid_argument("class_weights: label out of range");
        counts[static_cast<std::size_t>(y)] += 1;
    }
    for (int y : unlabeled_pseudo) {
        if (y < 0 || y >= class_count) throw std::invalid_argument("class_weights: pseudo-label out of range");
        counts[static_cast<std::size_t>(y)] += 1;
    }
    Vector zeta(class_count);
    for (int j = 0; j < class_count; ++j) {
        zeta[j] = counts[static_cast<std::size_t>(j)] > 0 ? 1.0 / counts[static_cast<std::size_t>(j)] : 1.0;
    }
    return zeta;
}

}  // namespace cyclecluster::propagation
