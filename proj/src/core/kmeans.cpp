#include "core/kmeans.hpp"

#include <limits>

namespace cyclecluster::kmeans {

namespace {

double squared_distance(const Matrix& points, Eigen::Index i, const Matrix& centroids, Eigen::Index c) {
    return (points.row(i) - centroids.row(c)).squaredNorm();
}

}  // namespace

Matrix seed_centroids(const Matrix& points, int k, std::uint64_t seed) {
    const auto n = points.rows();
    if (k < 1) throw std::invalid_argument("seed_centroids: k must be >= 1");
    if (k > n) throw std::invalid_argument("seed_centroids: k must be <= number of points");

    Rng rng(derive_seed(seed, 0x6b6d6561));  // "kmea"
    Matrix centroids(k, points.cols());
    centroids.row(0) = points.row(static_cast<Eigen::Index>(rng.below(n)));

    Vector d2 = Vector::Constant(n, std::numeric_limits<double>::infinity());
    for (int c = 1; c < k; ++c) {
        for (Eigen::Index i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], squared_distance(points, i, centroids, c - 1));
        }
        const double total = d2.sum();
        if (total <= 0.0) {
            // Every point coincides with a chosen centroid; duplicate one.
            centroids.row(c) = points.row(0);
            continue;
        }
        double r = rng.uniform() * total;
        Eigen::Index pick = n - 1;
        for (Eigen::Index i = 0; i < n; ++i) {
            r -= d2[i];
            if (r <= 0.0) {
                pick = i;
                break;
            }
        }
        centroids.row(c) = points.row(pick);
    }
    return centroids;
}

std::vector<int> assign(const Matrix& points, const Matrix& centroids) {
    if (points.cols() != centroids.cols()) {
        throw std::invalid_argument("assign: point and centroid dimensions differ");
    }
    const auto n = points.rows();
    const auto k = centroids.rows();
    std::vector<int> out(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        int best = 0;
        double best_d = squared_distance(points, i, centroids, 0);
        for (Eigen::Index c = 1; c < k; ++c) {
            const double d = squared_distance(points, i, centroids, c);
            if (d < best_d) {
                best_d = d;
                best = static_cast<int>(c);
            }
        }
        out[static_cast<std::size_t>(i)] = best;
    }
    return out;
}

namespace {

double total_inertia(const Matrix& points, const Matrix& centroids, const std::vector<int>& assignments) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        total += squared_distance(points, i, centroids, assignments[static_cast<std::size_t>(i)]);
    }
    return total;
}

// Moves the sample farthest from its centroid into each empty cluster.
void repair_empty_clusters(const Matrix& points, const Matrix& centroids, std::vector<int>& assignments) {
    const auto k = centroids.rows();
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (int a : assignments) counts[static_cast<std::size_t>(a)] += 1;

    for (Eigen::Index c = 0; c < k; ++c) {
        if (counts[static_cast<std::size_t>(c)] > 0) continue;
        Eigen::Index farthest = -1;
        double far_d = -1.0;
        for (Eigen::Index i = 0; i < points.rows(); ++i) {
            const int a = assignments[static_cast<std::size_t>(i)];
            if (counts[static_cast<std::size_t>(a)] <= 1) continue;  // do not empty a donor
            const double d = squared_distance(points, i, centroids, a);
            if (d > far_d) {
                far_d = d;
                farthest = i;
            }
        }
        if (farthest < 0) continue;  // fewer distinct points than clusters
        counts[static_cast<std::size_t>(assignments[static_cast<std::size_t>(farthest)])] -= 1;
        assignments[static_cast<std::size_t>(farthest)] = static_cast<int>(c);
        counts[static_cast<std::size_t>(c)] += 1;
    }
}

ClusterResult iterate(const Matrix& points, Matrix centroids, int max_iters) {
    const auto n = points.rows();
    const auto k = centroids.rows();
    ClusterResult result;
    std::vector<int> prev;

    for (int iter = 0; iter < max_iters; ++iter) {
        std::vector<int> assignments = assign(points, centroids);
        repair_empty_clusters(points, centroids, assignments);

        Matrix sums = Matrix::Zero(k, points.cols());
        std::vector<int> counts(static_cast<std::size_t>(k), 0);
        for (Eigen::Index i = 0; i < n; ++i) {
            const int a = assignments[static_cast<std::size_t>(i)];
            sums.row(a) += points.row(i);
            counts[static_cast<std::size_t>(a)] += 1;
        }
        for (Eigen::Index c = 0; c < k; ++c) {
            if (counts[static_cast<std::size_t>(c)] > 0) {
                centroids.row(c) = sums.row(c) / counts[static_cast<std::size_t>(c)];
            }
        }

        result.iterations_run = iter + 1;
        result.inertia_history.push_back(total_inertia(points, centroids, assignments));
        const bool stable = (assignments == prev);
        prev = std::move(assignments);
        if (stable) break;
    }

    result.centroids = std::move(centroids);
    result.assignments = std::move(prev);
    result.inertia = result.inertia_history.empty() ? 0.0 : result.inertia_history.back();
    return result;
}

}  // namespace

ClusterResult lloyd(const Matrix& points, int k, int max_iters, std::uint64_t seed) {
    if (k < 1) throw std::invalid_argument("kmeans: k must be >= 1");
    if (k > points.rows()) throw std::invalid_argument("kmeans: k must be <= number of points");
    if (max_iters < 1) throw std::invalid_argument("kmeans: max_iters must be >= 1");
    if (!points.allFinite()) throw NumericError("kmeans: non-finite input rows");
    return iterate(points, seed_centroids(points, k, seed), max_iters);
}

ClusterResult lloyd_from(const Matrix& points, Matrix centroids, int max_iters) {
    if (centroids.rows() < 1 || centroids.rows() > points.rows()) {
        throw std::invalid_argument("kmeans: centroid count out of range");
    }
    if (centroids.cols() != points.cols()) {
        throw std::invalid_argument("kmeans: centroid dimension mismatch");
    }
    if (max_iters < 1) throw std::invalid_argument("kmeans: max_iters must be >= 1");
    if (!points.allFinite()) throw NumericError("kmeans: non-finite input rows");
    return iterate(points, std::move(centroids), max_iters);
}

}  // namespace cyclecluster::kmeans
