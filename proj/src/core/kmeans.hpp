#pragma once

#include "core/common.hpp"

#include <vector>

namespace cyclecluster::kmeans {

struct ClusterResult {
    Matrix centroids;              // K x d
    std::vector<int> assignments;  // per-sample cluster index in [0, K)
    double inertia = 0.0;          // sum of squared distances to assigned centroid
    int iterations_run = 0;
    std::vector<double> inertia_history;  // one entry per completed iteration
};

// k-means++ seeding: first centroid uniform, each next proportional to the
// squared distance to the nearest chosen centroid. Deterministic in seed.
Matrix seed_centroids(const Matrix& points, int k, std::uint64_t seed);

// Nearest-centroid index per row, ties broken toward the lowest index.
std::vector<int> assign(const Matrix& points, const Matrix& centroids);

// Lloyd's algorithm; stops early when assignments are stable. Empty clusters
// are repaired by stealing the sample farthest from its current centroid.
ClusterResult lloyd(const Matrix& points, int k, int max_iters, std::uint64_t seed);

// Warm-started variant: iterates from the given centroids instead of seeding.
ClusterResult lloyd_from(const Matrix& points, Matrix centroids, int max_iters);

}  // namespace cyclecluster::kmeans
