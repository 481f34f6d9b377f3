#pragma once

#include "core/common.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace cyclecluster::dataset {

// Stratified labeled/unlabeled partition of a pool.
struct SplitSpec {
    std::vector<int> labeled_ids;
    std::vector<int> unlabeled_ids;
    int class_count = 0;
    std::uint64_t seed = 0;
};

// A set of samples with ground-truth classes and (optionally) a split that
// decides which labels are visible to training. Immutable after construction.
struct Pool {
    Matrix features;       // n x d_in, row per sample
    IndexVector truth;     // n, class in [0, C)
    int class_count = 0;   // C >= 2
    std::optional<SplitSpec> split;

    int size() const { return static_cast<int>(features.rows()); }
    int dim() const { return static_cast<int>(features.cols()); }

    // Label as seen by training: present only for labeled ids.
    std::optional<int> visible_label(int id) const;

    // FNV-1a over feature bytes and truth labels.
    std::uint64_t fingerprint() const;
};

// Two interleaving half-circles in 2-D, balanced binary labels.
Pool generate_two_moons(int n, double noise, std::uint64_t seed);

// C isotropic unit-variance Gaussian blobs with centers `separation` apart
// along the first axis; balanced labels.
Pool generate_blobs(int n, int class_count, int dim, double separation, std::uint64_t seed);

// Stratified split: every class gets floor(n_l/C) or ceil(n_l/C) labeled ids,
// deterministic in seed. Requires ground truth for all samples.
SplitSpec make_split(const Pool& pool, int n_labeled, std::uint64_t seed);

// IDX image/label pair (big-endian, magic 0x00000803 / 0x00000801).
// Pixels are scaled to [0,1] and flattened to rows*cols features.
Pool load_idx_images(const std::string& images_path, const std::string& labels_path);
void save_idx_images(const Pool& pool, const std::string& images_path,
                     const std::string& labels_path, int rows, int cols);

// CSV with header f0,...,f{d-1},label.
Pool load_csv(const std::string& path);
void save_csv(const Pool& pool, const std::string& path);

}  // namespace cyclecluster::dataset
