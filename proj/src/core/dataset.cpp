#include "core/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace cyclecluster::dataset {

namespace {

constexpr double kPi = 3.14159265358979323846;

void check_finite_features(const Matrix& features) {
    if (!features.allFinite()) {
        throw DataError("pool features contain non-finite values");
    }
}

}  // namespace

std::optional<int> Pool::visible_label(int id) const {
    if (!split) return std::nullopt;
    const auto& ids = split->labeled_ids;
    if (std::find(ids.begin(), ids.end(), id) == ids.end()) return std::nullopt;
    return truth[id];
}

std::uint64_t Pool::fingerprint() const {
    std::uint64_t h = fnv1a(features.data(), sizeof(double) * static_cast<std::size_t>(features.size()));
    h = fnv1a(truth.data(), sizeof(int) * static_cast<std::size_t>(truth.size()), h);
    h = fnv1a(&class_count, sizeof(class_count), h);
    return h;
}

Pool generate_two_moons(int n, double noise, std::uint64_t seed) {
    if (n < 2) throw std::invalid_argument("generate_two_moons: n must be >= 2");
    if (noise < 0.0) throw std::invalid_argument("generate_two_moons: noise must be >= 0");

    const int n_outer = (n + 1) / 2;
    const int n_inner = n / 2;

    Pool pool;
    pool.features.resize(n, 2);
    pool.truth.resize(n);
    pool.class_count = 2;

    Rng rng(derive_seed(seed, 0x6d6f6f6e));  // "moon"
    auto arc = [](int j, int m) { return m > 1 ? kPi * j / (m - 1) : 0.0; };

    for (int j = 0; j < n_outer; ++j) {
        const double t = arc(j, n_outer);
        pool.features(j, 0) = std::cos(t) + noise * rng.normal();
        pool.features(j, 1) = std::sin(t) + noise * rng.normal();
        pool.truth[j] = 0;
    }
    for (int j = 0; j < n_inner; ++j) {
        const double t = arc(j, n_inner);
        const int row = n_outer + j;
        pool.features(row, 0) = 1.0 - std::cos(t) + noise * rng.normal();
        pool.features(row, 1) = 0.5 - std::sin(t) + noise * rng.normal();
        pool.truth[row] = 1;
    }
    return pool;
}

Pool generate_blobs(int n, int class_count, int dim, double separation, std::uint64_t seed) {
    if (class_count < 2) throw std::invalid_argument("generate_blobs: class_count must be >= 2");
    if (n < class_count) throw std::invalid_argument("generate_blobs: n must be >= class_count");
    if (dim < 1) throw std::invalid_argument("generate_blobs: dim must be >= 1");
    if (separation <= 0.0) throw std::invalid_argument("generate_blobs: separation must be > 0");

    Pool pool;
    pool.features.resize(n, dim);
    pool.truth.resize(n);
    pool.class_count = class_count;

    Rng rng(derive_seed(seed, 0x626c6f62));  // "blob"

    // Contiguous per-class blocks; the first n % C classes get one extra sample.
    const int base = n / class_count;
    const int extra = n % class_count;
    int row = 0;
    for (int c = 0; c < class_count; ++c) {
        const int count = base + (c < extra ? 1 : 0);
        for (int k = 0; k < count; ++k, ++row) {
            pool.truth[row] = c;
            for (int j = 0; j < dim; ++j) {
                const double center = (j == 0) ? c * separation : 0.0;
                pool.features(row, j) = center + rng.normal();
            }
        }
    }
    return pool;
}

SplitSpec make_split(const Pool& pool, int n_labeled, std::uint64_t seed) {
    const int n = pool.size();
    const int c = pool.class_count;
    if (n_labeled < c) throw std::invalid_argument("make_split: n_labeled must be >= class_count");
    if (n_labeled > n) throw std::invalid_argument("make_split: n_labeled must be <= pool size");
    for (int i = 0; i < n; ++i) {
        if (pool.truth[i] < 0 || pool.truth[i] >= c) {
            throw std::invalid_argument("make_split: ground-truth label out of range");
        }
    }

    std::vector<std::vector<int>> by_class(c);
    for (int i = 0; i < n; ++i) by_class[pool.truth[i]].push_back(i);
    for (int k = 0; k < c; ++k) {
        if (by_class[k].empty()) {
            throw std::invalid_argument("make_split: class " + std::to_string(k) + " has no samples");
        }
    }

    Rng rng(derive_seed(seed, 0x73706c69));  // "spli"
    for (auto& ids : by_class) rng.shuffle(ids);

    // Per-class targets floor(n_l/C), extras to the lowest class indices;
    // leftovers from short classes spill into classes with spare samples.
    std::vector<int> target(c, n_labeled / c);
    for (int k = 0; k < n_labeled % c; ++k) target[k] += 1;
    std::vector<int> take(c);
    int short_by = 0;
    for (int k = 0; k < c; ++k) {
        take[k] = std::min<int>(target[k], static_cast<int>(by_class[k].size()));
        short_by += target[k] - take[k];
    }
    for (int k = 0; k < c && short_by > 0; ++k) {
        const int spare = static_cast<int>(by_class[k].size()) - take[k];
        const int add = std::min(spare, short_by);
        take[k] += add;
        short_by -= add;
    }

    SplitSpec split;
    split.class_count = c;
    split.seed = seed;
    std::vector<char> labeled(n, 0);
    for (int k = 0; k < c; ++k) {
        for (int j = 0; j < take[k]; ++j) {
            split.labeled_ids.push_back(by_class[k][j]);
            labeled[by_class[k][j]] = 1;
        }
    }
    std::sort(split.labeled_ids.begin(), split.labeled_ids.end());
    for (int i = 0; i < n; ++i) {
        if (!labeled[i]) split.unlabeled_ids.push_back(i);
    }
    return split;
}

namespace {

std::uint32_t read_be32(std::istream& in, const char* field, const std::string& path) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw DataError("idx file '" + path + "': truncated while reading " + field);
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

void write_be32(std::ostream& out, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                                static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

}  // namespace

Pool load_idx_images(const std::string& images_path, const std::string& labels_path) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw DataError("idx file '" + images_path + "': cannot open");
    const std::uint32_t img_magic = read_be32(img, "magic", images_path);
    if (img_magic != kIdxImagesMagic) {
        throw DataError("idx file '" + images_path + "': bad image magic number");
    }
    const std::uint32_t count = read_be32(img, "image count", images_path);
    const std::uint32_t rows = read_be32(img, "row count", images_path);
    const std::uint32_t cols = read_be32(img, "column count", images_path);
    const std::size_t pixels = std::size_t(rows) * cols;
    if (pixels == 0) throw DataError("idx file '" + images_path + "': zero image dimensions");

    std::vector<unsigned char> raw(std::size_t(count) * pixels);
    img.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(img.gcount()) != raw.size()) {
        throw DataError("idx file '" + images_path + "': truncated pixel data");
    }

    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw DataError("idx file '" + labels_path + "': cannot open");
    const std::uint32_t lab_magic = read_be32(lab, "magic", labels_path);
    if (lab_magic != kIdxLabelsMagic) {
        throw DataError("idx file '" + labels_path + "': bad label magic number");
    }
    const std::uint32_t lab_count = read_be32(lab, "label count", labels_path);
    if (lab_count != count) {
        throw DataError("idx files: image count " + std::to_string(count) +
                        " does not match label count " + std::to_string(lab_count));
    }
    std::vector<unsigned char> labels(count);
    lab.read(reinterpret_cast<char*>(labels.data()), static_cast<std::streamsize>(labels.size()));
    if (static_cast<std::size_t>(lab.gcount()) != labels.size()) {
        throw DataError("idx file '" + labels_path + "': truncated label data");
    }

    Pool pool;
    pool.features.resize(count, static_cast<int>(pixels));
    pool.truth.resize(count);
    int max_label = 0;
    for (std::uint32_t i = 0; i < count; ++i) {
        for (std::size_t p = 0; p < pixels; ++p) {
            pool.features(i, static_cast<int>(p)) = raw[i * pixels + p] / 255.0;
        }
        pool.truth[i] = labels[i];
        max_label = std::max(max_label, static_cast<int>(labels[i]));
    }
    pool.class_count = std::max(2, max_label + 1);
    return pool;
}

void save_idx_images(const Pool& pool, const std::string& images_path,
                     const std::string& labels_path, int rows, int cols) {
    if (rows * cols != pool.dim()) {
        throw std::invalid_argument("save_idx_images: rows*cols must equal feature dimension");
    }
    std::ofstream img(images_path, std::ios::binary);
    if (!img) throw DataError("idx file '" + images_path + "': cannot open for writing");
    write_be32(img, kIdxImagesMagic);
    write_be32(img, static_cast<std::uint32_t>(pool.size()));
    write_be32(img, static_cast<std::uint32_t>(rows));
    write_be32(img, static_cast<std::uint32_t>(cols));
    for (int i = 0; i < pool.size(); ++i) {
        for (int p = 0; p < pool.dim(); ++p) {
            const double v = std::clamp(pool.features(i, p), 0.0, 1.0);
            const auto byte = static_cast<unsigned char>(std::lround(v * 255.0));
            img.write(reinterpret_cast<const char*>(&byte), 1);
        }
    }

    std::ofstream lab(labels_path, std::ios::binary);
    if (!lab) throw DataError("idx file '" + labels_path + "': cannot open for writing");
    write_be32(lab, kIdxLabelsMagic);
    write_be32(lab, static_cast<std::uint32_t>(pool.size()));
    for (int i = 0; i < pool.size(); ++i) {
        const auto byte = static_cast<unsigned char>(pool.truth[i]);
        lab.write(reinterpret_cast<const char*>(&byte), 1);
    }
}

Pool load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("csv file '" + path + "': cannot open");
    std::string header;
    if (!std::getline(in, header)) throw DataError("csv file '" + path + "': empty file");
    if (!header.empty() && header.back() == '\r') header.pop_back();

    std::vector<std::string> cols;
    std::stringstream hs(header);
    std::string tok;
    while (std::getline(hs, tok, ',')) cols.push_back(tok);
    if (cols.size() < 2 || cols.back() != "label") {
        throw DataError("csv file '" + path + "': header must be f0,...,f{d-1},label");
    }
    const int d = static_cast<int>(cols.size()) - 1;
    for (int j = 0; j < d; ++j) {
        if (cols[j] != "f" + std::to_string(j)) {
            throw DataError("csv file '" + path + "': unexpected header column '" + cols[j] + "'");
        }
    }

    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    std::string line;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::stringstream ls(line);
        std::vector<double> row;
        while (std::getline(ls, tok, ',')) {
            try {
                row.push_back(std::stod(tok));
            } catch (const std::exception&) {
                throw DataError("csv file '" + path + "': bad number '" + tok + "' at line " +
                                std::to_string(lineno));
            }
        }
        if (static_cast<int>(row.size()) != d + 1) {
            throw DataError("csv file '" + path + "': wrong field count at line " + std::to_string(lineno));
        }
        const double lab = row.back();
        row.pop_back();
        if (lab < 0 || lab != std::floor(lab)) {
            throw DataError("csv file '" + path + "': label must be a nonnegative integer at line " +
                            std::to_string(lineno));
        }
        labels.push_back(static_cast<int>(lab));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw DataError("csv file '" + path + "': no data rows");

    Pool pool;
    pool.features.resize(static_cast<int>(rows.size()), d);
    pool.truth.resize(static_cast<int>(rows.size()));
    int max_label = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (int j = 0; j < d; ++j) pool.features(static_cast<int>(i), j) = rows[i][j];
        pool.truth[static_cast<int>(i)] = labels[i];
        max_label = std::max(max_label, labels[i]);
    }
    pool.class_count = std::max(2, max_label + 1);
    check_finite_features(pool.features);
    return pool;
}

void save_csv(const Pool& pool, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("csv file '" + path + "': cannot open for writing");
    for (int j = 0; j < pool.dim(); ++j) out << "f" << j << ",";
    out << "label\n";
    out.precision(17);
    for (int i = 0; i < pool.size(); ++i) {
        for (int j = 0; j < pool.dim(); ++j) out << pool.features(i, j) << ",";
        out << pool.truth[i] << "\n";
    }
}

}  // namespace cyclecluster::dataset
