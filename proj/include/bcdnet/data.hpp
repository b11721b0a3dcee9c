#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "bcdnet/diagnostics.hpp"
#include "bcdnet/matrix.hpp"
#include "bcdnet/rng.hpp"

namespace bcdnet {

/// Inputs in [0,1], one-hot targets, integer labels.
struct Dataset {
    Matrix X;
    Matrix Y;
    std::vector<int> labels;

    std::size_t n() const { return labels.size(); }
    std::size_t input_dim() const { return X.rows(); }
    std::size_t classes() const { return Y.rows(); }

    void validate() const {
        if (X.cols() != labels.size() || Y.cols() != labels.size())
            throw std::invalid_argument("Dataset: column/label count mismatch");
        for (std::size_t j = 0; j < Y.cols(); ++j) {
            double sum = 0.0;
            std::size_t argmax = 0;
            for (std::size_t i = 0; i < Y.rows(); ++i) {
                sum += Y(i, j);
                if (Y(i, j) > Y(argmax, j)) argmax = i;
            }
            if (std::abs(sum - 1.0) > 1e-12 || Y(argmax, j) != 1.0 ||
                static_cast<int>(argmax) != labels[j])
                throw std::invalid_argument("Dataset: column " + std::to_string(j) +
                                            " is not one-hot for its label");
        }
    }

    /// Deterministic subset of m columns (without replacement).
    Dataset subsample(std::size_t m, std::uint64_t seed) const {
        if (m == 0 || m > n())
            throw std::invalid_argument("Dataset::subsample: bad size " + std::to_string(m));
        std::vector<std::size_t> idx(n());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        Rng rng(seed);
        rng.shuffle(idx);
        idx.resize(m);
        return select(idx);
    }

    Dataset select(const std::vector<std::size_t>& idx) const {
        Dataset out;
        out.X = Matrix(X.rows(), idx.size());
        out.Y = Matrix(Y.rows(), idx.size());
        out.labels.resize(idx.size());
        for (std::size_t j = 0; j < idx.size(); ++j) {
            const std::size_t s = idx[j];
            for (std::size_t i = 0; i < X.rows(); ++i) out.X(i, j) = X(i, s);
            for (std::size_t i = 0; i < Y.rows(); ++i) out.Y(i, j) = Y(i, s);
            out.labels[j] = labels[s];
        }
        return out;
    }
};

namespace detail {

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

inline std::uint32_t read_u32_be(std::ifstream& in, const std::string& path,
                                 std::size_t offset) {
    unsigned char buf[4];
    in.read(reinterpret_cast<char*>(buf), 4);
    if (!in)
        throw std::runtime_error("idx: truncated header in " + path + " at offset " +
                                 std::to_string(offset));
    return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
           (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
}

inline void write_u32_be(std::ofstream& out, std::uint32_t v) {
    const unsigned char buf[4] = {static_cast<unsigned char>(v >> 24),
                                  static_cast<unsigned char>(v >> 16),
                                  static_cast<unsigned char>(v >> 8),
                                  static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(buf), 4);
}

}  // namespace detail

/// Reads the big-endian IDX pair: images (magic 2051) scaled by 1/255 into
/// [0,1] and flattened to columns, labels (magic 2049) one-hot into 10 rows.
inline Dataset load_mnist_idx(const std::string& images_path, const std::string& labels_path,
                              std::size_t num_classes = 10) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw std::runtime_error("idx: cannot open " + images_path);
    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw std::runtime_error("idx: cannot open " + labels_path);

    const std::uint32_t img_magic = detail::read_u32_be(img, images_path, 0);
    if (img_magic != detail::kIdxImagesMagic)
        throw std::runtime_error("idx: bad magic in " + images_path + " at offset 0 (got " +
                                 std::to_string(img_magic) + ", want 2051)");
    const std::uint32_t lab_magic = detail::read_u32_be(lab, labels_path, 0);
    if (lab_magic != detail::kIdxLabelsMagic)
        throw std::runtime_error("idx: bad magic in " + labels_path + " at offset 0 (got " +
                                 std::to_string(lab_magic) + ", want 2049)");

    const std::uint32_t n_img = detail::read_u32_be(img, images_path, 4);
    const std::uint32_t rows = detail::read_u32_be(img, images_path, 8);
    const std::uint32_t cols = detail::read_u32_be(img, images_path, 12);
    const std::uint32_t n_lab = detail::read_u32_be(lab, labels_path, 4);
    if (n_img != n_lab)
        throw std::runtime_error("idx: count mismatch, " + images_path + " has " +
                                 std::to_string(n_img) + " images but " + labels_path + " has " +
                                 std::to_string(n_lab) + " labels");
    if (n_img == 0) throw std::runtime_error("idx: empty dataset in " + images_path);

    const std::size_t dim = std::size_t(rows) * cols;
    std::vector<unsigned char> pixels(dim * n_img);
    img.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
    if (static_cast<std::size_t>(img.gcount()) != pixels.size())
        throw std::runtime_error("idx: truncated payload in " + images_path + " at offset " +
                                 std::to_string(16 + img.gcount()));
    std::vector<unsigned char> raw_labels(n_lab);
    lab.read(reinterpret_cast<char*>(raw_labels.data()),
             static_cast<std::streamsize>(raw_labels.size()));
    if (static_cast<std::size_t>(lab.gcount()) != raw_labels.size())
        throw std::runtime_error("idx: truncated payload in " + labels_path + " at offset " +
                                 std::to_string(8 + lab.gcount()));

    Dataset ds;
    ds.X = Matrix(dim, n_img);
    ds.Y = Matrix(num_classes, n_img);
    ds.labels.resize(n_img);
    for (std::size_t j = 0; j < n_img; ++j) {
        for (std::size_t i = 0; i < dim; ++i)
            ds.X(i, j) = static_cast<double>(pixels[j * dim + i]) / 255.0;
        const unsigned char l = raw_labels[j];
        if (l >= num_classes)
            throw std::runtime_error("idx: label " + std::to_string(l) + " out of range in " +
                                     labels_path + " at offset " + std::to_string(8 + j));
        ds.Y(l, j) = 1.0;
        ds.labels[j] = l;
    }
    return ds;
}

/// Writes a dataset back to the IDX pair, quantizing pixels to bytes. The
/// image payload is shaped d0 x 1 per sample unless d0 is 784, which keeps
/// the MNIST 28x28 layout.
inline void save_idx(const Dataset& ds, const std::string& images_path,
                     const std::string& labels_path) {
    std::ofstream img(images_path, std::ios::binary);
    if (!img) throw std::runtime_error("idx: cannot write " + images_path);
    std::ofstream lab(labels_path, std::ios::binary);
    if (!lab) throw std::runtime_error("idx: cannot write " + labels_path);

    const std::size_t dim = ds.input_dim();
    const std::uint32_t rows = dim == 784 ? 28 : static_cast<std::uint32_t>(dim);
    const std::uint32_t cols = dim == 784 ? 28 : 1;
    detail::write_u32_be(img, detail::kIdxImagesMagic);
    detail::write_u32_be(img, static_cast<std::uint32_t>(ds.n()));
    detail::write_u32_be(img, rows);
    detail::write_u32_be(img, cols);
    for (std::size_t j = 0; j < ds.n(); ++j)
        for (std::size_t i = 0; i < dim; ++i) {
            const double v = std::clamp(ds.X(i, j), 0.0, 1.0);
            const unsigned char byte = static_cast<unsigned char>(std::lround(v * 255.0));
            img.write(reinterpret_cast<const char*>(&byte), 1);
        }

    detail::write_u32_be(lab, detail::kIdxLabelsMagic);
    detail::write_u32_be(lab, static_cast<std::uint32_t>(ds.n()));
    for (int l : ds.labels) {
        const unsigned char byte = static_cast<unsigned char>(l);
        lab.write(reinterpret_cast<const char*>(&byte), 1);
    }
    if (!img || !lab) throw std::runtime_error("idx: write failed for " + images_path);
}

/// Balanced Gaussian blobs: class centers on the unit sphere, points
/// center + N(0, spread^2), then mapped through (x+1)/2 and clamped so the
/// inputs land in [0,1].
inline Dataset synthetic_blobs(std::size_t n, std::size_t d0, std::size_t classes, double spread,
                               std::uint64_t seed) {
    if (classes == 0 || classes > n)
        throw std::invalid_argument("synthetic_blobs: need 1 <= classes <= n");
    if (spread < 0.0) throw std::invalid_argument("synthetic_blobs: spread must be nonnegative");
    Rng rng(seed);
    Matrix centers(d0, classes);
    for (std::size_t c = 0; c < classes; ++c) {
        double norm_sq = 0.0;
        for (std::size_t i = 0; i < d0; ++i) {
            const double v = rng.normal();
            centers(i, c) = v;
            norm_sq += v * v;
        }
        const double inv = 1.0 / std::sqrt(std::max(norm_sq, 1e-300));
        for (std::size_t i = 0; i < d0; ++i) centers(i, c) *= inv;
    }

    Dataset ds;
    ds.X = Matrix(d0, n);
    ds.Y = Matrix(classes, n);
    ds.labels.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t c = j % classes;
        for (std::size_t i = 0; i < d0; ++i) {
            const double raw = centers(i, c) + spread * rng.normal();
            ds.X(i, j) = std::clamp((raw + 1.0) / 2.0, 0.0, 1.0);
        }
        ds.Y(c, j) = 1.0;
        ds.labels[j] = static_cast<int>(c);
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Trace CSV, the stability contract for downstream plotting
// ---------------------------------------------------------------------------

inline constexpr const char* kTraceCsvHeader =
    "epoch,total,risk,penalty,w_reg,v_reg,delta_sq,residual,bbar_bound,train_acc,test_acc,"
    "seconds";

inline void write_trace_csv(const std::vector<TraceRecord>& trace, const std::string& path) {
    if (trace.empty()) throw std::invalid_argument("write_trace_csv: empty trace");
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw std::runtime_error("write_trace_csv: cannot open " + path);
    std::fprintf(f, "%s\n", kTraceCsvHeader);
    for (const TraceRecord& r : trace) {
        std::fprintf(f,
                     "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                     r.epoch, r.objective.total, r.objective.risk, r.objective.penalty,
                     r.objective.w_reg, r.objective.v_reg, r.delta_sq, r.residual_norm,
                     r.bbar_bound, r.train_acc, r.test_acc, r.wall_seconds);
    }
    if (std::fclose(f) != 0) throw std::runtime_error("write_trace_csv: write failed for " + path);
}

inline std::vector<TraceRecord> read_trace_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_trace_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != kTraceCsvHeader)
        throw std::runtime_error("read_trace_csv: bad header in " + path);
    std::vector<TraceRecord> trace;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> vals;
        std::size_t pos = 0;
        while (pos <= line.size()) {
            const std::size_t comma = line.find(',', pos);
            const std::string cell =
                line.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
            vals.push_back(std::strtod(cell.c_str(), nullptr));
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
        if (vals.size() != 12)
            throw std::runtime_error("read_trace_csv: row with " + std::to_string(vals.size()) +
                                     " fields in " + path);
        TraceRecord r;
        r.epoch = static_cast<std::size_t>(vals[0]);
        r.objective.total = vals[1];
        r.objective.risk = vals[2];
        r.objective.penalty = vals[3];
        r.objective.w_reg = vals[4];
        r.objective.v_reg = vals[5];
        r.delta_sq = vals[6];
        r.residual_norm = vals[7];
        r.bbar_bound = vals[8];
        r.train_acc = vals[9];
        r.test_acc = vals[10];
        r.wall_seconds = vals[11];
        trace.push_back(r);
    }
    return trace;
}

}  // namespace bcdnet
