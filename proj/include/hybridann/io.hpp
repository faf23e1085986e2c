#pragma once

#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "hybridann/graph.hpp"
#include "hybridann/oracle.hpp"
#include "hybridann/store.hpp"
#include "hybridann/types.hpp"

// Binary formats, all little-endian, no padding:
//   dense  "HDV1": u32 count, u32 dim, count*dim f32
//   sparse "HSV1": u32 count, u32 dim, u64 total_nnz, (count+1) u64 indptr,
//                  nnz u32 indices, nnz f32 values
//   truth  "HGT1": u32 count, u32 k, count*k u32 ids, count*k f32 distances
//   index  "HIX1": u32 version, metadata, embedded store, adjacency
// Qrels are UTF-8 TSV: query_id<TAB>doc_id<TAB>grade.

namespace hybridann {

namespace io_detail {

class Reader {
public:
    explicit Reader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
        if (!in_) throw ParseError("cannot open " + path, 0);
    }

    template <class T>
    T scalar() {
        T v{};
        raw(&v, sizeof(T));
        return v;
    }

    template <class T>
    std::vector<T> array(std::size_t n) {
        std::vector<T> v(n);
        if (n) raw(v.data(), n * sizeof(T));
        return v;
    }

    void magic(const char expect[4]) {
        char m[4];
        raw(m, 4);
        if (std::memcmp(m, expect, 4) != 0)
            throw ParseError("bad magic in " + path_ + ", expected " +
                                 std::string(expect, 4),
                             0);
    }

    void expect_eof() {
        in_.peek();
        if (!in_.eof()) throw ParseError("trailing bytes in " + path_, offset_);
    }

    std::uint64_t offset() const { return offset_; }

private:
    void raw(void* dst, std::size_t n) {
        in_.read(static_cast<char*>(dst), std::streamsize(n));
        if (std::size_t(in_.gcount()) != n)
            throw ParseError("truncated file " + path_, offset_);
        offset_ += n;
    }

    std::string path_;
    std::ifstream in_;
    std::uint64_t offset_ = 0;
};

class Writer {
public:
    explicit Writer(const std::string& path) : out_(path, std::ios::binary) {
        if (!out_) throw ParseError("cannot open " + path + " for writing", 0);
    }

    template <class T>
    void scalar(T v) {
        out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
    }

    template <class T>
    void array(const std::vector<T>& v) {
        if (!v.empty())
            out_.write(reinterpret_cast<const char*>(v.data()),
                       std::streamsize(v.size() * sizeof(T)));
    }

    void magic(const char m[4]) { out_.write(m, 4); }

private:
    std::ofstream out_;
};

}  // namespace io_detail

/// Resolve a path against HYBRID_ANN_DATA_DIR when it is set and the path is
/// relative and does not exist as given.
inline std::string resolve_data_path(const std::string& path) {
    namespace fs = std::filesystem;
    if (fs::path(path).is_absolute() || fs::exists(path)) return path;
    const char* root = std::getenv("HYBRID_ANN_DATA_DIR");
    if (!root) return path;
    return (fs::path(root) / path).string();
}

// ---------------------------------------------------------------------------
// Dense vectors
// ---------------------------------------------------------------------------

inline void save_dense(const std::string& path, const std::vector<DenseVector>& rows,
                       std::uint32_t dim) {
    io_detail::Writer w(path);
    w.magic("HDV1");
    w.scalar<std::uint32_t>(std::uint32_t(rows.size()));
    w.scalar<std::uint32_t>(dim);
    for (const auto& r : rows) {
        if (r.size() != dim) throw DimensionError("dense row length mismatch on save");
        w.array(r);
    }
}

inline std::vector<DenseVector> load_dense(const std::string& path, std::uint32_t* dim_out) {
    io_detail::Reader r(path);
    r.magic("HDV1");
    const auto count = r.scalar<std::uint32_t>();
    const auto dim = r.scalar<std::uint32_t>();
    std::vector<DenseVector> rows(count);
    for (auto& row : rows) row = r.array<float>(dim);
    r.expect_eof();
    if (dim_out) *dim_out = dim;
    return rows;
}

// ---------------------------------------------------------------------------
// Sparse vectors (CSR)
// ---------------------------------------------------------------------------

inline void save_sparse(const std::string& path, const std::vector<SparseVector>& rows,
                        std::uint32_t dim) {
    io_detail::Writer w(path);
    w.magic("HSV1");
    w.scalar<std::uint32_t>(std::uint32_t(rows.size()));
    w.scalar<std::uint32_t>(dim);
    std::uint64_t nnz = 0;
    for (const auto& r : rows) nnz += r.nnz();
    w.scalar<std::uint64_t>(nnz);
    std::vector<std::uint64_t> indptr;
    indptr.reserve(rows.size() + 1);
    indptr.push_back(0);
    for (const auto& r : rows) indptr.push_back(indptr.back() + r.nnz());
    w.array(indptr);
    for (const auto& r : rows) w.array(r.indices);
    for (const auto& r : rows) w.array(r.values);
}

inline std::vector<SparseVector> load_sparse(const std::string& path,
                                             std::uint32_t* dim_out) {
    io_detail::Reader r(path);
    r.magic("HSV1");
    const auto count = r.scalar<std::uint32_t>();
    const auto dim = r.scalar<std::uint32_t>();
    const auto nnz = r.scalar<std::uint64_t>();
    const auto indptr = r.array<std::uint64_t>(std::size_t(count) + 1);
    if (indptr.front() != 0 || indptr.back() != nnz)
        throw ParseError("CSR indptr endpoints inconsistent in " + path, r.offset());
    auto indices = r.array<std::uint32_t>(nnz);
    auto values = r.array<float>(nnz);
    r.expect_eof();

    std::vector<SparseVector> rows(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        if (indptr[i + 1] < indptr[i])
            throw ParseError("CSR indptr not monotone in " + path, r.offset());
        auto& row = rows[i];
        for (std::uint64_t j = indptr[i]; j < indptr[i + 1]; ++j) {
            if (indices[j] >= dim)
                throw ParseError("sparse index out of range in " + path, r.offset());
            if (j > indptr[i] && indices[j] <= indices[j - 1])
                throw ParseError("sparse indices not strictly increasing in " + path,
                                 r.offset());
            row.indices.push_back(indices[j]);
            row.values.push_back(values[j]);
        }
    }
    if (dim_out) *dim_out = dim;
    return rows;
}

inline DocumentStore load_store(const std::string& dense_path, const std::string& sparse_path) {
    std::uint32_t dense_dim = 0, sparse_dim = 0;
    auto dense = load_dense(dense_path, &dense_dim);
    auto sparse = load_sparse(sparse_path, &sparse_dim);
    if (dense.size() != sparse.size())
        throw DimensionError("dense/sparse row counts differ: " +
                             std::to_string(dense.size()) + " vs " +
                             std::to_string(sparse.size()));
    DocumentStore store(dense_dim, sparse_dim);
    for (std::size_t i = 0; i < dense.size(); ++i)
        store.add({std::move(dense[i]), std::move(sparse[i])});
    return store;
}

inline std::vector<HybridVector> load_hybrid_rows(const std::string& dense_path,
                                                  const std::string& sparse_path) {
    std::uint32_t dd = 0, sd = 0;
    auto dense = load_dense(dense_path, &dd);
    auto sparse = load_sparse(sparse_path, &sd);
    if (dense.size() != sparse.size())
        throw DimensionError("dense/sparse row counts differ");
    std::vector<HybridVector> rows(dense.size());
    for (std::size_t i = 0; i < dense.size(); ++i)
        rows[i] = {std::move(dense[i]), std::move(sparse[i])};
    return rows;
}

// ---------------------------------------------------------------------------
// Ground truth
// ---------------------------------------------------------------------------

struct GroundTruth {
    std::uint32_t k = 0;
    std::vector<std::vector<std::uint32_t>> ids;     // per query
    std::vector<std::vector<float>> distances;       // per query
};

inline void save_ground_truth(const std::string& path, const GroundTruth& gt) {
    io_detail::Writer w(path);
    w.magic("HGT1");
    w.scalar<std::uint32_t>(std::uint32_t(gt.ids.size()));
    w.scalar<std::uint32_t>(gt.k);
    for (const auto& row : gt.ids) {
        if (row.size() != gt.k) throw DimensionError("ground truth row length != k");
        w.array(row);
    }
    for (const auto& row : gt.distances) w.array(row);
}

inline GroundTruth load_ground_truth(const std::string& path) {
    io_detail::Reader r(path);
    r.magic("HGT1");
    const auto count = r.scalar<std::uint32_t>();
    GroundTruth gt;
    gt.k = r.scalar<std::uint32_t>();
    gt.ids.resize(count);
    gt.distances.resize(count);
    for (auto& row : gt.ids) row = r.array<std::uint32_t>(gt.k);
    for (auto& row : gt.distances) row = r.array<float>(gt.k);
    r.expect_eof();
    return gt;
}

// ---------------------------------------------------------------------------
// Qrels TSV
// ---------------------------------------------------------------------------

inline void save_qrels(const std::string& path, const Qrels& qrels) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open " + path + " for writing", 0);
    for (const auto& [qid, docs] : qrels)
        for (const auto& [doc, grade] : docs)
            out << qid << '\t' << doc << '\t' << grade << '\n';
}

inline Qrels load_qrels(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path, 0);
    Qrels qrels;
    std::string line;
    std::uint64_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::uint32_t qid, doc, grade;
        if (!(ss >> qid >> doc >> grade))
            throw ParseError("malformed qrels line " + std::to_string(lineno) + " in " + path,
                             lineno);
        qrels[qid][doc] = grade;
    }
    return qrels;
}

// ---------------------------------------------------------------------------
// Index file
// ---------------------------------------------------------------------------

inline void save_index(const std::string& path, const HybridGraph& g) {
    io_detail::Writer w(path);
    w.magic("HIX1");
    w.scalar<std::uint32_t>(1);  // version
    const auto& s = g.store();
    w.scalar<std::uint32_t>(s.dense_dim());
    w.scalar<std::uint32_t>(s.sparse_dim());
    w.scalar<std::uint32_t>(g.m());
    w.scalar<float>(g.level_lambda());
    w.scalar<float>(g.params().norm_denominator);
    w.scalar<float>(g.params().gamma);
    w.scalar<float>(g.params().alpha);
    w.scalar<float>(g.prune().ratio);
    w.scalar<std::uint32_t>(std::uint32_t(g.stage()));
    w.scalar<std::uint8_t>(s.normalized() ? 1 : 0);

    // Embedded store.
    w.scalar<std::uint32_t>(s.count());
    w.array(s.dense_data());
    w.scalar<std::uint64_t>(std::uint64_t(s.sparse_indices().size()));
    w.array(s.indptr());
    w.array(s.sparse_indices());
    w.array(s.sparse_values());

    // Graph.
    w.scalar<std::uint32_t>(g.entry_point());
    w.scalar<std::int32_t>(g.max_level());
    w.array(g.levels());
    for (std::uint32_t id = 0; id < s.count(); ++id) {
        for (std::uint32_t l = 0; l <= g.node_level(id); ++l) {
            const auto& nb = g.neighbors(id, l);
            w.scalar<std::uint32_t>(std::uint32_t(nb.size()));
            w.array(nb);
        }
    }
}

inline HybridGraph load_index(const std::string& path) {
    io_detail::Reader r(path);
    r.magic("HIX1");
    const auto version = r.scalar<std::uint32_t>();
    if (version != 1)
        throw ParseError("unsupported index version " + std::to_string(version), r.offset());
    const auto dense_dim = r.scalar<std::uint32_t>();
    const auto sparse_dim = r.scalar<std::uint32_t>();
    const auto m = r.scalar<std::uint32_t>();
    const auto level_lambda = r.scalar<float>();
    AlignmentParams params;
    params.norm_denominator = r.scalar<float>();
    params.gamma = r.scalar<float>();
    params.alpha = r.scalar<float>();
    PruneConfig prune;
    prune.ratio = r.scalar<float>();
    const auto stage = BuildStage(r.scalar<std::uint32_t>());
    const bool normalized = r.scalar<std::uint8_t>() != 0;

    const auto count = r.scalar<std::uint32_t>();
    auto dense = r.array<float>(std::size_t(count) * dense_dim);
    const auto nnz = r.scalar<std::uint64_t>();
    auto indptr = r.array<std::uint64_t>(std::size_t(count) + 1);
    auto indices = r.array<std::uint32_t>(nnz);
    auto values = r.array<float>(nnz);
    DocumentStore store = DocumentStore::from_raw(dense_dim, sparse_dim, count,
                                                  std::move(dense), std::move(indptr),
                                                  std::move(indices), std::move(values),
                                                  normalized);

    const auto entry = r.scalar<std::uint32_t>();
    const auto max_level = r.scalar<std::int32_t>();
    auto levels = r.array<std::uint32_t>(count);
    std::vector<std::vector<std::vector<std::uint32_t>>> links(count);
    for (std::uint32_t id = 0; id < count; ++id) {
        links[id].resize(levels[id] + 1);
        for (std::uint32_t l = 0; l <= levels[id]; ++l) {
            const auto deg = r.scalar<std::uint32_t>();
            if (deg > 2 * m)
                throw ParseError("degree exceeds layer capacity in " + path, r.offset());
            links[id][l] = r.array<std::uint32_t>(deg);
        }
    }
    r.expect_eof();

    auto g = HybridGraph::from_parts(std::move(store), params, m, level_lambda, prune, stage,
                                     entry, max_level, std::move(levels), std::move(links));
    g.audit();
    return g;
}

}  // namespace hybridann
