#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "hybridann/distance.hpp"
#include "hybridann/types.hpp"

namespace hybridann {

/// Columnar store of candidate vectors: a contiguous row-major dense block
/// plus a CSR triple (values / indices / row pointers) for the sparse halves.
class DocumentStore {
public:
    DocumentStore() = default;
    DocumentStore(std::uint32_t dense_dim, std::uint32_t sparse_dim)
        : dense_dim_(dense_dim), sparse_dim_(sparse_dim) {}

    std::uint32_t count() const { return count_; }
    std::uint32_t dense_dim() const { return dense_dim_; }
    std::uint32_t sparse_dim() const { return sparse_dim_; }
    bool normalized() const { return normalized_; }

    std::span<const float> dense_row(std::uint32_t i) const {
        return {dense_.data() + std::size_t(i) * dense_dim_, dense_dim_};
    }

    SparseView sparse_row(std::uint32_t i) const {
        const std::uint64_t b = indptr_[i], e = indptr_[i + 1];
        return {sparse_indices_.data() + b, sparse_values_.data() + b, std::size_t(e - b)};
    }

    void add(const HybridVector& v) {
        if (v.dense.size() != dense_dim_)
            throw DimensionError("dense row length " + std::to_string(v.dense.size()) +
                                 " != store dim " + std::to_string(dense_dim_));
        check_sparse(v.sparse);
        dense_.insert(dense_.end(), v.dense.begin(), v.dense.end());
        sparse_indices_.insert(sparse_indices_.end(), v.sparse.indices.begin(),
                               v.sparse.indices.end());
        sparse_values_.insert(sparse_values_.end(), v.sparse.values.begin(),
                              v.sparse.values.end());
        indptr_.push_back(sparse_indices_.size());
        ++count_;
    }

    HybridVector row(std::uint32_t i) const {
        HybridVector v;
        auto d = dense_row(i);
        v.dense.assign(d.begin(), d.end());
        auto s = sparse_row(i);
        v.sparse.indices.assign(s.indices, s.indices + s.nnz);
        v.sparse.values.assign(s.values, s.values + s.nnz);
        return v;
    }

    /// Divide every stored sparse value by `denominator`. One-shot: a second
    /// attempt is a state error.
    void normalize_sparse(float denominator) {
        if (normalized_) throw StateError("store sparse values already normalized");
        if (!(denominator > 0.0f)) throw CalibrationError("norm denominator must be > 0");
        for (float& v : sparse_values_) v /= denominator;
        normalized_ = true;
    }

    /// Prune every stored sparse row in place.
    void prune_sparse_rows(const PruneConfig& cfg) {
        cfg.validate();
        if (cfg.ratio == 0.0f) return;
        std::vector<std::uint64_t> new_ptr;
        new_ptr.reserve(indptr_.size());
        new_ptr.push_back(0);
        std::vector<std::uint32_t> new_idx;
        std::vector<float> new_val;
        new_idx.reserve(sparse_indices_.size());
        new_val.reserve(sparse_values_.size());
        for (std::uint32_t i = 0; i < count_; ++i) {
            auto s = sparse_row(i);
            SparseVector row;
            row.indices.assign(s.indices, s.indices + s.nnz);
            row.values.assign(s.values, s.values + s.nnz);
            SparseVector kept = prune_sparse(row, cfg);
            new_idx.insert(new_idx.end(), kept.indices.begin(), kept.indices.end());
            new_val.insert(new_val.end(), kept.values.begin(), kept.values.end());
            new_ptr.push_back(new_idx.size());
        }
        sparse_indices_ = std::move(new_idx);
        sparse_values_ = std::move(new_val);
        indptr_ = std::move(new_ptr);
    }

    float max_sparse_magnitude() const {
        float best = 0.0f;
        for (std::uint32_t i = 0; i < count_; ++i)
            best = std::max(best, sparse_magnitude(sparse_row(i)));
        return best;
    }

    /// Re-check CSR invariants; used after loading from disk.
    void validate() const {
        if (indptr_.size() != std::size_t(count_) + 1)
            throw StateError("indptr length mismatch");
        if (indptr_.front() != 0 || indptr_.back() != sparse_indices_.size())
            throw StateError("indptr endpoints inconsistent with nnz");
        for (std::size_t i = 1; i < indptr_.size(); ++i)
            if (indptr_[i] < indptr_[i - 1]) throw StateError("indptr not monotone");
        for (std::uint32_t r = 0; r < count_; ++r) {
            auto s = sparse_row(r);
            for (std::size_t j = 0; j < s.nnz; ++j) {
                if (s.indices[j] >= sparse_dim_)
                    throw StateError("sparse index out of range in row " + std::to_string(r));
                if (j > 0 && s.indices[j] <= s.indices[j - 1])
                    throw StateError("sparse indices not strictly increasing in row " +
                                     std::to_string(r));
                if (!std::isfinite(s.values[j]))
                    throw StateError("non-finite sparse value in row " + std::to_string(r));
            }
        }
        if (dense_.size() != std::size_t(count_) * dense_dim_)
            throw StateError("dense block size mismatch");
    }

    // Raw access for serialization.
    const std::vector<float>& dense_data() const { return dense_; }
    const std::vector<std::uint64_t>& indptr() const { return indptr_; }
    const std::vector<std::uint32_t>& sparse_indices() const { return sparse_indices_; }
    const std::vector<float>& sparse_values() const { return sparse_values_; }

    static DocumentStore from_raw(std::uint32_t dense_dim, std::uint32_t sparse_dim,
                                  std::uint32_t count, std::vector<float> dense,
                                  std::vector<std::uint64_t> indptr,
                                  std::vector<std::uint32_t> idx, std::vector<float> val,
                                  bool normalized) {
        DocumentStore s(dense_dim, sparse_dim);
        s.count_ = count;
        s.dense_ = std::move(dense);
        s.indptr_ = std::move(indptr);
        s.sparse_indices_ = std::move(idx);
        s.sparse_values_ = std::move(val);
        s.normalized_ = normalized;
        s.validate();
        return s;
    }

private:
    void check_sparse(const SparseVector& v) const {
        if (v.indices.size() != v.values.size())
            throw DimensionError("sparse index/value length mismatch");
        for (std::size_t j = 0; j < v.indices.size(); ++j) {
            if (v.indices[j] >= sparse_dim_)
                throw DimensionError("sparse index " + std::to_string(v.indices[j]) +
                                     " >= dim " + std::to_string(sparse_dim_));
            if (j > 0 && v.indices[j] <= v.indices[j - 1])
                throw DimensionError("sparse indices must be strictly increasing");
            if (!std::isfinite(v.values[j])) throw DimensionError("non-finite sparse value");
        }
    }

    std::uint32_t dense_dim_ = 0;
    std::uint32_t sparse_dim_ = 0;
    std::uint32_t count_ = 0;
    std::vector<float> dense_;
    std::vector<std::uint64_t> indptr_{0};
    std::vector<std::uint32_t> sparse_indices_;
    std::vector<float> sparse_values_;
    bool normalized_ = false;
};

/// Normalize a query's sparse half by the stored denominator. Queries are
/// unknown at calibration time, so this happens lazily at query time.
inline HybridVector prepare_query(const HybridVector& q, const AlignmentParams& p) {
    HybridVector out = q;
    for (float& v : out.sparse.values) v /= p.norm_denominator;
    return out;
}

}  // namespace hybridann
