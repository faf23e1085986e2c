#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>

#include "hybridann/types.hpp"

namespace hybridann {

namespace detail {

// Dense dot with four interleaved 64-bit accumulators. The lane layout is
// fixed, so results are reproducible run to run on the same build.
inline double dense_dot(const float* a, const float* b, std::size_t n) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        s0 += double(a[i]) * double(b[i]);
        s1 += double(a[i + 1]) * double(b[i + 1]);
        s2 += double(a[i + 2]) * double(b[i + 2]);
        s3 += double(a[i + 3]) * double(b[i + 3]);
    }
    for (; i < n; ++i) s0 += double(a[i]) * double(b[i]);
    return (s0 + s1) + (s2 + s3);
}

}  // namespace detail

/// IP distance 1 - <a,b> over two dense vectors of equal length.
inline float dense_ip_distance(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size())
        throw DimensionError("dense dimension mismatch: " + std::to_string(a.size()) +
                             " vs " + std::to_string(b.size()));
    return float(1.0 - detail::dense_dot(a.data(), b.data(), a.size()));
}

/// IP distance over two sorted sparse vectors via a two-pointer merge.
/// Accumulation follows ascending coordinate order in a 64-bit register,
/// so the result matches a densified dot product bit for bit.
/// May be negative: un-normalized sparse IPs can exceed 1.
inline float sparse_ip_distance(SparseView a, SparseView b) {
    double acc = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.nnz && j < b.nnz) {
        const std::uint32_t ia = a.indices[i], ib = b.indices[j];
        if (ia < ib) {
            ++i;
        } else if (ib < ia) {
            ++j;
        } else {
            acc += double(a.values[i]) * double(b.values[j]);
            ++i;
            ++j;
        }
    }
    return float(1.0 - acc);
}

/// Blend pre-computed dense and sparse distances:
///   alpha * dense + (1 - alpha) * gamma * sparse
inline float hybrid_combine(float dense_dist, float sparse_dist, const AlignmentParams& p) {
    if (!(p.alpha >= 0.0f && p.alpha <= 1.0f))
        throw ConfigError("alpha must be in [0,1]");
    return p.alpha * dense_dist + (1.0f - p.alpha) * p.gamma * sparse_dist;
}

/// Full hybrid distance between two hybrid vectors whose sparse halves are
/// already normalized by the corpus denominator.
inline float hybrid_distance(const HybridVector& q, const HybridVector& d,
                             const AlignmentParams& p) {
    const float dd = dense_ip_distance(q.dense, d.dense);
    const float sd = sparse_ip_distance(q.sparse, d.sparse);
    return hybrid_combine(dd, sd, p);
}

inline float sparse_magnitude(SparseView v) {
    double acc = 0.0;
    for (std::size_t i = 0; i < v.nnz; ++i) acc += double(v.values[i]) * double(v.values[i]);
    return float(std::sqrt(acc));
}

/// Keep the ceil((1-ratio)*nnz) entries with the largest magnitude, ties
/// resolved toward the lower coordinate, output re-sorted by index.
inline SparseVector prune_sparse(const SparseVector& v, const PruneConfig& cfg) {
    cfg.validate();
    const std::size_t n = v.nnz();
    if (cfg.ratio == 0.0f || n == 0) return v;

    const auto keep = std::size_t(std::ceil((1.0 - double(cfg.ratio)) * double(n)));
    if (keep >= n) return v;

    std::vector<std::uint32_t> pos(n);
    std::iota(pos.begin(), pos.end(), 0u);
    auto by_weight = [&](std::uint32_t x, std::uint32_t y) {
        const float ax = std::fabs(v.values[x]), ay = std::fabs(v.values[y]);
        if (ax != ay) return ax > ay;
        return v.indices[x] < v.indices[y];
    };
    std::nth_element(pos.begin(), pos.begin() + keep - 1, pos.end(), by_weight);
    pos.resize(keep);
    std::sort(pos.begin(), pos.end());  // positions ascending == indices ascending

    SparseVector out;
    out.indices.reserve(keep);
    out.values.reserve(keep);
    for (std::uint32_t p : pos) {
        out.indices.push_back(v.indices[p]);
        out.values.push_back(v.values[p]);
    }
    return out;
}

}  // namespace hybridann
