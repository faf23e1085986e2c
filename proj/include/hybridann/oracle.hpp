#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "hybridann/distance.hpp"
#include "hybridann/store.hpp"
#include "hybridann/types.hpp"

namespace hybridann {

/// Graded relevance judgments: query id -> (doc id -> grade >= 0).
using Qrels = std::map<std::uint32_t, std::map<std::uint32_t, std::uint32_t>>;

/// Exhaustive hybrid top-k over the whole store. Ground truth for every
/// approximate path; shares the distance kernels with the index so there is
/// a single definition of the hybrid distance.
/// `q` must already have its sparse half normalized (see prepare_query).
inline ResultSet brute_force_topk(const DocumentStore& store, const HybridVector& q,
                                  const AlignmentParams& params, std::uint32_t k) {
    params.validate();
    const std::uint32_t n = store.count();
    const std::uint32_t kk = std::min(k, n);
    std::vector<std::pair<float, std::uint32_t>> all(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        const float dd = dense_ip_distance(q.dense, store.dense_row(i));
        const float sd = sparse_ip_distance(q.sparse, store.sparse_row(i));
        all[i] = {hybrid_combine(dd, sd, params), i};
    }
    std::partial_sort(all.begin(), all.begin() + kk, all.end());
    ResultSet out(kk);
    for (std::uint32_t i = 0; i < kk; ++i) out[i] = {all[i].second, all[i].first};
    return out;
}

/// Exhaustive dense-only top-k (alpha = 1 ranking).
inline ResultSet brute_force_dense_topk(const DocumentStore& store, const DenseVector& q,
                                        std::uint32_t k) {
    AlignmentParams p;
    p.alpha = 1.0f;
    HybridVector hq;
    hq.dense = q;
    return brute_force_topk(store, hq, p, k);
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

inline double recall_at_k(const std::vector<std::uint32_t>& retrieved,
                          const std::vector<std::uint32_t>& truth, std::uint32_t k) {
    if (retrieved.size() < k || truth.size() < k)
        throw DimensionError("recall@k: k exceeds a result list length");
    std::vector<std::uint32_t> a(retrieved.begin(), retrieved.begin() + k);
    std::vector<std::uint32_t> b(truth.begin(), truth.begin() + k);
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::vector<std::uint32_t> inter;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(inter));
    return double(inter.size()) / double(k);
}

/// Label-based recall@k: fraction of the relevant set found in the top k,
/// denominator capped at k.
inline double label_recall_at_k(const std::vector<std::uint32_t>& retrieved,
                                const std::map<std::uint32_t, std::uint32_t>& rels,
                                std::uint32_t k) {
    std::size_t relevant = 0, hit = 0;
    for (auto& [doc, grade] : rels)
        if (grade > 0) ++relevant;
    if (relevant == 0) return 0.0;
    const std::size_t cut = std::min<std::size_t>(k, retrieved.size());
    for (std::size_t i = 0; i < cut; ++i) {
        auto it = rels.find(retrieved[i]);
        if (it != rels.end() && it->second > 0) ++hit;
    }
    return double(hit) / double(std::min<std::size_t>(relevant, k));
}

/// DCG with gain 2^rel - 1 and log2(rank+1) discount, normalized by the
/// ideal DCG truncated at the cutoff.
inline double ndcg_at_k(const std::vector<std::uint32_t>& retrieved,
                        const std::map<std::uint32_t, std::uint32_t>& rels,
                        std::uint32_t k = 10) {
    if (rels.empty()) return 0.0;
    double dcg = 0.0;
    const std::size_t cut = std::min<std::size_t>(k, retrieved.size());
    for (std::size_t i = 0; i < cut; ++i) {
        auto it = rels.find(retrieved[i]);
        if (it == rels.end()) continue;
        dcg += (std::pow(2.0, double(it->second)) - 1.0) / std::log2(double(i) + 2.0);
    }
    std::vector<std::uint32_t> grades;
    for (auto& [doc, g] : rels) grades.push_back(g);
    std::sort(grades.rbegin(), grades.rend());
    double idcg = 0.0;
    for (std::size_t i = 0; i < std::min<std::size_t>(k, grades.size()); ++i)
        idcg += (std::pow(2.0, double(grades[i])) - 1.0) / std::log2(double(i) + 2.0);
    return idcg > 0.0 ? dcg / idcg : 0.0;
}

/// Reciprocal rank of the first relevant doc within the top k, else 0.
inline double mrr_at_k(const std::vector<std::uint32_t>& retrieved,
                       const std::map<std::uint32_t, std::uint32_t>& rels,
                       std::uint32_t k = 10) {
    const std::size_t cut = std::min<std::size_t>(k, retrieved.size());
    for (std::size_t i = 0; i < cut; ++i) {
        auto it = rels.find(retrieved[i]);
        if (it != rels.end() && it->second > 0) return 1.0 / double(i + 1);
    }
    return 0.0;
}

inline std::vector<std::uint32_t> result_ids(const ResultSet& r) {
    std::vector<std::uint32_t> ids(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) ids[i] = r[i].id;
    return ids;
}

}  // namespace hybridann
