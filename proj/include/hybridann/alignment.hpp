#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

#include "hybridann/oracle.hpp"
#include "hybridann/store.hpp"
#include "hybridann/types.hpp"

namespace hybridann {

/// Pre-sampling plan for calibration. Paper-scale guidance is <= 1% per side.
struct SamplePlan {
    double query_fraction = 0.01;
    double doc_fraction = 0.01;
    std::uint64_t seed = 42;
    std::uint32_t max_queries = 1000;
    std::uint32_t max_docs = 100000;

    void validate() const {
        if (!(query_fraction > 0.0 && query_fraction <= 1.0))
            throw ConfigError("query_fraction must be in (0,1]");
        if (!(doc_fraction > 0.0 && doc_fraction <= 1.0))
            throw ConfigError("doc_fraction must be in (0,1]");
    }
};

/// Candidate fusion weights to try; post-alignment optima sit near 0.5.
struct WeightSweep {
    std::vector<float> candidate_alphas = {0.3f, 0.4f, 0.45f, 0.5f, 0.55f, 0.6f, 0.7f};

    void validate() const {
        if (candidate_alphas.empty()) throw ConfigError("alpha sweep must be non-empty");
        for (float a : candidate_alphas)
            if (!(a >= 0.0f && a <= 1.0f)) throw ConfigError("sweep alpha outside [0,1]");
        if (!std::is_sorted(candidate_alphas.begin(), candidate_alphas.end()))
            throw ConfigError("sweep alphas must be sorted");
    }
};

/// Deterministic sample of `want = min(cap, ceil(fraction*n))` indices out of
/// [0,n), by partial Fisher-Yates on a seeded generator.
inline std::vector<std::uint32_t> sample_indices(std::uint32_t n, double fraction,
                                                 std::uint32_t cap, std::mt19937_64& rng) {
    auto want = std::uint64_t(std::ceil(fraction * double(n)));
    want = std::min<std::uint64_t>({want, cap, n});
    std::vector<std::uint32_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0u);
    for (std::uint64_t i = 0; i < want; ++i) {
        std::uniform_int_distribution<std::uint64_t> pick(i, n - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(want);
    std::sort(idx.begin(), idx.end());
    return idx;
}

/// Max Euclidean magnitude of the sparse halves over the corpus; the shared
/// normalization denominator for documents and (later) queries.
inline float compute_norm_denominator(const DocumentStore& store) {
    const float m = store.max_sparse_magnitude();
    if (!(m > 0.0f))
        throw CalibrationError("all sparse vectors are empty or zero; cannot normalize");
    return m;
}

inline float compute_norm_denominator(const std::vector<SparseVector>& docs) {
    float best = 0.0f;
    for (const auto& d : docs) best = std::max(best, sparse_magnitude(d));
    if (!(best > 0.0f))
        throw CalibrationError("all sparse vectors are empty or zero; cannot normalize");
    return best;
}

namespace detail {

// Nearest-rank 1%-quantile minus minimum of a distance list.
inline double distance_gap(std::vector<float> dists) {
    const std::size_t n = dists.size();
    if (n == 0) throw CalibrationError("empty distance list");
    const auto rank = std::size_t(std::ceil(0.01 * double(n)));  // 1-indexed
    std::sort(dists.begin(), dists.end());
    return double(dists[rank - 1]) - double(dists[0]);
}

}  // namespace detail

/// Gamma from per-query distance lists computed independently in the dense
/// and sparse spaces: mean (1%-quantile - min) gap in each space, then the
/// ratio dense/sparse.
inline float compute_gamma_from_distances(
    const std::vector<std::vector<float>>& dense_lists,
    const std::vector<std::vector<float>>& sparse_lists) {
    if (dense_lists.empty() || dense_lists.size() != sparse_lists.size())
        throw CalibrationError("gamma needs matching non-empty per-query distance lists");
    double dense_sum = 0.0, sparse_sum = 0.0;
    for (std::size_t i = 0; i < dense_lists.size(); ++i) {
        dense_sum += detail::distance_gap(dense_lists[i]);
        sparse_sum += detail::distance_gap(sparse_lists[i]);
    }
    const double dense_mean = dense_sum / double(dense_lists.size());
    const double sparse_mean = sparse_sum / double(sparse_lists.size());
    if (!(sparse_mean > 0.0))
        throw CalibrationError(
            "degenerate sparse distance distribution (zero mean gap); enlarge the sample");
    if (!(dense_mean > 0.0))
        throw CalibrationError(
            "degenerate dense distance distribution (zero mean gap); enlarge the sample");
    return float(dense_mean / sparse_mean);
}

/// Gamma over sampled hybrid vectors. Sparse halves must already be
/// normalized by the corpus denominator.
inline float compute_gamma(const std::vector<HybridVector>& sample_queries,
                           const std::vector<HybridVector>& sample_docs) {
    if (sample_queries.empty() || sample_docs.empty())
        throw CalibrationError("gamma needs non-empty query and doc samples");
    std::vector<std::vector<float>> dense_lists(sample_queries.size());
    std::vector<std::vector<float>> sparse_lists(sample_queries.size());
    for (std::size_t qi = 0; qi < sample_queries.size(); ++qi) {
        auto& dl = dense_lists[qi];
        auto& sl = sparse_lists[qi];
        dl.reserve(sample_docs.size());
        sl.reserve(sample_docs.size());
        for (const auto& d : sample_docs) {
            dl.push_back(dense_ip_distance(sample_queries[qi].dense, d.dense));
            sl.push_back(sparse_ip_distance(sample_queries[qi].sparse, d.sparse));
        }
    }
    return compute_gamma_from_distances(dense_lists, sparse_lists);
}

/// Pick the fusion weight by exact top-k search on the samples, scored by
/// label recall@k. Ties go to the alpha nearest 0.5, then the smaller one.
/// `sample_query_rels[i]` holds the judged docs for sample query i (by store
/// doc id).
inline float sweep_alpha(const std::vector<HybridVector>& sample_queries,
                         const DocumentStore& sample_store, const WeightSweep& sweep,
                         float gamma, std::uint32_t k,
                         const std::vector<std::map<std::uint32_t, std::uint32_t>>&
                             sample_query_rels) {
    sweep.validate();
    if (sample_query_rels.size() != sample_queries.size())
        throw ConfigError(
            "alpha sweep requires relevance labels per sampled query; pass qrels or accept "
            "the default alpha=0.5");
    float best_alpha = sweep.candidate_alphas.front();
    double best_score = -1.0;
    for (float alpha : sweep.candidate_alphas) {
        AlignmentParams p;
        p.gamma = gamma;
        p.alpha = alpha;
        double score = 0.0;
        for (std::size_t qi = 0; qi < sample_queries.size(); ++qi) {
            auto ids = result_ids(brute_force_topk(sample_store, sample_queries[qi], p, k));
            score += label_recall_at_k(ids, sample_query_rels[qi], k);
        }
        score /= double(sample_queries.size());
        const bool better =
            score > best_score ||
            (score == best_score &&
             (std::fabs(alpha - 0.5f) < std::fabs(best_alpha - 0.5f) ||
              (std::fabs(alpha - 0.5f) == std::fabs(best_alpha - 0.5f) && alpha < best_alpha)));
        if (better) {
            best_score = score;
            best_alpha = alpha;
        }
    }
    return best_alpha;
}

/// Full calibration record, including the sampling knobs that produced it.
struct CalibrationRecord {
    AlignmentParams params;
    std::uint64_t seed = 0;
    double query_fraction = 0.0;
    double doc_fraction = 0.0;
};

/// End-to-end calibration against an un-normalized store: denominator, then
/// gamma on normalized samples, then the alpha sweep (or 0.5 without labels).
inline CalibrationRecord calibrate(const DocumentStore& store,
                                   const std::vector<HybridVector>& queries,
                                   const SamplePlan& plan, const WeightSweep& sweep,
                                   std::uint32_t k, const Qrels* qrels) {
    plan.validate();
    if (store.count() == 0 || queries.empty())
        throw CalibrationError("calibration needs a non-empty store and query set");

    CalibrationRecord rec;
    rec.seed = plan.seed;
    rec.query_fraction = plan.query_fraction;
    rec.doc_fraction = plan.doc_fraction;
    rec.params.norm_denominator = compute_norm_denominator(store);

    std::mt19937_64 rng(plan.seed);
    const auto q_idx = sample_indices(std::uint32_t(queries.size()), plan.query_fraction,
                                      plan.max_queries, rng);
    const auto d_idx =
        sample_indices(store.count(), plan.doc_fraction, plan.max_docs, rng);

    std::vector<HybridVector> sq;
    sq.reserve(q_idx.size());
    AlignmentParams norm_only;
    norm_only.norm_denominator = rec.params.norm_denominator;
    for (auto qi : q_idx) sq.push_back(prepare_query(queries[qi], norm_only));

    DocumentStore sample_store(store.dense_dim(), store.sparse_dim());
    std::vector<HybridVector> sd;
    sd.reserve(d_idx.size());
    for (auto di : d_idx) {
        HybridVector row = store.row(di);
        if (!store.normalized())
            for (float& v : row.sparse.values) v /= rec.params.norm_denominator;
        sample_store.add(row);
        sd.push_back(std::move(row));
    }

    rec.params.gamma = compute_gamma(sq, sd);

    if (qrels != nullptr) {
        std::vector<std::map<std::uint32_t, std::uint32_t>> rels;
        rels.reserve(q_idx.size());
        for (std::size_t i = 0; i < q_idx.size(); ++i) {
            auto it = qrels->find(q_idx[i]);
            std::map<std::uint32_t, std::uint32_t> row =
                it == qrels->end() ? std::map<std::uint32_t, std::uint32_t>{} : it->second;
            // Remap judged doc ids onto sample-store positions; drop unjudged.
            std::map<std::uint32_t, std::uint32_t> remapped;
            for (std::size_t p = 0; p < d_idx.size(); ++p) {
                auto jt = row.find(d_idx[p]);
                if (jt != row.end()) remapped[std::uint32_t(p)] = jt->second;
            }
            rels.push_back(std::move(remapped));
        }
        rec.params.alpha = sweep_alpha(sq, sample_store, sweep, rec.params.gamma, k, rels);
    } else {
        rec.params.alpha = 0.5f;
    }
    rec.params.validate();
    return rec;
}

}  // namespace hybridann
