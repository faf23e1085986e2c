#pragma once

#include <algorithm>
#include <cstdint>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "hybridann/beam.hpp"
#include "hybridann/graph.hpp"
#include "hybridann/types.hpp"

namespace hybridann {

enum class SearchMode { two_stage, naive_hybrid, dense_only };

struct SearchConfig {
    std::uint32_t k = 10;
    std::uint32_t sef = 128;
    double tau_dense = 1.0;
    double tau_hybrid = 1.0;
    SearchMode mode = SearchMode::two_stage;
    bool fresh_stage2 = false;  // literal fresh stage-2 search instead of continuation

    void validate() const {
        if (k == 0) throw ConfigError("k must be >= 1");
        if (k > sef) throw ConfigError("k must be <= sef");
        if (!(tau_dense >= 0.0 && tau_dense <= 1.0))
            throw ConfigError("tau_dense must be in [0,1]");
        if (!(tau_hybrid >= 0.0 && tau_hybrid <= 1.0))
            throw ConfigError("tau_hybrid must be in [0,1]");
    }
};

struct SearchTrace {
    std::uint64_t dense_kernel_calls = 0;
    std::uint64_t sparse_kernel_calls = 0;
    std::uint64_t expansions_stage1 = 0;
    std::uint64_t expansions_stage2 = 0;
    // Sparse calls issued before the stage transition; 0 by construction in
    // two_stage and dense_only modes.
    std::uint64_t sparse_calls_before_transition = 0;
};

/// Re-score the result queue W and candidate queue C under the hybrid
/// distance at the stage boundary. Each id in W ∪ C is scored once; the
/// continuation entry is the minimum-hybrid element of W, appended to C if
/// not already present there.
struct TransitionResult {
    std::vector<detail::ScoredNode> w, c;
    detail::ScoredNode entry;
    std::uint64_t rescored = 0;
};

template <class HybridDist>
TransitionResult stage_transition(const std::vector<detail::ScoredNode>& w,
                                  const std::vector<detail::ScoredNode>& c,
                                  HybridDist&& hybrid_dist) {
    if (w.empty()) throw StateError("stage transition requires a non-empty result queue");
    std::unordered_map<std::uint32_t, float> scored;
    scored.reserve(w.size() + c.size());
    auto score = [&](std::uint32_t id) {
        auto it = scored.find(id);
        if (it != scored.end()) return it->second;
        const float d = hybrid_dist(id);
        scored.emplace(id, d);
        return d;
    };
    TransitionResult out;
    out.w.reserve(w.size());
    out.c.reserve(c.size() + 1);
    for (const auto& [d, id] : w) out.w.emplace_back(score(id), id);
    bool entry_in_c = false;
    out.entry = *std::min_element(out.w.begin(), out.w.end());
    for (const auto& [d, id] : c) {
        out.c.emplace_back(score(id), id);
        if (id == out.entry.second) entry_in_c = true;
    }
    if (!entry_in_c) out.c.push_back(out.entry);
    out.rescored = scored.size();
    return out;
}

namespace detail {

struct QueryDist {
    const HybridGraph& g;
    const HybridVector& q;
    SearchTrace& trace;

    float dense(std::uint32_t id) const {
        ++trace.dense_kernel_calls;
        return dense_ip_distance(q.dense, g.store().dense_row(id));
    }
    float sparse(std::uint32_t id) const {
        ++trace.sparse_kernel_calls;
        return sparse_ip_distance(q.sparse, g.store().sparse_row(id));
    }
    float hybrid(std::uint32_t id) const {
        return hybrid_combine(dense(id), sparse(id), g.params());
    }
};

inline ResultSet top_k_of(std::vector<ScoredNode> sorted_w, std::uint32_t k) {
    ResultSet out;
    const std::size_t take = std::min<std::size_t>(k, sorted_w.size());
    out.reserve(take);
    for (std::size_t i = 0; i < take; ++i)
        out.push_back({sorted_w[i].second, sorted_w[i].first});
    return out;
}

}  // namespace detail

/// Query-time search (graph must be immutable). The query's sparse half must
/// already be normalized by the stored denominator; see prepare_query.
inline std::pair<ResultSet, SearchTrace> search(const HybridGraph& g, const HybridVector& q,
                                                const SearchConfig& cfg) {
    cfg.validate();
    if (g.count() == 0) return {{}, {}};
    if (q.dense.size() != g.store().dense_dim())
        throw DimensionError("query dense dimension mismatch");

    SearchTrace trace;
    detail::QueryDist qd{g, q, trace};
    const bool naive = cfg.mode == SearchMode::naive_hybrid;
    auto stage1_dist = [&](std::uint32_t id) {
        return naive ? qd.hybrid(id) : qd.dense(id);
    };
    auto nbrs = [&](std::uint32_t layer) {
        return [&g, layer](std::uint32_t id) -> const std::vector<std::uint32_t>& {
            return g.neighbors(id, layer);
        };
    };

    // Upper-layer descent, ef=1 greedy.
    detail::ScoredNode cur{stage1_dist(g.entry_point()), g.entry_point()};
    for (std::int32_t l = g.max_level(); l >= 1; --l)
        cur = detail::greedy_descend(cur, stage1_dist, nbrs(std::uint32_t(l)));

    // L0 stage 1.
    detail::VisitedTable visited(g.count());
    visited.reset();
    visited.test_and_set(cur.second);
    detail::BeamState st;
    st.c.push(cur);
    st.w.push(cur);
    const double tau1 = naive ? cfg.tau_hybrid : cfg.tau_dense;
    best_first(st, visited, cfg.sef, tau1, stage1_dist, nbrs(0), &trace.expansions_stage1);

    if (naive) {
        return {detail::top_k_of(detail::drain_sorted(st.w), cfg.k), trace};
    }

    trace.sparse_calls_before_transition = trace.sparse_kernel_calls;

    // Transition: re-score W and C, pick the continuation entry.
    auto stage2_dist = [&](std::uint32_t id) {
        return cfg.mode == SearchMode::two_stage ? qd.hybrid(id) : qd.dense(id);
    };
    auto w_vec = detail::drain_sorted(st.w);
    auto c_vec = detail::drain_sorted(st.c);
    auto tr = stage_transition(w_vec, c_vec, stage2_dist);

    detail::BeamState st2;
    if (cfg.fresh_stage2) {
        visited.reset();
        visited.test_and_set(tr.entry.second);
        st2.w.push(tr.entry);
        st2.c.push(tr.entry);
    } else {
        for (const auto& p : tr.w) st2.w.push(p);
        for (const auto& p : tr.c) st2.c.push(p);
    }

    // L0 stage 2 under the stage-2 distance.
    best_first(st2, visited, cfg.sef, cfg.tau_hybrid, stage2_dist, nbrs(0),
               &trace.expansions_stage2);

    return {detail::top_k_of(detail::drain_sorted(st2.w), cfg.k), trace};
}

}  // namespace hybridann
