#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <mutex>
#include <random>
#include <thread>
#include <unordered_set>
#include <vector>

#include "hybridann/beam.hpp"
#include "hybridann/distance.hpp"
#include "hybridann/store.hpp"
#include "hybridann/types.hpp"

namespace hybridann {

enum class BuildStage : std::uint32_t { dense_built = 0, hybrid_refined = 1 };
enum class BuildMode { two_stage, naive_hybrid, dense_only };

struct BuildConfig {
    std::uint32_t m = 32;
    std::uint32_t cef_dense = 200;
    std::uint32_t cef_hybrid = 32;
    float level_lambda = 0.0f;  // 0 -> 1/ln(m)
    std::uint32_t threads = 1;
    PruneConfig prune;
    std::uint64_t seed = 100;
    bool strict_m = false;  // literal "select M" in refinement instead of 2m

    void validate() const {
        if (m < 2) throw ConfigError("m must be >= 2");
        if (cef_dense < m) throw ConfigError("cef_dense must be >= m");
        if (cef_hybrid < 1) throw ConfigError("cef_hybrid must be >= 1");
        if (threads < 1) throw ConfigError("threads must be >= 1");
        prune.validate();
    }

    float lambda() const {
        return level_lambda > 0.0f ? level_lambda : 1.0f / std::log(float(m));
    }
};

/// Kernel-call and timing counters, split by construction stage.
struct BuildStats {
    std::uint64_t stage1_dense_calls = 0;
    std::uint64_t stage1_sparse_calls = 0;
    std::uint64_t stage2_dense_calls = 0;
    std::uint64_t stage2_sparse_calls = 0;
    double stage1_seconds = 0.0;
    double stage2_seconds = 0.0;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Level drawn per node from its own seeded stream, so the assignment does
// not depend on insertion interleaving across threads.
inline std::uint32_t draw_level(std::uint64_t seed, std::uint32_t id, float lambda) {
    std::mt19937_64 rng(splitmix64(seed ^ (std::uint64_t(id) << 1)));
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    double u = uni(rng);
    while (u <= 0.0) u = uni(rng);
    return std::uint32_t(-std::log(u) * double(lambda));
}

}  // namespace detail

/// Multi-layer navigable-small-world graph over a DocumentStore.
class HybridGraph {
public:
    HybridGraph(DocumentStore store, AlignmentParams params, const BuildConfig& cfg)
        : store_(std::move(store)), params_(params), m_(cfg.m),
          level_lambda_(cfg.lambda()), prune_(cfg.prune) {
        const std::uint32_t n = store_.count();
        levels_.resize(n);
        links_.resize(n);
    }

    const DocumentStore& store() const { return store_; }
    const AlignmentParams& params() const { return params_; }
    std::uint32_t m() const { return m_; }
    float level_lambda() const { return level_lambda_; }
    const PruneConfig& prune() const { return prune_; }
    BuildStage stage() const { return stage_; }
    std::uint32_t entry_point() const { return entry_; }
    std::int32_t max_level() const { return max_level_; }
    std::uint32_t node_level(std::uint32_t id) const { return levels_[id]; }
    std::uint32_t count() const { return store_.count(); }

    std::uint32_t layer0_capacity() const { return 2 * m_; }
    std::uint32_t capacity(std::uint32_t layer) const { return layer == 0 ? 2 * m_ : m_; }

    /// Immutable read; only valid once construction has finished.
    const std::vector<std::uint32_t>& neighbors(std::uint32_t id, std::uint32_t layer) const {
        return links_[id][layer];
    }

    /// Full structural audit of the graph invariants.
    void audit() const {
        const std::uint32_t n = count();
        if (n == 0) return;
        if (entry_ >= n) throw StateError("entry point out of range");
        if (levels_[entry_] != std::uint32_t(max_level_))
            throw StateError("entry point does not sit on the maximal level");
        for (std::uint32_t id = 0; id < n; ++id) {
            if (levels_[id] > std::uint32_t(max_level_))
                throw StateError("node level exceeds max level");
            if (links_[id].size() != std::size_t(levels_[id]) + 1)
                throw StateError("layer list count mismatch for node " + std::to_string(id));
            for (std::uint32_t l = 0; l <= levels_[id]; ++l) {
                const auto& nb = links_[id][l];
                if (nb.size() > capacity(l))
                    throw StateError("degree bound violated at node " + std::to_string(id) +
                                     " layer " + std::to_string(l));
                std::unordered_set<std::uint32_t> seen;
                for (std::uint32_t x : nb) {
                    if (x >= n) throw StateError("edge endpoint out of range");
                    if (x == id) throw StateError("self loop at node " + std::to_string(id));
                    if (!seen.insert(x).second)
                        throw StateError("duplicate neighbor at node " + std::to_string(id));
                    if (levels_[x] < l)
                        throw StateError("edge to node missing from layer " +
                                         std::to_string(l));
                }
            }
        }
    }

    static HybridGraph from_parts(DocumentStore store, AlignmentParams params,
                                  std::uint32_t m, float level_lambda, PruneConfig prune,
                                  BuildStage stage, std::uint32_t entry,
                                  std::int32_t max_level, std::vector<std::uint32_t> levels,
                                  std::vector<std::vector<std::vector<std::uint32_t>>> links) {
        BuildConfig cfg;
        cfg.m = m;
        cfg.level_lambda = level_lambda;
        cfg.prune = prune;
        HybridGraph g(std::move(store), params, cfg);
        g.stage_ = stage;
        g.entry_ = entry;
        g.max_level_ = max_level;
        g.levels_ = std::move(levels);
        g.links_ = std::move(links);
        return g;
    }

    // Serialization access.
    const std::vector<std::uint32_t>& levels() const { return levels_; }
    const std::vector<std::vector<std::vector<std::uint32_t>>>& links() const {
        return links_;
    }

private:
    friend class GraphBuilder;

    DocumentStore store_;
    AlignmentParams params_;
    std::uint32_t m_;
    float level_lambda_;
    PruneConfig prune_;
    BuildStage stage_ = BuildStage::dense_built;
    std::uint32_t entry_ = 0;
    std::int32_t max_level_ = -1;
    std::vector<std::uint32_t> levels_;
    // links_[node][layer] -> neighbor ids; layer 0 holds up to 2m, others m.
    std::vector<std::vector<std::vector<std::uint32_t>>> links_;
};

/// Incremental construction plus the hybrid refinement pass. Multiple worker
/// threads insert distinct nodes; neighbor lists are guarded by a striped
/// lock pool so readers never observe a torn list.
class GraphBuilder {
public:
    GraphBuilder(HybridGraph& g, const BuildConfig& cfg) : g_(g), cfg_(cfg) {
        cfg_.validate();
    }

    /// Stage 1: standard HNSW insertion under the dense kernel only.
    void build_dense(BuildStats* stats) { build_all(/*hybrid=*/false, stats); }

    /// Naive baseline: same insertion loop under the full hybrid kernel.
    void build_naive_hybrid(BuildStats* stats) { build_all(/*hybrid=*/true, stats); }

    /// Stage 2: for every node, a short hybrid-distance search seeded at the
    /// node itself re-selects its layer-0 neighbors; reverse edges are then
    /// re-inserted with heuristic re-pruning. Upper layers are untouched.
    /// Reverse insertion is batched into a second pass: every L0 list starts
    /// this stage at capacity, so per-edge re-pruning would pay the full
    /// heuristic once per incoming edge instead of once per node.
    void refine_hybrid(BuildStats* stats) {
        if (g_.stage_ != BuildStage::dense_built)
            throw StateError("refine_hybrid_stage requires a dense_built graph");
        if (g_.count() == 0) throw StateError("cannot refine an empty graph");
        const auto t0 = std::chrono::steady_clock::now();
        const std::uint32_t n = g_.count();
        const std::uint32_t limit = cfg_.strict_m ? cfg_.m : 2 * cfg_.m;

        reverse_requests_.assign(n, {});
        run_workers(n, [&](std::uint32_t id) { refine_node(id, limit); });
        run_workers(n, [&](std::uint32_t id) { merge_reverse(id, limit); });
        reverse_requests_.clear();
        reverse_requests_.shrink_to_fit();

        g_.stage_ = BuildStage::hybrid_refined;
        if (stats) {
            stats->stage2_seconds =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            stats->stage2_dense_calls = dense_calls_.load();
            stats->stage2_sparse_calls = sparse_calls_.load();
        }
    }

private:
    static constexpr std::size_t kLockStripes = 2048;

    float dist(std::uint32_t a, std::uint32_t b, bool hybrid) {
        const auto& s = g_.store_;
        const float dd = dense_ip_distance(s.dense_row(a), s.dense_row(b));
        dense_calls_.fetch_add(1, std::memory_order_relaxed);
        if (!hybrid) return dd;
        const float sd = sparse_ip_distance(s.sparse_row(a), s.sparse_row(b));
        sparse_calls_.fetch_add(1, std::memory_order_relaxed);
        return hybrid_combine(dd, sd, g_.params_);
    }

    std::vector<std::uint32_t> neighbors_copy(std::uint32_t id, std::uint32_t layer) {
        std::lock_guard<std::mutex> lk(locks_[id % kLockStripes]);
        return g_.links_[id][layer];
    }

    void run_workers(std::uint32_t n, const std::function<void(std::uint32_t)>& fn) {
        if (cfg_.threads <= 1) {
            for (std::uint32_t id = 0; id < n; ++id) fn(id);
            return;
        }
        std::atomic<std::uint32_t> next{0};
        std::vector<std::thread> pool;
        for (std::uint32_t t = 0; t < cfg_.threads; ++t) {
            pool.emplace_back([&] {
                for (std::uint32_t id = next.fetch_add(1); id < n; id = next.fetch_add(1))
                    fn(id);
            });
        }
        for (auto& th : pool) th.join();
    }

    void build_all(bool hybrid, BuildStats* stats) {
        if (g_.count() == 0) throw StateError("cannot build over an empty store");
        const auto t0 = std::chrono::steady_clock::now();
        const std::uint32_t n = g_.count();
        for (std::uint32_t id = 0; id < n; ++id)
            g_.levels_[id] = detail::draw_level(cfg_.seed, id, cfg_.lambda());

        // First node seeds the graph outside the worker loop.
        g_.links_[0].assign(g_.levels_[0] + 1, {});
        g_.entry_ = 0;
        g_.max_level_ = std::int32_t(g_.levels_[0]);
        inserted_count_.store(1);

        run_workers(n, [&](std::uint32_t id) {
            if (id == 0) return;
            insert(id, hybrid);
        });

        g_.stage_ = hybrid ? BuildStage::hybrid_refined : BuildStage::dense_built;
        if (stats) {
            stats->stage1_seconds =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            stats->stage1_dense_calls = dense_calls_.load();
            stats->stage1_sparse_calls = sparse_calls_.load();
            dense_calls_.store(0);
            sparse_calls_.store(0);
        }
    }

    void insert(std::uint32_t id, bool hybrid) {
        const std::uint32_t level = g_.levels_[id];
        {
            std::lock_guard<std::mutex> lk(global_);
            g_.links_[id].assign(level + 1, {});
        }
        auto d = [&](std::uint32_t other) { return dist(id, other, hybrid); };

        // Snapshot of the current entry; a taller node may land concurrently,
        // which only makes the descent start lower than optimal.
        std::uint32_t ep;
        std::int32_t top;
        {
            std::lock_guard<std::mutex> lk(global_);
            ep = g_.entry_;
            top = g_.max_level_;
        }

        detail::ScoredNode cur{d(ep), ep};
        for (std::int32_t l = top; l > std::int32_t(level); --l)
            cur = detail::greedy_descend(cur, d, [&](std::uint32_t x) {
                return neighbors_copy(x, std::uint32_t(l));
            });

        detail::VisitedTable visited(g_.count());
        for (std::int32_t l = std::min<std::int32_t>(std::int32_t(level), top); l >= 0; --l) {
            detail::BeamState st;
            visited.reset();
            visited.test_and_set(cur.second);
            st.c.push(cur);
            st.w.push(cur);
            best_first(st, visited, cfg_.cef_dense, 1.0f, d, [&](std::uint32_t x) {
                return neighbors_copy(x, std::uint32_t(l));
            });
            auto cands = detail::drain_sorted(st.w);
            std::erase_if(cands, [&](const auto& p) { return p.second == id; });
            auto selected = heuristic_select(cands, cfg_.m, [&](std::uint32_t a,
                                                                std::uint32_t b) {
                return dist(a, b, hybrid);
            });
            {
                std::lock_guard<std::mutex> lk(locks_[id % kLockStripes]);
                g_.links_[id][l] = selected;
            }
            for (std::uint32_t nb : selected) connect_back(nb, id, std::uint32_t(l), hybrid);
            if (!cands.empty()) cur = cands.front();
        }

        {
            std::lock_guard<std::mutex> lk(global_);
            if (std::int32_t(level) > g_.max_level_) {
                g_.max_level_ = std::int32_t(level);
                g_.entry_ = id;
            }
        }
        inserted_count_.fetch_add(1);
    }

    // Append `id` to nb's list on `layer`; heuristic re-prune on overflow.
    void connect_back(std::uint32_t nb, std::uint32_t id, std::uint32_t layer, bool hybrid) {
        std::lock_guard<std::mutex> lk(locks_[nb % kLockStripes]);
        auto& list = g_.links_[nb][layer];
        for (std::uint32_t x : list)
            if (x == id) return;
        const std::uint32_t cap = g_.capacity(layer);
        if (list.size() < cap) {
            list.push_back(id);
            return;
        }
        std::vector<detail::ScoredNode> cands;
        cands.reserve(list.size() + 1);
        cands.emplace_back(dist(nb, id, hybrid), id);
        for (std::uint32_t x : list) cands.emplace_back(dist(nb, x, hybrid), x);
        std::sort(cands.begin(), cands.end());
        list = heuristic_select(cands, cap, [&](std::uint32_t a, std::uint32_t b) {
            return dist(a, b, hybrid);
        });
    }

    void refine_node(std::uint32_t id, std::uint32_t limit) {
        // Selection pool is every node scored by the refinement search, not
        // just the final queue: with cef_hybrid < 2m the queue alone could
        // never fill the L0 degree budget and lists would only ever shrink.
        const auto old_list = neighbors_copy(id, 0);
        std::vector<detail::ScoredNode> scored;
        auto d = [&](std::uint32_t other) {
            const float dd = dist(id, other, /*hybrid=*/true);
            scored.emplace_back(dd, other);
            return dd;
        };
        detail::VisitedTable visited(g_.count());
        visited.reset();
        visited.test_and_set(id);  // a node cannot select itself
        detail::BeamState st;
        const float self = d(id);
        st.c.emplace(self, id);
        st.w.emplace(self, id);
        best_first(st, visited, cfg_.cef_hybrid, 1.0f, d,
                   [&](std::uint32_t x) { return neighbors_copy(x, 0); });
        std::sort(scored.begin(), scored.end());
        std::erase_if(scored, [&](const auto& p) { return p.second == id; });
        // Bound the diversity pass: keep the 4m hybrid-nearest plus all of
        // the node's pre-refinement neighbors (they carry the long-range
        // reachability the local search cannot rediscover).
        const std::size_t cut = std::min<std::size_t>(scored.size(), 4 * cfg_.m);
        std::vector<detail::ScoredNode> cands(scored.begin(), scored.begin() + cut);
        if (cut < scored.size()) {
            std::unordered_set<std::uint32_t> old_ids(old_list.begin(), old_list.end());
            for (std::size_t i = 0; i < cut; ++i) old_ids.erase(cands[i].second);
            for (std::size_t i = cut; i < scored.size() && !old_ids.empty(); ++i)
                if (old_ids.erase(scored[i].second)) cands.push_back(scored[i]);
            std::sort(cands.begin(), cands.end());
        }
        auto selected = heuristic_select(cands, limit, [&](std::uint32_t a, std::uint32_t b) {
            return dist(a, b, /*hybrid=*/true);
        });
        {
            std::lock_guard<std::mutex> lk(locks_[id % kLockStripes]);
            g_.links_[id][0] = selected;
        }
        for (const auto& [dd, nb] : cands) {
            if (std::find(selected.begin(), selected.end(), nb) == selected.end()) continue;
            std::lock_guard<std::mutex> lk(locks_[nb % kLockStripes]);
            reverse_requests_[nb].emplace_back(dd, id);
        }
    }

    // Second refinement pass: fold the batched reverse edges into each
    // target's L0 list with a single heuristic re-prune per node.
    void merge_reverse(std::uint32_t id, std::uint32_t limit) {
        auto& incoming = reverse_requests_[id];
        if (incoming.empty()) return;
        const std::uint32_t cap = limit;
        std::lock_guard<std::mutex> lk(locks_[id % kLockStripes]);
        auto& list = g_.links_[id][0];
        std::vector<detail::ScoredNode> cands;
        cands.reserve(list.size() + incoming.size());
        for (std::uint32_t x : list) cands.emplace_back(dist(id, x, /*hybrid=*/true), x);
        std::unordered_set<std::uint32_t> present(list.begin(), list.end());
        for (const auto& [dd, src] : incoming)
            if (present.insert(src).second) cands.emplace_back(dd, src);
        if (cands.size() <= cap) {
            for (const auto& [dd, src] : cands)
                if (std::find(list.begin(), list.end(), src) == list.end())
                    list.push_back(src);
            return;
        }
        std::sort(cands.begin(), cands.end());
        list = heuristic_select(cands, cap, [&](std::uint32_t a, std::uint32_t b) {
            return dist(a, b, /*hybrid=*/true);
        });
    }

    HybridGraph& g_;
    BuildConfig cfg_;
    std::vector<std::vector<detail::ScoredNode>> reverse_requests_;
    std::mutex global_;
    std::array<std::mutex, kLockStripes> locks_;
    std::atomic<std::uint64_t> dense_calls_{0};
    std::atomic<std::uint64_t> sparse_calls_{0};
    std::atomic<std::uint32_t> inserted_count_{0};
};

inline HybridGraph build_dense_stage(DocumentStore store, const AlignmentParams& params,
                                     const BuildConfig& cfg, BuildStats* stats = nullptr) {
    cfg.validate();
    HybridGraph g(std::move(store), params, cfg);
    GraphBuilder b(g, cfg);
    b.build_dense(stats);
    return g;
}

inline void refine_hybrid_stage(HybridGraph& g, const BuildConfig& cfg,
                                BuildStats* stats = nullptr) {
    GraphBuilder b(g, cfg);
    b.refine_hybrid(stats);
}

/// Build an index in one of the three modes. Pruning (if configured) is
/// applied to the stored sparse rows first; the store's sparse half should
/// already be normalized when alignment is in play.
inline HybridGraph build_index(DocumentStore store, const AlignmentParams& params,
                               const BuildConfig& cfg, BuildMode mode,
                               BuildStats* stats = nullptr) {
    cfg.validate();
    params.validate();
    if (cfg.prune.ratio > 0.0f) store.prune_sparse_rows(cfg.prune);
    HybridGraph g(std::move(store), params, cfg);
    GraphBuilder b(g, cfg);
    switch (mode) {
        case BuildMode::dense_only:
            b.build_dense(stats);
            break;
        case BuildMode::naive_hybrid:
            b.build_naive_hybrid(stats);
            break;
        case BuildMode::two_stage:
            b.build_dense(stats);
            b.refine_hybrid(stats);
            break;
    }
    return g;
}

}  // namespace hybridann
