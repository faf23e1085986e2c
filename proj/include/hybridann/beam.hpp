#pragma once

#include <cstdint>
#include <limits>
#include <queue>
#include <utility>
#include <vector>

namespace hybridann {

/// Count-based early-termination rule: stop when the number of result-queue
/// insertions caused by the just-expanded node falls below sef*(1-tau).
/// At tau=1 the threshold is zero and the rule never fires, so termination
/// degenerates to the standard beam-search condition.
inline bool early_stop_check(std::uint32_t updates_this_expansion, std::uint32_t sef,
                             double tau) {
    // The epsilon keeps integer-valued thresholds exact: sef*(1-tau) lands a
    // few ulps off the intended rational (e.g. 100*(1-0.95) > 5) and an
    // integer update count sitting exactly on the threshold must not stop.
    return double(updates_this_expansion) < double(sef) * (1.0 - tau) - 1e-9;
}

namespace detail {

using ScoredNode = std::pair<float, std::uint32_t>;  // (distance, id), ties by id

// Epoch-stamped visited set; reset is O(1) after the first use.
class VisitedTable {
public:
    explicit VisitedTable(std::size_t n) : stamps_(n, 0) {}

    void reset() {
        if (++epoch_ == 0) {
            std::fill(stamps_.begin(), stamps_.end(), 0);
            epoch_ = 1;
        }
    }

    bool test_and_set(std::uint32_t id) {
        if (stamps_[id] == epoch_) return true;
        stamps_[id] = epoch_;
        return false;
    }

    bool test(std::uint32_t id) const { return stamps_[id] == epoch_; }

private:
    std::vector<std::uint32_t> stamps_;
    std::uint32_t epoch_ = 0;
};

using MaxHeap = std::priority_queue<ScoredNode>;
using MinHeap = std::priority_queue<ScoredNode, std::vector<ScoredNode>,
                                    std::greater<ScoredNode>>;

// Result queue W (max-heap, holds the best <= ef seen) and candidate queue C
// (min-heap of discovered, not yet expanded frontier).
struct BeamState {
    MaxHeap w;
    MinHeap c;
};

// Best-first beam search continuing from whatever is already in the state.
// `dist(id)` scores a node, `nbrs(id)` yields its adjacency on the target
// layer. Runs until the frontier is exhausted, the standard bound check
// fires, or the tau rule fires.
template <class Dist, class Nbrs>
void best_first(BeamState& st, VisitedTable& visited, std::uint32_t ef, double tau,
                Dist&& dist, Nbrs&& nbrs, std::uint64_t* expansions = nullptr) {
    while (!st.c.empty()) {
        const ScoredNode cur = st.c.top();
        if (st.w.size() >= ef && cur > st.w.top()) break;
        st.c.pop();
        if (expansions) ++*expansions;
        std::uint32_t updates = 0;
        for (std::uint32_t nb : nbrs(cur.second)) {
            if (visited.test_and_set(nb)) continue;
            const float d = dist(nb);
            if (st.w.size() < ef || ScoredNode{d, nb} < st.w.top()) {
                st.c.emplace(d, nb);
                st.w.emplace(d, nb);
                ++updates;
                if (st.w.size() > ef) st.w.pop();
            }
        }
        if (st.w.size() >= ef && early_stop_check(updates, ef, tau)) break;
    }
}

// Greedy 1-best descent on one layer, used on the upper layers.
template <class Dist, class Nbrs>
ScoredNode greedy_descend(ScoredNode start, Dist&& dist, Nbrs&& nbrs) {
    ScoredNode cur = start;
    bool improved = true;
    while (improved) {
        improved = false;
        for (std::uint32_t nb : nbrs(cur.second)) {
            const float d = dist(nb);
            if (ScoredNode{d, nb} < cur) {
                cur = {d, nb};
                improved = true;
            }
        }
    }
    return cur;
}

// Drain a heap into an ascending (distance, id) vector.
template <class Heap>
std::vector<ScoredNode> drain_sorted(Heap heap) {
    std::vector<ScoredNode> out;
    out.reserve(heap.size());
    while (!heap.empty()) {
        out.push_back(heap.top());
        heap.pop();
    }
    if constexpr (std::is_same_v<Heap, MaxHeap>) std::reverse(out.begin(), out.end());
    return out;
}

}  // namespace detail

/// Standard HNSW neighbor-selection heuristic. Candidates come in sorted
/// ascending by distance to the base point; a candidate is kept iff it is
/// closer to the base than to every already-kept neighbor. If fewer than
/// `limit` survive, the nearest rejected candidates backfill the list.
template <class Dist2>
std::vector<std::uint32_t> heuristic_select(
    const std::vector<detail::ScoredNode>& candidates, std::uint32_t limit, Dist2&& dist2) {
    std::vector<std::uint32_t> kept;
    std::vector<std::uint32_t> rejected;
    for (const auto& [d, id] : candidates) {
        if (kept.size() >= limit) break;
        bool diverse = true;
        for (std::uint32_t k : kept) {
            if (dist2(id, k) < d) {
                diverse = false;
                break;
            }
        }
        if (diverse)
            kept.push_back(id);
        else
            rejected.push_back(id);
    }
    for (std::uint32_t id : rejected) {
        if (kept.size() >= limit) break;
        kept.push_back(id);
    }
    return kept;
}

}  // namespace hybridann
