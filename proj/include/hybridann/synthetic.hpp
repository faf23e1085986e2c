#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <unordered_set>
#include <vector>

#include "hybridann/types.hpp"

namespace hybridann {

/// Desk-scale synthetic corpus: dense halves drawn around unit-norm cluster
/// centers; sparse halves share high-weight cluster coordinates with
/// probability rho, otherwise fully independent. rho therefore controls the
/// dense/sparse distance correlation.
struct SyntheticSpec {
    std::uint32_t doc_count = 1000;
    std::uint32_t query_count = 100;
    std::uint32_t dense_dim = 128;
    std::uint32_t sparse_dim = 30000;
    std::uint32_t avg_nnz = 128;
    float rho = 0.6f;
    std::uint64_t seed = 7;
    std::uint32_t clusters = 64;
    // When nonzero, cluster centers are grouped around this many shared
    // super-centers so inter-cluster dense distances form a continuum
    // instead of a near-orthogonal plateau.
    std::uint32_t cluster_groups = 0;

    void validate() const {
        if (dense_dim == 0 || sparse_dim == 0) throw ConfigError("dims must be > 0");
        if (doc_count == 0) throw ConfigError("doc_count must be > 0");
        if (avg_nnz == 0 || avg_nnz > sparse_dim)
            throw ConfigError("avg_nnz must be in [1, sparse_dim]");
        if (!(rho >= 0.0f && rho <= 1.0f)) throw ConfigError("rho must be in [0,1]");
        if (clusters == 0) throw ConfigError("clusters must be > 0");
    }
};

struct SyntheticDataset {
    std::vector<HybridVector> docs;
    std::vector<HybridVector> queries;
    std::vector<std::uint32_t> doc_cluster;
    std::vector<std::uint32_t> query_cluster;
};

namespace synth_detail {

inline DenseVector unit(DenseVector v) {
    double n = 0.0;
    for (float x : v) n += double(x) * double(x);
    n = std::sqrt(n);
    if (n > 0.0)
        for (float& x : v) x = float(double(x) / n);
    return v;
}

struct ClusterPattern {
    std::vector<std::uint32_t> coords;  // sorted
    std::vector<float> weights;         // skewed, larger = more important
};

}  // namespace synth_detail

inline SyntheticDataset generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::uniform_int_distribution<std::uint32_t> coord(0, spec.sparse_dim - 1);
    std::uniform_int_distribution<std::uint32_t> pick_cluster(0, spec.clusters - 1);

    auto draw_weight = [&] {  // exponential tail: a few heavy coordinates
        double u = uni(rng);
        while (u <= 0.0) u = uni(rng);
        return float(0.25 - 0.75 * std::log(u));
    };

    auto distinct_coords = [&](std::uint32_t n) {
        std::unordered_set<std::uint32_t> used;
        std::vector<std::uint32_t> out;
        out.reserve(n);
        while (out.size() < n) {
            const std::uint32_t c = coord(rng);
            if (used.insert(c).second) out.push_back(c);
        }
        std::sort(out.begin(), out.end());
        return out;
    };

    // Cluster prototypes. Optionally hang the centers off shared
    // super-centers (perturbation norm ~0.5) so nearby clusters exist.
    std::vector<DenseVector> supers;
    if (spec.cluster_groups > 0) {
        supers.resize(spec.cluster_groups);
        for (auto& s : supers) {
            DenseVector v(spec.dense_dim);
            for (float& x : v) x = float(gauss(rng));
            s = synth_detail::unit(std::move(v));
        }
    }
    const double spread_sigma = 0.5 / std::sqrt(double(spec.dense_dim));
    std::vector<DenseVector> centers(spec.clusters);
    std::vector<synth_detail::ClusterPattern> patterns(spec.clusters);
    const std::uint32_t pattern_size = std::max<std::uint32_t>(spec.avg_nnz, 4);
    for (std::uint32_t c = 0; c < spec.clusters; ++c) {
        DenseVector v(spec.dense_dim);
        if (supers.empty()) {
            for (float& x : v) x = float(gauss(rng));
        } else {
            const auto& s = supers[c % supers.size()];
            for (std::uint32_t i = 0; i < spec.dense_dim; ++i)
                v[i] = s[i] + float(spread_sigma * gauss(rng));
        }
        centers[c] = synth_detail::unit(std::move(v));
        patterns[c].coords = distinct_coords(pattern_size + pattern_size / 4);
        patterns[c].weights.resize(patterns[c].coords.size());
        for (float& w : patterns[c].weights) w = draw_weight();
    }

    // Per-coordinate noise scaled by 1/sqrt(dim) so the total noise magnitude
    // is dimension-independent and cluster geometry survives at high dim.
    const double noise_sigma = 0.8 / std::sqrt(double(spec.dense_dim));
    auto make_vector = [&](std::uint32_t cluster) {
        HybridVector v;
        DenseVector d(spec.dense_dim);
        for (std::uint32_t i = 0; i < spec.dense_dim; ++i)
            d[i] = centers[cluster][i] + float(noise_sigma * gauss(rng));
        v.dense = synth_detail::unit(std::move(d));

        std::normal_distribution<double> nnz_jitter(double(spec.avg_nnz),
                                                    double(spec.avg_nnz) / 8.0);
        auto nnz = std::uint32_t(std::lround(nnz_jitter(rng)));
        nnz = std::clamp<std::uint32_t>(nnz, 1, spec.sparse_dim);

        const bool correlated = uni(rng) < double(spec.rho);
        if (correlated) {
            // Subsample the cluster pattern, jitter the weights, add a few
            // off-pattern coordinates.
            const auto& pat = patterns[cluster];
            std::vector<std::uint32_t> pos(pat.coords.size());
            std::iota(pos.begin(), pos.end(), 0u);
            std::shuffle(pos.begin(), pos.end(), rng);
            const auto from_pattern = std::min<std::uint32_t>(nnz - nnz / 8, std::uint32_t(pos.size()));
            std::vector<std::pair<std::uint32_t, float>> entries;
            entries.reserve(nnz);
            for (std::uint32_t i = 0; i < from_pattern; ++i)
                entries.emplace_back(pat.coords[pos[i]],
                                     pat.weights[pos[i]] * float(std::exp(0.25 * gauss(rng))));
            std::unordered_set<std::uint32_t> used;
            for (auto& [c2, w] : entries) used.insert(c2);
            while (entries.size() < nnz) {
                const std::uint32_t c2 = coord(rng);
                if (used.insert(c2).second) entries.emplace_back(c2, draw_weight());
            }
            std::sort(entries.begin(), entries.end());
            for (auto& [c2, w] : entries) {
                v.sparse.indices.push_back(c2);
                v.sparse.values.push_back(w);
            }
        } else {
            auto coords = distinct_coords(nnz);
            v.sparse.indices = std::move(coords);
            v.sparse.values.resize(v.sparse.indices.size());
            for (float& w : v.sparse.values) w = draw_weight();
        }
        return v;
    };

    SyntheticDataset out;
    out.docs.reserve(spec.doc_count);
    out.doc_cluster.reserve(spec.doc_count);
    for (std::uint32_t i = 0; i < spec.doc_count; ++i) {
        const std::uint32_t c = pick_cluster(rng);
        out.doc_cluster.push_back(c);
        out.docs.push_back(make_vector(c));
    }
    out.queries.reserve(spec.query_count);
    out.query_cluster.reserve(spec.query_count);
    for (std::uint32_t i = 0; i < spec.query_count; ++i) {
        const std::uint32_t c = pick_cluster(rng);
        out.query_cluster.push_back(c);
        out.queries.push_back(make_vector(c));
    }
    return out;
}

}  // namespace hybridann
