#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "hybridann/io.hpp"
#include "hybridann/oracle.hpp"
#include "hybridann/search.hpp"

namespace hybridann {

/// One measured operating point: parameters, quality, throughput, kernel
/// call totals over the query set.
struct RunReport {
    std::uint32_t sef = 0;
    double tau_dense = 0.0;
    double tau_hybrid = 0.0;
    double recall10 = 0.0;
    double ndcg10 = 0.0;
    double mrr10 = 0.0;
    double qps = 0.0;
    std::uint64_t dense_calls = 0;
    std::uint64_t sparse_calls = 0;
};

struct BenchOptions {
    std::vector<std::uint32_t> sefs = {10, 20, 40, 80, 120, 160, 200};
    std::vector<double> tau_denses = {0.6, 0.8, 0.9, 1.0};
    std::vector<double> tau_hybrids = {0.0, 0.5, 0.8, 1.0};
    std::uint32_t k = 10;
    SearchMode mode = SearchMode::two_stage;
    bool warmup = true;
    bool measure_qps = true;  // off -> qps column pinned to 0 for determinism
};

/// Run one configuration over a prepared query set. Queries must already be
/// normalized (prepare_query). Single-threaded wall-clock timing with one
/// untimed warm-up pass.
inline RunReport bench_point(const HybridGraph& g, const std::vector<HybridVector>& queries,
                             const SearchConfig& cfg, const GroundTruth* truth,
                             const Qrels* qrels, bool warmup = true,
                             bool measure_qps = true) {
    RunReport rep;
    rep.sef = cfg.sef;
    rep.tau_dense = cfg.tau_dense;
    rep.tau_hybrid = cfg.tau_hybrid;

    if (warmup && measure_qps)
        for (const auto& q : queries) (void)search(g, q, cfg);

    std::vector<ResultSet> results(queries.size());
    const auto t0 = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < queries.size(); ++i) {
        auto [res, trace] = search(g, queries[i], cfg);
        results[i] = std::move(res);
        rep.dense_calls += trace.dense_kernel_calls;
        rep.sparse_calls += trace.sparse_kernel_calls;
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rep.qps = (measure_qps && secs > 0.0) ? double(queries.size()) / secs : 0.0;

    double recall = 0.0, ndcg = 0.0, mrr = 0.0;
    for (std::size_t i = 0; i < queries.size(); ++i) {
        auto ids = result_ids(results[i]);
        if (truth) {
            const std::uint32_t k = std::min<std::uint32_t>(cfg.k, truth->k);
            recall += recall_at_k(ids, truth->ids[i], std::min<std::uint32_t>(k, std::uint32_t(ids.size())));
        }
        if (qrels) {
            auto it = qrels->find(std::uint32_t(i));
            if (it != qrels->end()) {
                ndcg += ndcg_at_k(ids, it->second, 10);
                mrr += mrr_at_k(ids, it->second, 10);
            }
        }
    }
    const double nq = double(queries.size());
    if (truth) rep.recall10 = recall / nq;
    if (qrels) {
        rep.ndcg10 = ndcg / nq;
        rep.mrr10 = mrr / nq;
    }
    return rep;
}

/// Full sweep over sef x tau_dense x tau_hybrid.
inline std::vector<RunReport> run_bench(const HybridGraph& g,
                                        const std::vector<HybridVector>& queries,
                                        const BenchOptions& opt, const GroundTruth* truth,
                                        const Qrels* qrels) {
    std::vector<RunReport> out;
    for (std::uint32_t sef : opt.sefs)
        for (double td : opt.tau_denses)
            for (double th : opt.tau_hybrids) {
                SearchConfig cfg;
                cfg.k = opt.k;
                cfg.sef = std::max(sef, opt.k);
                cfg.tau_dense = td;
                cfg.tau_hybrid = th;
                cfg.mode = opt.mode;
                out.push_back(
                    bench_point(g, queries, cfg, truth, qrels, opt.warmup, opt.measure_qps));
            }
    return out;
}

inline std::string bench_csv_header() {
    return "sef,tau_dense,tau_hybrid,recall10,ndcg10,mrr10,qps,dense_calls,sparse_calls";
}

inline std::string bench_csv_row(const RunReport& r) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%u,%.2f,%.2f,%.6f,%.6f,%.6f,%.3f,%llu,%llu", r.sef,
                  r.tau_dense, r.tau_hybrid, r.recall10, r.ndcg10, r.mrr10,
                  r.qps, (unsigned long long)r.dense_calls, (unsigned long long)r.sparse_calls);
    return buf;
}

inline std::string bench_csv(const std::vector<RunReport>& rows) {
    std::string out = bench_csv_header() + "\n";
    for (const auto& r : rows) out += bench_csv_row(r) + "\n";
    return out;
}

}  // namespace hybridann
