// Command-line driver for the hybrid dense-sparse ANN pipeline:
// synth -> calibrate -> build -> groundtruth -> search/bench -> eval.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hybridann/hybridann.hpp"

using nlohmann::json;
using namespace hybridann;

namespace {

std::string rp(const std::string& p) { return resolve_data_path(p); }

SearchMode parse_search_mode(const std::string& s) {
    if (s == "two-stage") return SearchMode::two_stage;
    if (s == "naive-hybrid") return SearchMode::naive_hybrid;
    if (s == "dense-only") return SearchMode::dense_only;
    throw ConfigError("unknown mode: " + s);
}

BuildMode parse_build_mode(const std::string& s) {
    if (s == "two-stage") return BuildMode::two_stage;
    if (s == "naive-hybrid") return BuildMode::naive_hybrid;
    if (s == "dense-only") return BuildMode::dense_only;
    throw ConfigError("unknown mode: " + s);
}

CalibrationRecord load_calibration(const std::string& path) {
    std::ifstream in(rp(path));
    if (!in) throw ConfigError("cannot open calibration file " + path);
    json j = json::parse(in);
    CalibrationRecord rec;
    rec.params.norm_denominator = j.at("norm_denominator").get<float>();
    rec.params.gamma = j.at("gamma").get<float>();
    rec.params.alpha = j.at("alpha").get<float>();
    rec.seed = j.value("seed", std::uint64_t(0));
    rec.query_fraction = j.value("query_fraction", 0.0);
    rec.doc_fraction = j.value("doc_fraction", 0.0);
    rec.params.validate();
    return rec;
}

void save_calibration(const std::string& path, const CalibrationRecord& rec) {
    json j = {{"norm_denominator", rec.params.norm_denominator},
              {"gamma", rec.params.gamma},
              {"alpha", rec.params.alpha},
              {"seed", rec.seed},
              {"query_fraction", rec.query_fraction},
              {"doc_fraction", rec.doc_fraction}};
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write calibration file " + path);
    out << j.dump(2) << "\n";
}

std::vector<HybridVector> load_prepared_queries(const std::string& dense_path,
                                                const std::string& sparse_path,
                                                const AlignmentParams& params) {
    auto queries = load_hybrid_rows(rp(dense_path), rp(sparse_path));
    for (auto& q : queries) q = prepare_query(q, params);
    return queries;
}

void write_results_tsv(const std::string& path, const std::vector<ResultSet>& results) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write results file " + path);
    for (std::size_t qi = 0; qi < results.size(); ++qi)
        for (std::size_t r = 0; r < results[qi].size(); ++r) {
            char buf[96];
            std::snprintf(buf, sizeof(buf), "%zu\t%zu\t%u\t%.6f\n", qi, r + 1,
                          results[qi][r].id, double(results[qi][r].distance));
            out << buf;
        }
}

std::vector<std::vector<std::uint32_t>> load_results_tsv(const std::string& path) {
    std::ifstream in(rp(path));
    if (!in) throw ConfigError("cannot open results file " + path);
    std::vector<std::vector<std::uint32_t>> out;
    std::uint64_t qid, rank;
    std::uint32_t doc;
    double dist;
    while (in >> qid >> rank >> doc >> dist) {
        if (out.size() <= qid) out.resize(qid + 1);
        out[qid].push_back(doc);
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Graph-based ANN search over dense-sparse hybrid vectors"};
    app.require_subcommand(1);

    // ---- synth ----
    auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
    SyntheticSpec spec;
    std::string out_prefix;
    synth->add_option("--docs", spec.doc_count, "Document count");
    synth->add_option("--queries", spec.query_count, "Query count");
    synth->add_option("--dense-dim", spec.dense_dim, "Dense dimension N");
    synth->add_option("--sparse-dim", spec.sparse_dim, "Sparse dimension M");
    synth->add_option("--avg-nnz", spec.avg_nnz, "Average non-zeros per sparse vector");
    synth->add_option("--rho", spec.rho, "Dense/sparse distance correlation knob [0,1]");
    synth->add_option("--clusters", spec.clusters, "Cluster count");
    synth->add_option("--cluster-groups", spec.cluster_groups,
                      "Group cluster centers around this many super-centers (0 = independent)");
    synth->add_option("--seed", spec.seed, "RNG seed");
    synth->add_option("--out-prefix", out_prefix, "Output file prefix")->required();

    // ---- calibrate ----
    auto* cal = app.add_subcommand("calibrate", "Compute alignment parameters");
    std::string dd_path, ds_path, qd_path, qs_path, qrels_path, cal_out;
    SamplePlan plan;
    std::uint32_t cal_k = 10;
    cal->add_option("--docs-dense", dd_path)->required();
    cal->add_option("--docs-sparse", ds_path)->required();
    cal->add_option("--queries-dense", qd_path)->required();
    cal->add_option("--queries-sparse", qs_path)->required();
    cal->add_option("--qrels", qrels_path, "Relevance labels for the alpha sweep");
    cal->add_option("--query-fraction", plan.query_fraction);
    cal->add_option("--doc-fraction", plan.doc_fraction);
    cal->add_option("--seed", plan.seed);
    cal->add_option("--k", cal_k, "Cutoff for the alpha sweep");
    cal->add_option("--out", cal_out, "Calibration JSON output")->required();

    // ---- build ----
    auto* build = app.add_subcommand("build", "Build an index");
    std::string b_mode = "two-stage", cal_path, index_out;
    BuildConfig bcfg;
    build->add_option("--docs-dense", dd_path)->required();
    build->add_option("--docs-sparse", ds_path)->required();
    build->add_option("--calibration", cal_path, "Calibration JSON from `calibrate`")
        ->required();
    build->add_option("--mode", b_mode, "two-stage | naive-hybrid | dense-only");
    build->add_option("--m", bcfg.m);
    build->add_option("--cef-dense", bcfg.cef_dense);
    build->add_option("--cef-hybrid", bcfg.cef_hybrid);
    build->add_option("--threads", bcfg.threads);
    build->add_option("--seed", bcfg.seed);
    build->add_option("--prune-ratio", bcfg.prune.ratio);
    build->add_flag("--strict-m", bcfg.strict_m, "Literal M-neighbor refinement");
    build->add_option("--out", index_out, "Index file output")->required();

    // ---- groundtruth ----
    auto* gt = app.add_subcommand("groundtruth", "Exhaustive hybrid top-k oracle");
    std::string gt_out;
    std::uint32_t gt_k = 10;
    gt->add_option("--docs-dense", dd_path)->required();
    gt->add_option("--docs-sparse", ds_path)->required();
    gt->add_option("--calibration", cal_path)->required();
    gt->add_option("--queries-dense", qd_path)->required();
    gt->add_option("--queries-sparse", qs_path)->required();
    gt->add_option("--k", gt_k);
    gt->add_option("--out", gt_out)->required();

    // ---- search ----
    auto* srch = app.add_subcommand("search", "Run one query set at a fixed config");
    std::string index_path, s_mode = "two-stage", results_out;
    SearchConfig scfg;
    srch->add_option("--index", index_path)->required();
    srch->add_option("--queries-dense", qd_path)->required();
    srch->add_option("--queries-sparse", qs_path)->required();
    srch->add_option("--k", scfg.k);
    srch->add_option("--sef", scfg.sef);
    srch->add_option("--tau-dense", scfg.tau_dense);
    srch->add_option("--tau-hybrid", scfg.tau_hybrid);
    srch->add_option("--mode", s_mode);
    double alpha_override = -1.0;
    srch->add_option("--alpha", alpha_override, "Override the calibrated dense weight");
    srch->add_option("--out", results_out, "Results TSV output")->required();

    // ---- bench ----
    auto* bench = app.add_subcommand("bench", "Sweep sef x tau-dense x tau-hybrid to CSV");
    BenchOptions bopt;
    std::string gt_path, csv_out;
    bool no_qps = false;
    bench->add_option("--index", index_path)->required();
    bench->add_option("--queries-dense", qd_path)->required();
    bench->add_option("--queries-sparse", qs_path)->required();
    bench->add_option("--groundtruth", gt_path);
    bench->add_option("--qrels", qrels_path);
    bench->add_option("--sefs", bopt.sefs, "Candidate queue lengths")->delimiter(',');
    bench->add_option("--tau-denses", bopt.tau_denses)->delimiter(',');
    bench->add_option("--tau-hybrids", bopt.tau_hybrids)->delimiter(',');
    bench->add_option("--k", bopt.k);
    bench->add_option("--mode", s_mode);
    bench->add_flag("--no-qps", no_qps, "Pin the qps column to 0 for byte-stable output");
    bench->add_option("--out", csv_out, "CSV output")->required();

    // ---- eval ----
    auto* eval = app.add_subcommand("eval", "Score a results file");
    std::string results_path;
    std::uint32_t eval_k = 10;
    eval->add_option("--results", results_path)->required();
    eval->add_option("--groundtruth", gt_path);
    eval->add_option("--qrels", qrels_path);
    eval->add_option("--k", eval_k);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*synth) {
            auto data = generate_synthetic(spec);
            std::vector<DenseVector> dd, qd;
            std::vector<SparseVector> ds, qs;
            for (auto& v : data.docs) {
                dd.push_back(std::move(v.dense));
                ds.push_back(std::move(v.sparse));
            }
            for (auto& v : data.queries) {
                qd.push_back(std::move(v.dense));
                qs.push_back(std::move(v.sparse));
            }
            save_dense(out_prefix + ".docs.dense", dd, spec.dense_dim);
            save_sparse(out_prefix + ".docs.sparse", ds, spec.sparse_dim);
            save_dense(out_prefix + ".queries.dense", qd, spec.dense_dim);
            save_sparse(out_prefix + ".queries.sparse", qs, spec.sparse_dim);
            std::printf("wrote %u docs / %u queries under %s.*\n", spec.doc_count,
                        spec.query_count, out_prefix.c_str());
        } else if (*cal) {
            auto store = load_store(rp(dd_path), rp(ds_path));
            auto queries = load_hybrid_rows(rp(qd_path), rp(qs_path));
            Qrels qrels;
            const bool have_qrels = !qrels_path.empty();
            if (have_qrels) qrels = load_qrels(rp(qrels_path));
            WeightSweep sweep;
            auto rec = calibrate(store, queries, plan, sweep, cal_k,
                                 have_qrels ? &qrels : nullptr);
            save_calibration(cal_out, rec);
            std::printf("norm_denominator=%.6f gamma=%.6f alpha=%.2f%s\n",
                        double(rec.params.norm_denominator), double(rec.params.gamma),
                        double(rec.params.alpha),
                        have_qrels ? "" : " (default alpha: no qrels supplied)");
        } else if (*build) {
            auto store = load_store(rp(dd_path), rp(ds_path));
            auto rec = load_calibration(cal_path);
            store.normalize_sparse(rec.params.norm_denominator);
            BuildStats stats;
            auto g = build_index(std::move(store), rec.params, bcfg,
                                 parse_build_mode(b_mode), &stats);
            save_index(index_out, g);
            std::printf("built %s index: %u nodes, entry=%u, max_level=%d\n", b_mode.c_str(),
                        g.count(), g.entry_point(), g.max_level());
            std::printf("stage1: %.3fs dense_calls=%llu sparse_calls=%llu\n",
                        stats.stage1_seconds, (unsigned long long)stats.stage1_dense_calls,
                        (unsigned long long)stats.stage1_sparse_calls);
            std::printf("stage2: %.3fs dense_calls=%llu sparse_calls=%llu\n",
                        stats.stage2_seconds, (unsigned long long)stats.stage2_dense_calls,
                        (unsigned long long)stats.stage2_sparse_calls);
        } else if (*gt) {
            auto store = load_store(rp(dd_path), rp(ds_path));
            auto rec = load_calibration(cal_path);
            store.normalize_sparse(rec.params.norm_denominator);
            auto queries = load_prepared_queries(qd_path, qs_path, rec.params);
            GroundTruth truth;
            truth.k = std::min<std::uint32_t>(gt_k, store.count());
            for (const auto& q : queries) {
                auto res = brute_force_topk(store, q, rec.params, truth.k);
                std::vector<std::uint32_t> ids;
                std::vector<float> dists;
                for (const auto& r : res) {
                    ids.push_back(r.id);
                    dists.push_back(r.distance);
                }
                truth.ids.push_back(std::move(ids));
                truth.distances.push_back(std::move(dists));
            }
            save_ground_truth(gt_out, truth);
            std::printf("wrote ground truth for %zu queries, k=%u\n", truth.ids.size(),
                        truth.k);
        } else if (*srch) {
            auto g = load_index(rp(index_path));
            AlignmentParams params = g.params();
            if (alpha_override >= 0.0) {
                params.alpha = float(alpha_override);
                g = HybridGraph::from_parts(g.store(), params, g.m(), g.level_lambda(),
                                            g.prune(), g.stage(), g.entry_point(),
                                            g.max_level(), g.levels(), g.links());
            }
            auto queries = load_prepared_queries(qd_path, qs_path, params);
            scfg.mode = parse_search_mode(s_mode);
            std::vector<ResultSet> results(queries.size());
            SearchTrace total;
            for (std::size_t i = 0; i < queries.size(); ++i) {
                auto [res, trace] = search(g, queries[i], scfg);
                results[i] = std::move(res);
                total.dense_kernel_calls += trace.dense_kernel_calls;
                total.sparse_kernel_calls += trace.sparse_kernel_calls;
                total.expansions_stage1 += trace.expansions_stage1;
                total.expansions_stage2 += trace.expansions_stage2;
            }
            write_results_tsv(results_out, results);
            std::printf("searched %zu queries: dense_calls=%llu sparse_calls=%llu "
                        "expansions=%llu+%llu\n",
                        queries.size(), (unsigned long long)total.dense_kernel_calls,
                        (unsigned long long)total.sparse_kernel_calls,
                        (unsigned long long)total.expansions_stage1,
                        (unsigned long long)total.expansions_stage2);
        } else if (*bench) {
            auto g = load_index(rp(index_path));
            auto queries = load_prepared_queries(qd_path, qs_path, g.params());
            GroundTruth truth;
            const bool have_truth = !gt_path.empty();
            if (have_truth) truth = load_ground_truth(rp(gt_path));
            Qrels qrels;
            const bool have_qrels = !qrels_path.empty();
            if (have_qrels) qrels = load_qrels(rp(qrels_path));
            bopt.mode = parse_search_mode(s_mode);
            bopt.measure_qps = !no_qps;
            bopt.warmup = !no_qps;
            auto rows = run_bench(g, queries, bopt, have_truth ? &truth : nullptr,
                                  have_qrels ? &qrels : nullptr);
            std::ofstream out(csv_out);
            if (!out) throw ConfigError("cannot write " + csv_out);
            out << bench_csv(rows);
            std::printf("wrote %zu bench rows to %s\n", rows.size(), csv_out.c_str());
        } else if (*eval) {
            auto results = load_results_tsv(results_path);
            if (!gt_path.empty()) {
                auto truth = load_ground_truth(rp(gt_path));
                double recall = 0.0;
                const auto n = std::min(results.size(), truth.ids.size());
                if (n == 0) throw ConfigError("no queries to evaluate");
                for (std::size_t i = 0; i < n; ++i)
                    recall += recall_at_k(results[i], truth.ids[i],
                                          std::min<std::uint32_t>(eval_k, truth.k));
                std::printf("recall@%u=%.6f over %zu queries\n", eval_k, recall / double(n),
                            n);
            }
            if (!qrels_path.empty()) {
                auto qrels = load_qrels(rp(qrels_path));
                double ndcg = 0.0, mrr = 0.0;
                for (std::size_t i = 0; i < results.size(); ++i) {
                    auto it = qrels.find(std::uint32_t(i));
                    if (it == qrels.end()) continue;
                    ndcg += ndcg_at_k(results[i], it->second, eval_k);
                    mrr += mrr_at_k(results[i], it->second, eval_k);
                }
                std::printf("ndcg@%u=%.6f mrr@%u=%.6f over %zu queries\n", eval_k,
                            ndcg / double(results.size()), eval_k,
                            mrr / double(results.size()), results.size());
            }
            if (gt_path.empty() && qrels_path.empty())
                throw ConfigError("eval needs --groundtruth and/or --qrels");
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
