#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "hybridann/graph.hpp"
#include "hybridann/io.hpp"
#include "hybridann/search.hpp"
#include "hybridann/synthetic.hpp"

using namespace hybridann;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("hybridann_io_" + std::to_string(std::uintmax_t(::getpid())) + "_" +
                std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
    static int& counter() {
        static int c = 0;
        return c;
    }
};

std::vector<char> slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

SyntheticDataset small_data(std::uint32_t docs = 200) {
    SyntheticSpec spec;
    spec.doc_count = docs;
    spec.query_count = 8;
    spec.dense_dim = 12;
    spec.sparse_dim = 600;
    spec.avg_nnz = 16;
    spec.rho = 0.6f;
    spec.seed = 71;
    return generate_synthetic(spec);
}

}  // namespace

TEST_CASE("dense round trip is byte identical") {
    TempDir tmp;
    auto data = small_data();
    std::vector<DenseVector> rows;
    for (const auto& d : data.docs) rows.push_back(d.dense);
    const auto p1 = tmp.file("a.dense");
    save_dense(p1, rows, 12);
    std::uint32_t dim = 0;
    auto back = load_dense(p1, &dim);
    CHECK(dim == 12);
    CHECK(back == rows);
    const auto p2 = tmp.file("b.dense");
    save_dense(p2, back, dim);
    CHECK(slurp(p1) == slurp(p2));
}

TEST_CASE("sparse round trip is byte identical") {
    TempDir tmp;
    auto data = small_data();
    std::vector<SparseVector> rows;
    for (const auto& d : data.docs) rows.push_back(d.sparse);
    const auto p1 = tmp.file("a.sparse");
    save_sparse(p1, rows, 600);
    std::uint32_t dim = 0;
    auto back = load_sparse(p1, &dim);
    CHECK(dim == 600);
    REQUIRE(back.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(back[i].indices == rows[i].indices);
        CHECK(back[i].values == rows[i].values);
    }
    const auto p2 = tmp.file("b.sparse");
    save_sparse(p2, back, dim);
    CHECK(slurp(p1) == slurp(p2));
}

TEST_CASE("hand assembled sparse file parses as expected") {
    TempDir tmp;
    const auto p = tmp.file("hand.sparse");
    {
        std::ofstream out(p, std::ios::binary);
        auto put = [&](const void* d, std::size_t n) {
            out.write(static_cast<const char*>(d), std::streamsize(n));
        };
        out.write("HSV1", 4);
        std::uint32_t count = 2, dim = 10;
        std::uint64_t nnz = 3;
        put(&count, 4);
        put(&dim, 4);
        put(&nnz, 8);
        std::uint64_t indptr[3] = {0, 2, 3};
        put(indptr, 24);
        std::uint32_t idx[3] = {1, 4, 7};
        put(idx, 12);
        float vals[3] = {0.5f, -1.0f, 2.0f};
        put(vals, 12);
    }
    auto rows = load_sparse(p, nullptr);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].indices == std::vector<std::uint32_t>{1, 4});
    CHECK(rows[0].values == std::vector<float>{0.5f, -1.0f});
    CHECK(rows[1].indices == std::vector<std::uint32_t>{7});
    CHECK(rows[1].values == std::vector<float>{2.0f});
}

TEST_CASE("empty sparse corpus round trips") {
    TempDir tmp;
    const auto p = tmp.file("empty.sparse");
    save_sparse(p, {SparseVector{}, SparseVector{}}, 100);
    auto rows = load_sparse(p, nullptr);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].nnz() == 0);
    CHECK(rows[1].nnz() == 0);
}

TEST_CASE("bad magic and truncation raise ParseError") {
    TempDir tmp;
    const auto p = tmp.file("bad");
    {
        std::ofstream out(p, std::ios::binary);
        out.write("NOPE", 4);
    }
    CHECK_THROWS_AS(load_dense(p, nullptr), ParseError);
    CHECK_THROWS_AS(load_sparse(p, nullptr), ParseError);
    CHECK_THROWS_AS(load_index(p), ParseError);

    // Valid header, then cut the body off.
    const auto full = tmp.file("full.dense");
    save_dense(full, {{1.f, 2.f}, {3.f, 4.f}}, 2);
    auto bytes = slurp(full);
    const auto cut = tmp.file("cut.dense");
    {
        std::ofstream out(cut, std::ios::binary);
        out.write(bytes.data(), std::streamsize(bytes.size() - 5));
    }
    try {
        load_dense(cut, nullptr);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.offset > 0);  // offset points into the body
    }

    // Trailing garbage is rejected too.
    const auto extra = tmp.file("extra.dense");
    {
        std::ofstream out(extra, std::ios::binary);
        out.write(bytes.data(), std::streamsize(bytes.size()));
        out.write("xx", 2);
    }
    CHECK_THROWS_AS(load_dense(extra, nullptr), ParseError);
}

TEST_CASE("ground truth round trip is byte identical") {
    TempDir tmp;
    GroundTruth gt;
    gt.k = 3;
    gt.ids = {{4, 1, 9}, {2, 2, 0}};
    gt.distances = {{-0.5f, 0.1f, 0.2f}, {0.0f, 0.3f, 0.9f}};
    const auto p1 = tmp.file("a.gt");
    save_ground_truth(p1, gt);
    auto back = load_ground_truth(p1);
    CHECK(back.k == gt.k);
    CHECK(back.ids == gt.ids);
    CHECK(back.distances == gt.distances);
    const auto p2 = tmp.file("b.gt");
    save_ground_truth(p2, back);
    CHECK(slurp(p1) == slurp(p2));
}

TEST_CASE("qrels TSV round trip") {
    TempDir tmp;
    Qrels q;
    q[0] = {{3, 1}, {7, 2}};
    q[5] = {{1, 0}};
    const auto p = tmp.file("qrels.tsv");
    save_qrels(p, q);
    CHECK(load_qrels(p) == q);

    const auto bad = tmp.file("bad.tsv");
    {
        std::ofstream out(bad);
        out << "1\t2\n";
    }
    CHECK_THROWS_AS(load_qrels(bad), ParseError);
}

TEST_CASE("index round trip preserves search results bit for bit") {
    TempDir tmp;
    auto data = small_data(400);
    DocumentStore s(12, 600);
    for (const auto& d : data.docs) s.add(d);
    const float denom = s.max_sparse_magnitude();
    s.normalize_sparse(denom);
    AlignmentParams params;
    params.alpha = 0.45f;
    params.gamma = 2.2f;
    params.norm_denominator = denom;
    BuildConfig cfg;
    cfg.m = 8;
    cfg.cef_dense = 48;
    cfg.cef_hybrid = 16;
    cfg.prune.ratio = 0.2f;
    auto g = build_index(std::move(s), params, cfg, BuildMode::two_stage);

    const auto p1 = tmp.file("a.idx");
    save_index(p1, g);
    auto g2 = load_index(p1);
    CHECK(g2.count() == g.count());
    CHECK(g2.entry_point() == g.entry_point());
    CHECK(g2.max_level() == g.max_level());
    CHECK(g2.params().alpha == params.alpha);
    CHECK(g2.params().gamma == params.gamma);
    CHECK(g2.params().norm_denominator == denom);
    CHECK(g2.stage() == BuildStage::hybrid_refined);
    CHECK(g2.prune().ratio == 0.2f);

    // Saving the reloaded graph reproduces the same bytes.
    const auto p2 = tmp.file("b.idx");
    save_index(p2, g2);
    CHECK(slurp(p1) == slurp(p2));

    SearchConfig sc;
    sc.k = 10;
    sc.sef = 32;
    sc.tau_dense = 0.9f;
    for (const auto& raw : data.queries) {
        auto q = prepare_query(raw, params);
        auto a = search(g, q, sc).first;
        auto b = search(g2, q, sc).first;
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].id == b[i].id);
            CHECK(a[i].distance == b[i].distance);
        }
    }
}

TEST_CASE("resolve_data_path honors HYBRID_ANN_DATA_DIR") {
    TempDir tmp;
    const auto inside = tmp.file("present.bin");
    std::ofstream(inside).put('x');
    ::setenv("HYBRID_ANN_DATA_DIR", tmp.path.string().c_str(), 1);
    CHECK(resolve_data_path("present.bin") == inside);
    CHECK(resolve_data_path(inside) == inside);  // absolute passes through
    ::unsetenv("HYBRID_ANN_DATA_DIR");
    CHECK(resolve_data_path("present.bin") == "present.bin");
}
