#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "helpers.hpp"
#include "setrec/eval.hpp"

using namespace setrec;

namespace {

CorruptedTestSet hand_corrupted(std::size_t n, std::vector<std::uint32_t> kept,
                                std::vector<std::uint32_t> omitted) {
    CorruptedTestSet c;
    c.kept = InteractionMatrix(n, {std::move(kept)});
    c.omitted.push_back(std::move(omitted));
    c.drop_fraction = 0.5;
    return c;
}

}  // namespace

TEST_CASE("corrupt drop counts follow max(1, floor(f*nnz))") {
    InteractionMatrix X(12, {{0, 1, 2, 3}, {4, 5}, {6, 7, 8}});
    CorruptedTestSet c = corrupt(X, 0.5, 1);
    CHECK(c.omitted[0].size() == 2);  // nnz=4, f=0.5
    CHECK(c.kept.nnz(0) == 2);
    CorruptedTestSet d = corrupt(X, 0.9, 1);
    CHECK(d.omitted[1].size() == 1);  // nnz=2, floor(1.8)=1
    CHECK(d.kept.nnz(1) == 1);
    CorruptedTestSet e = corrupt(X, 0.1, 1);
    CHECK(e.omitted[2].size() == 1);  // nnz=3, max(1, 0)=1
}

TEST_CASE("corrupt partitions every row exactly") {
    auto toy = testutil::prepare_toy(testutil::random_corpus(40, 15, 5, 2, 6));
    for (std::uint64_t seed : {1ULL, 2ULL, 77ULL}) {
        for (double f : {0.2, 0.5, 0.8}) {
            CorruptedTestSet c = corrupt(toy.X, f, seed);
            for (std::size_t r = 0; r < toy.X.rows(); ++r) {
                std::vector<std::uint32_t> merged = c.kept.row(r);
                merged.insert(merged.end(), c.omitted[r].begin(), c.omitted[r].end());
                std::sort(merged.begin(), merged.end());
                CHECK(merged == toy.X.row(r));
                CHECK(c.omitted[r].size() >= 1);
                CHECK(c.kept.nnz(r) >= 1);
            }
        }
    }
}

TEST_CASE("corrupt is reproducible for one seed and rejects thin rows") {
    InteractionMatrix X(10, {{0, 1, 2, 3, 4}});
    CorruptedTestSet a = corrupt(X, 0.5, 9);
    CorruptedTestSet b = corrupt(X, 0.5, 9);
    CHECK(a.omitted == b.omitted);

    InteractionMatrix thin(10, {{3}});
    CHECK_THROWS_AS(corrupt(thin, 0.5, 1), DataError);
    CHECK_THROWS_AS(corrupt(X, 0.0, 1), ConfigError);
    CHECK_THROWS_AS(corrupt(X, 1.0, 1), ConfigError);
}

TEST_CASE("mrr hand-enumerated examples") {
    Matrix scores(1, 4);
    scores.data = {0.9, 0.2, 0.7, 0.1};
    // input {0}, omitted {2}: with masking, candidates are {1,2,3} and item 2 leads
    CHECK(mrr(scores, hand_corrupted(4, {0}, {2}), true) == 1.0);
    // unmasked, item 0 outranks item 2
    CHECK(mrr(scores, hand_corrupted(4, {0}, {2}), false) == 0.5);

    Matrix flat(1, 4, 0.5);
    // ties break by ascending index, so omitted item 0 is first
    CHECK(mrr(flat, hand_corrupted(4, {1}, {0}), false) == 1.0);
}

TEST_CASE("mrr equals the full-sort oracle on random instances") {
    Rng rng(31);
    std::uniform_int_distribution<std::size_t> n_dist(4, 30);
    std::uniform_real_distribution<double> score_dist(0.0, 1.0);
    std::uniform_int_distribution<int> level(0, 4);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = n_dist(rng);
        std::vector<std::uint32_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        std::uniform_int_distribution<std::size_t> k_dist(1, n - 2);
        const std::size_t n_kept = k_dist(rng);
        std::uniform_int_distribution<std::size_t> o_dist(1, n - n_kept - 1);
        const std::size_t n_omit = o_dist(rng);
        std::vector<std::uint32_t> kept(perm.begin(), perm.begin() + n_kept);
        std::vector<std::uint32_t> omitted(perm.begin() + n_kept, perm.begin() + n_kept + n_omit);
        std::sort(kept.begin(), kept.end());
        std::sort(omitted.begin(), omitted.end());

        Matrix scores(1, n);
        const bool with_ties = trial % 3 == 0;
        for (double& v : scores.data) v = with_ties ? static_cast<double>(level(rng)) / 4.0 : score_dist(rng);

        CorruptedTestSet c;
        c.kept = InteractionMatrix(n, {kept});
        c.omitted.push_back(omitted);
        for (bool mask : {true, false}) {
            const double got = mrr(scores, c, mask);
            const double want = testutil::mrr_oracle(scores, c, mask);
            REQUIRE(got == want);
        }
        // masking observed items never demotes the first omitted item
        CHECK(mrr(scores, c, true) >= mrr(scores, c, false));
    }
}

TEST_CASE("an oracle scorer reaches MRR exactly 1.0 with masking") {
    auto toy = testutil::prepare_toy(testutil::random_corpus(30, 12, 7, 3, 6));
    CorruptedTestSet c = corrupt(toy.X, 0.5, 3);
    Matrix scores(toy.X.rows(), toy.X.cols(), 0.0);
    for (std::size_t r = 0; r < scores.rows; ++r)
        for (std::uint32_t o : c.omitted[r]) scores(r, o) = 1.0;
    CHECK(mrr(scores, c, true) == 1.0);
}

TEST_CASE("random scores land near the analytic H(n)/n expectation") {
    const std::size_t n = 100, rows = 1000;
    Rng rng(101);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Matrix scores(rows, n);
    for (double& v : scores.data) v = u(rng);
    CorruptedTestSet c;
    std::vector<std::vector<std::uint32_t>> kept_rows;
    std::uniform_int_distribution<std::uint32_t> pick(0, n - 1);
    for (std::size_t r = 0; r < rows; ++r) {
        const std::uint32_t omit = pick(rng);
        c.omitted.push_back({omit});
        kept_rows.push_back({});  // single omission, empty input
    }
    c.kept = InteractionMatrix(n, std::move(kept_rows));
    const double expect = testutil::harmonic(n) / static_cast<double>(n);  // about 0.0519
    const double got = mrr(scores, c, false);
    CHECK(std::abs(got - expect) < 0.01);
}

TEST_CASE("run_experiment aggregates runs deterministically") {
    auto docs = testutil::block_corpus(260, 71, 2000, 10, 8, 8, 4, 1);
    SplitCorpus split = chronological_split(docs, 2009);
    PreparedSplit prep = prepare_split(split, 1);

    RecommenderSpec spec;
    spec.kind = ModelKind::cooc;
    MetricReport one = run_experiment(spec, prep, 1, 0.5, 1, 42);
    CHECK(one.run_mrr.size() == 1);
    CHECK(one.sd == 0.0);

    MetricReport a = run_experiment(spec, prep, 1, 0.5, 3, 42);
    MetricReport b = run_experiment(spec, prep, 1, 0.5, 3, 42);
    CHECK(a.run_mrr == b.run_mrr);
    CHECK(a.run_seeds == std::vector<std::uint64_t>{42, 43, 44});
    CHECK(a.mean == Catch::Approx(b.mean));

    MetricReport only2 = run_experiment(spec, prep, 1, 0.5, 3, 42, true, 2);
    REQUIRE(only2.run_mrr.size() == 1);
    CHECK(only2.run_mrr[0] == a.run_mrr[2]);  // standalone reproduction of one run
    CHECK(only2.run_seeds[0] == 44);
}

TEST_CASE("run_experiment attaches experiment coordinates to failures") {
    auto docs = testutil::block_corpus(260, 73, 2000, 10, 8, 8, 4, 1);
    SplitCorpus split = chronological_split(docs, 2009);
    PreparedSplit prep = prepare_split(split, 1);
    RecommenderSpec spec;
    spec.kind = ModelKind::mlp;  // no condition blocks: must fail
    CHECK_THROWS_WITH(run_experiment(spec, prep, 1, 0.5, 1, 42),
                      Catch::Matchers::ContainsSubstring("model=mlp") &&
                          Catch::Matchers::ContainsSubstring("k=1") &&
                          Catch::Matchers::ContainsSubstring("f=0.5"));
}

TEST_CASE("metric report serializes one csv row per run") {
    MetricReport rep;
    rep.model = "cooc";
    rep.condition_blocks = "none";
    rep.k = 1;
    rep.f = 0.5;
    rep.run_index = {0, 1};
    rep.run_mrr = {0.25, 0.5};
    rep.run_seeds = {42, 43};
    rep.run_seconds = {0.01, 0.02};
    rep.finalize();
    auto rows = rep.csv_rows();
    REQUIRE(rows.size() == 2);
    CHECK(rows[0] == "cooc,none,1,0.5,0,0.250000,42,0.010");
    CHECK(rep.mean == Catch::Approx(0.375));
}
