#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "helpers.hpp"
#include "setrec/models.hpp"

using namespace setrec;
using testutil::prepare_toy;

namespace {

InteractionMatrix make_X(std::size_t cols, std::vector<std::vector<std::uint32_t>> rows) {
    return InteractionMatrix(cols, std::move(rows));
}

RecommenderSpec tiny_spec(ModelKind kind, std::vector<Block> blocks = {}, std::uint64_t seed = 1) {
    RecommenderSpec spec;
    spec.kind = kind;
    spec.conditions.blocks = std::move(blocks);
    spec.conditions.word_dim = 6;
    spec.conditions.author_dim = 4;
    spec.hp.hidden = 7;
    spec.hp.code = 3;
    spec.hp.epochs = 1;
    spec.hp.batch = 4;
    spec.hp.seed = seed;
    return spec;
}

}  // namespace

// ---------------------------------------------------------------------------
// co-occurrence
// ---------------------------------------------------------------------------

TEST_CASE("cooc_fit matches the hand-multiplied 2x3 example") {
    InteractionMatrix X = make_X(3, {{0, 1}, {1, 2}});
    Matrix C = cooc_fit(X);
    const std::vector<double> expected{1, 1, 0, 1, 2, 1, 0, 1, 1};
    CHECK(C.data == expected);
}

TEST_CASE("cooc_fit degenerate cases") {
    Matrix single = cooc_fit(make_X(2, {{0}}));
    CHECK(single.data == std::vector<double>{1, 0, 0, 0});
    Matrix zero = cooc_fit(make_X(3, {{}, {}}));
    for (double v : zero.data) CHECK(v == 0.0);
}

TEST_CASE("cooc_score aggregates rows of C") {
    InteractionMatrix X = make_X(3, {{0, 1}, {1, 2}});
    Matrix C = cooc_fit(X);
    CHECK(cooc_score(C, {1}) == std::vector<double>{1, 2, 1});
    CHECK(cooc_score(C, {}) == std::vector<double>{0, 0, 0});
    CHECK(cooc_score(C, {0}) == std::vector<double>{1, 1, 0});  // unit vector selects row 0
}

TEST_CASE("cooc matches the brute-force row-scan oracle on random matrices") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Rng rng(seed);
        std::bernoulli_distribution coin(0.25);
        std::vector<std::vector<std::uint32_t>> rows(30);
        for (auto& row : rows)
            for (std::uint32_t c = 0; c < 20; ++c)
                if (coin(rng)) row.push_back(c);
        InteractionMatrix X = make_X(20, std::move(rows));
        Matrix C = cooc_fit(X);
        Matrix C_oracle = testutil::cooc_oracle(X);
        REQUIRE(C.data == C_oracle.data);  // exact integer equality

        std::vector<std::uint32_t> kept;
        for (std::uint32_t c = 0; c < 20; c += 3) kept.push_back(c);
        CHECK(cooc_score(C, kept) == testutil::cooc_score_oracle(X, kept));
    }
}

// ---------------------------------------------------------------------------
// SVD
// ---------------------------------------------------------------------------

TEST_CASE("full-rank plain SVD scores equal co-occurrence scores") {
    auto toy = prepare_toy(testutil::random_corpus(20, 15, 3));
    RecommenderSpec spec = tiny_spec(ModelKind::svd);
    spec.hp.svd_rank = toy.vocab.size();
    SvdModel svd(spec);
    svd.fit(FitData{toy.docs, toy.X, toy.vocab});

    CoocModel cooc(tiny_spec(ModelKind::cooc));
    cooc.fit(FitData{toy.docs, toy.X, toy.vocab});

    ScoreData sd{toy.docs, toy.X, toy.vocab};
    Matrix s_svd = svd.score(sd);
    Matrix s_cooc = cooc.score(sd);
    REQUIRE(s_svd.same_shape(s_cooc));
    double max_abs = 0.0;
    for (double v : s_cooc.data) max_abs = std::max(max_abs, std::abs(v));
    for (std::size_t i = 0; i < s_svd.size(); ++i)
        CHECK(std::abs(s_svd.data[i] - s_cooc.data[i]) < 1e-9 * std::max(1.0, max_abs));
    // identical argmax wherever the cooc maximum is unique (cooc scores are
    // integers, so ties are exact there and leave the argmax undefined)
    for (std::size_t r = 0; r < s_svd.rows; ++r) {
        std::size_t a = 0, b = 0;
        int max_count = 0;
        for (std::size_t c = 0; c < s_svd.cols; ++c) {
            if (s_svd(r, c) > s_svd(r, a)) a = c;
            if (s_cooc(r, c) > s_cooc(r, b)) b = c;
        }
        for (std::size_t c = 0; c < s_cooc.cols; ++c)
            if (s_cooc(r, c) == s_cooc(r, b)) ++max_count;
        if (max_count == 1) CHECK(a == b);
    }
}

TEST_CASE("svd zero input gives zero scores and rank caps are reported") {
    auto toy = prepare_toy(testutil::random_corpus(15, 8, 5));
    RecommenderSpec spec = tiny_spec(ModelKind::svd);
    spec.hp.svd_rank = 1000;  // far above achievable
    SvdModel svd(spec);
    svd.fit(FitData{toy.docs, toy.X, toy.vocab});
    CHECK(svd.effective_rank() <= toy.vocab.size());

    InteractionMatrix empty(toy.vocab.size(), {{}, {}});
    Matrix s = svd.score_plain(empty);
    for (double v : s.data) CHECK(v == 0.0);
}

TEST_CASE("svd factors are bit-identical across runs with one seed") {
    auto toy = prepare_toy(testutil::random_corpus(15, 8, 7));
    RecommenderSpec spec = tiny_spec(ModelKind::svd, {}, 42);
    spec.hp.svd_rank = 5;
    SvdModel a(spec), b(spec);
    a.fit(FitData{toy.docs, toy.X, toy.vocab});
    b.fit(FitData{toy.docs, toy.X, toy.vocab});
    CHECK(serialize_to_string(a) == serialize_to_string(b));
}

TEST_CASE("text-extended svd with an empty title equals projecting [x | 0]") {
    auto toy = prepare_toy(testutil::random_corpus(25, 10, 9));
    RecommenderSpec spec = tiny_spec(ModelKind::svd, {Block::title});
    spec.hp.svd_rank = 6;
    SvdModel svd(spec);
    svd.fit(FitData{toy.docs, toy.X, toy.vocab});
    CHECK(svd.uses_text());

    std::vector<Document> no_title = toy.docs;
    for (auto& d : no_title) d.title.clear();
    Matrix via_docs = svd.score(ScoreData{no_title, toy.X, toy.vocab});
    // direct projection of [x | 0] through the same factors
    Matrix zero_text(toy.X.rows(), svd.uses_text() ? fit_tfidf(toy.docs, TextField::title).doc_freq.size() : 0);
    Matrix direct = svd.score_text(toy.X, zero_text);
    REQUIRE(via_docs.same_shape(direct));
    for (std::size_t i = 0; i < direct.size(); ++i)
        CHECK(via_docs.data[i] == Catch::Approx(direct.data[i]).margin(1e-12));
}

// ---------------------------------------------------------------------------
// MLP
// ---------------------------------------------------------------------------

TEST_CASE("mlp requires a condition set") {
    auto toy = prepare_toy(testutil::random_corpus(10, 6, 11));
    MlpModel mlp(tiny_spec(ModelKind::mlp));
    CHECK_THROWS_WITH(mlp.fit(FitData{toy.docs, toy.X, toy.vocab}),
                      Catch::Matchers::ContainsSubstring("condition"));
}

TEST_CASE("untrained mlp loss sits near ln 2") {
    // first recorded batch loss is computed before any update; with items
    // covering half the vocabulary the targets are balanced
    Rng rng(13);
    std::vector<Document> docs;
    for (int d = 0; d < 8; ++d) {
        Document doc;
        doc.id = "b" + std::to_string(d);
        doc.year = 2000;
        doc.title = "w" + std::to_string(d % 3);
        std::uniform_int_distribution<int> start(0, 4);
        const int s = start(rng);
        for (int i = 0; i < 5; ++i) doc.items.push_back("i" + std::to_string((s + 2 * i) % 10));
        docs.push_back(std::move(doc));
    }
    auto toy = prepare_toy(docs);
    REQUIRE(toy.vocab.size() == 10);
    RecommenderSpec spec = tiny_spec(ModelKind::mlp, {Block::title});
    spec.hp.hidden = 32;
    spec.hp.code = 8;
    spec.hp.dropout_p = 0.0;
    MlpModel mlp(spec);
    mlp.init(FitData{toy.docs, toy.X, toy.vocab});
    std::vector<std::size_t> batch(toy.X.rows());
    std::iota(batch.begin(), batch.end(), 0);
    Rng pass_rng(5);
    const double untrained = mlp.train_pass(batch, toy.X, pass_rng, false);
    CHECK(std::abs(untrained - std::log(2.0)) < 0.02 * std::log(2.0));
}

TEST_CASE("mlp memorizes a single repeated training pair") {
    std::vector<Document> docs;
    for (int d = 0; d < 4; ++d) {
        Document doc;
        doc.id = "m" + std::to_string(d);
        doc.year = 2000;
        doc.title = "alpha beta";
        doc.items = {"i0", "i3", "i7"};
        docs.push_back(std::move(doc));
    }
    // pad the vocabulary with a second, different document
    Document other;
    other.id = "other";
    other.year = 2000;
    other.title = "gamma delta";
    other.items = {"i1", "i2", "i4", "i5", "i6", "i8", "i9"};
    docs.push_back(other);
    auto toy = prepare_toy(docs);
    REQUIRE(toy.vocab.size() == 10);

    RecommenderSpec spec = tiny_spec(ModelKind::mlp, {Block::title});
    spec.hp.epochs = 200;
    spec.hp.hidden = 16;
    spec.hp.code = 8;
    spec.hp.dropout_p = 0.0;
    MlpModel mlp(spec);
    mlp.fit(FitData{toy.docs, toy.X, toy.vocab});
    Matrix s = mlp.score(ScoreData{{toy.docs[0]}, make_X(10, {{}}), toy.vocab});
    std::vector<std::size_t> order(10);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s(0, a) > s(0, b); });
    std::set<std::string> top3;
    for (int i = 0; i < 3; ++i) top3.insert(toy.vocab.item_at(static_cast<std::uint32_t>(order[i])));
    CHECK(top3 == std::set<std::string>{"i0", "i3", "i7"});
}

TEST_CASE("mlp training gradients pass the finite-difference check") {
    auto toy = prepare_toy(testutil::random_corpus(6, 6, 17));
    RecommenderSpec spec = tiny_spec(ModelKind::mlp, {Block::title, Block::author});
    MlpModel mlp(spec);
    mlp.init(FitData{toy.docs, toy.X, toy.vocab});
    std::vector<std::size_t> batch{0, 1, 2, 3};
    const std::uint64_t pass_seed = 91;
    Rng rng(pass_seed);
    mlp.train_pass(batch, toy.X, rng, true);
    auto params = mlp.train_params();
    auto grads_mut = mlp.train_grads();
    std::vector<const Matrix*> grads(grads_mut.begin(), grads_mut.end());
    auto loss = [&]() {
        Rng r(pass_seed);
        return mlp.train_pass(batch, toy.X, r, false);
    };
    CHECK(grad_check(loss, params, grads, 1e-5, 200, 18) < 1e-4);
}

// ---------------------------------------------------------------------------
// DAE corruption
// ---------------------------------------------------------------------------

TEST_CASE("dae_corrupt identity and degenerate fractions") {
    std::vector<std::uint32_t> row{1, 4, 7, 9};
    CHECK(dae_corrupt(row, 0.0, 5) == row);
    auto almost_all = dae_corrupt(row, 0.999999, 5);
    CHECK(almost_all.size() <= row.size());  // empty rows are allowed in training
}

TEST_CASE("dae_corrupt survival rate matches the noise fraction (Monte Carlo)") {
    std::vector<std::uint32_t> row(10, 0);
    std::iota(row.begin(), row.end(), 0);
    Rng rng(23);
    std::size_t survived = 0, total = 0;
    for (int trial = 0; trial < 10000; ++trial) {
        auto kept = dae_corrupt(row, 0.2, rng);
        survived += kept.size();
        total += row.size();
    }
    const double rate = static_cast<double>(survived) / static_cast<double>(total);
    CHECK(rate > 0.78);
    CHECK(rate < 0.82);
}

// ---------------------------------------------------------------------------
// Autoencoder family: gradients
// ---------------------------------------------------------------------------

namespace {

void check_recon_gradients(ModelKind kind, std::vector<Block> blocks, std::uint64_t seed) {
    // rows of at least 4 items keep DAE corruption from zeroing a whole row,
    // which would park the first pre-activation exactly on the relu kink
    auto toy = prepare_toy(testutil::random_corpus(6, 6, 29 + seed, 4, 6));
    RecommenderSpec spec = tiny_spec(kind, std::move(blocks), seed);
    AutoencoderModel m(spec);
    m.init(FitData{toy.docs, toy.X, toy.vocab});
    std::vector<std::size_t> batch{0, 1, 2, 3};
    const std::uint64_t pass_seed = 101 + seed;
    Rng rng(pass_seed);
    m.reconstruction_pass(batch, toy.X, rng, true);
    auto params = m.recon_params();
    auto grads_mut = m.recon_grads();
    std::vector<const Matrix*> grads(grads_mut.begin(), grads_mut.end());
    auto loss = [&]() {
        Rng r(pass_seed);
        return m.reconstruction_pass(batch, toy.X, r, false);
    };
    CHECK(grad_check(loss, params, grads, 1e-5, 200, 31 + seed) < 1e-4);
}

}  // namespace

TEST_CASE("ae reconstruction gradients pass the finite-difference check") {
    check_recon_gradients(ModelKind::ae, {}, 1);
    check_recon_gradients(ModelKind::ae, {Block::title, Block::author}, 2);
}

TEST_CASE("dae reconstruction gradients pass the finite-difference check") {
    check_recon_gradients(ModelKind::dae, {}, 3);
}

TEST_CASE("vae reconstruction plus kl gradients pass the finite-difference check") {
    check_recon_gradients(ModelKind::vae, {}, 4);
    check_recon_gradients(ModelKind::vae, {Block::title}, 5);
}

TEST_CASE("aae discriminator and fooling gradients pass the finite-difference check") {
    auto toy = prepare_toy(testutil::random_corpus(6, 6, 37));
    RecommenderSpec spec = tiny_spec(ModelKind::aae, {}, 6);
    AutoencoderModel m(spec);
    m.init(FitData{toy.docs, toy.X, toy.vocab});
    std::vector<std::size_t> batch{0, 1, 2, 3};

    SECTION("discriminator phase") {
        const std::uint64_t pass_seed = 111;
        Rng rng(pass_seed);
        m.discriminator_pass(batch, toy.X, rng, true);
        auto params = m.disc_.params();
        auto grads_mut = m.disc_.grads();
        std::vector<const Matrix*> grads(grads_mut.begin(), grads_mut.end());
        auto loss = [&]() {
            Rng r(pass_seed);
            return m.discriminator_pass(batch, toy.X, r, false);
        };
        CHECK(grad_check(loss, params, grads, 1e-5, 200, 38) < 1e-4);
    }

    SECTION("fooling phase") {
        const std::uint64_t pass_seed = 112;
        Rng rng(pass_seed);
        m.fooling_pass(batch, toy.X, rng, true);
        auto params = m.enc_.params();
        auto grads_mut = m.enc_.grads();
        std::vector<const Matrix*> grads(grads_mut.begin(), grads_mut.end());
        auto loss = [&]() {
            Rng r(pass_seed);
            return m.fooling_pass(batch, toy.X, r, false);
        };
        CHECK(grad_check(loss, params, grads, 1e-5, 200, 39) < 1e-4);
    }

    SECTION("literal sign flips the discriminator gradient") {
        const std::uint64_t pass_seed = 113;
        Rng rng(pass_seed);
        m.discriminator_pass(batch, toy.X, rng, true);
        Matrix std_grad = *m.disc_.grads().front();

        RecommenderSpec lspec = spec;
        lspec.hp.aae_literal_sign = true;
        AutoencoderModel lit(lspec);
        lit.init(FitData{toy.docs, toy.X, toy.vocab});
        Rng rng2(pass_seed);
        lit.discriminator_pass(batch, toy.X, rng2, true);
        Matrix lit_grad = *lit.disc_.grads().front();
        REQUIRE(std_grad.same_shape(lit_grad));
        for (std::size_t i = 0; i < std_grad.size(); ++i)
            CHECK(lit_grad.data[i] == Catch::Approx(-std_grad.data[i]).margin(1e-12));
    }
}

// ---------------------------------------------------------------------------
// Autoencoder family: behavior
// ---------------------------------------------------------------------------

TEST_CASE("ae memorizes a repeated row and ranks its items on top") {
    std::vector<Document> docs;
    for (int d = 0; d < 8; ++d) {
        Document doc;
        doc.id = "m" + std::to_string(d);
        doc.year = 2000;
        doc.items = {"i1", "i4", "i8"};
        docs.push_back(std::move(doc));
    }
    Document filler;
    filler.id = "filler";
    filler.year = 2000;
    filler.items = {"i0", "i2", "i3", "i5", "i6", "i7", "i9"};
    docs.push_back(filler);
    auto toy = prepare_toy(docs);
    REQUIRE(toy.vocab.size() == 10);

    RecommenderSpec spec = tiny_spec(ModelKind::ae);
    spec.hp.epochs = 300;
    spec.hp.hidden = 16;
    spec.hp.code = 8;
    spec.hp.dropout_p = 0.0;
    AutoencoderModel ae(spec);
    ae.fit(FitData{toy.docs, toy.X, toy.vocab});

    auto idx = [&](const char* item) { return *toy.vocab.index_of(item); };
    InteractionMatrix probe(10, {{idx("i1"), idx("i4"), idx("i8")}});
    Matrix r = ae.reconstruct(probe, std::nullopt);
    std::vector<std::size_t> order(10);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return r(0, a) > r(0, b); });
    std::set<std::uint32_t> top3(order.begin(), order.begin() + 3);
    CHECK(top3 == std::set<std::uint32_t>{idx("i1"), idx("i4"), idx("i8")});
}

TEST_CASE("vae code collapses toward the prior under a huge kl weight") {
    auto toy = prepare_toy(testutil::random_corpus(20, 10, 41));
    RecommenderSpec spec = tiny_spec(ModelKind::vae, {}, 7);
    spec.hp.epochs = 200;
    spec.hp.hidden = 12;
    spec.hp.code = 4;
    spec.hp.kl_weight = 1000.0;
    AutoencoderModel vae(spec);
    vae.fit(FitData{toy.docs, toy.X, toy.vocab});

    // encode() returns mu for the VAE; the logvar half sits next to it
    Matrix mu = vae.encode(toy.X);
    double mean_abs_mu = 0.0;
    for (double v : mu.data) mean_abs_mu += std::abs(v);
    mean_abs_mu /= static_cast<double>(mu.size());
    CHECK(mean_abs_mu < 0.2);

    Matrix full = vae.enc_.forward_inference(dense_all(toy.X));
    double mean_logvar = 0.0;
    for (std::size_t r = 0; r < full.rows; ++r)
        for (std::size_t c = spec.hp.code; c < 2 * spec.hp.code; ++c) mean_logvar += full(r, c);
    mean_logvar /= static_cast<double>(full.rows * spec.hp.code);
    CHECK(mean_logvar > -0.3);
    CHECK(mean_logvar < 0.3);
}

TEST_CASE("aae reaches a discriminator equilibrium on synthetic rows") {
    auto docs = testutil::block_corpus(600, 43, 2000, 5, 10, 8, 4, 1);
    auto toy = prepare_toy(std::move(docs));
    std::vector<Document> train_docs(toy.docs.begin(), toy.docs.begin() + 500);
    std::vector<Document> held_docs(toy.docs.begin() + 500, toy.docs.end());
    InteractionMatrix X_train = to_matrix(train_docs, toy.vocab);
    InteractionMatrix X_held = to_matrix(held_docs, toy.vocab);

    RecommenderSpec spec = tiny_spec(ModelKind::aae, {}, 8);
    spec.hp.hidden = 32;
    spec.hp.code = 8;
    spec.hp.epochs = 40;
    spec.hp.batch = 50;
    AutoencoderModel aae(spec);
    aae.fit(FitData{train_docs, X_train, toy.vocab});

    Matrix codes = aae.encode(X_held);
    Rng rng(4242);
    Matrix prior = Matrix::gaussian(codes.rows, codes.cols, 0.0, 1.0, rng);
    std::size_t correct = 0;
    Matrix pc = aae.discriminator().forward_inference(prior);
    Matrix cc = aae.discriminator().forward_inference(codes);
    for (std::size_t r = 0; r < pc.rows; ++r) {
        if (sigmoid(pc(r, 0)) >= 0.5) ++correct;  // prior labeled 1
        if (sigmoid(cc(r, 0)) < 0.5) ++correct;   // codes labeled 0
    }
    const double accuracy = static_cast<double>(correct) / static_cast<double>(2 * pc.rows);
    CHECK(accuracy >= 0.4);
    CHECK(accuracy <= 0.75);
}

TEST_CASE("training loss decreases for every trainable model") {
    auto toy = prepare_toy(testutil::block_corpus(300, 47, 2000, 5, 8, 8, 4, 1));
    for (ModelKind kind : {ModelKind::mlp, ModelKind::ae, ModelKind::dae, ModelKind::vae, ModelKind::aae}) {
        RecommenderSpec spec = tiny_spec(kind, kind == ModelKind::mlp ? std::vector<Block>{Block::title}
                                                                      : std::vector<Block>{});
        spec.hp.hidden = 24;
        spec.hp.code = 8;
        spec.hp.epochs = 6;
        spec.hp.batch = 50;
        auto model = make_recommender(spec);
        model->fit(FitData{toy.docs, toy.X, toy.vocab});
        REQUIRE(model->epoch_losses().size() == 6);
        CHECK(model->epoch_losses()[5] < model->epoch_losses()[0]);
    }
}

// ---------------------------------------------------------------------------
// Contracts: conditioning, determinism, serialization
// ---------------------------------------------------------------------------

TEST_CASE("conditioning widens only the first decoder layer") {
    auto toy = prepare_toy(testutil::random_corpus(12, 8, 53));
    RecommenderSpec plain = tiny_spec(ModelKind::ae, {}, 9);
    plain.hp.hidden = 100;
    plain.hp.code = 50;
    RecommenderSpec cond = plain;
    cond.conditions.blocks = {Block::title};
    cond.conditions.word_dim = 50;

    AutoencoderModel a(plain), b(cond);
    a.init(FitData{toy.docs, toy.X, toy.vocab});
    b.init(FitData{toy.docs, toy.X, toy.vocab});
    CHECK(b.param_count() - a.param_count() == 50 * 100);  // d x first hidden layer
}

TEST_CASE("scoring is deterministic and read-only") {
    auto toy = prepare_toy(testutil::random_corpus(20, 10, 59));
    for (ModelKind kind : {ModelKind::cooc, ModelKind::svd, ModelKind::ae, ModelKind::vae, ModelKind::aae}) {
        RecommenderSpec spec = tiny_spec(kind, {}, 10);
        spec.hp.epochs = 2;
        auto model = make_recommender(spec);
        model->fit(FitData{toy.docs, toy.X, toy.vocab});
        const std::string before = serialize_to_string(*model);
        ScoreData sd{toy.docs, toy.X, toy.vocab};
        Matrix s1 = model->score(sd);
        Matrix s2 = model->score(sd);
        CHECK(s1.data == s2.data);
        CHECK(serialize_to_string(*model) == before);
    }
}

TEST_CASE("conditioned scoring rejects missing or mismatched conditions") {
    auto toy = prepare_toy(testutil::random_corpus(10, 6, 61));
    RecommenderSpec spec = tiny_spec(ModelKind::ae, {Block::title}, 11);
    spec.hp.epochs = 1;
    AutoencoderModel cond_model(spec);
    cond_model.fit(FitData{toy.docs, toy.X, toy.vocab});
    CHECK_THROWS_WITH(cond_model.reconstruct(toy.X, std::nullopt),
                      Catch::Matchers::ContainsSubstring("trained with conditions"));
    Matrix wrong(toy.X.rows(), 3);
    CHECK_THROWS_WITH(cond_model.reconstruct(toy.X, wrong), Catch::Matchers::ContainsSubstring("width"));

    RecommenderSpec plain = tiny_spec(ModelKind::ae, {}, 12);
    plain.hp.epochs = 1;
    AutoencoderModel plain_model(plain);
    plain_model.fit(FitData{toy.docs, toy.X, toy.vocab});
    Matrix s(toy.X.rows(), 4, 0.5);
    CHECK_THROWS_WITH(plain_model.reconstruct(toy.X, s),
                      Catch::Matchers::ContainsSubstring("unconditioned"));
}

TEST_CASE("models refuse to score against a different vocabulary") {
    auto toy = prepare_toy(testutil::random_corpus(10, 6, 67));
    auto other = prepare_toy(testutil::random_corpus(10, 6, 68));
    RecommenderSpec spec = tiny_spec(ModelKind::cooc);
    auto model = make_recommender(spec);
    model->fit(FitData{toy.docs, toy.X, toy.vocab});
    CHECK_THROWS_WITH(model->score(ScoreData{other.docs, other.X, other.vocab}),
                      Catch::Matchers::ContainsSubstring("vocabulary"));
}

TEST_CASE("save and load round-trips every model kind") {
    auto toy = prepare_toy(testutil::random_corpus(15, 8, 71));
    for (ModelKind kind : {ModelKind::cooc, ModelKind::svd, ModelKind::mlp, ModelKind::ae, ModelKind::dae,
                           ModelKind::vae, ModelKind::aae}) {
        std::vector<Block> blocks;
        if (kind == ModelKind::mlp) blocks = {Block::title, Block::author};
        if (kind == ModelKind::ae) blocks = {Block::title};
        RecommenderSpec spec = tiny_spec(kind, blocks, 13);
        spec.hp.epochs = 2;
        auto model = make_recommender(spec);
        model->fit(FitData{toy.docs, toy.X, toy.vocab});
        const std::string bytes = serialize_to_string(*model);

        std::istringstream in(bytes);
        auto loaded = load_recommender(in);
        CHECK(loaded->spec().kind == kind);
        ScoreData sd{toy.docs, toy.X, toy.vocab};
        Matrix s1 = model->score(sd);
        Matrix s2 = loaded->score(sd);
        REQUIRE(s1.same_shape(s2));
        CHECK(s1.data == s2.data);
        CHECK(serialize_to_string(*loaded) == bytes);
    }
}
