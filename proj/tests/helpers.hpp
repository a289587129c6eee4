#pragma once

// Synthetic corpora and independent oracles shared by the unit and
// acceptance suites. Oracles deliberately take different computation routes
// than the library code they check.

#include <algorithm>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "setrec/corpus.hpp"
#include "setrec/eval.hpp"
#include "setrec/tensor.hpp"

namespace testutil {

using namespace setrec;

/// Items cluster into blocks; documents draw most items from one block plus
/// a few global noise items. Titles are random tokens, unrelated to items.
/// Co-occurrence within a block mimics relatedness semantics.
inline std::vector<Document> block_corpus(std::size_t n_docs, std::uint64_t seed, int first_year,
                                          int years_span, std::size_t n_blocks = 20,
                                          std::size_t block_size = 10, std::size_t block_items = 5,
                                          std::size_t noise_items = 2) {
    Rng rng(seed);
    const std::size_t n_items = n_blocks * block_size;
    std::uniform_int_distribution<std::size_t> pick_block(0, n_blocks - 1);
    std::uniform_int_distribution<std::size_t> pick_global(0, n_items - 1);
    std::uniform_int_distribution<int> pick_year(first_year, first_year + years_span - 1);
    std::uniform_int_distribution<std::size_t> pick_token(0, 99);
    std::vector<Document> docs;
    docs.reserve(n_docs);
    for (std::size_t d = 0; d < n_docs; ++d) {
        const std::size_t b = pick_block(rng);
        std::set<std::size_t> items;
        std::uniform_int_distribution<std::size_t> pick_in_block(b * block_size, (b + 1) * block_size - 1);
        while (items.size() < block_items) items.insert(pick_in_block(rng));
        const std::size_t want = block_items + noise_items;
        while (items.size() < want) items.insert(pick_global(rng));
        Document doc;
        doc.id = "doc" + std::to_string(d);
        doc.year = pick_year(rng);
        doc.title = "t" + std::to_string(pick_token(rng)) + " t" + std::to_string(pick_token(rng)) + " t" +
                    std::to_string(pick_token(rng));
        for (std::size_t it : items) doc.items.push_back("item" + std::to_string(it));
        docs.push_back(std::move(doc));
    }
    return docs;
}

/// Items are fully determined by the title tokens but mutually exclusive
/// within topic groups: a document picks a few groups and exactly one item
/// per group, and its title names the chosen items. Co-occurrence carries
/// no signal about which sibling item belongs to a group; the title does.
inline std::vector<Document> diversity_corpus(std::size_t n_docs, std::uint64_t seed, int first_year,
                                              int years_span, std::size_t n_groups = 10,
                                              std::size_t group_size = 20, std::size_t picks = 3) {
    Rng rng(seed);
    std::uniform_int_distribution<int> pick_year(first_year, first_year + years_span - 1);
    std::vector<std::size_t> groups(n_groups);
    std::iota(groups.begin(), groups.end(), 0);
    std::vector<Document> docs;
    docs.reserve(n_docs);
    for (std::size_t d = 0; d < n_docs; ++d) {
        std::shuffle(groups.begin(), groups.end(), rng);
        Document doc;
        doc.id = "doc" + std::to_string(d);
        doc.year = pick_year(rng);
        for (std::size_t g = 0; g < picks; ++g) {
            std::uniform_int_distribution<std::size_t> pick_member(0, group_size - 1);
            const std::size_t item = groups[g] * group_size + pick_member(rng);
            doc.items.push_back("item" + std::to_string(item));
            doc.title += (doc.title.empty() ? "" : " ") + ("w" + std::to_string(item));
        }
        docs.push_back(std::move(doc));
    }
    return docs;
}

/// Small random corpus with titles and authors, for model plumbing tests.
inline std::vector<Document> random_corpus(std::size_t n_docs, std::size_t n_items, std::uint64_t seed,
                                           std::size_t min_items = 2, std::size_t max_items = 5) {
    Rng rng(seed);
    std::uniform_int_distribution<std::size_t> n_pick(min_items, max_items);
    std::uniform_int_distribution<std::size_t> pick(0, n_items - 1);
    std::uniform_int_distribution<std::size_t> tok(0, 19);
    std::uniform_int_distribution<std::size_t> auth(0, 7);
    std::vector<Document> docs;
    for (std::size_t d = 0; d < n_docs; ++d) {
        Document doc;
        doc.id = "r" + std::to_string(d);
        doc.year = 2000 + static_cast<int>(d % 10);
        doc.title = "w" + std::to_string(tok(rng)) + " w" + std::to_string(tok(rng));
        doc.authors = {"a" + std::to_string(auth(rng))};
        doc.venue = "v" + std::to_string(tok(rng) % 4);
        std::set<std::size_t> items;
        const std::size_t want = n_pick(rng);
        while (items.size() < want) items.insert(pick(rng));
        for (std::size_t it : items) doc.items.push_back("i" + std::to_string(it));
        docs.push_back(std::move(doc));
    }
    return docs;
}

struct PreparedToy {
    std::vector<Document> docs;
    Vocabulary vocab;
    InteractionMatrix X;
};

inline PreparedToy prepare_toy(std::vector<Document> docs, int k = 0) {
    PreparedToy t;
    t.vocab = build_vocabulary(docs, k);
    t.docs = apply_vocabulary(docs, t.vocab);
    t.X = to_matrix(t.docs, t.vocab);
    return t;
}

/// Brute-force co-occurrence: per item pair, scan every row for joint
/// membership. Quadratic and slow on purpose.
inline Matrix cooc_oracle(const InteractionMatrix& X) {
    const std::size_t n = X.cols();
    Matrix C(n, n, 0.0);
    auto contains = [&](std::size_t row, std::uint32_t item) {
        const auto& r = X.row(row);
        return std::binary_search(r.begin(), r.end(), item);
    };
    for (std::uint32_t i = 0; i < n; ++i)
        for (std::uint32_t j = 0; j < n; ++j)
            for (std::size_t r = 0; r < X.rows(); ++r)
                if (contains(r, i) && contains(r, j)) C(i, j) += 1.0;
    return C;
}

inline std::vector<double> cooc_score_oracle(const InteractionMatrix& X_train,
                                             const std::vector<std::uint32_t>& kept) {
    const std::size_t n = X_train.cols();
    std::vector<double> s(n, 0.0);
    for (std::uint32_t j = 0; j < n; ++j)
        for (std::uint32_t i : kept)
            for (std::size_t r = 0; r < X_train.rows(); ++r) {
                const auto& row = X_train.row(r);
                if (std::binary_search(row.begin(), row.end(), i) &&
                    std::binary_search(row.begin(), row.end(), j))
                    s[j] += 1.0;
            }
    return s;
}

/// Full-sort reciprocal rank: sorts all (score, index) pairs and scans for
/// the first omitted item.
inline double rr_oracle(const double* scores, std::size_t n, const std::vector<std::uint32_t>& kept,
                        const std::vector<std::uint32_t>& omitted, bool mask_observed) {
    std::vector<std::uint32_t> order;
    for (std::uint32_t j = 0; j < n; ++j) {
        if (mask_observed && std::binary_search(kept.begin(), kept.end(), j)) continue;
        order.push_back(j);
    }
    std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    });
    for (std::size_t pos = 0; pos < order.size(); ++pos)
        if (std::binary_search(omitted.begin(), omitted.end(), order[pos]))
            return 1.0 / static_cast<double>(pos + 1);
    return 0.0;
}

inline double mrr_oracle(const Matrix& scores, const CorruptedTestSet& corrupted, bool mask_observed) {
    double total = 0.0;
    for (std::size_t r = 0; r < scores.rows; ++r)
        total += rr_oracle(scores.row_ptr(r), scores.cols, corrupted.kept.row(r), corrupted.omitted[r],
                           mask_observed);
    return total / static_cast<double>(scores.rows);
}

/// nth harmonic number; H(n)/n is the expected reciprocal rank of a random
/// ranker with a single omitted item.
inline double harmonic(std::size_t n) {
    double h = 0.0;
    for (std::size_t i = 1; i <= n; ++i) h += 1.0 / static_cast<double>(i);
    return h;
}

}  // namespace testutil
