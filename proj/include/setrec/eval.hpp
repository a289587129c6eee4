#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "setrec/corpus.hpp"
#include "setrec/models.hpp"

namespace setrec {

/// Test rows after dropping a fraction of their items. Per row, omitted and
/// kept partition the original item set and |omitted| = max(1, floor(f*nnz)).
struct CorruptedTestSet {
    InteractionMatrix kept;
    std::vector<std::vector<std::uint32_t>> omitted;  // sorted per row
    double drop_fraction = 0.0;
    std::uint64_t seed = 0;
};

/// Draws max(1, floor(f*nnz)) omitted indices per row, uniformly without
/// replacement. The same seed reproduces the same omissions, so one
/// corruption can be shared by every model in a run.
inline CorruptedTestSet corrupt(const InteractionMatrix& X_test, double f, std::uint64_t seed) {
    if (!(f > 0.0 && f < 1.0))
        throw ConfigError("drop fraction must be in (0,1), got " + format_compact(f));
    Rng rng(seed);
    CorruptedTestSet out;
    out.drop_fraction = f;
    out.seed = seed;
    std::vector<std::vector<std::uint32_t>> kept_rows;
    kept_rows.reserve(X_test.rows());
    out.omitted.reserve(X_test.rows());
    for (std::size_t r = 0; r < X_test.rows(); ++r) {
        const auto& row = X_test.row(r);
        if (row.size() < 2)
            throw DataError("corrupt: test row " + std::to_string(r) + " has " + std::to_string(row.size()) +
                            " items; rows must hold at least 2");
        const std::size_t n_drop =
            std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(f * static_cast<double>(row.size()))));
        std::vector<std::uint32_t> pool = row;
        // partial Fisher-Yates: the first n_drop slots become the omissions
        for (std::size_t i = 0; i < n_drop; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
            std::swap(pool[i], pool[pick(rng)]);
        }
        std::vector<std::uint32_t> omitted(pool.begin(), pool.begin() + n_drop);
        std::vector<std::uint32_t> kept(pool.begin() + n_drop, pool.end());
        std::sort(omitted.begin(), omitted.end());
        std::sort(kept.begin(), kept.end());
        out.omitted.push_back(std::move(omitted));
        kept_rows.push_back(std::move(kept));
    }
    out.kept = InteractionMatrix(X_test.cols(), std::move(kept_rows));
    return out;
}

/// Reciprocal rank of one row: items ranked by descending score with ties
/// broken by ascending index; the rank of the best-placed omitted item.
/// With mask_observed the kept input items are excluded from the candidates.
inline double reciprocal_rank(const double* scores, std::size_t n, const std::vector<std::uint32_t>& kept,
                              const std::vector<std::uint32_t>& omitted, bool mask_observed) {
    if (omitted.empty()) return 0.0;
    // best omitted item under (score desc, index asc)
    std::uint32_t best = omitted.front();
    for (std::uint32_t o : omitted)
        if (scores[o] > scores[best] || (scores[o] == scores[best] && o < best)) best = o;
    const double s_best = scores[best];
    std::size_t ahead = 0;
    std::size_t kept_pos = 0;
    for (std::uint32_t j = 0; j < n; ++j) {
        while (kept_pos < kept.size() && kept[kept_pos] < j) ++kept_pos;
        if (mask_observed && kept_pos < kept.size() && kept[kept_pos] == j) continue;
        if (j == best) continue;
        if (scores[j] > s_best || (scores[j] == s_best && j < best)) ++ahead;
    }
    return 1.0 / static_cast<double>(ahead + 1);
}

/// Mean reciprocal rank of the first omitted item over all test rows.
inline double mrr(const Matrix& X_pred, const CorruptedTestSet& corrupted, bool mask_observed) {
    if (X_pred.rows != corrupted.kept.rows())
        throw ModelError("mrr: prediction rows " + std::to_string(X_pred.rows) + " do not match test rows " +
                         std::to_string(corrupted.kept.rows()));
    if (X_pred.rows == 0) return 0.0;
    double total = 0.0;
    for (std::size_t r = 0; r < X_pred.rows; ++r)
        total += reciprocal_rank(X_pred.row_ptr(r), X_pred.cols, corrupted.kept.row(r), corrupted.omitted[r],
                                 mask_observed);
    return total / static_cast<double>(X_pred.rows);
}

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

/// Vocabulary-filtered train/test views at one pruning threshold. Test
/// documents are filtered against the train vocabulary; those left with
/// fewer than two items are dropped and counted.
struct PreparedSplit {
    Vocabulary vocab;
    std::vector<Document> train_docs;
    std::vector<Document> test_docs;
    InteractionMatrix X_train;
    InteractionMatrix X_test;
    std::size_t dropped_train_docs = 0;
    std::size_t dropped_test_docs = 0;
};

inline PreparedSplit prepare_split(const SplitCorpus& split, int k) {
    PreparedSplit p;
    p.vocab = build_vocabulary(split.train, k);
    p.train_docs = apply_vocabulary(split.train, p.vocab);
    p.test_docs = apply_vocabulary(split.test, p.vocab);
    p.dropped_train_docs = split.train.size() - p.train_docs.size();
    p.dropped_test_docs = split.test.size() - p.test_docs.size();
    if (p.train_docs.empty()) throw DataError("pruning k=" + std::to_string(k) + " removed every training document");
    if (p.test_docs.empty()) throw DataError("pruning k=" + std::to_string(k) + " removed every test document");
    p.X_train = to_matrix(p.train_docs, p.vocab);
    p.X_test = to_matrix(p.test_docs, p.vocab);
    return p;
}

/// Per-run MRRs plus aggregates for one (model, conditions, k, f) cell.
struct MetricReport {
    std::string model;
    std::string condition_blocks;
    int k = 0;
    double f = 0.0;
    bool mask_observed = true;
    std::vector<int> run_index;
    std::vector<double> run_mrr;
    std::vector<std::uint64_t> run_seeds;
    std::vector<double> run_seconds;
    double mean = 0.0;
    double sd = 0.0;

    void finalize() {
        const double n = static_cast<double>(run_mrr.size());
        mean = 0.0;
        for (double v : run_mrr) mean += v;
        mean /= n;
        double var = 0.0;
        for (double v : run_mrr) var += (v - mean) * (v - mean);
        sd = std::sqrt(var / n);
    }

    /// One CSV row per run: model,condition_blocks,k,f,run,mrr,seed,seconds
    std::vector<std::string> csv_rows() const {
        std::vector<std::string> rows;
        for (std::size_t i = 0; i < run_mrr.size(); ++i)
            rows.push_back(model + "," + condition_blocks + "," + std::to_string(k) + "," + format_compact(f) +
                           "," + std::to_string(run_index[i]) + "," + format_double(run_mrr[i]) + "," +
                           std::to_string(run_seeds[i]) + "," + format_double(run_seconds[i], "%.3f"));
        return rows;
    }
};

/// Runs `runs` train/corrupt/score repetitions. Run i uses seed
/// base_seed + i for model initialization, shuffling and corruption, so the
/// omitted items are identical for every model evaluated under the same
/// (k, f, run). `only_run` restricts execution to a single run index.
inline MetricReport run_experiment(const RecommenderSpec& spec, const PreparedSplit& prep, int k, double f,
                                   int runs, std::uint64_t base_seed, bool mask_observed = true,
                                   int only_run = -1) {
    if (runs < 1) throw ConfigError("runs must be >= 1, got " + std::to_string(runs));
    MetricReport rep;
    rep.model = kind_name(spec.kind);
    rep.condition_blocks = blocks_label(spec.conditions.blocks);
    rep.k = k;
    rep.f = f;
    rep.mask_observed = mask_observed;
    for (int run = 0; run < runs; ++run) {
        if (only_run >= 0 && run != only_run) continue;
        const std::uint64_t seed = base_seed + static_cast<std::uint64_t>(run);
        const auto t0 = std::chrono::steady_clock::now();
        try {
            RecommenderSpec run_spec = spec;
            run_spec.hp.seed = seed;
            std::unique_ptr<Recommender> model = make_recommender(run_spec);
            model->fit(FitData{prep.train_docs, prep.X_train, prep.vocab});
            CorruptedTestSet corrupted = corrupt(prep.X_test, f, seed);
            Matrix scores = model->score(ScoreData{prep.test_docs, corrupted.kept, prep.vocab});
            rep.run_mrr.push_back(mrr(scores, corrupted, mask_observed));
        } catch (const std::exception& e) {
            throw ModelError("model=" + rep.model + " conditions=" + rep.condition_blocks + " k=" +
                             std::to_string(k) + " f=" + format_compact(f) + " run=" + std::to_string(run) +
                             ": " + e.what());
        }
        const auto t1 = std::chrono::steady_clock::now();
        rep.run_index.push_back(run);
        rep.run_seeds.push_back(seed);
        rep.run_seconds.push_back(std::chrono::duration<double>(t1 - t0).count());
    }
    if (rep.run_mrr.empty())
        throw ConfigError("run filter selected no runs (runs=" + std::to_string(runs) + ")");
    rep.finalize();
    return rep;
}

}  // namespace setrec
