#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "setrec/config.hpp"
#include "setrec/eval.hpp"
#include "setrec/stats.hpp"

namespace setrec {

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

struct CorpusReport {
    std::size_t documents = 0;
    double title_pct = 0.0;
    double authors_pct = 0.0;
    double venue_pct = 0.0;
    double labels_pct = 0.0;
    double items_pct = 0.0;
    std::vector<std::string> violations;
};

/// Lenient scan: collects schema violations with line numbers instead of
/// stopping at the first bad record.
inline CorpusReport scan_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open corpus file: " + path);
    CorpusReport rep;
    std::unordered_set<std::string> ids;
    std::size_t with_title = 0, with_authors = 0, with_venue = 0, with_labels = 0, with_items = 0;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::blank_line(line)) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            rep.violations.push_back("line " + std::to_string(line_no) + ": malformed JSON");
            continue;
        }
        Document d;
        try {
            d = detail::parse_document(j, line_no);
        } catch (const DataError& e) {
            rep.violations.push_back(e.what());
            continue;
        }
        if (!ids.insert(d.id).second) {
            rep.violations.push_back("line " + std::to_string(line_no) + ": duplicate document id \"" + d.id +
                                     "\"");
            continue;
        }
        ++rep.documents;
        if (!d.title.empty()) ++with_title;
        if (!d.authors.empty()) ++with_authors;
        if (!d.venue.empty()) ++with_venue;
        if (!d.labels.empty()) ++with_labels;
        if (!d.items.empty()) ++with_items;
    }
    if (rep.documents > 0) {
        const double n = static_cast<double>(rep.documents);
        rep.title_pct = 100.0 * static_cast<double>(with_title) / n;
        rep.authors_pct = 100.0 * static_cast<double>(with_authors) / n;
        rep.venue_pct = 100.0 * static_cast<double>(with_venue) / n;
        rep.labels_pct = 100.0 * static_cast<double>(with_labels) / n;
        rep.items_pct = 100.0 * static_cast<double>(with_items) / n;
    }
    return rep;
}

inline int cmd_validate(const std::string& corpus_path, std::ostream& out) {
    CorpusReport rep = scan_corpus(corpus_path);
    out << "documents: " << rep.documents << "\n";
    if (rep.documents == 0) out << "warning: 0 documents in corpus\n";
    auto pct = [](double v) { return format_double(v, "%.0f"); };
    out << "field availability:\n";
    out << "  Title " << pct(rep.title_pct) << "%\n";
    out << "  Authors " << pct(rep.authors_pct) << "%\n";
    out << "  Venue " << pct(rep.venue_pct) << "%\n";
    out << "  Labels " << pct(rep.labels_pct) << "%\n";
    out << "  Items " << pct(rep.items_pct) << "%\n";
    out << "violations: " << rep.violations.size() << "\n";
    for (const auto& v : rep.violations) out << "  " << v << "\n";
    return rep.violations.empty() ? 0 : 2;
}

// ---------------------------------------------------------------------------
// stats
// ---------------------------------------------------------------------------

/// One summary row per pruning threshold, computed on the whole corpus
/// (vocabulary and filtering are dataset-level here, not split-level).
inline int cmd_stats(const ExperimentConfig& cfg, std::ostream& out) {
    if (cfg.corpus.empty()) throw ConfigError("stats: corpus path is required");
    if (cfg.pruning.empty()) throw ConfigError("stats: pruning list is empty");
    const std::vector<Document> docs = load_corpus(cfg.corpus);
    if (docs.empty()) throw DataError("stats: corpus has no documents");
    std::vector<std::string> rows;
    for (int k : cfg.pruning) {
        Vocabulary vocab = build_vocabulary(docs, k);
        std::vector<Document> filtered = apply_vocabulary(docs, vocab);
        rows.push_back(summarize(filtered, vocab, k, cfg.dataset_name).csv_row());
    }
    out << DatasetSummary::csv_header() << "\n";
    for (const auto& r : rows) out << r << "\n";
    if (!cfg.out.empty()) {
        std::filesystem::create_directories(cfg.out);
        std::ofstream file(std::filesystem::path(cfg.out) / "stats.csv");
        file << DatasetSummary::csv_header() << "\n";
        for (const auto& r : rows) file << r << "\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

namespace detail {

struct FieldAvailability {
    bool title = false, author = false, venue = false, labels = false;
};

inline FieldAvailability field_availability(const std::vector<Document>& docs) {
    FieldAvailability a;
    for (const Document& d : docs) {
        a.title |= !d.title.empty();
        a.author |= !d.authors.empty();
        a.venue |= !d.venue.empty();
        a.labels |= !d.labels.empty();
    }
    return a;
}

inline bool block_available(Block b, const FieldAvailability& a) {
    switch (b) {
        case Block::title: return a.title;
        case Block::author: return a.author;
        case Block::venue: return a.venue;
        case Block::labels: return a.labels;
    }
    return false;
}

/// Resolves a condition-set label against the corpus. "all" means every
/// available metadata block; the labels block is never a condition in the
/// subject-label task (it would leak the prediction target).
inline std::vector<Block> resolve_condition_set(const std::string& label, const FieldAvailability& avail,
                                                TaskKind task) {
    std::vector<Block> blocks;
    if (label == "none") return blocks;
    if (label == "all") {
        for (Block b : {Block::title, Block::author, Block::venue, Block::labels}) {
            if (b == Block::labels && task == TaskKind::labels) continue;
            if (block_available(b, avail)) blocks.push_back(b);
        }
        if (blocks.empty()) throw ConfigError("condition set \"all\": corpus has no usable metadata fields");
        return blocks;
    }
    for (const std::string& part : split_list(label, '+')) {
        auto b = block_from_name(part);
        if (!b) throw ConfigError("unknown condition block \"" + part + "\"");
        if (*b == Block::labels && task == TaskKind::labels)
            throw ConfigError("condition set \"" + label +
                              "\": the labels block is the prediction target of the subject-label task and "
                              "cannot be used as input (leakage)");
        if (!block_available(*b, avail))
            throw ConfigError("condition block \"" + part + "\" is requested but the corpus has no such field");
        blocks.push_back(*b);
    }
    return blocks;
}

struct SweepCell {
    ModelKind kind;
    std::string cond_label;
    std::vector<Block> blocks;
    int k = 0;
    double f = 0.0;
};

struct CellResult {
    std::vector<std::string> result_rows;  // model,cond,k,f,run,mrr,seed,error
    std::vector<std::string> timing_rows;  // eval schema incl. seconds
    std::optional<MetricReport> report;
    bool failed = false;
};

inline std::string sanitize_csv(std::string s) {
    for (char& c : s)
        if (c == ',' || c == '\n' || c == '\r') c = ';';
    return s;
}

}  // namespace detail

/// Executes the full model x condition-set x pruning x drop cross-product.
/// Deterministic: two runs with the same config and corpus produce
/// byte-identical results CSVs. Wall-clock timings go to a separate file.
inline int cmd_run(const ExperimentConfig& cfg, std::ostream& log) {
    validate_config(cfg);

    const std::vector<Document> docs = load_corpus(cfg.corpus);
    if (docs.empty()) throw DataError("run: corpus has no documents");
    const detail::FieldAvailability avail = detail::field_availability(docs);

    // resolve condition sets up front so config errors surface before work
    std::vector<std::pair<std::string, std::vector<Block>>> cond_sets;
    for (const std::string& label : cfg.condition_sets)
        cond_sets.emplace_back(label, detail::resolve_condition_set(label, avail, cfg.task));

    SplitCorpus split = cfg.split_year ? chronological_split(docs, *cfg.split_year)
                                       : random_split(docs, *cfg.split_ratio, cfg.seed);
    log << "split: train=" << split.train.size() << " test=" << split.test.size() << "\n";

    std::map<int, PreparedSplit> prepared;
    for (int k : cfg.pruning) {
        if (!prepared.count(k)) {
            prepared.emplace(k, prepare_split(split, k));
            const PreparedSplit& p = prepared.at(k);
            log << "k=" << k << ": vocabulary=" << p.vocab.size() << " train_docs=" << p.train_docs.size()
                << " test_docs=" << p.test_docs.size() << " (dropped " << p.dropped_test_docs
                << " test docs without two vocabulary items)\n";
        }
    }

    std::vector<detail::SweepCell> cells;
    for (ModelKind kind : cfg.models)
        for (const auto& [label, blocks] : cond_sets)
            for (int k : cfg.pruning)
                for (double f : cfg.drop) {
                    if (cfg.only) {
                        if (cfg.only->model != kind_name(kind) || cfg.only->k != k ||
                            std::abs(cfg.only->f - f) > 1e-12)
                            continue;
                    }
                    cells.push_back({kind, label, blocks, k, f});
                }
    if (cells.empty()) throw ConfigError("run: the sweep selects no cells (check --only)");

    std::filesystem::create_directories(cfg.out);
    std::ofstream results(std::filesystem::path(cfg.out) / "results.csv");
    std::ofstream timings(std::filesystem::path(cfg.out) / "timings.csv");
    results << "model,condition_blocks,k,f,run,mrr,seed,error\n";
    timings << "model,condition_blocks,k,f,run,mrr,seed,seconds\n";

    std::vector<detail::CellResult> done(cells.size());
    std::vector<char> ready(cells.size(), 0);
    std::atomic<std::size_t> next_cell{0};
    std::mutex flush_mutex;
    std::size_t flushed = 0;

    auto run_cell = [&](std::size_t idx) {
        const detail::SweepCell& cell = cells[idx];
        detail::CellResult res;
        RecommenderSpec spec;
        spec.kind = cell.kind;
        spec.conditions.blocks = cell.blocks;
        spec.conditions.word_dim = cfg.word_dim;
        spec.conditions.author_dim = cfg.author_dim;
        spec.conditions.embedding_file = cfg.embedding_file;
        spec.hp = cfg.hp;
        const int only_run = cfg.only ? cfg.only->run : -1;
        try {
            MetricReport rep = run_experiment(spec, prepared.at(cell.k), cell.k, cell.f, cfg.runs, cfg.seed,
                                              cfg.mask_observed, only_run);
            rep.condition_blocks = blocks_label(cell.blocks);
            for (std::size_t i = 0; i < rep.run_mrr.size(); ++i) {
                res.result_rows.push_back(rep.model + "," + rep.condition_blocks + "," + std::to_string(cell.k) +
                                          "," + format_compact(cell.f) + "," + std::to_string(rep.run_index[i]) +
                                          "," + format_double(rep.run_mrr[i]) + "," +
                                          std::to_string(rep.run_seeds[i]) + ",");
            }
            res.timing_rows = rep.csv_rows();
            res.report = std::move(rep);
        } catch (const std::exception& e) {
            res.failed = true;
            const std::string err = detail::sanitize_csv(e.what());
            for (int run = 0; run < cfg.runs; ++run) {
                if (only_run >= 0 && run != only_run) continue;
                res.result_rows.push_back(std::string(kind_name(cell.kind)) + "," + blocks_label(cell.blocks) +
                                          "," + std::to_string(cell.k) + "," + format_compact(cell.f) + "," +
                                          std::to_string(run) + ",," +
                                          std::to_string(cfg.seed + static_cast<std::uint64_t>(run)) + "," + err);
            }
        }
        {
            std::lock_guard<std::mutex> lock(flush_mutex);
            done[idx] = std::move(res);
            ready[idx] = 1;
            while (flushed < cells.size() && ready[flushed]) {
                for (const auto& row : done[flushed].result_rows) results << row << "\n";
                for (const auto& row : done[flushed].timing_rows) timings << row << "\n";
                results.flush();
                ++flushed;
            }
        }
    };

    const std::size_t n_workers = std::min<std::size_t>(static_cast<std::size_t>(cfg.jobs), cells.size());
    if (n_workers <= 1) {
        for (std::size_t i = 0; i < cells.size(); ++i) run_cell(i);
    } else {
        std::vector<std::thread> workers;
        for (std::size_t w = 0; w < n_workers; ++w)
            workers.emplace_back([&]() {
                for (;;) {
                    const std::size_t idx = next_cell.fetch_add(1);
                    if (idx >= cells.size()) return;
                    run_cell(idx);
                }
            });
        for (auto& t : workers) t.join();
    }
    results.close();
    timings.close();

    // plot-ready series, one file per (condition set, fixed axis) panel
    const std::filesystem::path plot_dir = std::filesystem::path(cfg.out) / "plots";
    std::filesystem::create_directories(plot_dir);
    std::set<std::string> labels;
    for (const auto& [label, blocks] : cond_sets) labels.insert(label);
    auto cell_report = [&](const std::string& label, ModelKind kind, int k, double f) -> const MetricReport* {
        for (std::size_t i = 0; i < cells.size(); ++i)
            if (cells[i].cond_label == label && cells[i].kind == kind && cells[i].k == k &&
                cells[i].f == f && done[i].report)
                return &*done[i].report;
        return nullptr;
    };
    for (const std::string& label : labels) {
        for (int k : cfg.pruning) {
            std::ofstream series(plot_dir / ("mrr_vs_f__" + label + "__k" + std::to_string(k) + ".csv"));
            series << "f,model,mean_mrr,sd_mrr\n";
            for (double f : cfg.drop)
                for (ModelKind kind : cfg.models)
                    if (const MetricReport* rep = cell_report(label, kind, k, f))
                        series << format_compact(f) << "," << kind_name(kind) << "," << format_double(rep->mean)
                               << "," << format_double(rep->sd) << "\n";
        }
        for (double f : cfg.drop) {
            std::ofstream series(plot_dir / ("mrr_vs_k__" + label + "__f" + format_compact(f) + ".csv"));
            series << "k,model,mean_mrr,sd_mrr\n";
            for (int k : cfg.pruning)
                for (ModelKind kind : cfg.models)
                    if (const MetricReport* rep = cell_report(label, kind, k, f))
                        series << k << "," << kind_name(kind) << "," << format_double(rep->mean) << ","
                               << format_double(rep->sd) << "\n";
        }
    }

    std::size_t failures = 0;
    for (const auto& r : done) failures += r.failed ? 1 : 0;
    log << "cells: " << cells.size() << " (" << failures << " failed)\n";
    log << "results: " << (std::filesystem::path(cfg.out) / "results.csv").string() << "\n";
    return failures == 0 ? 0 : 3;
}

}  // namespace setrec
