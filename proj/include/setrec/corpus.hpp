#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "setrec/common.hpp"
#include "setrec/errors.hpp"

namespace setrec {

struct Document {
    std::string id;
    int year = 0;
    std::string title;
    std::vector<std::string> authors;
    std::string venue;
    std::vector<std::string> labels;
    std::vector<std::string> items;  // deduplicated on load
};

/// Dense item index built from training occurrence counts. Items are kept iff
/// their count is strictly greater than the pruning threshold k; indices are
/// assigned by descending count with lexicographic tie-break.
class Vocabulary {
public:
    Vocabulary() = default;

    Vocabulary(std::vector<std::string> items, std::vector<std::int64_t> counts, int k)
        : items_(std::move(items)), counts_(std::move(counts)), k_(k) {
        for (std::size_t i = 0; i < items_.size(); ++i) index_[items_[i]] = static_cast<std::uint32_t>(i);
    }

    std::size_t size() const { return items_.size(); }
    int pruning_k() const { return k_; }

    std::optional<std::uint32_t> index_of(const std::string& item) const {
        auto it = index_.find(item);
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    const std::string& item_at(std::uint32_t idx) const { return items_[idx]; }
    std::int64_t count_at(std::uint32_t idx) const { return counts_[idx]; }
    const std::vector<std::string>& items() const { return items_; }

    /// FNV-1a over the ordered item list; identifies the vocabulary a model
    /// was trained against.
    std::uint64_t hash() const {
        std::uint64_t h = 14695981039346656037ULL;
        auto feed = [&h](const char* data, std::size_t len) {
            for (std::size_t i = 0; i < len; ++i) {
                h ^= static_cast<unsigned char>(data[i]);
                h *= 1099511628211ULL;
            }
        };
        for (const auto& item : items_) {
            feed(item.data(), item.size());
            feed("\0", 1);
        }
        return h;
    }

private:
    std::vector<std::string> items_;
    std::vector<std::int64_t> counts_;
    std::unordered_map<std::string, std::uint32_t> index_;
    int k_ = 0;
};

/// Sparse binary document x item matrix; per-row sorted column indices with
/// implicit value 1.
class InteractionMatrix {
public:
    InteractionMatrix() = default;
    InteractionMatrix(std::size_t cols, std::vector<std::vector<std::uint32_t>> rows)
        : cols_(cols), rows_(std::move(rows)) {}

    std::size_t rows() const { return rows_.size(); }
    std::size_t cols() const { return cols_; }

    const std::vector<std::uint32_t>& row(std::size_t i) const { return rows_[i]; }
    std::size_t nnz(std::size_t i) const { return rows_[i].size(); }

    std::size_t total_nnz() const {
        std::size_t n = 0;
        for (const auto& r : rows_) n += r.size();
        return n;
    }

private:
    std::size_t cols_ = 0;
    std::vector<std::vector<std::uint32_t>> rows_;
};

struct SplitCorpus {
    std::vector<Document> train;
    std::vector<Document> test;
    std::optional<int> split_year;  // absent for random splits
};

// ---------------------------------------------------------------------------
// Loading
// ---------------------------------------------------------------------------

namespace detail {

inline Document parse_document(const nlohmann::json& j, std::size_t line_no) {
    auto fail = [line_no](const std::string& what) -> DataError {
        return DataError("corpus line " + std::to_string(line_no) + ": " + what);
    };
    if (!j.is_object()) throw fail("not a JSON object");
    Document d;
    if (!j.contains("id") || !j["id"].is_string()) throw fail("missing or non-string \"id\"");
    d.id = j["id"].get<std::string>();
    if (d.id.empty()) throw fail("empty \"id\"");
    if (!j.contains("year") || !j["year"].is_number_integer()) throw fail("missing or non-integer \"year\"");
    d.year = j["year"].get<int>();
    if (!j.contains("items") || !j["items"].is_array()) throw fail("missing or non-array \"items\"");
    std::unordered_set<std::string> seen;
    for (const auto& it : j["items"]) {
        if (!it.is_string()) throw fail("non-string entry in \"items\"");
        std::string s = it.get<std::string>();
        if (seen.insert(s).second) d.items.push_back(std::move(s));
    }
    if (j.contains("title") && j["title"].is_string()) d.title = j["title"].get<std::string>();
    if (j.contains("venue") && j["venue"].is_string()) d.venue = j["venue"].get<std::string>();
    if (j.contains("authors") && j["authors"].is_array())
        for (const auto& a : j["authors"])
            if (a.is_string()) d.authors.push_back(a.get<std::string>());
    if (j.contains("labels") && j["labels"].is_array())
        for (const auto& l : j["labels"])
            if (l.is_string()) d.labels.push_back(l.get<std::string>());
    return d;
}

inline bool blank_line(const std::string& s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

}  // namespace detail

/// Reads a JSONL corpus: one document object per line, keys "id", "year",
/// "items" required, "title"/"authors"/"venue"/"labels" optional, unknown
/// keys ignored. Duplicate items within a document are dropped; duplicate
/// document ids are an error.
inline std::vector<Document> load_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open corpus file: " + path);
    std::vector<Document> docs;
    std::unordered_set<std::string> ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::blank_line(line)) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw DataError("corpus line " + std::to_string(line_no) + ": malformed JSON");
        Document d = detail::parse_document(j, line_no);
        if (!ids.insert(d.id).second)
            throw DataError("corpus line " + std::to_string(line_no) + ": duplicate document id \"" + d.id + "\"");
        docs.push_back(std::move(d));
    }
    return docs;
}

// ---------------------------------------------------------------------------
// Splitting
// ---------------------------------------------------------------------------

/// Train on documents published before year T, test on the rest.
inline SplitCorpus chronological_split(const std::vector<Document>& docs, int split_year) {
    SplitCorpus s;
    s.split_year = split_year;
    for (const Document& d : docs)
        (d.year < split_year ? s.train : s.test).push_back(d);
    if (s.train.empty() || s.test.empty())
        throw DataError("chronological split at year " + std::to_string(split_year) + " leaves train=" +
                        std::to_string(s.train.size()) + ", test=" + std::to_string(s.test.size()) +
                        " documents; both sides must be non-empty");
    return s;
}

/// Uniformly samples round(test_ratio * |docs|) documents into the test set;
/// document order is preserved within each side.
inline SplitCorpus random_split(const std::vector<Document>& docs, double test_ratio, std::uint64_t seed) {
    if (!(test_ratio > 0.0 && test_ratio < 1.0))
        throw ConfigError("random split ratio must be in (0,1), got " + format_compact(test_ratio));
    const std::size_t n = docs.size();
    const std::size_t n_test = static_cast<std::size_t>(std::llround(test_ratio * static_cast<double>(n)));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<char> is_test(n, 0);
    for (std::size_t i = 0; i < n_test && i < n; ++i) is_test[order[i]] = 1;
    SplitCorpus s;
    for (std::size_t i = 0; i < n; ++i)
        (is_test[i] ? s.test : s.train).push_back(docs[i]);
    return s;
}

// ---------------------------------------------------------------------------
// Vocabulary and matrices
// ---------------------------------------------------------------------------

/// Keeps items with training occurrence count strictly greater than k.
inline Vocabulary build_vocabulary(const std::vector<Document>& train_docs, int k) {
    if (k < 0) throw ConfigError("pruning threshold must be >= 0, got " + std::to_string(k));
    std::unordered_map<std::string, std::int64_t> counts;
    for (const Document& d : train_docs)
        for (const std::string& item : d.items) ++counts[item];
    std::vector<std::pair<std::string, std::int64_t>> kept;
    std::int64_t max_count = 0;
    for (const auto& [item, c] : counts) {
        max_count = std::max(max_count, c);
        if (c > k) kept.emplace_back(item, c);
    }
    if (kept.empty())
        throw DataError("empty vocabulary: no item occurs more than k=" + std::to_string(k) +
                        " times (max count " + std::to_string(max_count) + ")");
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    std::vector<std::string> items;
    std::vector<std::int64_t> cs;
    items.reserve(kept.size());
    cs.reserve(kept.size());
    for (auto& [item, c] : kept) {
        items.push_back(std::move(item));
        cs.push_back(c);
    }
    return Vocabulary(std::move(items), std::move(cs), k);
}

/// Intersects item sets with the vocabulary and removes documents left with
/// fewer than two items. Idempotent.
inline std::vector<Document> apply_vocabulary(const std::vector<Document>& docs, const Vocabulary& vocab) {
    std::vector<Document> out;
    for (const Document& d : docs) {
        Document kept = d;
        kept.items.clear();
        for (const std::string& item : d.items)
            if (vocab.index_of(item)) kept.items.push_back(item);
        if (kept.items.size() >= 2) out.push_back(std::move(kept));
    }
    return out;
}

/// Documents must already be filtered by apply_vocabulary; an out-of-vocab
/// item here is a programming error, not bad data.
inline InteractionMatrix to_matrix(const std::vector<Document>& docs, const Vocabulary& vocab) {
    std::vector<std::vector<std::uint32_t>> rows;
    rows.reserve(docs.size());
    for (const Document& d : docs) {
        std::vector<std::uint32_t> row;
        row.reserve(d.items.size());
        for (const std::string& item : d.items) {
            auto idx = vocab.index_of(item);
            if (!idx)
                throw std::logic_error("to_matrix: item \"" + item + "\" of document \"" + d.id +
                                       "\" is outside the vocabulary; apply_vocabulary first");
            row.push_back(*idx);
        }
        std::sort(row.begin(), row.end());
        rows.push_back(std::move(row));
    }
    return InteractionMatrix(vocab.size(), std::move(rows));
}

}  // namespace setrec
