#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "setrec/corpus.hpp"
#include "setrec/tensor.hpp"

namespace setrec {

/// Lowercase ASCII alphanumeric runs; everything else is a delimiter.
inline std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

enum class TextField { title, venue, labels };

inline const char* field_name(TextField f) {
    switch (f) {
        case TextField::title: return "title";
        case TextField::venue: return "venue";
        case TextField::labels: return "labels";
    }
    return "?";
}

/// Tokens of a document for a given field. Titles and venues are tokenized;
/// label strings are used verbatim, one token per label.
inline std::vector<std::string> field_tokens(const Document& d, TextField f) {
    switch (f) {
        case TextField::title: return tokenize(d.title);
        case TextField::venue: return tokenize(d.venue);
        case TextField::labels: return d.labels;
    }
    return {};
}

/// Document frequencies fitted on training documents only.
struct TfidfModel {
    std::size_t doc_count = 0;
    std::unordered_map<std::string, std::size_t> doc_freq;

    /// Smoothed idf with a +1 floor; defined for unseen tokens (df = 0).
    double idf(const std::string& token) const {
        auto it = doc_freq.find(token);
        const double df = it == doc_freq.end() ? 0.0 : static_cast<double>(it->second);
        return std::log((1.0 + static_cast<double>(doc_count)) / (1.0 + df)) + 1.0;
    }

    /// Tokens sorted lexicographically; the column order of bag-of-words
    /// matrices built from this model.
    std::vector<std::string> sorted_tokens() const {
        std::vector<std::string> out;
        out.reserve(doc_freq.size());
        for (const auto& [tok, df] : doc_freq) out.push_back(tok);
        std::sort(out.begin(), out.end());
        return out;
    }
};

inline TfidfModel fit_tfidf(const std::vector<Document>& train_docs, TextField field) {
    if (train_docs.empty()) throw DataError("fit_tfidf: empty training corpus");
    TfidfModel m;
    m.doc_count = train_docs.size();
    for (const Document& d : train_docs) {
        std::vector<std::string> toks = field_tokens(d, field);
        std::sort(toks.begin(), toks.end());
        toks.erase(std::unique(toks.begin(), toks.end()), toks.end());
        for (const std::string& t : toks) ++m.doc_freq[t];
    }
    return m;
}

/// Fixed-width word vectors. Unknown tokens are reported as absent rather
/// than zero so callers can skip them.
class EmbeddingTable {
public:
    EmbeddingTable() = default;
    explicit EmbeddingTable(std::size_t dim) : dim_(dim) {}

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return vectors_.size(); }

    const std::vector<double>* find(const std::string& token) const {
        auto it = vectors_.find(token);
        return it == vectors_.end() ? nullptr : &it->second;
    }

    void insert(const std::string& token, std::vector<double> v) {
        if (v.size() != dim_) throw DataError("embedding for \"" + token + "\" has wrong dimension");
        vectors_[token] = std::move(v);
    }

    /// Text format: one "token v1 v2 ... v_d" line per word; an optional
    /// "count dim" header line is detected and skipped.
    static EmbeddingTable load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw DataError("cannot open embedding file: " + path);
        EmbeddingTable table;
        std::string line;
        std::size_t line_no = 0;
        bool first = true;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            std::istringstream ss(line);
            std::string token;
            ss >> token;
            std::vector<double> vals;
            double v;
            while (ss >> v) vals.push_back(v);
            if (first) {
                first = false;
                // header form: two integer tokens and nothing else
                char* end = nullptr;
                const double maybe_count = std::strtod(token.c_str(), &end);
                if (end && *end == '\0' && vals.size() == 1 && maybe_count == std::floor(maybe_count) &&
                    vals[0] == std::floor(vals[0])) {
                    table.dim_ = static_cast<std::size_t>(vals[0]);
                    continue;
                }
                table.dim_ = vals.size();
            }
            if (vals.size() != table.dim_)
                throw DataError("embedding file line " + std::to_string(line_no) + ": expected " +
                                std::to_string(table.dim_) + " values, got " + std::to_string(vals.size()));
            table.vectors_[token] = std::move(vals);
        }
        if (table.vectors_.empty()) throw DataError("embedding file is empty: " + path);
        return table;
    }

    /// Deterministic random table over a token set, uniform in
    /// [-0.5/dim, 0.5/dim]; stands in for pre-trained vectors in tests and
    /// on corpora without an embedding file.
    static EmbeddingTable seeded_random(std::vector<std::string> tokens, std::size_t dim, std::uint64_t seed) {
        std::sort(tokens.begin(), tokens.end());
        tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
        EmbeddingTable table(dim);
        const double half = 0.5 / static_cast<double>(dim);
        Rng rng(seed);
        std::uniform_real_distribution<double> u(-half, half);
        for (const std::string& tok : tokens) {
            std::vector<double> v(dim);
            for (double& x : v) x = u(rng);
            table.vectors_[tok] = std::move(v);
        }
        return table;
    }

    const std::unordered_map<std::string, std::vector<double>>& raw() const { return vectors_; }

private:
    std::size_t dim_ = 0;
    std::unordered_map<std::string, std::vector<double>> vectors_;
};

/// TF-IDF weighted sum of word vectors, L2-normalized. Tokens missing from
/// the table contribute nothing; empty or fully unknown input gives the zero
/// vector.
inline std::vector<double> embed_tokens(const std::vector<std::string>& tokens, const TfidfModel& tfidf,
                                        const EmbeddingTable& table) {
    std::vector<double> v(table.dim(), 0.0);
    std::unordered_map<std::string, std::size_t> tf;
    for (const std::string& t : tokens) ++tf[t];
    for (const auto& [tok, count] : tf) {
        const std::vector<double>* e = table.find(tok);
        if (!e) continue;
        const double w = static_cast<double>(count) * tfidf.idf(tok);
        for (std::size_t i = 0; i < v.size(); ++i) v[i] += w * (*e)[i];
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm > 0.0)
        for (double& x : v) x /= norm;
    return v;
}

inline std::vector<double> embed_text(const std::string& text, const TfidfModel& tfidf,
                                      const EmbeddingTable& table) {
    return embed_tokens(tokenize(text), tfidf, table);
}

/// Row-normalized TF-IDF bag-of-words matrix with one column per training
/// token (lexicographic order). Used by the text-extended SVD.
inline Matrix tfidf_matrix(const std::vector<Document>& docs, TextField field, const TfidfModel& tfidf,
                           const std::vector<std::string>& token_order) {
    std::unordered_map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < token_order.size(); ++i) col[token_order[i]] = i;
    Matrix m = Matrix::zeros(docs.size(), token_order.size());
    for (std::size_t r = 0; r < docs.size(); ++r) {
        std::unordered_map<std::string, std::size_t> tf;
        for (const std::string& t : field_tokens(docs[r], field)) ++tf[t];
        double norm = 0.0;
        for (const auto& [tok, count] : tf) {
            auto it = col.find(tok);
            if (it == col.end()) continue;
            const double w = static_cast<double>(count) * tfidf.idf(tok);
            m(r, it->second) = w;
            norm += w * w;
        }
        if (norm > 0.0) {
            norm = std::sqrt(norm);
            for (std::size_t c = 0; c < m.cols; ++c) m(r, c) /= norm;
        }
    }
    return m;
}

/// Training-frequency order (ties lexicographic); unknown authors share one
/// extra trailing index.
class AuthorIndex {
public:
    AuthorIndex() = default;

    explicit AuthorIndex(const std::vector<Document>& train_docs) {
        std::unordered_map<std::string, std::int64_t> counts;
        for (const Document& d : train_docs)
            for (const std::string& a : d.authors) ++counts[a];
        std::vector<std::pair<std::string, std::int64_t>> order(counts.begin(), counts.end());
        std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;
        });
        names_.reserve(order.size());
        for (auto& [name, c] : order) {
            index_[name] = static_cast<std::uint32_t>(names_.size());
            names_.push_back(std::move(name));
        }
    }

    explicit AuthorIndex(std::vector<std::string> names) : names_(std::move(names)) {
        for (std::size_t i = 0; i < names_.size(); ++i) index_[names_[i]] = static_cast<std::uint32_t>(i);
    }

    std::size_t size() const { return names_.size(); }
    std::uint32_t unknown_index() const { return static_cast<std::uint32_t>(names_.size()); }

    std::uint32_t index_of(const std::string& author) const {
        auto it = index_.find(author);
        return it == index_.end() ? unknown_index() : it->second;
    }

    const std::vector<std::string>& names() const { return names_; }

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, std::uint32_t> index_;
};

// ---------------------------------------------------------------------------
// Condition assembly
// ---------------------------------------------------------------------------

enum class Block : std::uint8_t { title = 0, author = 1, venue = 2, labels = 3 };

inline const char* block_name(Block b) {
    switch (b) {
        case Block::title: return "title";
        case Block::author: return "author";
        case Block::venue: return "venue";
        case Block::labels: return "labels";
    }
    return "?";
}

struct ConditionConfig {
    std::vector<Block> blocks;  // stored in canonical order title,author,venue,labels
    std::size_t word_dim = 50;
    std::size_t author_dim = 32;
    std::optional<std::string> embedding_file;

    bool has(Block b) const { return std::find(blocks.begin(), blocks.end(), b) != blocks.end(); }

    void normalize() {
        std::sort(blocks.begin(), blocks.end(),
                  [](Block a, Block b) { return static_cast<int>(a) < static_cast<int>(b); });
        blocks.erase(std::unique(blocks.begin(), blocks.end()), blocks.end());
    }
};

inline std::string blocks_label(const std::vector<Block>& blocks) {
    if (blocks.empty()) return "none";
    std::string out;
    for (Block b : blocks) {
        if (!out.empty()) out += "+";
        out += block_name(b);
    }
    return out;
}

/// Dense side-information rows, fixed block order title|author|venue|labels.
/// Width is the sum of the active block widths; rows follow document order.
struct ConditionMatrix {
    Matrix values;
    std::vector<Block> blocks;
    std::vector<std::size_t> offsets;  // aligned with blocks
    std::vector<std::size_t> widths;
};

/// Fitted feature models for the active blocks. The author block's embedding
/// rows are trainable and owned by the model that uses them; this class only
/// maps documents to author indices and writes the pooled rows.
class ConditionModel {
public:
    ConditionModel() = default;

    static ConditionModel fit(const std::vector<Document>& train_docs, ConditionConfig config,
                              std::uint64_t seed) {
        config.normalize();
        if (config.blocks.empty()) throw ConfigError("empty condition: no blocks requested");
        ConditionModel m;
        m.config_ = config;
        std::optional<EmbeddingTable> file_table;
        if (config.embedding_file) file_table = EmbeddingTable::load(*config.embedding_file);
        auto fit_text = [&](TextField field, std::uint64_t tag) {
            TfidfModel tf = fit_tfidf(train_docs, field);
            EmbeddingTable table = file_table
                                       ? *file_table
                                       : EmbeddingTable::seeded_random(tf.sorted_tokens(), config.word_dim,
                                                                       derive_seed(seed, tag));
            return std::make_pair(std::move(tf), std::move(table));
        };
        for (Block b : config.blocks) {
            switch (b) {
                case Block::title: {
                    auto [tf, table] = fit_text(TextField::title, 1);
                    m.title_tfidf_ = std::move(tf);
                    m.title_table_ = std::move(table);
                    break;
                }
                case Block::venue: {
                    auto [tf, table] = fit_text(TextField::venue, 2);
                    m.venue_tfidf_ = std::move(tf);
                    m.venue_table_ = std::move(table);
                    break;
                }
                case Block::labels: {
                    auto [tf, table] = fit_text(TextField::labels, 3);
                    m.labels_tfidf_ = std::move(tf);
                    m.labels_table_ = std::move(table);
                    break;
                }
                case Block::author:
                    m.authors_ = AuthorIndex(train_docs);
                    break;
            }
        }
        return m;
    }

    const ConditionConfig& config() const { return config_; }

    std::size_t block_width(Block b) const {
        return b == Block::author ? config_.author_dim : config_.word_dim;
    }

    std::size_t total_dim() const {
        std::size_t d = 0;
        for (Block b : config_.blocks) d += block_width(b);
        return d;
    }

    std::size_t block_offset(Block b) const {
        std::size_t off = 0;
        for (Block blk : config_.blocks) {
            if (blk == b) return off;
            off += block_width(blk);
        }
        throw ModelError(std::string("block ") + block_name(b) + " is not active");
    }

    const AuthorIndex& author_index() const {
        if (!authors_) throw ModelError("author block requested but no author index was fitted");
        return *authors_;
    }

    /// Author indices per document (unknown authors map to the shared
    /// unknown slot); empty list for documents without authors.
    std::vector<std::vector<std::uint32_t>> author_lists(const std::vector<Document>& docs) const {
        const AuthorIndex& idx = author_index();
        std::vector<std::vector<std::uint32_t>> out(docs.size());
        for (std::size_t i = 0; i < docs.size(); ++i)
            for (const std::string& a : docs[i].authors) out[i].push_back(idx.index_of(a));
        return out;
    }

    /// Rows for the text blocks only; the author block slice is left zero.
    Matrix static_rows(const std::vector<Document>& docs) const {
        Matrix m = Matrix::zeros(docs.size(), total_dim());
        for (Block b : config_.blocks) {
            if (b == Block::author) continue;
            const TfidfModel* tf = nullptr;
            const EmbeddingTable* table = nullptr;
            TextField field = TextField::title;
            switch (b) {
                case Block::title: tf = title_tfidf_ ? &*title_tfidf_ : nullptr;
                                   table = title_table_ ? &*title_table_ : nullptr;
                                   field = TextField::title; break;
                case Block::venue: tf = venue_tfidf_ ? &*venue_tfidf_ : nullptr;
                                   table = venue_table_ ? &*venue_table_ : nullptr;
                                   field = TextField::venue; break;
                case Block::labels: tf = labels_tfidf_ ? &*labels_tfidf_ : nullptr;
                                    table = labels_table_ ? &*labels_table_ : nullptr;
                                    field = TextField::labels; break;
                case Block::author: break;
            }
            if (!tf || !table)
                throw ModelError(std::string("condition block ") + block_name(b) + " has no fitted model");
            const std::size_t off = block_offset(b);
            for (std::size_t r = 0; r < docs.size(); ++r) {
                std::vector<double> v = embed_tokens(field_tokens(docs[r], field), *tf, *table);
                std::copy(v.begin(), v.end(), m.row_ptr(r) + off);
            }
        }
        return m;
    }

    /// Writes the mean of the documents' author embedding rows into the
    /// author slice of `rows`. Documents without authors keep a zero block.
    void fill_author_block(Matrix& rows, const std::vector<std::vector<std::uint32_t>>& lists,
                           const Matrix& author_rows) const {
        const std::size_t off = block_offset(Block::author);
        const std::size_t w = config_.author_dim;
        if (author_rows.cols != w) throw ModelError("author embedding width mismatch");
        for (std::size_t r = 0; r < lists.size(); ++r) {
            if (lists[r].empty()) continue;
            double* dst = rows.row_ptr(r) + off;
            const double inv = 1.0 / static_cast<double>(lists[r].size());
            for (std::uint32_t a : lists[r]) {
                const double* src = author_rows.row_ptr(a);
                for (std::size_t c = 0; c < w; ++c) dst[c] += inv * src[c];
            }
        }
    }

    /// Full condition matrix for a document list. `author_rows` supplies the
    /// trainable embedding table when the author block is active.
    ConditionMatrix assemble(const std::vector<Document>& docs, const Matrix* author_rows = nullptr) const {
        ConditionMatrix cm;
        cm.blocks = config_.blocks;
        std::size_t off = 0;
        for (Block b : config_.blocks) {
            cm.offsets.push_back(off);
            cm.widths.push_back(block_width(b));
            off += block_width(b);
        }
        cm.values = static_rows(docs);
        if (config_.has(Block::author)) {
            if (!author_rows) throw ModelError("author block requires the embedding rows");
            fill_author_block(cm.values, author_lists(docs), *author_rows);
        }
        return cm;
    }

    // public for serialization in models.hpp
    std::optional<TfidfModel> title_tfidf_, venue_tfidf_, labels_tfidf_;
    std::optional<EmbeddingTable> title_table_, venue_table_, labels_table_;
    std::optional<AuthorIndex> authors_;
    ConditionConfig config_;
};

/// Convenience wrapper matching the one-call surface used by tools: fit is
/// assumed done, author rows optional.
inline ConditionMatrix assemble_conditions(const std::vector<Document>& docs, const ConditionModel& model,
                                           const Matrix* author_rows = nullptr) {
    return model.assemble(docs, author_rows);
}

}  // namespace setrec
