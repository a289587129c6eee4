#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "setrec/corpus.hpp"
#include "setrec/features.hpp"
#include "setrec/linalg.hpp"
#include "setrec/serialize.hpp"
#include "setrec/tensor.hpp"

namespace setrec {

enum class ModelKind : std::uint8_t { cooc = 0, svd = 1, mlp = 2, ae = 3, dae = 4, vae = 5, aae = 6 };

inline const char* kind_name(ModelKind k) {
    switch (k) {
        case ModelKind::cooc: return "cooc";
        case ModelKind::svd: return "svd";
        case ModelKind::mlp: return "mlp";
        case ModelKind::ae: return "ae";
        case ModelKind::dae: return "dae";
        case ModelKind::vae: return "vae";
        case ModelKind::aae: return "aae";
    }
    return "?";
}

inline std::optional<ModelKind> kind_from_name(const std::string& s) {
    for (ModelKind k : {ModelKind::cooc, ModelKind::svd, ModelKind::mlp, ModelKind::ae, ModelKind::dae,
                        ModelKind::vae, ModelKind::aae})
        if (s == kind_name(k)) return k;
    return std::nullopt;
}

struct Hyperparams {
    std::size_t hidden = 100;
    std::size_t code = 50;
    double dropout_p = 0.2;
    double lr = 0.001;
    std::size_t epochs = 20;
    std::size_t batch = 100;
    double dae_noise = 0.2;
    std::size_t svd_rank = 1000;
    double kl_weight = 1.0;
    bool aae_literal_sign = false;
    std::uint64_t seed = 0;

    void validate() const {
        if (code >= hidden)
            throw ConfigError("code size must be smaller than hidden size (undercomplete), got code=" +
                              std::to_string(code) + " hidden=" + std::to_string(hidden));
        if (dae_noise < 0.0 || dae_noise >= 1.0)
            throw ConfigError("dae_noise must be in [0,1), got " + format_compact(dae_noise));
        if (dropout_p < 0.0 || dropout_p >= 1.0)
            throw ConfigError("dropout must be in [0,1), got " + format_compact(dropout_p));
        if (epochs == 0 || batch == 0) throw ConfigError("epochs and batch must be positive");
        if (svd_rank == 0) throw ConfigError("svd_rank must be >= 1");
    }
};

struct RecommenderSpec {
    ModelKind kind = ModelKind::cooc;
    ConditionConfig conditions;  // may be empty
    Hyperparams hp;
};

struct FitData {
    const std::vector<Document>& docs;
    const InteractionMatrix& X;
    const Vocabulary& vocab;
};

struct ScoreData {
    const std::vector<Document>& docs;
    const InteractionMatrix& X;  // partial item sets
    const Vocabulary& vocab;
};

/// Dense {0,1} rows for a batch of sparse matrix rows.
inline Matrix dense_rows(const InteractionMatrix& X, const std::vector<std::size_t>& indices) {
    Matrix m = Matrix::zeros(indices.size(), X.cols());
    for (std::size_t r = 0; r < indices.size(); ++r)
        for (std::uint32_t c : X.row(indices[r])) m(r, c) = 1.0;
    return m;
}

inline Matrix dense_all(const InteractionMatrix& X) {
    std::vector<std::size_t> idx(X.rows());
    std::iota(idx.begin(), idx.end(), 0);
    return dense_rows(X, idx);
}

/// DAE input corruption: each nonzero entry is dropped independently with
/// the given probability. May empty a row; that is fine during training.
inline std::vector<std::uint32_t> dae_corrupt(const std::vector<std::uint32_t>& row, double noise_fraction,
                                              Rng& rng) {
    std::vector<std::uint32_t> kept;
    kept.reserve(row.size());
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::uint32_t c : row)
        if (!(u(rng) < noise_fraction)) kept.push_back(c);
    return kept;
}

inline std::vector<std::uint32_t> dae_corrupt(const std::vector<std::uint32_t>& row, double noise_fraction,
                                              std::uint64_t seed) {
    Rng rng(seed);
    return dae_corrupt(row, noise_fraction, rng);
}

// ---------------------------------------------------------------------------
// Interface
// ---------------------------------------------------------------------------

class Recommender {
public:
    virtual ~Recommender() = default;

    virtual void fit(const FitData& data) = 0;

    /// Scores every item for every input row; never mutates model state.
    virtual Matrix score(const ScoreData& data) const = 0;

    virtual const RecommenderSpec& spec() const = 0;

    /// Mean training loss per epoch; empty for non-iterative models.
    virtual const std::vector<double>& epoch_losses() const {
        static const std::vector<double> none;
        return none;
    }

    virtual void save(std::ostream& out) const = 0;
};

namespace detail {

constexpr char kMagic[4] = {'S', 'R', 'M', 'B'};
constexpr std::uint32_t kVersion = 1;

inline void write_header(BinaryWriter& w, const RecommenderSpec& spec, std::uint64_t vocab_hash,
                         std::uint64_t n_items) {
    w.u8(static_cast<std::uint8_t>(kMagic[0]));
    w.u8(static_cast<std::uint8_t>(kMagic[1]));
    w.u8(static_cast<std::uint8_t>(kMagic[2]));
    w.u8(static_cast<std::uint8_t>(kMagic[3]));
    w.u32(kVersion);
    w.u8(static_cast<std::uint8_t>(spec.kind));
    w.u64(spec.conditions.blocks.size());
    for (Block b : spec.conditions.blocks) w.u8(static_cast<std::uint8_t>(b));
    w.u64(spec.conditions.word_dim);
    w.u64(spec.conditions.author_dim);
    w.u8(spec.conditions.embedding_file ? 1 : 0);
    if (spec.conditions.embedding_file) w.str(*spec.conditions.embedding_file);
    const Hyperparams& h = spec.hp;
    w.u64(h.hidden);
    w.u64(h.code);
    w.f64(h.dropout_p);
    w.f64(h.lr);
    w.u64(h.epochs);
    w.u64(h.batch);
    w.f64(h.dae_noise);
    w.u64(h.svd_rank);
    w.f64(h.kl_weight);
    w.u8(h.aae_literal_sign ? 1 : 0);
    w.u64(h.seed);
    w.u64(vocab_hash);
    w.u64(n_items);
}

struct Header {
    RecommenderSpec spec;
    std::uint64_t vocab_hash = 0;
    std::uint64_t n_items = 0;
};

inline Header read_header(BinaryReader& r) {
    for (char c : kMagic)
        if (r.u8() != static_cast<std::uint8_t>(c)) throw DataError("not a model container (bad magic)");
    const std::uint32_t version = r.u32();
    if (version != kVersion)
        throw DataError("unsupported model container version " + std::to_string(version));
    Header h;
    h.spec.kind = static_cast<ModelKind>(r.u8());
    const std::uint64_t nblocks = r.u64();
    for (std::uint64_t i = 0; i < nblocks; ++i)
        h.spec.conditions.blocks.push_back(static_cast<Block>(r.u8()));
    h.spec.conditions.word_dim = r.u64();
    h.spec.conditions.author_dim = r.u64();
    if (r.u8()) h.spec.conditions.embedding_file = r.str();
    Hyperparams& hp = h.spec.hp;
    hp.hidden = r.u64();
    hp.code = r.u64();
    hp.dropout_p = r.f64();
    hp.lr = r.f64();
    hp.epochs = r.u64();
    hp.batch = r.u64();
    hp.dae_noise = r.f64();
    hp.svd_rank = r.u64();
    hp.kl_weight = r.f64();
    hp.aae_literal_sign = r.u8() != 0;
    hp.seed = r.u64();
    h.vocab_hash = r.u64();
    h.n_items = r.u64();
    return h;
}

inline void save_tfidf(BinaryWriter& w, const TfidfModel& m) {
    w.u64(m.doc_count);
    w.count_map(m.doc_freq);
}

inline TfidfModel load_tfidf(BinaryReader& r) {
    TfidfModel m;
    m.doc_count = r.u64();
    m.doc_freq = r.count_map();
    return m;
}

inline void save_table(BinaryWriter& w, const EmbeddingTable& t) {
    w.u64(t.dim());
    std::map<std::string, std::vector<double>> sorted(t.raw().begin(), t.raw().end());
    w.u64(sorted.size());
    for (const auto& [tok, vec] : sorted) {
        w.str(tok);
        w.f64_vec(vec);
    }
}

inline EmbeddingTable load_table(BinaryReader& r) {
    const std::size_t dim = r.u64();
    EmbeddingTable t(dim);
    const std::uint64_t n = r.u64();
    for (std::uint64_t i = 0; i < n; ++i) {
        std::string tok = r.str();
        t.insert(tok, r.f64_vec());
    }
    return t;
}

inline void save_condition_model(BinaryWriter& w, const ConditionModel& m) {
    auto opt_tfidf = [&](const std::optional<TfidfModel>& t) {
        w.u8(t ? 1 : 0);
        if (t) save_tfidf(w, *t);
    };
    auto opt_table = [&](const std::optional<EmbeddingTable>& t) {
        w.u8(t ? 1 : 0);
        if (t) save_table(w, *t);
    };
    opt_tfidf(m.title_tfidf_);
    opt_table(m.title_table_);
    opt_tfidf(m.venue_tfidf_);
    opt_table(m.venue_table_);
    opt_tfidf(m.labels_tfidf_);
    opt_table(m.labels_table_);
    w.u8(m.authors_ ? 1 : 0);
    if (m.authors_) w.str_vec(m.authors_->names());
}

inline ConditionModel load_condition_model(BinaryReader& r, const ConditionConfig& config) {
    ConditionModel m;
    m.config_ = config;
    auto opt_tfidf = [&]() -> std::optional<TfidfModel> {
        if (!r.u8()) return std::nullopt;
        return load_tfidf(r);
    };
    auto opt_table = [&]() -> std::optional<EmbeddingTable> {
        if (!r.u8()) return std::nullopt;
        return load_table(r);
    };
    m.title_tfidf_ = opt_tfidf();
    m.title_table_ = opt_table();
    m.venue_tfidf_ = opt_tfidf();
    m.venue_table_ = opt_table();
    m.labels_tfidf_ = opt_tfidf();
    m.labels_table_ = opt_table();
    if (r.u8()) m.authors_ = AuthorIndex(r.str_vec());
    return m;
}

inline void save_feedforward(BinaryWriter& w, const FeedForward& net) {
    w.u64(net.layers().size());
    for (std::size_t i = 0; i < net.layers().size(); ++i) {
        w.matrix("W" + std::to_string(i), net.layers()[i].W);
        w.matrix("b" + std::to_string(i), net.layers()[i].b);
    }
}

inline FeedForward load_feedforward(BinaryReader& r, double dropout_p) {
    const std::uint64_t n = r.u64();
    std::vector<Matrix> ws(n), bs(n);
    std::vector<std::size_t> dims;
    for (std::uint64_t i = 0; i < n; ++i) {
        ws[i] = r.matrix("W" + std::to_string(i));
        bs[i] = r.matrix("b" + std::to_string(i));
        if (i == 0) dims.push_back(ws[i].rows);
        dims.push_back(ws[i].cols);
    }
    Rng rng(0);
    FeedForward net(dims, dropout_p, rng);
    for (std::uint64_t i = 0; i < n; ++i) {
        net.layers()[i].W = std::move(ws[i]);
        net.layers()[i].b = std::move(bs[i]);
    }
    return net;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Item co-occurrence
// ---------------------------------------------------------------------------

/// C = X^T X with item occurrence counts on the diagonal; scores are the
/// co-occurrence sums of the given partial set.
class CoocModel : public Recommender {
public:
    explicit CoocModel(RecommenderSpec spec) : spec_(std::move(spec)) {}

    void fit(const FitData& data) override {
        const std::size_t n = data.X.cols();
        C_ = Matrix::zeros(n, n);
        for (std::size_t r = 0; r < data.X.rows(); ++r) {
            const auto& row = data.X.row(r);
            for (std::uint32_t i : row)
                for (std::uint32_t j : row) C_(i, j) += 1.0;
        }
        vocab_hash_ = data.vocab.hash();
    }

    Matrix score(const ScoreData& data) const override {
        check_vocab(data.vocab);
        Matrix s = Matrix::zeros(data.X.rows(), C_.cols);
        for (std::size_t r = 0; r < data.X.rows(); ++r) {
            double* out = s.row_ptr(r);
            for (std::uint32_t i : data.X.row(r)) {
                const double* crow = C_.row_ptr(i);
                for (std::size_t j = 0; j < C_.cols; ++j) out[j] += crow[j];
            }
        }
        return s;
    }

    const RecommenderSpec& spec() const override { return spec_; }

    void save(std::ostream& out) const override {
        BinaryWriter w(out);
        detail::write_header(w, spec_, vocab_hash_, C_.rows);
        w.matrix("C", C_);
    }

    void load_state(BinaryReader& r, const detail::Header& h) {
        vocab_hash_ = h.vocab_hash;
        C_ = r.matrix("C");
    }

    const Matrix& cooccurrence() const { return C_; }

    void check_vocab(const Vocabulary& vocab) const {
        if (vocab.hash() != vocab_hash_)
            throw ModelError("cooc: scoring vocabulary does not match the training vocabulary");
    }

private:
    RecommenderSpec spec_;
    Matrix C_;
    std::uint64_t vocab_hash_ = 0;
};

/// Standalone fit/score functions on plain matrices; the class above wraps
/// these for the common interface.
inline Matrix cooc_fit(const InteractionMatrix& X) {
    Matrix C = Matrix::zeros(X.cols(), X.cols());
    for (std::size_t r = 0; r < X.rows(); ++r)
        for (std::uint32_t i : X.row(r))
            for (std::uint32_t j : X.row(r)) C(i, j) += 1.0;
    return C;
}

inline std::vector<double> cooc_score(const Matrix& C, const std::vector<std::uint32_t>& x_partial) {
    std::vector<double> s(C.cols, 0.0);
    for (std::uint32_t i : x_partial) {
        const double* crow = C.row_ptr(i);
        for (std::size_t j = 0; j < C.cols; ++j) s[j] += crow[j];
    }
    return s;
}

// ---------------------------------------------------------------------------
// Truncated SVD
// ---------------------------------------------------------------------------

/// Plain mode factorizes C = X^T X; text mode factorizes [X | B] where B is
/// the TF-IDF bag-of-words of the titles, keeping the right factor and
/// projecting score queries onto its span.
class SvdModel : public Recommender {
public:
    explicit SvdModel(RecommenderSpec spec) : spec_(std::move(spec)) {
        use_text_ = spec_.conditions.has(Block::title);
    }

    void fit(const FitData& data) override {
        spec_.hp.validate();
        const std::size_t n = data.X.cols();
        n_items_ = n;
        vocab_hash_ = data.vocab.hash();
        const std::uint64_t seed = derive_seed(spec_.hp.seed, 0x5d);
        if (!use_text_) {
            Matrix C = cooc_fit(data.X);
            SymmetricFactors f = randomized_eigh(C, spec_.hp.svd_rank, seed);
            u_ = std::move(f.u);
            sigma_ = std::move(f.eigenvalues);
            effective_rank_ = f.effective_rank;
        } else {
            title_tfidf_ = fit_tfidf(data.docs, TextField::title);
            token_order_ = title_tfidf_.sorted_tokens();
            Matrix B = tfidf_matrix(data.docs, TextField::title, title_tfidf_, token_order_);
            Matrix M = Matrix::zeros(data.X.rows(), n + B.cols);
            for (std::size_t r = 0; r < data.X.rows(); ++r) {
                for (std::uint32_t c : data.X.row(r)) M(r, c) = 1.0;
                const double* src = B.row_ptr(r);
                double* dst = M.row_ptr(r) + n;
                std::copy(src, src + B.cols, dst);
            }
            RightFactors f = randomized_svd_right(M, spec_.hp.svd_rank, seed);
            u_ = std::move(f.v);  // (n + d_text) x r
            sigma_ = std::move(f.singular_values);
            effective_rank_ = f.effective_rank;
        }
    }

    Matrix score(const ScoreData& data) const override {
        check_vocab(data.vocab);
        if (!use_text_) return score_plain(data.X);
        Matrix B = tfidf_matrix(data.docs, TextField::title, title_tfidf_, token_order_);
        return score_text(data.X, B);
    }

    /// x * U diag(sigma) U^T, i.e. the rank-r reconstruction of C applied to
    /// the partial set.
    Matrix score_plain(const InteractionMatrix& X) const {
        const std::size_t r = effective_rank_;
        Matrix proj = Matrix::zeros(X.rows(), r);  // x * U
        for (std::size_t i = 0; i < X.rows(); ++i) {
            double* dst = proj.row_ptr(i);
            for (std::uint32_t c : X.row(i)) {
                const double* urow = u_.row_ptr(c);
                for (std::size_t j = 0; j < r; ++j) dst[j] += urow[j];
            }
            for (std::size_t j = 0; j < r; ++j) dst[j] *= sigma_[j];
        }
        return matmul_nt(proj, u_);
    }

    /// [x | s_text] V V^T restricted to the item columns.
    Matrix score_text(const InteractionMatrix& X, const Matrix& B) const {
        if (B.rows != X.rows()) throw ModelError("svd: text rows do not match item rows");
        const std::size_t r = effective_rank_;
        const std::size_t n = n_items_;
        Matrix proj = Matrix::zeros(X.rows(), r);
        for (std::size_t i = 0; i < X.rows(); ++i) {
            double* dst = proj.row_ptr(i);
            for (std::uint32_t c : X.row(i)) {
                const double* vrow = u_.row_ptr(c);
                for (std::size_t j = 0; j < r; ++j) dst[j] += vrow[j];
            }
            const double* brow = B.row_ptr(i);
            for (std::size_t t = 0; t < B.cols; ++t) {
                const double bv = brow[t];
                if (bv == 0.0) continue;
                const double* vrow = u_.row_ptr(n + t);
                for (std::size_t j = 0; j < r; ++j) dst[j] += bv * vrow[j];
            }
        }
        Matrix out = Matrix::zeros(X.rows(), n);
        for (std::size_t i = 0; i < X.rows(); ++i) {
            const double* p = proj.row_ptr(i);
            double* dst = out.row_ptr(i);
            for (std::size_t c = 0; c < n; ++c) {
                const double* vrow = u_.row_ptr(c);
                double s = 0.0;
                for (std::size_t j = 0; j < r; ++j) s += p[j] * vrow[j];
                dst[c] = s;
            }
        }
        return out;
    }

    const RecommenderSpec& spec() const override { return spec_; }
    std::size_t effective_rank() const { return effective_rank_; }
    bool uses_text() const { return use_text_; }

    void save(std::ostream& out) const override {
        BinaryWriter w(out);
        detail::write_header(w, spec_, vocab_hash_, n_items_);
        w.u8(use_text_ ? 1 : 0);
        w.u64(effective_rank_);
        w.matrix("U", u_);
        w.f64_vec(sigma_);
        if (use_text_) {
            detail::save_tfidf(w, title_tfidf_);
            w.str_vec(token_order_);
        }
    }

    void load_state(BinaryReader& r, const detail::Header& h) {
        vocab_hash_ = h.vocab_hash;
        n_items_ = h.n_items;
        use_text_ = r.u8() != 0;
        effective_rank_ = r.u64();
        u_ = r.matrix("U");
        sigma_ = r.f64_vec();
        if (use_text_) {
            title_tfidf_ = detail::load_tfidf(r);
            token_order_ = r.str_vec();
        }
    }

    void check_vocab(const Vocabulary& vocab) const {
        if (vocab.hash() != vocab_hash_)
            throw ModelError("svd: scoring vocabulary does not match the training vocabulary");
    }

private:
    RecommenderSpec spec_;
    bool use_text_ = false;
    std::size_t n_items_ = 0;
    std::size_t effective_rank_ = 0;
    Matrix u_;                   // plain: U (n x r); text: V (n + d_text x r)
    std::vector<double> sigma_;  // plain: eigenvalues of C; text: singular values
    TfidfModel title_tfidf_;
    std::vector<std::string> token_order_;
    std::uint64_t vocab_hash_ = 0;
};

// ---------------------------------------------------------------------------
// Shared pieces of the neural models
// ---------------------------------------------------------------------------

namespace detail {

/// Plumbing shared by the MLP and the autoencoders: fitted condition models,
/// the trainable author embedding and its gradient flow, batch iteration.
struct ConditionState {
    std::optional<ConditionModel> model;
    Matrix author_emb;       // (A+1) x author_dim, trainable
    Matrix author_grad;
    Matrix static_rows;      // train docs x d, author slice zero
    std::vector<std::vector<std::uint32_t>> author_lists;
    std::size_t dim = 0;

    bool active() const { return model.has_value(); }

    void fit(const std::vector<Document>& docs, const ConditionConfig& config, std::uint64_t seed, Rng& init_rng) {
        model = ConditionModel::fit(docs, config, seed);
        dim = model->total_dim();
        static_rows = model->static_rows(docs);
        if (model->config().has(Block::author)) {
            author_lists = model->author_lists(docs);
            const std::size_t rows = model->author_index().size() + 1;  // + unknown bucket
            author_emb = Matrix::gaussian(rows, model->config().author_dim, 0.0, 0.01, init_rng);
            author_grad = Matrix::zeros(rows, model->config().author_dim);
        }
    }

    /// Condition rows for a training batch, author block filled from the
    /// current embedding.
    Matrix batch_rows(const std::vector<std::size_t>& batch) const {
        Matrix s = Matrix::zeros(batch.size(), dim);
        for (std::size_t r = 0; r < batch.size(); ++r) {
            const double* src = static_rows.row_ptr(batch[r]);
            std::copy(src, src + dim, s.row_ptr(r));
        }
        if (!author_emb.empty()) {
            const std::size_t off = model->block_offset(Block::author);
            const std::size_t w = model->config().author_dim;
            for (std::size_t r = 0; r < batch.size(); ++r) {
                const auto& list = author_lists[batch[r]];
                if (list.empty()) continue;
                double* dst = s.row_ptr(r) + off;
                const double inv = 1.0 / static_cast<double>(list.size());
                for (std::uint32_t a : list) {
                    const double* row = author_emb.row_ptr(a);
                    for (std::size_t c = 0; c < w; ++c) dst[c] += inv * row[c];
                }
            }
        }
        return s;
    }

    /// Mean-pooling backward: distributes the author-slice gradient evenly
    /// over the document's author rows.
    void backward(const std::vector<std::size_t>& batch, const Matrix& grad_s) {
        if (author_emb.empty()) return;
        const std::size_t off = model->block_offset(Block::author);
        const std::size_t w = model->config().author_dim;
        for (std::size_t r = 0; r < batch.size(); ++r) {
            const auto& list = author_lists[batch[r]];
            if (list.empty()) continue;
            const double inv = 1.0 / static_cast<double>(list.size());
            const double* g = grad_s.row_ptr(r) + off;
            for (std::uint32_t a : list) {
                double* row = author_grad.row_ptr(a);
                for (std::size_t c = 0; c < w; ++c) row[c] += inv * g[c];
            }
        }
    }

    /// Inference-time condition rows for arbitrary documents.
    Matrix infer_rows(const std::vector<Document>& docs) const {
        Matrix s = model->static_rows(docs);
        if (!author_emb.empty())
            model->fill_author_block(s, model->author_lists(docs), author_emb);
        return s;
    }
};

inline std::vector<std::vector<std::size_t>> make_batches(std::size_t count, std::size_t batch_size, Rng& rng) {
    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < count; start += batch_size) {
        const std::size_t end = std::min(start + batch_size, count);
        batches.emplace_back(order.begin() + start, order.begin() + end);
    }
    return batches;
}

inline void check_finite_loss(double loss, std::size_t epoch, std::size_t batch, const char* model) {
    if (!std::isfinite(loss))
        throw ModelError(std::string(model) + ": non-finite loss at epoch " + std::to_string(epoch) +
                         ", batch " + std::to_string(batch));
}

/// Columns [from, to) of a matrix.
inline Matrix hslice(const Matrix& m, std::size_t from, std::size_t to) {
    Matrix out(m.rows, to - from);
    for (std::size_t r = 0; r < m.rows; ++r)
        std::copy(m.row_ptr(r) + from, m.row_ptr(r) + to, out.row_ptr(r));
    return out;
}

inline Matrix hconcat(const Matrix& a, const Matrix& b) {
    if (b.empty() || b.cols == 0) return a;
    if (a.rows != b.rows) throw ModelError("hconcat: row mismatch");
    Matrix out(a.rows, a.cols + b.cols);
    for (std::size_t r = 0; r < a.rows; ++r) {
        std::copy(a.row_ptr(r), a.row_ptr(r) + a.cols, out.row_ptr(r));
        std::copy(b.row_ptr(r), b.row_ptr(r) + b.cols, out.row_ptr(r) + a.cols);
    }
    return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// MLP
// ---------------------------------------------------------------------------

/// Metadata-only baseline: BCE(x, sigmoid(MLP-2(s))). Has no item-set input,
/// so a non-empty condition set is required.
class MlpModel : public Recommender {
public:
    explicit MlpModel(RecommenderSpec spec) : spec_(std::move(spec)) {}

    /// Builds the fitted feature models and the network without training;
    /// fit() runs this first.
    void init(const FitData& data) {
        spec_.hp.validate();
        if (spec_.conditions.blocks.empty())
            throw ModelError("mlp requires a non-empty condition set");
        vocab_hash_ = data.vocab.hash();
        const Hyperparams& hp = spec_.hp;
        Rng init_rng(derive_seed(hp.seed, 0x11));
        cond_.fit(data.docs, spec_.conditions, derive_seed(hp.seed, 0x22), init_rng);
        net_ = FeedForward({cond_.dim, hp.hidden, hp.hidden, data.X.cols()}, hp.dropout_p, init_rng);
    }

    /// One training batch: BCE(x, sigmoid(net(s))). With `backward` the
    /// network and author-embedding gradients are left filled so the caller
    /// can step or inspect them.
    double train_pass(const std::vector<std::size_t>& batch, const InteractionMatrix& X, Rng& rng,
                      bool backward) {
        Matrix s = cond_.batch_rows(batch);
        Matrix target = dense_rows(X, batch);
        Matrix logits = net_.forward(s, true, rng);
        Matrix dlogits;
        const double loss = bce_with_logits(logits, target, backward ? &dlogits : nullptr);
        if (backward) {
            net_.zero_grad();
            cond_.author_grad.fill(0.0);
            Matrix ds = net_.backward(dlogits);
            cond_.backward(batch, ds);
        }
        return loss;
    }

    std::vector<Matrix*> train_params() {
        auto params = net_.params();
        if (!cond_.author_emb.empty()) params.push_back(&cond_.author_emb);
        return params;
    }

    std::vector<Matrix*> train_grads() {
        auto grads = net_.grads();
        if (!cond_.author_emb.empty()) grads.push_back(&cond_.author_grad);
        return grads;
    }

    void fit(const FitData& data) override {
        init(data);
        const Hyperparams& hp = spec_.hp;
        AdamOptimizer opt(hp.lr);
        Rng train_rng(derive_seed(hp.seed, 0x33));
        epoch_losses_.clear();
        for (std::size_t epoch = 0; epoch < hp.epochs; ++epoch) {
            const auto batches = detail::make_batches(data.X.rows(), hp.batch, train_rng);
            double loss_sum = 0.0;
            for (std::size_t bi = 0; bi < batches.size(); ++bi) {
                const double loss = train_pass(batches[bi], data.X, train_rng, true);
                detail::check_finite_loss(loss, epoch, bi, "mlp");
                loss_sum += loss;
                opt.step(train_params(), train_grads());
            }
            epoch_losses_.push_back(loss_sum / static_cast<double>(batches.size()));
        }
    }

    /// Inference on explicit condition rows.
    Matrix predict(const Matrix& s) const {
        if (s.cols != net_.in_dim())
            throw ModelError("mlp: condition width " + std::to_string(s.cols) + " does not match trained width " +
                             std::to_string(net_.in_dim()));
        return sigmoid(net_.forward_inference(s));
    }

    Matrix score(const ScoreData& data) const override {
        check_vocab(data.vocab);
        return predict(cond_.infer_rows(data.docs));
    }

    const RecommenderSpec& spec() const override { return spec_; }
    const std::vector<double>& epoch_losses() const override { return epoch_losses_; }

    void save(std::ostream& out) const override {
        BinaryWriter w(out);
        detail::write_header(w, spec_, vocab_hash_, net_.out_dim());
        detail::save_condition_model(w, *cond_.model);
        detail::save_feedforward(w, net_);
        w.matrix("author_emb", cond_.author_emb);
    }

    void load_state(BinaryReader& r, const detail::Header& h) {
        vocab_hash_ = h.vocab_hash;
        cond_.model = detail::load_condition_model(r, spec_.conditions);
        cond_.dim = cond_.model->total_dim();
        net_ = detail::load_feedforward(r, spec_.hp.dropout_p);
        cond_.author_emb = r.matrix("author_emb");
    }

    void check_vocab(const Vocabulary& vocab) const {
        if (vocab.hash() != vocab_hash_)
            throw ModelError("mlp: scoring vocabulary does not match the training vocabulary");
    }

    detail::ConditionState cond_;
    FeedForward net_;

private:
    RecommenderSpec spec_;
    std::vector<double> epoch_losses_;
    std::uint64_t vocab_hash_ = 0;
};

// ---------------------------------------------------------------------------
// Autoencoder family
// ---------------------------------------------------------------------------

/// AE, DAE, VAE and AAE behind one implementation. The encoder sees only the
/// (possibly corrupted) item set; metadata conditions the decoder by code
/// concatenation: r = dec(enc(x) || s).
class AutoencoderModel : public Recommender {
public:
    explicit AutoencoderModel(RecommenderSpec spec) : spec_(std::move(spec)) {
        switch (spec_.kind) {
            case ModelKind::ae:
            case ModelKind::dae:
            case ModelKind::vae:
            case ModelKind::aae: break;
            default: throw ModelError("AutoencoderModel: unsupported kind");
        }
    }

    /// Builds the condition models and three networks without training;
    /// fit() runs this first.
    void init(const FitData& data) {
        spec_.hp.validate();
        const Hyperparams& hp = spec_.hp;
        const std::size_t n = data.X.cols();
        vocab_hash_ = data.vocab.hash();
        Rng init_rng(derive_seed(hp.seed, 0x11));
        if (!spec_.conditions.blocks.empty())
            cond_.fit(data.docs, spec_.conditions, derive_seed(hp.seed, 0x22), init_rng);
        const std::size_t enc_out = spec_.kind == ModelKind::vae ? 2 * hp.code : hp.code;
        enc_ = FeedForward({n, hp.hidden, hp.hidden, enc_out}, hp.dropout_p, init_rng);
        dec_ = FeedForward({hp.code + cond_.dim, hp.hidden, hp.hidden, n}, hp.dropout_p, init_rng);
        if (spec_.kind == ModelKind::aae)
            disc_ = FeedForward({hp.code, hp.hidden, hp.hidden, 1}, hp.dropout_p, init_rng);
    }

    /// Reconstruction objective for one batch: BCE (plus the weighted KL
    /// term for the VAE). DAE corruption, dropout masks and the VAE noise
    /// all come from `rng`. With `backward` the encoder, decoder and author
    /// gradients are left filled.
    double reconstruction_pass(const std::vector<std::size_t>& batch, const InteractionMatrix& X, Rng& rng,
                               bool backward) {
        const Hyperparams& hp = spec_.hp;
        const std::size_t n = X.cols();
        Matrix target = dense_rows(X, batch);
        Matrix input = target;
        if (spec_.kind == ModelKind::dae && hp.dae_noise > 0.0) {
            input = Matrix::zeros(batch.size(), n);
            for (std::size_t r = 0; r < batch.size(); ++r)
                for (std::uint32_t c : dae_corrupt(X.row(batch[r]), hp.dae_noise, rng)) input(r, c) = 1.0;
        }
        Matrix s = cond_.active() ? cond_.batch_rows(batch) : Matrix(batch.size(), 0);

        Matrix enc_out_m = enc_.forward(input, true, rng);
        Matrix mu, logvar, eps, z;
        if (spec_.kind == ModelKind::vae) {
            mu = detail::hslice(enc_out_m, 0, hp.code);
            logvar = detail::hslice(enc_out_m, hp.code, 2 * hp.code);
            eps = Matrix(mu.rows, mu.cols);
            std::normal_distribution<double> normal(0.0, 1.0);
            for (double& v : eps.data) v = normal(rng);
            z = mu;
            for (std::size_t i = 0; i < z.size(); ++i)
                z.data[i] += std::exp(0.5 * logvar.data[i]) * eps.data[i];
        } else {
            z = enc_out_m;
        }
        Matrix dec_in = detail::hconcat(z, s);
        Matrix logits = dec_.forward(dec_in, true, rng);
        Matrix dlogits;
        double loss = bce_with_logits(logits, target, backward ? &dlogits : nullptr);
        if (spec_.kind == ModelKind::vae) loss += hp.kl_weight * kl_gauss(mu, logvar);
        if (!backward) return loss;

        enc_.zero_grad();
        dec_.zero_grad();
        cond_.author_grad.fill(0.0);
        Matrix ddec_in = dec_.backward(dlogits);
        Matrix dz = detail::hslice(ddec_in, 0, hp.code);
        if (cond_.active()) {
            Matrix ds = detail::hslice(ddec_in, hp.code, hp.code + cond_.dim);
            cond_.backward(batch, ds);
        }
        if (spec_.kind == ModelKind::vae) {
            Matrix dmu = dz;
            Matrix dlv(logvar.rows, logvar.cols);
            for (std::size_t i = 0; i < dlv.size(); ++i)
                dlv.data[i] = dz.data[i] * eps.data[i] * 0.5 * std::exp(0.5 * logvar.data[i]);
            kl_gauss_backward(mu, logvar, hp.kl_weight, dmu, dlv);
            enc_.backward(detail::hconcat(dmu, dlv));
        } else {
            enc_.backward(dz);
        }
        return loss;
    }

    /// AAE regularization objective: the discriminator separates prior
    /// samples from encoder codes. Returns the minimized objective; the
    /// literal-sign variant flips it. With `backward` only the
    /// discriminator gradients are left filled.
    double discriminator_pass(const std::vector<std::size_t>& batch, const InteractionMatrix& X, Rng& rng,
                              bool backward) {
        const double sign = spec_.hp.aae_literal_sign ? -1.0 : 1.0;
        Matrix input = dense_rows(X, batch);
        Matrix codes = enc_.forward(input, true, rng);
        Matrix prior(codes.rows, codes.cols);
        std::normal_distribution<double> normal(0.0, 1.0);
        for (double& v : prior.data) v = normal(rng);
        Matrix ones(codes.rows, 1, 1.0);
        Matrix zeros(codes.rows, 1, 0.0);
        if (backward) disc_.zero_grad();
        Matrix dprior, dcode;
        Matrix prior_logits = disc_.forward(prior, true, rng);
        double loss = 0.5 * bce_with_logits(prior_logits, ones, backward ? &dprior : nullptr);
        if (backward) {
            for (double& v : dprior.data) v *= 0.5 * sign;
            disc_.backward(dprior);
        }
        Matrix code_logits = disc_.forward(codes, true, rng);
        loss += 0.5 * bce_with_logits(code_logits, zeros, backward ? &dcode : nullptr);
        if (backward) {
            for (double& v : dcode.data) v *= 0.5 * sign;
            disc_.backward(dcode);
        }
        return sign * loss;
    }

    /// AAE fooling objective: the encoder maximizes log D(z), i.e.
    /// minimizes BCE(D(z), 1) with the discriminator frozen. With
    /// `backward` only the encoder gradients are left filled.
    double fooling_pass(const std::vector<std::size_t>& batch, const InteractionMatrix& X, Rng& rng,
                        bool backward) {
        Matrix input = dense_rows(X, batch);
        Matrix codes = enc_.forward(input, true, rng);
        Matrix logits = disc_.forward(codes, true, rng);
        Matrix dfool;
        Matrix ones(codes.rows, 1, 1.0);
        const double loss = bce_with_logits(logits, ones, backward ? &dfool : nullptr);
        if (!backward) return loss;
        disc_.zero_grad();
        Matrix dcodes = disc_.backward(dfool);
        disc_.zero_grad();  // discriminator is frozen in this phase
        enc_.zero_grad();
        enc_.backward(dcodes);
        return loss;
    }

    std::vector<Matrix*> recon_params() {
        auto params = enc_.params();
        for (Matrix* p : dec_.params()) params.push_back(p);
        if (!cond_.author_emb.empty()) params.push_back(&cond_.author_emb);
        return params;
    }

    std::vector<Matrix*> recon_grads() {
        auto grads = enc_.grads();
        for (Matrix* g : dec_.grads()) grads.push_back(g);
        if (!cond_.author_emb.empty()) grads.push_back(&cond_.author_grad);
        return grads;
    }

    void fit(const FitData& data) override {
        init(data);
        const Hyperparams& hp = spec_.hp;
        AdamOptimizer opt_recon(hp.lr);
        AdamOptimizer opt_disc(hp.lr);
        AdamOptimizer opt_fool(hp.lr);
        Rng train_rng(derive_seed(hp.seed, 0x33));
        epoch_losses_.clear();
        for (std::size_t epoch = 0; epoch < hp.epochs; ++epoch) {
            const auto batches = detail::make_batches(data.X.rows(), hp.batch, train_rng);
            double loss_sum = 0.0;
            for (std::size_t bi = 0; bi < batches.size(); ++bi) {
                const auto& batch = batches[bi];
                const double loss = reconstruction_pass(batch, data.X, train_rng, true);
                detail::check_finite_loss(loss, epoch, bi, kind_name(spec_.kind));
                loss_sum += loss;
                opt_recon.step(recon_params(), recon_grads());

                if (spec_.kind == ModelKind::aae) {
                    const double dloss = discriminator_pass(batch, data.X, train_rng, true);
                    detail::check_finite_loss(dloss, epoch, bi, "aae-disc");
                    opt_disc.step(disc_.params(), disc_.grads());

                    const double floss = fooling_pass(batch, data.X, train_rng, true);
                    detail::check_finite_loss(floss, epoch, bi, "aae-fool");
                    opt_fool.step(enc_.params(), enc_.grads());
                }
            }
            epoch_losses_.push_back(loss_sum / static_cast<double>(batches.size()));
        }
    }

    /// Deterministic reconstruction: no dropout, no input corruption, VAE
    /// decodes from the mean. Conditions must match training exactly.
    Matrix reconstruct(const InteractionMatrix& X, const std::optional<Matrix>& s) const {
        if (cond_.active()) {
            if (!s)
                throw ModelError(std::string(kind_name(spec_.kind)) +
                                 ": model was trained with conditions [" + blocks_label(spec_.conditions.blocks) +
                                 "] but none were supplied");
            if (s->cols != cond_.dim)
                throw ModelError(std::string(kind_name(spec_.kind)) + ": condition width " +
                                 std::to_string(s->cols) + " does not match trained width " +
                                 std::to_string(cond_.dim));
            if (s->rows != X.rows()) throw ModelError("condition rows do not match input rows");
        } else if (s && s->cols > 0) {
            throw ModelError(std::string(kind_name(spec_.kind)) +
                             ": model is unconditioned but conditions were supplied");
        }
        Matrix enc_out_m = enc_.forward_inference(dense_all(X));
        Matrix z = spec_.kind == ModelKind::vae ? detail::hslice(enc_out_m, 0, spec_.hp.code) : enc_out_m;
        Matrix dec_in = cond_.active() ? detail::hconcat(z, *s) : z;
        return sigmoid(dec_.forward_inference(dec_in));
    }

    Matrix score(const ScoreData& data) const override {
        check_vocab(data.vocab);
        std::optional<Matrix> s;
        if (cond_.active()) s = cond_.infer_rows(data.docs);
        return reconstruct(data.X, s);
    }

    /// Codes for arbitrary rows (deterministic); used to probe the AAE
    /// equilibrium.
    Matrix encode(const InteractionMatrix& X) const {
        Matrix out = enc_.forward_inference(dense_all(X));
        return spec_.kind == ModelKind::vae ? detail::hslice(out, 0, spec_.hp.code) : out;
    }

    const FeedForward& discriminator() const { return disc_; }

    std::size_t param_count() const {
        std::size_t c = enc_.param_count() + dec_.param_count();
        if (spec_.kind == ModelKind::aae) c += disc_.param_count();
        c += cond_.author_emb.size();
        return c;
    }

    const RecommenderSpec& spec() const override { return spec_; }
    const std::vector<double>& epoch_losses() const override { return epoch_losses_; }

    void save(std::ostream& out) const override {
        BinaryWriter w(out);
        detail::write_header(w, spec_, vocab_hash_, dec_.out_dim());
        w.u8(cond_.active() ? 1 : 0);
        if (cond_.active()) detail::save_condition_model(w, *cond_.model);
        detail::save_feedforward(w, enc_);
        detail::save_feedforward(w, dec_);
        w.u8(spec_.kind == ModelKind::aae ? 1 : 0);
        if (spec_.kind == ModelKind::aae) detail::save_feedforward(w, disc_);
        w.matrix("author_emb", cond_.author_emb);
    }

    void load_state(BinaryReader& r, const detail::Header& h) {
        vocab_hash_ = h.vocab_hash;
        if (r.u8()) {
            cond_.model = detail::load_condition_model(r, spec_.conditions);
            cond_.dim = cond_.model->total_dim();
        }
        enc_ = detail::load_feedforward(r, spec_.hp.dropout_p);
        dec_ = detail::load_feedforward(r, spec_.hp.dropout_p);
        if (r.u8()) disc_ = detail::load_feedforward(r, spec_.hp.dropout_p);
        cond_.author_emb = r.matrix("author_emb");
    }

    void check_vocab(const Vocabulary& vocab) const {
        if (vocab.hash() != vocab_hash_)
            throw ModelError(std::string(kind_name(spec_.kind)) +
                             ": scoring vocabulary does not match the training vocabulary");
    }

    detail::ConditionState cond_;
    FeedForward enc_, dec_, disc_;

private:
    RecommenderSpec spec_;
    std::vector<double> epoch_losses_;
    std::uint64_t vocab_hash_ = 0;
};

// ---------------------------------------------------------------------------
// Factory and container loading
// ---------------------------------------------------------------------------

inline std::unique_ptr<Recommender> make_recommender(const RecommenderSpec& spec) {
    RecommenderSpec s = spec;
    s.conditions.normalize();
    switch (s.kind) {
        case ModelKind::cooc: return std::make_unique<CoocModel>(std::move(s));
        case ModelKind::svd: return std::make_unique<SvdModel>(std::move(s));
        case ModelKind::mlp: return std::make_unique<MlpModel>(std::move(s));
        case ModelKind::ae:
        case ModelKind::dae:
        case ModelKind::vae:
        case ModelKind::aae: return std::make_unique<AutoencoderModel>(std::move(s));
    }
    throw ModelError("unknown model kind");
}

inline std::unique_ptr<Recommender> load_recommender(std::istream& in) {
    BinaryReader r(in);
    detail::Header h = detail::read_header(r);
    switch (h.spec.kind) {
        case ModelKind::cooc: {
            auto m = std::make_unique<CoocModel>(h.spec);
            m->load_state(r, h);
            return m;
        }
        case ModelKind::svd: {
            auto m = std::make_unique<SvdModel>(h.spec);
            m->load_state(r, h);
            return m;
        }
        case ModelKind::mlp: {
            auto m = std::make_unique<MlpModel>(h.spec);
            m->load_state(r, h);
            return m;
        }
        case ModelKind::ae:
        case ModelKind::dae:
        case ModelKind::vae:
        case ModelKind::aae: {
            auto m = std::make_unique<AutoencoderModel>(h.spec);
            m->load_state(r, h);
            return m;
        }
    }
    throw DataError("model container: unknown model kind");
}

inline std::string serialize_to_string(const Recommender& model) {
    std::ostringstream out(std::ios::binary);
    model.save(out);
    return out.str();
}

}  // namespace setrec
