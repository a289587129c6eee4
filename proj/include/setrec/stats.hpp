#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "setrec/corpus.hpp"
#include "setrec/tensor.hpp"

namespace setrec {

/// Maximum-likelihood power-law exponent with deg_min = 1:
/// alpha = 1 + n / sum(ln deg). Degrees of exactly 1 contribute nothing to
/// the sum, so at least one larger degree is required.
inline double powerlaw_alpha(const std::vector<double>& degrees) {
    if (degrees.empty()) throw DataError("powerlaw_alpha: no degrees given");
    double log_sum = 0.0;
    for (double d : degrees) {
        if (d < 1.0) throw DataError("powerlaw_alpha: degree " + format_compact(d) + " is below deg_min=1");
        log_sum += std::log(d);
    }
    if (log_sum <= 0.0) throw DataError("alpha undefined (zero log-sum): every degree equals deg_min=1");
    return 1.0 + static_cast<double>(degrees.size()) / log_sum;
}

/// Empirical normalized mutual information of the item co-occurrence
/// distribution. The joint is the full n x n co-occurrence count matrix
/// (diagonal = item document counts) normalized to sum 1; the marginals come
/// from the diagonal. MI = KL(joint || product of marginals) in nats,
/// normalized by the marginal entropy. 0*log(0) is taken as 0.
inline double normalized_mi(const InteractionMatrix& X) {
    const std::size_t n = X.cols();
    if (n < 2) throw DataError("normalized_mi: needs at least two items in the vocabulary");
    Matrix C = Matrix::zeros(n, n);
    for (std::size_t r = 0; r < X.rows(); ++r)
        for (std::uint32_t i : X.row(r))
            for (std::uint32_t j : X.row(r)) C(i, j) += 1.0;
    double joint_total = 0.0;
    for (double v : C.data) joint_total += v;
    double deg_total = 0.0;
    for (std::size_t i = 0; i < n; ++i) deg_total += C(i, i);
    bool any_pair = false;
    for (std::size_t i = 0; i < n && !any_pair; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (C(i, j) > 0.0) {
                any_pair = true;
                break;
            }
    if (!any_pair) throw DataError("normalized_mi: no co-occurring item pair in the corpus");

    double mi = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double c = C(i, j);
            if (c <= 0.0) continue;
            const double pij = c / joint_total;
            const double pi = C(i, i) / deg_total;
            const double pj = C(j, j) / deg_total;
            mi += pij * std::log(pij / (pi * pj));
        }
    }
    double entropy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double pi = C(i, i) / deg_total;
        if (pi > 0.0) entropy -= pi * std::log(pi);
    }
    if (entropy <= 0.0) throw DataError("normalized_mi: degenerate corpus (zero marginal entropy)");
    // KL is nonnegative; trim float noise on factorized corpora
    return std::max(mi, 0.0) / entropy;
}

struct DatasetSummary {
    std::string dataset;
    int k = 0;
    std::size_t items = 0;
    std::size_t interactions = 0;
    std::size_t documents = 0;
    double density = 0.0;
    double alpha = 0.0;
    double mi = 0.0;

    static std::string csv_header() { return "dataset,k,items,interactions,documents,density,alpha,mi"; }

    std::string csv_row() const {
        return dataset + "," + std::to_string(k) + "," + std::to_string(items) + "," +
               std::to_string(interactions) + "," + std::to_string(documents) + "," +
               format_double(density) + "," + format_double(alpha, "%.4f") + "," + format_double(mi, "%.4f");
    }
};

/// Characteristics of a vocabulary-filtered corpus at one pruning threshold.
/// Item degrees are recomputed from the filtered matrix; zero-degree columns
/// are excluded from the power-law fit.
inline DatasetSummary summarize(const std::vector<Document>& filtered_docs, const Vocabulary& vocab, int k,
                                const std::string& dataset_name) {
    if (filtered_docs.empty())
        throw DataError("summarize: no documents survive pruning at k=" + std::to_string(k));
    InteractionMatrix X = to_matrix(filtered_docs, vocab);
    DatasetSummary s;
    s.dataset = dataset_name;
    s.k = k;
    s.items = vocab.size();
    s.documents = X.rows();
    s.interactions = X.total_nnz();
    s.density = static_cast<double>(s.interactions) /
                (static_cast<double>(s.documents) * static_cast<double>(s.items));
    std::vector<double> degrees(vocab.size(), 0.0);
    for (std::size_t r = 0; r < X.rows(); ++r)
        for (std::uint32_t c : X.row(r)) degrees[c] += 1.0;
    std::vector<double> positive;
    positive.reserve(degrees.size());
    for (double d : degrees)
        if (d >= 1.0) positive.push_back(d);
    s.alpha = powerlaw_alpha(positive);
    s.mi = normalized_mi(X);
    return s;
}

}  // namespace setrec
