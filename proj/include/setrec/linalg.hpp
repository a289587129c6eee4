#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "setrec/tensor.hpp"

namespace setrec {

/// Thin Q factor of a Householder QR of A (rows >= cols required).
/// Columns of the result are orthonormal and span the column space of A.
inline Matrix orthonormalize(const Matrix& a) {
    const std::size_t m = a.rows, n = a.cols;
    if (m < n) throw ModelError("orthonormalize: matrix is wider than tall (" + shape_str(a) + ")");
    Matrix r = a;                               // reduced in place
    std::vector<std::vector<double>> vs;        // householder vectors
    vs.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        double norm = 0.0;
        for (std::size_t i = k; i < m; ++i) norm += r(i, k) * r(i, k);
        norm = std::sqrt(norm);
        std::vector<double> v(m - k, 0.0);
        if (norm > 0.0) {
            const double alpha = r(k, k) >= 0.0 ? -norm : norm;
            for (std::size_t i = k; i < m; ++i) v[i - k] = r(i, k);
            v[0] -= alpha;
            double vnorm = 0.0;
            for (double x : v) vnorm += x * x;
            vnorm = std::sqrt(vnorm);
            if (vnorm > 0.0) {
                for (double& x : v) x /= vnorm;
                // apply H = I - 2vv^T to the trailing block
                for (std::size_t j = k; j < n; ++j) {
                    double dot = 0.0;
                    for (std::size_t i = k; i < m; ++i) dot += v[i - k] * r(i, j);
                    for (std::size_t i = k; i < m; ++i) r(i, j) -= 2.0 * dot * v[i - k];
                }
            }
        }
        vs.push_back(std::move(v));
    }
    // form thin Q by applying the reflectors to the first n identity columns
    Matrix q = Matrix::zeros(m, n);
    for (std::size_t j = 0; j < n; ++j) q(j, j) = 1.0;
    for (std::size_t k = n; k-- > 0;) {
        const std::vector<double>& v = vs[k];
        if (v.empty()) continue;
        for (std::size_t j = 0; j < n; ++j) {
            double dot = 0.0;
            for (std::size_t i = k; i < m; ++i) dot += v[i - k] * q(i, j);
            for (std::size_t i = k; i < m; ++i) q(i, j) -= 2.0 * dot * v[i - k];
        }
    }
    return q;
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix: A = V diag(w) V^T.
/// Eigenpairs are returned sorted by descending eigenvalue.
inline void jacobi_eigen_sym(const Matrix& a, std::vector<double>& w, Matrix& v) {
    const std::size_t n = a.rows;
    if (a.rows != a.cols) throw ModelError("jacobi_eigen_sym: matrix not square (" + shape_str(a) + ")");
    Matrix s = a;
    v = Matrix::zeros(n, n);
    for (std::size_t i = 0; i < n; ++i) v(i, i) = 1.0;

    auto off_norm = [&]() {
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) sum += s(i, j) * s(i, j);
        return std::sqrt(sum);
    };
    double diag_scale = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) diag_scale = std::max(diag_scale, std::abs(s(i, j)));
    const double tol = std::max(diag_scale, 1.0) * 1e-14 * static_cast<double>(n);

    for (int sweep = 0; sweep < 100 && off_norm() > tol; ++sweep) {
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = s(p, q);
                if (std::abs(apq) <= tol * 1e-2) continue;
                const double app = s(p, p), aqq = s(q, q);
                const double theta = (aqq - app) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double sn = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double skp = s(k, p), skq = s(k, q);
                    s(k, p) = c * skp - sn * skq;
                    s(k, q) = sn * skp + c * skq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double spk = s(p, k), sqk = s(q, k);
                    s(p, k) = c * spk - sn * sqk;
                    s(q, k) = sn * spk + c * sqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - sn * vkq;
                    v(k, q) = sn * vkp + c * vkq;
                }
            }
        }
    }
    w.resize(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = s(i, i);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return w[i] > w[j]; });
    std::vector<double> ws(n);
    Matrix vs(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        ws[j] = w[order[j]];
        for (std::size_t i = 0; i < n; ++i) vs(i, j) = v(i, order[j]);
    }
    w = std::move(ws);
    v = std::move(vs);
}

/// Truncated eigendecomposition of a symmetric PSD matrix via seeded
/// randomized subspace iteration (oversampling 10, 4 power iterations).
/// Returns U (n x r_eff) and eigenvalues (descending); A_r = U diag(w) U^T.
struct SymmetricFactors {
    Matrix u;
    std::vector<double> eigenvalues;
    std::size_t effective_rank = 0;
};

inline SymmetricFactors randomized_eigh(const Matrix& a, std::size_t rank, std::uint64_t seed,
                                        std::size_t oversample = 10, int power_iters = 4) {
    const std::size_t n = a.rows;
    if (a.rows != a.cols) throw ModelError("randomized_eigh: matrix not square");
    const std::size_t r = std::min(rank, n);
    const std::size_t q = std::min(r + oversample, n);
    Rng rng(seed);
    Matrix omega = Matrix::gaussian(n, q, 0.0, 1.0, rng);
    Matrix y = matmul(a, omega);
    Matrix qm = orthonormalize(y);
    for (int it = 0; it < power_iters; ++it) {
        y = matmul(a, qm);
        qm = orthonormalize(y);
    }
    Matrix t = matmul_tn(qm, matmul(a, qm));  // q x q, symmetric up to roundoff
    for (std::size_t i = 0; i < t.rows; ++i)
        for (std::size_t j = i + 1; j < t.cols; ++j) {
            const double avg = 0.5 * (t(i, j) + t(j, i));
            t(i, j) = avg;
            t(j, i) = avg;
        }
    std::vector<double> w;
    Matrix v;
    jacobi_eigen_sym(t, w, v);

    SymmetricFactors out;
    out.effective_rank = std::min(r, q);
    out.eigenvalues.assign(w.begin(), w.begin() + out.effective_rank);
    Matrix vr(q, out.effective_rank);
    for (std::size_t i = 0; i < q; ++i)
        for (std::size_t j = 0; j < out.effective_rank; ++j) vr(i, j) = v(i, j);
    out.u = matmul(qm, vr);
    return out;
}

/// Truncated SVD of a rectangular matrix via the same randomized scheme.
/// Only the right factor V (cols x r_eff, orthonormal columns) and singular
/// values are kept, which is all the projection-based scorer needs.
struct RightFactors {
    Matrix v;
    std::vector<double> singular_values;
    std::size_t effective_rank = 0;
};

inline RightFactors randomized_svd_right(const Matrix& a, std::size_t rank, std::uint64_t seed,
                                         std::size_t oversample = 10, int power_iters = 4) {
    const std::size_t m = a.rows, p = a.cols;
    const std::size_t r = std::min(rank, std::min(m, p));
    const std::size_t q = std::min(r + oversample, std::min(m, p));
    Rng rng(seed);
    Matrix omega = Matrix::gaussian(p, q, 0.0, 1.0, rng);
    Matrix y = matmul(a, omega);          // m x q
    Matrix qm = orthonormalize(y);
    for (int it = 0; it < power_iters; ++it) {
        Matrix z = matmul_tn(a, qm);      // p x q
        Matrix zq = orthonormalize(z);
        y = matmul(a, zq);
        qm = orthonormalize(y);
    }
    Matrix b = matmul_tn(qm, a);          // q x p
    Matrix g = matmul_nt(b, b);           // q x q gram
    std::vector<double> w;
    Matrix u;
    jacobi_eigen_sym(g, w, u);

    const double smax = w.empty() ? 0.0 : std::sqrt(std::max(w.front(), 0.0));
    const double cutoff = smax * 1e-12;
    std::size_t keep = 0;
    while (keep < r && std::sqrt(std::max(w[keep], 0.0)) > cutoff) ++keep;

    RightFactors out;
    out.effective_rank = keep;
    out.singular_values.resize(keep);
    out.v = Matrix::zeros(p, keep);
    for (std::size_t j = 0; j < keep; ++j) {
        const double sigma = std::sqrt(std::max(w[j], 0.0));
        out.singular_values[j] = sigma;
        // v_j = B^T u_j / sigma
        for (std::size_t i = 0; i < p; ++i) {
            double dot = 0.0;
            for (std::size_t k = 0; k < b.rows; ++k) dot += b(k, i) * u(k, j);
            out.v(i, j) = dot / sigma;
        }
    }
    return out;
}

}  // namespace setrec
