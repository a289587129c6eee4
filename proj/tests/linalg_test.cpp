#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "setrec/linalg.hpp"

using namespace setrec;

namespace {

Matrix random_binary(std::size_t r, std::size_t c, std::uint64_t seed, double density = 0.4) {
    Rng rng(seed);
    std::bernoulli_distribution coin(density);
    Matrix m(r, c);
    for (double& v : m.data) v = coin(rng) ? 1.0 : 0.0;
    return m;
}

double frobenius(const Matrix& m) {
    double s = 0.0;
    for (double v : m.data) s += v * v;
    return std::sqrt(s);
}

Matrix subtract(const Matrix& a, const Matrix& b) {
    Matrix d = a;
    for (std::size_t i = 0; i < d.size(); ++i) d.data[i] -= b.data[i];
    return d;
}

// reconstruction U diag(w) U^T from symmetric factors
Matrix reconstruct_sym(const SymmetricFactors& f) {
    Matrix us = f.u;
    for (std::size_t i = 0; i < us.rows; ++i)
        for (std::size_t j = 0; j < us.cols; ++j) us(i, j) *= f.eigenvalues[j];
    return matmul_nt(us, f.u);
}

}  // namespace

TEST_CASE("orthonormalize produces orthonormal columns spanning the input") {
    Rng rng(5);
    Matrix a = Matrix::gaussian(12, 5, 0.0, 1.0, rng);
    Matrix q = orthonormalize(a);
    Matrix qtq = matmul_tn(q, q);
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 5; ++j)
            CHECK(qtq(i, j) == Catch::Approx(i == j ? 1.0 : 0.0).margin(1e-12));
}

TEST_CASE("jacobi eigendecomposition reconstructs a random symmetric matrix") {
    Rng rng(9);
    Matrix g = Matrix::gaussian(8, 8, 0.0, 1.0, rng);
    Matrix a = matmul_tn(g, g);  // symmetric PSD
    std::vector<double> w;
    Matrix v;
    jacobi_eigen_sym(a, w, v);
    for (std::size_t i = 1; i < w.size(); ++i) CHECK(w[i - 1] >= w[i]);
    Matrix vs = v;
    for (std::size_t i = 0; i < vs.rows; ++i)
        for (std::size_t j = 0; j < vs.cols; ++j) vs(i, j) *= w[j];
    Matrix rec = matmul_nt(vs, v);
    CHECK(frobenius(subtract(rec, a)) / frobenius(a) < 1e-12);
}

TEST_CASE("jacobi matches the analytic 2x2 eigenpair") {
    Matrix a(2, 2);
    a.data = {2.0, 1.0, 1.0, 2.0};
    std::vector<double> w;
    Matrix v;
    jacobi_eigen_sym(a, w, v);
    CHECK(w[0] == Catch::Approx(3.0).margin(1e-12));
    CHECK(w[1] == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("full-rank randomized factorization reconstructs C to 1e-6") {
    // dense-oracle route: C is small enough for exact Jacobi, randomized
    // subspace iteration must agree at full rank
    Matrix x = random_binary(20, 15, 123);
    Matrix c = matmul_tn(x, x);
    SymmetricFactors f = randomized_eigh(c, 15, 7);
    Matrix rec = reconstruct_sym(f);
    CHECK(frobenius(subtract(rec, c)) / frobenius(c) < 1e-6);

    std::vector<double> w_oracle;
    Matrix v_oracle;
    jacobi_eigen_sym(c, w_oracle, v_oracle);
    for (std::size_t i = 0; i < f.eigenvalues.size(); ++i)
        CHECK(f.eigenvalues[i] == Catch::Approx(w_oracle[i]).margin(1e-8));
}

TEST_CASE("rank-1 matrix is reconstructed exactly at r=1") {
    Matrix u(6, 1);
    for (std::size_t i = 0; i < 6; ++i) u(i, 0) = static_cast<double>(i + 1);
    Matrix a = matmul_nt(u, u);  // rank one PSD
    SymmetricFactors f = randomized_eigh(a, 1, 3);
    Matrix rec = reconstruct_sym(f);
    CHECK(frobenius(subtract(rec, a)) / frobenius(a) < 1e-9);
}

TEST_CASE("factorization is bit-identical for a fixed seed") {
    Matrix x = random_binary(18, 12, 55);
    Matrix c = matmul_tn(x, x);
    SymmetricFactors a = randomized_eigh(c, 6, 99);
    SymmetricFactors b = randomized_eigh(c, 6, 99);
    CHECK(a.u.data == b.u.data);
    CHECK(a.eigenvalues == b.eigenvalues);

    Matrix m = random_binary(25, 14, 56);
    RightFactors ra = randomized_svd_right(m, 5, 42);
    RightFactors rb = randomized_svd_right(m, 5, 42);
    CHECK(ra.v.data == rb.v.data);
}

TEST_CASE("right factors of a rectangular matrix reconstruct it at full rank") {
    Matrix m = random_binary(30, 10, 77);
    RightFactors f = randomized_svd_right(m, 10, 5);
    REQUIRE(f.effective_rank >= 1);
    // projection onto span(V) must reproduce M when V spans the row space
    Matrix proj = matmul(matmul(m, f.v), transpose(f.v));
    CHECK(frobenius(subtract(proj, m)) / frobenius(m) < 1e-6);
    Matrix vtv = matmul_tn(f.v, f.v);
    for (std::size_t i = 0; i < vtv.rows; ++i)
        for (std::size_t j = 0; j < vtv.cols; ++j)
            CHECK(vtv(i, j) == Catch::Approx(i == j ? 1.0 : 0.0).margin(1e-8));
}

TEST_CASE("requested rank above the achievable rank is capped") {
    Matrix x = random_binary(10, 6, 88);
    Matrix c = matmul_tn(x, x);
    SymmetricFactors f = randomized_eigh(c, 1000, 1);
    CHECK(f.effective_rank <= 6);
}
