#include <doctest.h>

#include <cmath>

#include <Eigen/Eigenvalues>

#include "gnnla/error.hpp"
#include "gnnla/kernels.hpp"
#include "support.hpp"

using namespace gnnla;
using namespace gnnla::kernels;

TEST_CASE("graph spmv matches CSR and dense products") {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        const auto a = test::random_spd(50, 0.1, seed);
        const auto x = test::random_vector(50, seed);
        const auto yd = dense_matvec(a.to_dense(), x);
        const auto y1 = gnn_spmv(a, x, true);
        const auto y2 = gnn_spmv(a, x, false);
        const double scale = std::max(1.0, test::max_abs(yd));
        CHECK(y1 == spmv_csr(a, x));
        CHECK(test::max_abs_diff(y1, yd) <= 1e-13 * scale);
        CHECK(test::max_abs_diff(y2, yd) <= 1e-13 * scale);
    }
}

TEST_CASE("spmv variants agree exactly when arithmetic is exact") {
    const auto a = test::random_spd(40, 0.2, 21, true);
    std::vector<double> x(40);
    for (Index i = 0; i < 40; ++i) x[i] = static_cast<double>(static_cast<int>(i % 7) - 3);
    CHECK(gnn_spmv(a, x, true) == gnn_spmv(a, x, false));
}

TEST_CASE("weighted norm") {
    const auto w = test::laplace_1d(3);
    const std::vector<double> x = {1.0, 2.0, 3.0};
    // x^T W x = 1*0 + 2*0 + 3*4 = 12
    CHECK(gnn_weighted_norm(w, x) == doctest::Approx(std::sqrt(12.0)).epsilon(1e-15));
    const auto a = test::random_spd(30, 0.2, 4);
    const auto v = test::random_vector(30, 4);
    const auto xe = test::to_eigen(v);
    const double oracle = std::sqrt(xe.dot(a.to_dense() * xe));
    CHECK(gnn_weighted_norm(a, v) == doctest::Approx(oracle).epsilon(1e-13));
    CHECK(gnn_weighted_norm(a, v) == reference::weighted_norm(a, v));

    const auto neg = SparseMatrixCSR::from_triplets(2, 2, {{0, 0, -1.0}, {1, 1, -1.0}});
    CHECK_THROWS_AS(gnn_weighted_norm(neg, std::vector<double>{1.0, 1.0}), NumericalError);
}

TEST_CASE("one Jacobi layer equals the closed-form update") {
    const auto a = test::random_spd(30, 0.2, 5);
    const auto b = test::random_vector(30, 6);
    const auto x0 = test::random_vector(30, 7);
    const double omega = 2.0 / 3.0;
    const auto x1 = gnn_jacobi(a, b, x0, omega, 1);
    const Eigen::MatrixXd ad = a.to_dense();
    const Eigen::VectorXd xe = test::to_eigen(x0);
    const Eigen::VectorXd r = test::to_eigen(b) - ad * xe;
    const Eigen::VectorXd oracle = xe + omega * r.cwiseQuotient(ad.diagonal());
    for (Index i = 0; i < 30; ++i) CHECK(x1[i] == doctest::Approx(oracle(static_cast<Eigen::Index>(i))).epsilon(1e-13));
    CHECK(gnn_jacobi(a, b, x0, omega, 10) == reference::jacobi(a, b, x0, omega, 10));
}

TEST_CASE("Jacobi keeps an exact solution fixed") {
    const auto a = test::random_spd(25, 0.2, 8);
    const auto xs = test::random_vector(25, 9);
    const auto b = spmv_csr(a, xs);
    CHECK(gnn_jacobi(a, b, xs, 0.8, 3) == xs);
}

TEST_CASE("Jacobi rejects a zero diagonal") {
    const auto a = SparseMatrixCSR::from_triplets(2, 2, {{0, 0, 1.0}, {1, 0, 1.0}});
    try {
        gnn_jacobi(a, std::vector<double>{1.0, 1.0}, std::vector<double>{0.0, 0.0}, 1.0, 1);
        FAIL("expected an error");
    } catch (const NumericalError& e) {
        CHECK(std::string(e.what()).find("row 1") != std::string::npos);
    }
}

TEST_CASE("Chebyshev network is bit-identical to the scalar algorithm") {
    const auto a = test::laplace_2d(8);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a.to_dense());
    const double lmin = es.eigenvalues().minCoeff();
    const double lmax = es.eigenvalues().maxCoeff();
    const auto b = test::random_vector(64, 10);
    const std::vector<double> x0(64, 0.0);
    for (std::size_t n : {0u, 1u, 5u, 20u}) CHECK(gnn_chebyshev(a, b, x0, lmin, lmax, n) == reference::chebyshev(a, b, x0, lmin, lmax, n));

    // with exact bounds: |e_n|_A <= 2 q^n |e_0|_A, q = (sqrt(k) - 1) / (sqrt(k) + 1)
    const std::size_t n = 40;
    const auto x = gnn_chebyshev(a, b, x0, lmin, lmax, n);
    const Eigen::MatrixXd ad = a.to_dense();
    const Eigen::VectorXd xs = ad.ldlt().solve(test::to_eigen(b));
    const Eigen::VectorXd e = test::to_eigen(x) - xs;
    const double q = (std::sqrt(lmax / lmin) - 1.0) / (std::sqrt(lmax / lmin) + 1.0);
    CHECK(std::sqrt(e.dot(ad * e)) <= 2.0 * std::pow(q, static_cast<double>(n)) * std::sqrt(xs.dot(ad * xs)));
}

TEST_CASE("Chebyshev validates its bounds") {
    const auto a = test::laplace_1d(4);
    const std::vector<double> b(4, 1.0), x0(4, 0.0);
    CHECK_THROWS_AS(gnn_chebyshev(a, b, x0, 0.0, 0.0, 3), Error);
    CHECK_THROWS_AS(gnn_chebyshev(a, b, x0, 2.0, 1.0, 3), Error);
    CHECK_THROWS_AS(gnn_chebyshev(a, b, x0, -1.0, 1.0, 3), Error);
}

TEST_CASE("power method finds the dominant eigenvalue") {
    const auto a = test::laplace_1d(10);
    // eigenvalues 2 - 2 cos(k pi / 11)
    const double lmax = 2.0 - 2.0 * std::cos(10.0 * M_PI / 11.0);
    const auto b0 = test::random_vector(10, 12, 0.1, 1.0);
    const auto r = gnn_power_method(a, b0, 500);
    CHECK(std::abs(r.lambda_max - lmax) < 1e-8);
    const auto ref = reference::power_method(a, b0, 500);
    CHECK(r.lambda_max == doctest::Approx(ref.lambda_max).epsilon(1e-14));
    CHECK(test::max_abs_diff(r.vector, ref.vector) < 1e-13);
}

TEST_CASE("power method on a vector in the null space fails loudly") {
    const auto a = SparseMatrixCSR::from_triplets(2, 2, {{0, 0, 1.0}, {1, 1, 0.0}});
    CHECK_THROWS_AS(gnn_power_method(a, std::vector<double>{0.0, 1.0}, 3), NumericalError);
    CHECK_THROWS_AS(gnn_power_method(a, std::vector<double>{0.0, 0.0}, 3), Error);
}
