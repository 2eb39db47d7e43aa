#include <doctest.h>

#include <cmath>

#include "gnnla/amg.hpp"
#include "gnnla/error.hpp"
#include "support.hpp"

using namespace gnnla;
using namespace gnnla::amg;

namespace {

// Nine-point stencil on an m x m periodic-free grid with given centre / N-S / E-W / corner weights.
SparseMatrixCSR nine_point(Index m, double c, double ns, double ew, double corner) {
    std::vector<Triplet> t;
    auto id = [m](Index i, Index j) { return j * m + i; };
    for (Index j = 0; j < m; ++j)
        for (Index i = 0; i < m; ++i)
            for (int dj = -1; dj <= 1; ++dj)
                for (int di = -1; di <= 1; ++di) {
                    const auto ii = static_cast<long>(i) + di, jj = static_cast<long>(j) + dj;
                    if (ii < 0 || jj < 0 || ii >= static_cast<long>(m) || jj >= static_cast<long>(m)) continue;
                    double v = di == 0 && dj == 0 ? c : di == 0 ? ns : dj == 0 ? ew : corner;
                    t.push_back({id(i, j), id(static_cast<Index>(ii), static_cast<Index>(jj)), v});
                }
    return SparseMatrixCSR::from_triplets(m * m, m * m, t);
}

// Random symmetric M-matrix-like operator with zero row sums off the boundary rows.
SparseMatrixCSR random_zero_row_sum(Index n, std::uint64_t seed) {
    Rng rng = Rng::derive(seed, rng_stream::test, 3);
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (Index i = 0; i + 1 < n; ++i) {
        const double w = rng.uniform(0.5, 2.0);
        d(i, i + 1) = d(i + 1, i) = -w;
    }
    for (Index i = 0; i < n; ++i)
        for (Index j = i + 2; j < n; ++j)
            if (rng.uniform() < 0.1) d(i, j) = d(j, i) = -rng.uniform(0.1, 1.0);
    for (Index i = 0; i < n; ++i) d(i, i) = -(d.row(i).sum() - d(i, i));
    return SparseMatrixCSR::from_dense(d);
}

} // namespace

TEST_CASE("SA strength on the uniform Poisson stencil") {
    const auto a = nine_point(5, 16.0 / 6.0, -2.0 / 6.0, -2.0 / 6.0, -2.0 / 6.0);
    const auto s = soc_sa(a);
    CHECK(s.same_pattern(a));
    const Index centre = 12;
    for (Index k = s.row_ptr()[centre]; k < s.row_ptr()[centre + 1]; ++k) {
        const double expect = s.col_idx()[k] == centre ? 1.0 : 1.0 / 64.0;
        CHECK(s.values()[k] == doctest::Approx(expect).epsilon(1e-15));
    }
    CHECK(s == reference::soc_sa(a));
}

TEST_CASE("SA strength is invariant under symmetric diagonal scaling") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto a = test::random_spd(30, 0.2, seed);
        const auto dv = test::random_vector(30, seed + 100, 0.5, 3.0);
        std::vector<double> scaled(a.nnz());
        for (Index i = 0; i < a.n(); ++i)
            for (Index k = a.row_ptr()[i]; k < a.row_ptr()[i + 1]; ++k)
                scaled[k] = dv[i] * a.values()[k] * dv[a.col_idx()[k]] * (seed % 2 ? -1.0 : 1.0);
        const auto s1 = soc_sa(a);
        const auto s2 = soc_sa(a.with_values(scaled));
        CHECK(test::max_abs_diff({s1.values().begin(), s1.values().end()},
                                 {s2.values().begin(), s2.values().end()}) <= 1e-13);
    }
}

TEST_CASE("SA strength rejects a zero diagonal") {
    const auto a = SparseMatrixCSR::from_triplets(2, 2, {{0, 0, 1.0}, {0, 1, -1.0}, {1, 0, -1.0}});
    CHECK_THROWS_AS(soc_sa(a), Error);
}

TEST_CASE("classic strength on the 1D Laplacian") {
    const auto a = test::laplace_1d(6);
    const auto s = soc_classic_measure(a);
    const auto h = soc_classic(a, 0.25);
    for (Index i = 0; i < 6; ++i)
        for (Index k = a.row_ptr()[i]; k < a.row_ptr()[i + 1]; ++k) {
            const bool off = a.col_idx()[k] != i;
            CHECK(s.values()[k] == (off ? 1.0 : -2.0));
            CHECK(h.values()[k] == (off ? 1.0 : 0.0));
        }
    CHECK(h == reference::soc_classic(a, 0.25));
}

TEST_CASE("classic strength on the anisotropic diffusion stencil") {
    // alpha = 0.001, beta = 0.8 with h = 1: centre 2(a+b)/3, N/S (a-2b)/3, E/W (b-2a)/3, corners -(a+b)/6
    const double al = 0.001, be = 0.8;
    const auto a = nine_point(5, 2.0 * (al + be) / 3.0, (al - 2.0 * be) / 3.0, (be - 2.0 * al) / 3.0,
                              -(al + be) / 6.0);
    const auto h = soc_classic(a, 0.25);
    const Index c = 12, n = 17, s = 7, e = 13, w = 11, ne = 18, sw = 6;
    CHECK(h.at(c, n) == 1.0);
    CHECK(h.at(c, s) == 1.0);
    CHECK(h.at(c, e) == 0.0);
    CHECK(h.at(c, w) == 0.0);
    // corner ratio (a+b)/6 / ((2b-a)/3) = 0.801/3.198 > 0.25, so corners count as strong
    CHECK(h.at(c, ne) == 1.0);
    CHECK(h.at(c, sw) == 1.0);
    CHECK(soc_classic_measure(a).at(c, ne) == doctest::Approx(0.801 / 3.198).epsilon(1e-14));
}

TEST_CASE("classic strength ties drop the connection") {
    // S = 0.5 exactly at tau = 0.5
    const auto a = SparseMatrixCSR::from_triplets(3, 3, {{0, 0, 3.0}, {0, 1, -2.0}, {0, 2, -1.0}, {1, 0, -2.0},
                                                         {1, 1, 3.0}, {2, 0, -1.0}, {2, 2, 3.0}});
    const auto h = soc_classic(a, 0.5);
    CHECK(h.at(0, 1) == 1.0);
    CHECK(h.at(0, 2) == 0.0);
}

TEST_CASE("classic strength needs a negative off-diagonal") {
    const auto a = SparseMatrixCSR::from_triplets(2, 2, {{0, 0, 2.0}, {0, 1, -1.0}, {1, 0, 1.0}, {1, 1, 2.0}});
    try {
        soc_classic(a, 0.25);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("row 1") != std::string::npos);
    }
}

TEST_CASE("classic strength is invariant under positive scaling") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto a = test::random_spd(30, 0.2, seed);
        std::vector<double> v(a.values().begin(), a.values().end());
        for (auto& x : v) x *= 3.7;
        CHECK(soc_classic(a, 0.25) == soc_classic(a.with_values(v), 0.25));
    }
}

TEST_CASE("absolute-value strength") {
    const auto a = test::laplace_1d(5);
    const auto m = soc_abs(a, 0.5);
    for (Index i = 0; i < 5; ++i)
        for (Index k = a.row_ptr()[i]; k < a.row_ptr()[i + 1]; ++k)
            CHECK(m.values()[k] == (a.col_idx()[k] == i ? 0.0 : 1.0));

    const double al = 0.001, be = 0.8;
    const auto st = nine_point(5, 2.0 * (al + be) / 3.0, (al - 2.0 * be) / 3.0, (be - 2.0 * al) / 3.0,
                               -(al + be) / 6.0);
    const auto weak = soc_abs(st, 0.2);
    for (Index j : {7, 11, 13, 17}) CHECK(weak.at(12, j) == 1.0);
    const auto strict = soc_abs(st, 1.0);
    CHECK(strict.at(12, 7) == 1.0);
    CHECK(strict.at(12, 13) == 0.0);
    CHECK(strict.at(12, 18) == 0.0);
    CHECK(weak == reference::soc_abs(st, 0.2));

    const auto diagonal = SparseMatrixCSR::from_triplets(2, 2, {{0, 0, 1.0}, {0, 1, 0.0}, {1, 1, 1.0}});
    const auto empty = soc_abs(diagonal, 0.5);
    for (double v : empty.values()) CHECK(v == 0.0);
}

TEST_CASE("greedy splitting") {
    CHECK(cf_split_greedy(soc_classic(test::laplace_1d(3), 0.25)).labels ==
          std::vector<Label>{Label::C, Label::F, Label::C});
    const auto cf = cf_split_greedy(soc_classic(test::laplace_1d(5), 0.25));
    CHECK(cf.labels == std::vector<Label>{Label::C, Label::F, Label::C, Label::F, Label::C});
    CHECK(cf.num_coarse == 3);
    CHECK(cf.coarse_index[4] == 2);
    const auto none = cf_split_greedy(SparseMatrixCSR::identity(4).with_values({0.0, 0.0, 0.0, 0.0}));
    CHECK(none.num_coarse == 4);
}

TEST_CASE("direct interpolation on the 1D Laplacian") {
    const auto a = test::laplace_1d(5);
    const auto s = soc_classic(a, 0.25);
    const auto cf = CFPartition::from_labels({Label::C, Label::F, Label::C, Label::F, Label::C});
    const auto p = direct_interpolation(a, s, cf);
    Eigen::MatrixXd expect(5, 3);
    expect << 1, 0, 0, 0.5, 0.5, 0, 0, 1, 0, 0, 0.5, 0.5, 0, 0, 1;
    CHECK(p.to_dense() == expect);
    CHECK(p == reference::direct_interpolation(a, s, cf));
}

TEST_CASE("direct interpolation with all coarse vertices is the identity") {
    const auto a = test::random_spd(10, 0.3, 1);
    std::vector<Label> all(10, Label::C);
    const auto p = direct_interpolation(a, a.with_values(std::vector<double>(a.nnz(), 0.0)),
                                        CFPartition::from_labels(all));
    CHECK(p == SparseMatrixCSR::identity(10));
}

TEST_CASE("direct interpolation F rows sum to one on zero row-sum matrices") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto a = random_zero_row_sum(40, seed);
        const auto s = soc_classic(a, 0.25);
        const auto cf = cf_split_greedy(s);
        const auto p = direct_interpolation(a, s, cf);
        CHECK(p == reference::direct_interpolation(a, s, cf));
        for (Index i = 0; i < 40; ++i) {
            double sum = 0.0;
            for (double v : p.row_values(i)) sum += v;
            CHECK(std::abs(sum - 1.0) <= 1e-12);
            if (cf.is_coarse(i)) {
                CHECK(p.row_values(i).size() == 1);
                CHECK(p.row_cols(i)[0] == cf.coarse_index[i]);
            }
        }
    }
}

TEST_CASE("direct interpolation names an F row without strong coarse neighbours") {
    const auto a = test::laplace_1d(3);
    const auto s = soc_classic(a, 0.25);
    const auto cf = CFPartition::from_labels({Label::C, Label::F, Label::F});
    try {
        direct_interpolation(a, s.with_values(std::vector<double>(s.nnz(), 0.0)), cf);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("vertex 1") != std::string::npos);
    }
}

TEST_CASE("two-level solve") {
    const auto a = test::laplace_1d(63);
    const std::vector<double> zero(63, 0.0);
    TwoLevelOptions opt;
    const auto z = two_level_solve(a, zero, opt);
    CHECK(z.x == zero);

    const auto b = test::random_vector(63, 4);
    const auto r = two_level_solve(a, b, opt);
    CHECK(r.residual_history.size() == opt.iters + 1);
    CHECK(r.residual_history.back() < 1e-8);
    const auto jac = jacobi_residual_history(a, b, opt.omega, 2 * opt.pre_sweeps * opt.iters);
    CHECK(jac.back() > 1e-2);
    for (std::size_t k = 1; k < r.residual_history.size(); ++k)
        if (r.residual_history[k - 1] > 1e-13) CHECK(r.residual_history[k] < jac[2 * k]);

    // with P = I the coarse solve is exact
    const auto one = two_level_solve(a, b, SparseMatrixCSR::identity(63), TwoLevelOptions{0.25, 2.0 / 3.0, 1, 1});
    CHECK(one.residual_history.back() < 1e-12);
}
