#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "gnnla/rng.hpp"
#include "gnnla/sparse.hpp"

namespace gnnla::test {

// 1D Laplacian tridiag(-1, 2, -1).
inline SparseMatrixCSR laplace_1d(Index n) {
    std::vector<Triplet> t;
    for (Index i = 0; i < n; ++i) {
        if (i > 0) t.push_back({i, i - 1, -1.0});
        t.push_back({i, i, 2.0});
        if (i + 1 < n) t.push_back({i, i + 1, -1.0});
    }
    return SparseMatrixCSR::from_triplets(n, n, t);
}

// 5-point Laplacian on an m x m interior grid.
inline SparseMatrixCSR laplace_2d(Index m) {
    std::vector<Triplet> t;
    auto id = [m](Index i, Index j) { return j * m + i; };
    for (Index j = 0; j < m; ++j)
        for (Index i = 0; i < m; ++i) {
            const Index k = id(i, j);
            t.push_back({k, k, 4.0});
            if (i > 0) t.push_back({k, id(i - 1, j), -1.0});
            if (i + 1 < m) t.push_back({k, id(i + 1, j), -1.0});
            if (j > 0) t.push_back({k, id(i, j - 1), -1.0});
            if (j + 1 < m) t.push_back({k, id(i, j + 1), -1.0});
        }
    return SparseMatrixCSR::from_triplets(m * m, m * m, t);
}

// Random symmetric, strictly diagonally dominant matrix with a full stored diagonal.
inline SparseMatrixCSR random_spd(Index n, double density, std::uint64_t seed, bool integer_values = false) {
    Rng rng = Rng::derive(seed, rng_stream::test);
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (Index i = 0; i < n; ++i)
        for (Index j = i + 1; j < n; ++j)
            if (rng.uniform() < density) {
                const double v = integer_values ? -static_cast<double>(rng.uniform_int(1, 9)) : -rng.uniform(0.1, 2.0);
                d(i, j) = d(j, i) = v;
            }
    for (Index i = 0; i < n; ++i) {
        const double off = d.row(i).cwiseAbs().sum();
        d(i, i) = off + (integer_values ? static_cast<double>(rng.uniform_int(1, 5)) : rng.uniform(0.5, 1.5));
    }
    return SparseMatrixCSR::from_dense(d);
}

inline std::vector<double> random_vector(Index n, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    Rng rng = Rng::derive(seed, rng_stream::test, 1);
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(lo, hi);
    return v;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

inline double max_abs(const std::vector<double>& a) {
    double m = 0.0;
    for (double v : a) m = std::max(m, std::abs(v));
    return m;
}

inline Eigen::VectorXd to_eigen(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

} // namespace gnnla::test
