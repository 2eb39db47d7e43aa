#pragma once

#include <span>

#include "gnnla/graph_net.hpp"
#include "gnnla/sparse.hpp"

namespace gnnla::kernels {

/// y = A x as a single message-passing layer. With self_edges the diagonal travels on
/// self-edges; without, A_ii is a vertex attribute and phi_v adds A_ii x_i.
DenseVector gnn_spmv(const SparseMatrixCSR& a, std::span<const double> x, bool self_edges = true);

/// sqrt(x^T W x): edge products, per-vertex x_i * (W x)_i, vertex-to-global sum, global sqrt.
/// Throws NumericalError if the quadratic form is negative.
double gnn_weighted_norm(const SparseMatrixCSR& w, std::span<const double> x);

/// `iters` applications of the weighted Jacobi layer x <- x + omega (b - A x) / A_ii.
DenseVector gnn_jacobi(const SparseMatrixCSR& a, std::span<const double> b, std::span<const double> x0,
                       double omega, std::size_t iters);

/// Chebyshev iteration: scalar preamble, then N passes of the three-layer network
/// (iterate update; residual update with rho_prior = rho, rho = 1/(2 sigma - rho) in the
/// global update; direction update).
DenseVector gnn_chebyshev(const SparseMatrixCSR& a, std::span<const double> b, std::span<const double> x0,
                          double lambda_min, double lambda_max, std::size_t n_iter);

struct PowerResult {
    DenseVector vector;   // normalised iterate
    double lambda_max = 0; // Rayleigh quotient
};

/// `iters` passes of the three-layer iterate (b = A b; h1 = |b|; b = b / h1), then the
/// two-layer Rayleigh quotient network.
PowerResult gnn_power_method(const SparseMatrixCSR& a, std::span<const double> b0, std::size_t iters);

/// Layer builders, exposed so callers can compose or inspect them.
namespace layers {
graph_net::GNLayerSpec spmv_self_edges();
graph_net::GNLayerSpec spmv_no_self_edges();
graph_net::GNLayerSpec weighted_norm();
/// vertex attrs [A_ii, b_i, x_i], global [omega]
graph_net::GNLayerSpec jacobi();
/// vertex attrs [x, r, d], global [delta, sigma, rho, rho_prior]
graph_net::GNLayerSpec chebyshev_iterate();
graph_net::GNLayerSpec chebyshev_residual();
graph_net::GNLayerSpec chebyshev_direction();
/// vertex attrs [b, y], global [h1, h2, lambda]
graph_net::GNLayerSpec power_matvec();
graph_net::GNLayerSpec power_norm();
graph_net::GNLayerSpec power_normalize();
graph_net::GNLayerSpec rayleigh_numerator();
graph_net::GNLayerSpec rayleigh_quotient();
} // namespace layers

/// Plain loop implementations of the same algorithms. These are what the graph versions
/// are checked against (and what `gnnla kernel` prints next to them).
namespace reference {
DenseVector jacobi(const SparseMatrixCSR& a, std::span<const double> b, std::span<const double> x0, double omega,
                   std::size_t iters);
/// Line-by-line transcription of the scalar Chebyshev algorithm.
DenseVector chebyshev(const SparseMatrixCSR& a, std::span<const double> b, std::span<const double> x0,
                      double lambda_min, double lambda_max, std::size_t n_iter);
PowerResult power_method(const SparseMatrixCSR& a, std::span<const double> b0, std::size_t iters);
double weighted_norm(const SparseMatrixCSR& w, std::span<const double> x);
} // namespace reference

} // namespace gnnla::kernels
