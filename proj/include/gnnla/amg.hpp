#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gnnla/sparse.hpp"

namespace gnnla::amg {

enum class Label : std::uint8_t { F = 0, C = 1 };

/// Coarse/fine split. Vertices keep their original order; coarse_index maps each C vertex
/// to its column in P (npos for F vertices).
struct CFPartition {
    static constexpr Index npos = static_cast<Index>(-1);

    std::vector<Label> labels;
    std::vector<Index> coarse_index;
    Index num_coarse = 0;

    static CFPartition from_labels(std::vector<Label> labels);
    Index size() const { return labels.size(); }
    bool is_coarse(Index i) const { return labels[i] == Label::C; }
};

/// S_ij = A_ij^2 / (A_ii A_jj) on A's pattern, from one edge update.
SparseMatrixCSR soc_sa(const SparseMatrixCSR& a);

/// S_ij = -A_ij / v_i with v_i = max_{j != i}(-A_ij), on A's pattern (two layers).
SparseMatrixCSR soc_classic_measure(const SparseMatrixCSR& a);

/// Thresholded classic strength: 1 where S_ij - tau > 0, else 0, on A's pattern.
SparseMatrixCSR soc_classic(const SparseMatrixCSR& a, double tau);

/// 1 where |A_ij| >= theta * max_{k != i} |A_ik| (j != i), else 0, on A's pattern.
/// Rows without nonzero off-diagonals give an all-zero mask row.
SparseMatrixCSR soc_abs(const SparseMatrixCSR& a, double theta);

/// Direct interpolation, n x num_coarse. F rows carry -A_ij alpha_i on strong coarse
/// neighbours with alpha_i = sum_{j != i} A_ij / (A_ii sum_{j strong coarse} A_ij); C rows are
/// unit rows. S_hat entries not stored count as weak.
SparseMatrixCSR direct_interpolation(const SparseMatrixCSR& a, const SparseMatrixCSR& s_hat,
                                     const CFPartition& cf);

/// Greedy splitting in index order: an unlabelled vertex i becomes C, and every unlabelled j
/// that depends strongly on it (S_hat_ji != 0) becomes F. Each F vertex therefore has at
/// least one strong coarse neighbour, which direct interpolation needs.
CFPartition cf_split_greedy(const SparseMatrixCSR& s_hat);

struct TwoLevelResult {
    DenseVector x;
    /// ||b - A x|| / ||b|| before the first and after every iteration (absolute if b = 0).
    std::vector<double> residual_history;
    CFPartition cf;
    SparseMatrixCSR p;
};

struct TwoLevelOptions {
    double tau = 0.25;
    double omega = 2.0 / 3.0;
    std::size_t pre_sweeps = 1;
    std::size_t iters = 30;
    /// Stop early once the relative residual drops below this (0 runs all iterations).
    double tol = 0.0;
};

/// Two-grid cycle: pre-smoothing with weighted Jacobi, coarse correction
/// x += P (P^T A P)^{-1} P^T (b - A x) with a dense coarse solve, post-smoothing.
/// Builds P from classic strength, greedy splitting, and direct interpolation. Starts from 0.
TwoLevelResult two_level_solve(const SparseMatrixCSR& a, std::span<const double> b, const TwoLevelOptions& opt);

/// Same cycle with a given prolongation.
TwoLevelResult two_level_solve(const SparseMatrixCSR& a, std::span<const double> b, const SparseMatrixCSR& p,
                               const TwoLevelOptions& opt);

/// Weighted Jacobi alone from x = 0, with the same residual bookkeeping.
std::vector<double> jacobi_residual_history(const SparseMatrixCSR& a, std::span<const double> b, double omega,
                                            std::size_t sweeps);

/// Loop implementations without the graph machinery, used as oracles.
namespace reference {
SparseMatrixCSR soc_sa(const SparseMatrixCSR& a);
SparseMatrixCSR soc_classic_measure(const SparseMatrixCSR& a);
SparseMatrixCSR soc_classic(const SparseMatrixCSR& a, double tau);
SparseMatrixCSR soc_abs(const SparseMatrixCSR& a, double theta);
SparseMatrixCSR direct_interpolation(const SparseMatrixCSR& a, const SparseMatrixCSR& s_hat, const CFPartition& cf);
} // namespace reference

} // namespace gnnla::amg
