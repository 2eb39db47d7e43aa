#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace gnnla {

using Index = std::size_t;
using DenseVector = std::vector<double>;

/// Throws gnnla::Error if any entry is NaN or infinite.
void require_finite(std::span<const double> v, const char* what);

struct Triplet {
    Index row;
    Index col;
    double value;
};

/// Compressed sparse row storage.
///
/// Invariants (checked on construction):
///   row_ptr[0] == 0, row_ptr non-decreasing, row_ptr[rows] == nnz;
///   column indices strictly increasing within a row and < cols.
/// Explicit zeros are allowed so derived operators (strength, interpolation) can keep the
/// sparsity pattern of their input. Graph and kernel code requires is_square(); the only
/// rectangular matrices produced by the library are interpolation operators.
class SparseMatrixCSR {
public:
    SparseMatrixCSR() = default;
    SparseMatrixCSR(Index rows, Index cols, std::vector<Index> row_ptr, std::vector<Index> col_idx,
                    std::vector<double> values);

    /// Square n x n convenience constructor.
    SparseMatrixCSR(Index n, std::vector<Index> row_ptr, std::vector<Index> col_idx,
                    std::vector<double> values)
        : SparseMatrixCSR(n, n, std::move(row_ptr), std::move(col_idx), std::move(values)) {}

    enum class Duplicates { reject, sum };

    /// Builds from unsorted triplets. Duplicates either throw or are summed.
    static SparseMatrixCSR from_triplets(Index rows, Index cols, std::vector<Triplet> entries,
                                         Duplicates policy = Duplicates::reject);
    /// Stores every entry of the dense matrix whose |value| > drop_tol (diagonal always kept).
    static SparseMatrixCSR from_dense(const Eigen::MatrixXd& dense, double drop_tol = 0.0);
    static SparseMatrixCSR identity(Index n);

    Index rows() const { return rows_; }
    Index cols() const { return cols_; }
    /// Dimension of a square matrix (rows == cols).
    Index n() const { return rows_; }
    Index nnz() const { return values_.size(); }
    bool is_square() const { return rows_ == cols_; }

    std::span<const Index> row_ptr() const { return row_ptr_; }
    std::span<const Index> col_idx() const { return col_idx_; }
    std::span<const double> values() const { return values_; }

    std::span<const Index> row_cols(Index i) const {
        return {col_idx_.data() + row_ptr_[i], row_ptr_[i + 1] - row_ptr_[i]};
    }
    std::span<const double> row_values(Index i) const {
        return {values_.data() + row_ptr_[i], row_ptr_[i + 1] - row_ptr_[i]};
    }

    /// Stored value at (i, j), or 0 if (i, j) is not in the pattern.
    double at(Index i, Index j) const;
    /// Position of (i, j) in the value array, or nnz() if absent.
    Index find(Index i, Index j) const;

    Eigen::MatrixXd to_dense() const;
    SparseMatrixCSR transpose() const;
    /// Same pattern, values replaced.
    SparseMatrixCSR with_values(std::vector<double> values) const;
    bool same_pattern(const SparseMatrixCSR& other) const;

    friend bool operator==(const SparseMatrixCSR&, const SparseMatrixCSR&) = default;

private:
    Index rows_ = 0;
    Index cols_ = 0;
    std::vector<Index> row_ptr_{0};
    std::vector<Index> col_idx_;
    std::vector<double> values_;
};

/// y_i = sum_j A_ij x_j accumulated in stored column order.
DenseVector spmv_csr(const SparseMatrixCSR& a, std::span<const double> x);

/// Entry i is A_ii, or 0 when the diagonal entry is not stored.
DenseVector diag(const SparseMatrixCSR& a);

/// Dense reference product, O(rows * cols). Test oracle for spmv_csr.
DenseVector dense_matvec(const Eigen::MatrixXd& a, std::span<const double> x);

/// Matrix Market coordinate files (real/integer, general/symmetric), 1-based indices.
/// Symmetric files are expanded to full storage. Only square matrices are accepted.
/// Errors report the offending line number.
SparseMatrixCSR read_matrix_market(const std::filesystem::path& path);
SparseMatrixCSR parse_matrix_market(const std::string& text);

/// Writes "general" coordinate format with 17 significant digits, so read(write(A)) == A.
void write_matrix_market(const SparseMatrixCSR& a, const std::filesystem::path& path);
std::string format_matrix_market(const SparseMatrixCSR& a);

} // namespace gnnla
