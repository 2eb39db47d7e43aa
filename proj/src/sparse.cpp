#include "gnnla/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gnnla/error.hpp"
#include "gnnla/io.hpp"

namespace gnnla {

void require_finite(std::span<const double> v, const char* what) {
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v[i]))
            throw Error(std::string(what) + ": non-finite entry at index " + std::to_string(i));
    }
}

SparseMatrixCSR::SparseMatrixCSR(Index rows, Index cols, std::vector<Index> row_ptr,
                                 std::vector<Index> col_idx, std::vector<double> values)
    : rows_(rows), cols_(cols), row_ptr_(std::move(row_ptr)), col_idx_(std::move(col_idx)),
      values_(std::move(values)) {
    if (row_ptr_.size() != rows_ + 1) throw Error("CSR: row_ptr must have rows+1 entries");
    if (row_ptr_.front() != 0) throw Error("CSR: row_ptr[0] must be 0");
    if (col_idx_.size() != values_.size()) throw Error("CSR: col_idx/values length mismatch");
    if (row_ptr_.back() != values_.size()) throw Error("CSR: row_ptr[rows] must equal nnz");
    for (Index i = 0; i < rows_; ++i) {
        if (row_ptr_[i + 1] < row_ptr_[i]) throw Error("CSR: row_ptr decreasing at row " + std::to_string(i));
        for (Index p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) {
            if (col_idx_[p] >= cols_)
                throw Error("CSR: column index out of range in row " + std::to_string(i));
            if (p > row_ptr_[i] && col_idx_[p] <= col_idx_[p - 1])
                throw Error("CSR: columns not strictly increasing in row " + std::to_string(i));
        }
    }
}

SparseMatrixCSR SparseMatrixCSR::from_triplets(Index rows, Index cols, std::vector<Triplet> entries,
                                               Duplicates policy) {
    std::sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    std::vector<Index> row_ptr(rows + 1, 0);
    std::vector<Index> col_idx;
    std::vector<double> values;
    col_idx.reserve(entries.size());
    values.reserve(entries.size());
    for (std::size_t k = 0; k < entries.size(); ++k) {
        const auto& t = entries[k];
        if (t.row >= rows || t.col >= cols)
            throw Error("from_triplets: entry (" + std::to_string(t.row) + "," +
                        std::to_string(t.col) + ") out of range");
        if (k > 0 && entries[k - 1].row == t.row && entries[k - 1].col == t.col) {
            if (policy == Duplicates::reject)
                throw Error("from_triplets: duplicate entry (" + std::to_string(t.row) + "," +
                            std::to_string(t.col) + ")");
            values.back() += t.value;
            continue;
        }
        col_idx.push_back(t.col);
        values.push_back(t.value);
        ++row_ptr[t.row + 1];
    }
    for (Index i = 0; i < rows; ++i) row_ptr[i + 1] += row_ptr[i];
    return SparseMatrixCSR(rows, cols, std::move(row_ptr), std::move(col_idx), std::move(values));
}

SparseMatrixCSR SparseMatrixCSR::from_dense(const Eigen::MatrixXd& dense, double drop_tol) {
    std::vector<Triplet> t;
    for (Index i = 0; i < static_cast<Index>(dense.rows()); ++i)
        for (Index j = 0; j < static_cast<Index>(dense.cols()); ++j) {
            const double v = dense(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            if (i == j || std::abs(v) > drop_tol) t.push_back({i, j, v});
        }
    return from_triplets(static_cast<Index>(dense.rows()), static_cast<Index>(dense.cols()), std::move(t));
}

SparseMatrixCSR SparseMatrixCSR::identity(Index n) {
    std::vector<Index> rp(n + 1), ci(n);
    for (Index i = 0; i <= n; ++i) rp[i] = i;
    for (Index i = 0; i < n; ++i) ci[i] = i;
    return SparseMatrixCSR(n, n, std::move(rp), std::move(ci), std::vector<double>(n, 1.0));
}

Index SparseMatrixCSR::find(Index i, Index j) const {
    const auto cols = row_cols(i);
    const auto it = std::lower_bound(cols.begin(), cols.end(), j);
    if (it == cols.end() || *it != j) return nnz();
    return row_ptr_[i] + static_cast<Index>(it - cols.begin());
}

double SparseMatrixCSR::at(Index i, Index j) const {
    const Index p = find(i, j);
    return p == nnz() ? 0.0 : values_[p];
}

Eigen::MatrixXd SparseMatrixCSR::to_dense() const {
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows_), static_cast<Eigen::Index>(cols_));
    for (Index i = 0; i < rows_; ++i)
        for (Index p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p)
            d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(col_idx_[p])) = values_[p];
    return d;
}

SparseMatrixCSR SparseMatrixCSR::transpose() const {
    std::vector<Index> rp(cols_ + 1, 0);
    for (Index c : col_idx_) ++rp[c + 1];
    for (Index j = 0; j < cols_; ++j) rp[j + 1] += rp[j];
    std::vector<Index> ci(nnz());
    std::vector<double> v(nnz());
    std::vector<Index> next(rp.begin(), rp.end() - 1);
    for (Index i = 0; i < rows_; ++i)
        for (Index p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) {
            const Index q = next[col_idx_[p]]++;
            ci[q] = i;
            v[q] = values_[p];
        }
    return SparseMatrixCSR(cols_, rows_, std::move(rp), std::move(ci), std::move(v));
}

SparseMatrixCSR SparseMatrixCSR::with_values(std::vector<double> values) const {
    if (values.size() != nnz()) throw Error("with_values: length does not match nnz");
    return SparseMatrixCSR(rows_, cols_, row_ptr_, col_idx_, std::move(values));
}

bool SparseMatrixCSR::same_pattern(const SparseMatrixCSR& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_ && row_ptr_ == other.row_ptr_ &&
           col_idx_ == other.col_idx_;
}

DenseVector spmv_csr(const SparseMatrixCSR& a, std::span<const double> x) {
    if (x.size() != a.cols())
        throw Error("spmv_csr: vector length " + std::to_string(x.size()) + " does not match " +
                    std::to_string(a.cols()) + " columns");
    DenseVector y(a.rows(), 0.0);
    const auto rp = a.row_ptr();
    const auto ci = a.col_idx();
    const auto v = a.values();
    for (Index i = 0; i < a.rows(); ++i) {
        double s = 0.0;
        for (Index p = rp[i]; p < rp[i + 1]; ++p) s += v[p] * x[ci[p]];
        y[i] = s;
    }
    return y;
}

DenseVector diag(const SparseMatrixCSR& a) {
    const Index n = std::min(a.rows(), a.cols());
    DenseVector d(n, 0.0);
    for (Index i = 0; i < n; ++i) d[i] = a.at(i, i);
    return d;
}

DenseVector dense_matvec(const Eigen::MatrixXd& a, std::span<const double> x) {
    if (static_cast<Eigen::Index>(x.size()) != a.cols()) throw Error("dense_matvec: dimension mismatch");
    DenseVector y(static_cast<std::size_t>(a.rows()), 0.0);
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        double s = 0.0;
        for (Eigen::Index j = 0; j < a.cols(); ++j) s += a(i, j) * x[static_cast<std::size_t>(j)];
        y[static_cast<std::size_t>(i)] = s;
    }
    return y;
}

// ---------------------------------------------------------------------------
// Matrix Market

namespace {

std::string lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

[[noreturn]] void mm_fail(std::size_t line, const std::string& msg) {
    throw Error("matrix market line " + std::to_string(line) + ": " + msg);
}

} // namespace

SparseMatrixCSR parse_matrix_market(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;

    if (!std::getline(in, line)) mm_fail(1, "empty file");
    ++lineno;
    {
        std::istringstream hs(line);
        std::string banner, object, format, field, symmetry;
        hs >> banner >> object >> format >> field >> symmetry;
        if (banner != "%%MatrixMarket") mm_fail(lineno, "missing %%MatrixMarket banner");
        if (lower(object) != "matrix") mm_fail(lineno, "object must be 'matrix'");
        if (lower(format) != "coordinate") mm_fail(lineno, "only coordinate format is supported");
        field = lower(field);
        if (field != "real" && field != "integer" && field != "double")
            mm_fail(lineno, "unsupported field '" + field + "'");
        symmetry = lower(symmetry);
        if (symmetry != "general" && symmetry != "symmetric")
            mm_fail(lineno, "unsupported symmetry '" + symmetry + "'");

        const bool symmetric = symmetry == "symmetric";

        // size line (skip comments / blank lines)
        long long rows = -1, cols = -1, entries = -1;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty() || line[0] == '%') continue;
            std::istringstream ss(line);
            if (!(ss >> rows >> cols >> entries)) mm_fail(lineno, "malformed size line");
            break;
        }
        if (rows < 0) mm_fail(lineno, "missing size line");
        if (rows != cols) mm_fail(lineno, "matrix is not square (" + std::to_string(rows) + " x " +
                                              std::to_string(cols) + ")");
        if (entries < 0) mm_fail(lineno, "negative entry count");

        std::vector<Triplet> t;
        t.reserve(static_cast<std::size_t>(symmetric ? 2 * entries : entries));
        long long seen = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty() || line[0] == '%') continue;
            bool blank = true;
            for (char c : line)
                if (!std::isspace(static_cast<unsigned char>(c))) blank = false;
            if (blank) continue;
            std::istringstream ss(line);
            long long i = 0, j = 0;
            std::string vtok;
            if (!(ss >> i >> j >> vtok)) mm_fail(lineno, "malformed entry");
            double v = 0.0;
            try {
                v = std::stod(vtok);
            } catch (const std::exception&) {
                mm_fail(lineno, "malformed value '" + vtok + "'");
            }
            if (!std::isfinite(v)) mm_fail(lineno, "non-finite value '" + vtok + "'");
            if (i < 1 || j < 1 || i > rows || j > cols) mm_fail(lineno, "index out of range");
            if (seen == entries) mm_fail(lineno, "more entries than declared");
            ++seen;
            const auto r = static_cast<Index>(i - 1), c = static_cast<Index>(j - 1);
            if (symmetric && c > r) mm_fail(lineno, "symmetric file has an upper-triangular entry");
            t.push_back({r, c, v});
            if (symmetric && r != c) t.push_back({c, r, v});
        }
        if (seen != entries)
            mm_fail(lineno, "expected " + std::to_string(entries) + " entries, found " + std::to_string(seen));
        try {
            return SparseMatrixCSR::from_triplets(static_cast<Index>(rows), static_cast<Index>(cols), std::move(t));
        } catch (const Error& e) {
            throw Error(std::string("matrix market: ") + e.what());
        }
    }
}

SparseMatrixCSR read_matrix_market(const std::filesystem::path& path) {
    try {
        return parse_matrix_market(io::read_text(path));
    } catch (const Error& e) {
        throw Error(path.string() + ": " + e.what());
    }
}

std::string format_matrix_market(const SparseMatrixCSR& a) {
    std::string out = "%%MatrixMarket matrix coordinate real general\n";
    out += std::to_string(a.rows()) + " " + std::to_string(a.cols()) + " " + std::to_string(a.nnz()) + "\n";
    for (Index i = 0; i < a.rows(); ++i) {
        const auto cols = a.row_cols(i);
        const auto vals = a.row_values(i);
        for (std::size_t k = 0; k < cols.size(); ++k) {
            out += std::to_string(i + 1);
            out += ' ';
            out += std::to_string(cols[k] + 1);
            out += ' ';
            out += io::format_double(vals[k]);
            out += '\n';
        }
    }
    return out;
}

void write_matrix_market(const SparseMatrixCSR& a, const std::filesystem::path& path) {
    io::write_text(path, format_matrix_market(a));
}

} // namespace gnnla
