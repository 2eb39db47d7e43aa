#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gnnla/sparse.hpp"

namespace gnnla::ad {

/// Row-major so that one entity (edge or vertex) is one contiguous row.
using Tensor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
struct Var {
    Tape* tape = nullptr;
    std::size_t id = 0;

    const Tensor& value() const;
    Eigen::Index rows() const { return value().rows(); }
    Eigen::Index cols() const { return value().cols(); }
    /// Value of a 1x1 node.
    double scalar() const;
};

enum class Reduce { sum, mean, min, max };

/// Gradients of one backward pass, one tensor per leaf in creation order.
class Grad {
public:
    const Tensor& of(Var leaf) const;
    std::size_t size() const { return grads_.size(); }
    const Tensor& operator[](std::size_t leaf_index) const { return grads_[leaf_index]; }

private:
    friend class Tape;
    std::vector<Tensor> grads_;
    std::vector<std::size_t> leaf_node_;
};

/// Append-only reverse-mode tape. Node k only reads nodes with smaller ids, so a single
/// reverse sweep in id order is a valid topological order. Single-threaded; use one
/// tape per worker.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Differentiable input.
    Var leaf(Tensor value);
    /// Input that receives no gradient.
    Var constant(Tensor value);
    Var scalar_constant(double v);

    std::size_t size() const { return nodes_.size(); }
    std::size_t num_leaves() const { return leaves_.size(); }
    const Tensor& value(std::size_t id) const { return nodes_[id].value; }
    std::size_t leaf_index(Var v) const;

    /// Reverse sweep from a 1x1 output. Throws if output is not scalar.
    Grad backward(Var output);

    // Node construction used by the op implementations.
    using BackwardFn = std::function<void(const Tensor& out_grad, std::span<Tensor*> in_grads)>;
    Var push(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward, const char* op);

private:
    struct Node {
        Tensor value;
        std::vector<std::size_t> inputs;
        BackwardFn backward;
        const char* op = "";
        bool requires_grad = false;
    };
    std::vector<Node> nodes_;
    std::vector<std::size_t> leaves_;
};

// ---------------------------------------------------------------------------
// Operations. Shapes follow (rows, cols); column vectors are (n, 1).

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
/// Elementwise product, equal shapes.
Var mul(Var a, Var b);
/// out(i, j) = a(i, j) * d(i), d is (rows, 1).
Var mul_rows(Var a, Var d);
/// out(i, j) = a(i, j) + b(0, j), b is (1, cols).
Var add_row_broadcast(Var a, Var b);
/// Dense a * b.
Var matmul(Var a, Var b);
/// x * w^T + 1 b^T with w (out, in) and b (1, out). The MLP affine map.
Var linear(Var x, Var w, Var b);
/// Constant sparse A times differentiable x (n, m).
Var spmm(const SparseMatrixCSR& a, Var x);

Var relu(Var a);
Var leaky_relu(Var a, double slope);
Var reciprocal(Var a);
/// Elementwise a^p. Negative bases require integer p.
Var power(Var a, double p);
Var sqrt(Var a);

/// Reductions over all entries, producing (1, 1).
Var sum(Var a);
Var mean(Var a);
Var min(Var a);
Var max(Var a);
Var l2_norm(Var a);
/// Euclidean norm of each column, producing (1, cols).
Var col_norms(Var a);

/// Horizontal concatenation of tensors with equal row counts.
Var concat_cols(std::span<const Var> parts);
Var concat_cols(std::initializer_list<Var> parts);
/// out.row(k) = a.row(index[k]).
Var gather_rows(Var a, std::span<const std::size_t> index);
/// out.row(index[k]) += a.row(k), out has out_rows rows.
Var scatter_add_rows(Var a, std::span<const std::size_t> index, std::size_t out_rows);
/// Row-wise reduction of contiguous segments: segment k covers rows [offsets[k], offsets[k+1]).
/// Empty segments produce zeros. min/max send the gradient to the first attaining row.
Var segment_reduce(Var a, std::span<const std::size_t> offsets, Reduce kind);
/// Repeats a (1, cols) row n times.
Var repeat_rows(Var a, std::size_t n);

// ---------------------------------------------------------------------------

/// Central-difference check of the gradient of f at x.
///
/// f builds a scalar on the given tape from the leaf it receives. For each checked coordinate,
///   rel = |g_ad - g_fd| / max(|g_ad|, |g_fd|, 1e-7 * max_k |g_ad,k|, 1e-12)
/// and the maximum over coordinates is returned. When max_coords > 0 and smaller than the
/// parameter count, that many coordinates are sampled with the given seed.
double grad_check(const std::function<Var(Tape&, Var)>& f, const Tensor& x, double step = 1e-6,
                  std::size_t max_coords = 0, std::uint64_t seed = 0);

} // namespace gnnla::ad
