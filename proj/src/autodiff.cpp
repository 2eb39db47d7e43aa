#include "gnnla/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "gnnla/error.hpp"
#include "gnnla/rng.hpp"

namespace gnnla::ad {

namespace {

std::string shape(const Tensor& t) {
    return "(" + std::to_string(t.rows()) + "," + std::to_string(t.cols()) + ")";
}

void require_same_tape(Var a, Var b) {
    if (a.tape != b.tape || a.tape == nullptr) throw Error("autodiff: operands live on different tapes");
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw Error(std::string(op) + ": shape mismatch " + shape(a) + " vs " + shape(b));
}

Tape& tape_of(Var v) {
    if (!v.tape) throw Error("autodiff: uninitialised Var");
    return *v.tape;
}

} // namespace

const Tensor& Var::value() const { return tape->value(id); }

double Var::scalar() const {
    const auto& v = value();
    if (v.rows() != 1 || v.cols() != 1) throw Error("Var::scalar: not a 1x1 node " + shape(v));
    return v(0, 0);
}

const Tensor& Grad::of(Var leaf) const {
    for (std::size_t k = 0; k < leaf_node_.size(); ++k)
        if (leaf_node_[k] == leaf.id) return grads_[k];
    throw Error("Grad::of: node is not a leaf of this tape");
}

Var Tape::leaf(Tensor value) {
    const std::size_t id = nodes_.size();
    nodes_.push_back({std::move(value), {}, nullptr, "leaf", true});
    leaves_.push_back(id);
    return {this, id};
}

Var Tape::constant(Tensor value) {
    const std::size_t id = nodes_.size();
    nodes_.push_back({std::move(value), {}, nullptr, "const", false});
    return {this, id};
}

Var Tape::scalar_constant(double v) {
    Tensor t(1, 1);
    t(0, 0) = v;
    return constant(std::move(t));
}

std::size_t Tape::leaf_index(Var v) const {
    for (std::size_t k = 0; k < leaves_.size(); ++k)
        if (leaves_[k] == v.id) return k;
    throw Error("Tape::leaf_index: not a leaf");
}

Var Tape::push(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward, const char* op) {
    bool requires_grad = false;
    for (auto in : inputs) {
        if (in >= nodes_.size()) throw Error("Tape::push: input id out of order");
        requires_grad = requires_grad || nodes_[in].requires_grad;
    }
    const std::size_t id = nodes_.size();
    nodes_.push_back({std::move(value), std::move(inputs), requires_grad ? std::move(backward) : nullptr,
                      op, requires_grad});
    return {this, id};
}

Grad Tape::backward(Var output) {
    if (output.tape != this) throw Error("Tape::backward: output belongs to another tape");
    const auto& out = nodes_[output.id].value;
    if (out.rows() != 1 || out.cols() != 1)
        throw Error("Tape::backward: output must be scalar, got " + shape(out));

    std::vector<Tensor> grads(output.id + 1);
    std::vector<bool> live(output.id + 1, false);
    grads[output.id] = Tensor::Ones(1, 1);
    live[output.id] = true;

    std::vector<Tensor*> in_ptrs;
    for (std::size_t k = output.id + 1; k-- > 0;) {
        Node& node = nodes_[k];
        if (!live[k] || !node.backward) continue;
        in_ptrs.assign(node.inputs.size(), nullptr);
        for (std::size_t j = 0; j < node.inputs.size(); ++j) {
            const auto in = node.inputs[j];
            if (!nodes_[in].requires_grad) continue;
            if (!live[in]) {
                grads[in] = Tensor::Zero(nodes_[in].value.rows(), nodes_[in].value.cols());
                live[in] = true;
            }
            in_ptrs[j] = &grads[in];
        }
        node.backward(grads[k], in_ptrs);
    }

    Grad g;
    for (auto leaf : leaves_) {
        g.leaf_node_.push_back(leaf);
        if (leaf <= output.id && live[leaf])
            g.grads_.push_back(std::move(grads[leaf]));
        else
            g.grads_.push_back(Tensor::Zero(nodes_[leaf].value.rows(), nodes_[leaf].value.cols()));
    }
    return g;
}

// ---------------------------------------------------------------------------

Var add(Var a, Var b) {
    require_same_tape(a, b);
    require_same_shape("add", a.value(), b.value());
    return tape_of(a).push(a.value() + b.value(), {a.id, b.id},
                           [](const Tensor& g, std::span<Tensor*> in) {
                               if (in[0]) *in[0] += g;
                               if (in[1]) *in[1] += g;
                           },
                           "add");
}

Var sub(Var a, Var b) {
    require_same_tape(a, b);
    require_same_shape("sub", a.value(), b.value());
    return tape_of(a).push(a.value() - b.value(), {a.id, b.id},
                           [](const Tensor& g, std::span<Tensor*> in) {
                               if (in[0]) *in[0] += g;
                               if (in[1]) *in[1] -= g;
                           },
                           "sub");
}

Var scale(Var a, double s) {
    return tape_of(a).push(a.value() * s, {a.id},
                           [s](const Tensor& g, std::span<Tensor*> in) {
                               if (in[0]) *in[0] += s * g;
                           },
                           "scale");
}

Var add_scalar(Var a, double s) {
    Tensor v = a.value().array() + s;
    return tape_of(a).push(std::move(v), {a.id},
                           [](const Tensor& g, std::span<Tensor*> in) {
                               if (in[0]) *in[0] += g;
                           },
                           "add_scalar");
}

Var mul(Var a, Var b) {
    require_same_tape(a, b);
    require_same_shape("mul", a.value(), b.value());
    Tape& t = tape_of(a);
    const auto ia = a.id, ib = b.id;
    return t.push(a.value().cwiseProduct(b.value()), {ia, ib},
                  [&t, ia, ib](const Tensor& g, std::span<Tensor*> in) {
                      if (in[0]) *in[0] += g.cwiseProduct(t.value(ib));
                      if (in[1]) *in[1] += g.cwiseProduct(t.value(ia));
                  },
                  "mul");
}

Var mul_rows(Var a, Var d) {
    require_same_tape(a, d);
    const auto& av = a.value();
    const auto& dv = d.value();
    if (dv.cols() != 1 || dv.rows() != av.rows())
        throw Error("mul_rows: expected (" + std::to_string(av.rows()) + ",1) scale, got " + shape(dv));
    Tape& t = tape_of(a);
    const auto ia = a.id, id = d.id;
    Tensor out = dv.col(0).asDiagonal() * av;
    return t.push(std::move(out), {ia, id},
                  [&t, ia, id](const Tensor& g, std::span<Tensor*> in) {
                      if (in[0]) *in[0] += t.value(id).col(0).asDiagonal() * g;
                      if (in[1]) *in[1] += g.cwiseProduct(t.value(ia)).rowwise().sum();
                  },
                  "mul_rows");
}

Var add_row_broadcast(Var a, Var b) {
    require_same_tape(a, b);
    const auto& bv = b.value();
    if (bv.rows() != 1 || bv.cols() != a.cols())
        throw Error("add_row_broadcast: expected (1," + std::to_string(a.cols()) + ") row, got " + shape(bv));
    Tensor out = a.value().rowwise() + bv.row(0);
    return tape_of(a).push(std::move(out), {a.id, b.id},
                           [](const Tensor& g, std::span<Tensor*> in) {
                               if (in[0]) *in[0] += g;
                               if (in[1]) *in[1] += g.colwise().sum();
                           },
                           "add_row_broadcast");
}

Var matmul(Var a, Var b) {
    require_same_tape(a, b);
    if (a.cols() != b.rows())
        throw Error("matmul: inner dimension mismatch " + shape(a.value()) + " * " + shape(b.value()));
    Tape& t = tape_of(a);
    const auto ia = a.id, ib = b.id;
    Tensor out = a.value() * b.value();
    return t.push(std::move(out), {ia, ib},
                  [&t, ia, ib](const Tensor& g, std::span<Tensor*> in) {
                      if (in[0]) in[0]->noalias() += g * t.value(ib).transpose();
                      if (in[1]) in[1]->noalias() += t.value(ia).transpose() * g;
                  },
                  "matmul");
}

Var linear(Var x, Var w, Var b) {
    require_same_tape(x, w);
    require_same_tape(x, b);
    const auto& wv = w.value();
    const auto& bv = b.value();
    if (x.cols() != wv.cols())
        throw Error("linear: input width " + std::to_string(x.cols()) + " does not match weight " + shape(wv));
    if (bv.rows() != 1 || bv.cols() != wv.rows())
        throw Error("linear: bias shape " + shape(bv) + " does not match weight " + shape(wv));
    Tape& t = tape_of(x);
    const auto ix = x.id, iw = w.id;
    Tensor out(x.rows(), wv.rows());
    out.noalias() = x.value() * wv.transpose();
    out.rowwise() += bv.row(0);
    return t.push(std::move(out), {ix, iw, b.id},
                  [&t, ix, iw](const Tensor& g, std::span<Tensor*> in) {
                      if (in[0]) in[0]->noalias() += g * t.value(iw);
                      if (in[1]) in[1]->noalias() += g.transpose() * t.value(ix);
                      if (in[2]) *in[2] += g.colwise().sum();
                  },
                  "linear");
}

Var spmm(const SparseMatrixCSR& a, Var x) {
    if (static_cast<Eigen::Index>(a.cols()) != x.rows())
        throw Error("spmm: matrix has " + std::to_string(a.cols()) + " columns, operand " + shape(x.value()));
    const auto& xv = x.value();
    const auto m = xv.cols();
    Tensor out = Tensor::Zero(static_cast<Eigen::Index>(a.rows()), m);
    const auto rp = a.row_ptr();
    const auto ci = a.col_idx();
    const auto vals = a.values();
    for (Index i = 0; i < a.rows(); ++i) {
        auto orow = out.row(static_cast<Eigen::Index>(i));
        for (Index p = rp[i]; p < rp[i + 1]; ++p) orow += vals[p] * xv.row(static_cast<Eigen::Index>(ci[p]));
    }
    const SparseMatrixCSR* ap = &a;
    return tape_of(x).push(std::move(out), {x.id},
                           [ap](const Tensor& g, std::span<Tensor*> in) {
                               if (!in[0]) return;
                               const auto rp = ap->row_ptr();
                               const auto ci = ap->col_idx();
                               const auto vals = ap->values();
                               for (Index i = 0; i < ap->rows(); ++i) {
                                   const auto grow = g.row(static_cast<Eigen::Index>(i));
                                   for (Index p = rp[i]; p < rp[i + 1]; ++p)
                                       in[0]->row(static_cast<Eigen::Index>(ci[p])) += vals[p] * grow;
                               }
                           },
                           "spmm");
}

Var relu(Var a) {
    Tape& t = tape_of(a);
    const auto ia = a.id;
    Tensor out = a.value().cwiseMax(0.0);
    return t.push(std::move(out), {ia},
                  [&t, ia](const Tensor& g, std::span<Tensor*> in) {
                      if (in[0]) *in[0] += (t.value(ia).array() > 0.0).select(g, 0.0);
                  },
                  "relu");
}

Var leaky_relu(Var a, double slope) {
    Tape& t = tape_of(a);
    const auto ia = a.id;
    Tensor out = (a.value().array() > 0.0).select(a.value(), slope * a.value());
    return t.push(std::move(out), {ia},
                  [&t, ia, slope](const Tensor& g, std::span<Tensor*> in) {
                      if (in[0]) *in[0] += (t.value(ia).array() > 0.0).select(g, slope * g);
                  },
                  "leaky_relu");
}

Var reciprocal(Var a) {
    Tape& t = tape_of(a);
    Tensor out = a.value().cwiseInverse();
    const std::size_t id_out = t.size();
    return t.push(std::move(out), {a.id},
                  [&t, id_out](const Tensor& g, std::span<Tensor*> in) {
                      if (in[0]) *in[0] -= g.cwiseProduct(t.value(id_out).cwiseAbs2());
                  },
                  "reciprocal");
}

Var power(Var a, double p) {
    const auto& av = a.value();
    const bool integer_p = p == std::floor(p);
    if (!integer_p && (av.array() < 0.0).any())
        throw Error("power: negative base with non-integer exponent " + std::to_string(p));
    Tape& t = tape_of(a);
    const auto ia = a.id;
    Tensor out = av.array().pow(p);
    return t.push(std::move(out), {ia},
                  [&t, ia, p](const Tensor& g, std::span<Tensor*> in) {
                      if (in[0]) *in[0] += (g.array() * p * t.value(ia).array().pow(p - 1.0)).matrix();
                  },
                  "power");
}

Var sqrt(Var a) {
    if ((a.value().array() < 0.0).any()) throw Error("sqrt: negative argument");
    Tape& t = tape_of(a);
    const std::size_t id_out = t.size();
    Tensor out = a.value().cwiseSqrt();
    return t.push(std::move(out), {a.id},
                  [&t, id_out](const Tensor& g, std::span<Tensor*> in) {
                      if (in[0]) *in[0] += (0.5 * g.array() / t.value(id_out).array()).matrix();
                  },
                  "sqrt");
}

Var sum(Var a) {
    Tensor out(1, 1);
    out(0, 0) = a.value().sum();
    return tape_of(a).push(std::move(out), {a.id},
                           [](const Tensor& g, std::span<Tensor*> in) {
                               if (in[0]) in[0]->array() += g(0, 0);
                           },
                           "sum");
}

Var mean(Var a) {
    const double count = static_cast<double>(a.value().size());
    if (count == 0) throw Error("mean: empty tensor");
    Tensor out(1, 1);
    out(0, 0) = a.value().sum() / count;
    return tape_of(a).push(std::move(out), {a.id},
                           [count](const Tensor& g, std::span<Tensor*> in) {
                               if (in[0]) in[0]->array() += g(0, 0) / count;
                           },
                           "mean");
}

namespace {

// first index (row-major order) attaining the extreme value
Eigen::Index extreme_index(const Tensor& v, bool want_max) {
    if (v.size() == 0) throw Error(want_max ? "max: empty tensor" : "min: empty tensor");
    const double* d = v.data();
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < v.size(); ++k) {
        if (want_max ? d[k] > d[best] : d[k] < d[best]) best = k;
    }
    return best;
}

Var extreme(Var a, bool want_max) {
    const auto k = extreme_index(a.value(), want_max);
    Tensor out(1, 1);
    out(0, 0) = a.value().data()[k];
    return tape_of(a).push(std::move(out), {a.id},
                           [k](const Tensor& g, std::span<Tensor*> in) {
                               if (in[0]) in[0]->data()[k] += g(0, 0);
                           },
                           want_max ? "max" : "min");
}

} // namespace

Var min(Var a) { return extreme(a, false); }
Var max(Var a) { return extreme(a, true); }

Var l2_norm(Var a) {
    Tape& t = tape_of(a);
    const auto ia = a.id;
    const double nrm = a.value().norm();
    Tensor out(1, 1);
    out(0, 0) = nrm;
    return t.push(std::move(out), {ia},
                  [&t, ia, nrm](const Tensor& g, std::span<Tensor*> in) {
                      if (in[0] && nrm > 0.0) *in[0] += (g(0, 0) / nrm) * t.value(ia);
                  },
                  "l2_norm");
}

Var col_norms(Var a) {
    Tape& t = tape_of(a);
    const auto ia = a.id;
    Tensor out = a.value().colwise().norm();
    const std::size_t id_out = t.size();
    return t.push(std::move(out), {ia},
                  [&t, ia, id_out](const Tensor& g, std::span<Tensor*> in) {
                      if (!in[0]) return;
                      const auto& nrm = t.value(id_out);
                      const auto& x = t.value(ia);
                      for (Eigen::Index j = 0; j < x.cols(); ++j)
                          if (nrm(0, j) > 0.0) in[0]->col(j) += (g(0, j) / nrm(0, j)) * x.col(j);
                  },
                  "col_norms");
}

Var concat_cols(std::span<const Var> parts) {
    if (parts.empty()) throw Error("concat_cols: no operands");
    Tape& t = tape_of(parts[0]);
    const auto rows = parts[0].rows();
    Eigen::Index total = 0;
    std::vector<std::size_t> ids;
    std::vector<Eigen::Index> offsets;
    for (const auto& p : parts) {
        if (p.tape != &t) throw Error("concat_cols: operands live on different tapes");
        if (p.rows() != rows)
            throw Error("concat_cols: row count mismatch " + std::to_string(p.rows()) + " vs " + std::to_string(rows));
        ids.push_back(p.id);
        offsets.push_back(total);
        total += p.cols();
    }
    Tensor out(rows, total);
    for (std::size_t k = 0; k < parts.size(); ++k)
        out.middleCols(offsets[k], parts[k].cols()) = parts[k].value();
    return t.push(std::move(out), ids,
                  [offsets](const Tensor& g, std::span<Tensor*> in) {
                      for (std::size_t k = 0; k < in.size(); ++k)
                          if (in[k]) *in[k] += g.middleCols(offsets[k], in[k]->cols());
                  },
                  "concat_cols");
}

Var concat_cols(std::initializer_list<Var> parts) {
    return concat_cols(std::span<const Var>(parts.begin(), parts.size()));
}

Var gather_rows(Var a, std::span<const std::size_t> index) {
    const auto& av = a.value();
    Tensor out(static_cast<Eigen::Index>(index.size()), av.cols());
    for (std::size_t k = 0; k < index.size(); ++k) {
        if (index[k] >= static_cast<std::size_t>(av.rows())) throw Error("gather_rows: index out of range");
        out.row(static_cast<Eigen::Index>(k)) = av.row(static_cast<Eigen::Index>(index[k]));
    }
    std::vector<std::size_t> idx(index.begin(), index.end());
    return tape_of(a).push(std::move(out), {a.id},
                           [idx = std::move(idx)](const Tensor& g, std::span<Tensor*> in) {
                               if (!in[0]) return;
                               for (std::size_t k = 0; k < idx.size(); ++k)
                                   in[0]->row(static_cast<Eigen::Index>(idx[k])) += g.row(static_cast<Eigen::Index>(k));
                           },
                           "gather_rows");
}

Var scatter_add_rows(Var a, std::span<const std::size_t> index, std::size_t out_rows) {
    const auto& av = a.value();
    if (index.size() != static_cast<std::size_t>(av.rows())) throw Error("scatter_add_rows: index length mismatch");
    Tensor out = Tensor::Zero(static_cast<Eigen::Index>(out_rows), av.cols());
    for (std::size_t k = 0; k < index.size(); ++k) {
        if (index[k] >= out_rows) throw Error("scatter_add_rows: index out of range");
        out.row(static_cast<Eigen::Index>(index[k])) += av.row(static_cast<Eigen::Index>(k));
    }
    std::vector<std::size_t> idx(index.begin(), index.end());
    return tape_of(a).push(std::move(out), {a.id},
                           [idx = std::move(idx)](const Tensor& g, std::span<Tensor*> in) {
                               if (!in[0]) return;
                               for (std::size_t k = 0; k < idx.size(); ++k)
                                   in[0]->row(static_cast<Eigen::Index>(k)) += g.row(static_cast<Eigen::Index>(idx[k]));
                           },
                           "scatter_add_rows");
}

Var segment_reduce(Var a, std::span<const std::size_t> offsets, Reduce kind) {
    if (offsets.empty()) throw Error("segment_reduce: offsets must have at least one entry");
    const auto& av = a.value();
    if (offsets.back() != static_cast<std::size_t>(av.rows()))
        throw Error("segment_reduce: offsets do not cover the operand rows");
    const auto segs = static_cast<Eigen::Index>(offsets.size() - 1);
    const auto w = av.cols();
    Tensor out = Tensor::Zero(segs, w);
    // for min/max: the row that attains the extreme, per (segment, column)
    std::vector<Eigen::Index> arg;
    if (kind == Reduce::min || kind == Reduce::max) arg.assign(static_cast<std::size_t>(segs * w), -1);

    for (Eigen::Index s = 0; s < segs; ++s) {
        const auto b = static_cast<Eigen::Index>(offsets[static_cast<std::size_t>(s)]);
        const auto e = static_cast<Eigen::Index>(offsets[static_cast<std::size_t>(s) + 1]);
        if (e < b) throw Error("segment_reduce: offsets decreasing");
        if (e == b) continue;
        switch (kind) {
        case Reduce::sum:
        case Reduce::mean:
            for (Eigen::Index r = b; r < e; ++r) out.row(s) += av.row(r);
            if (kind == Reduce::mean) out.row(s) /= static_cast<double>(e - b);
            break;
        case Reduce::min:
        case Reduce::max:
            for (Eigen::Index c = 0; c < w; ++c) {
                Eigen::Index best = b;
                for (Eigen::Index r = b + 1; r < e; ++r) {
                    const bool better = kind == Reduce::max ? av(r, c) > av(best, c) : av(r, c) < av(best, c);
                    if (better) best = r;
                }
                out(s, c) = av(best, c);
                arg[static_cast<std::size_t>(s * w + c)] = best;
            }
            break;
        }
    }
    std::vector<std::size_t> offs(offsets.begin(), offsets.end());
    return tape_of(a).push(
        std::move(out), {a.id},
        [offs = std::move(offs), arg = std::move(arg), kind, w](const Tensor& g, std::span<Tensor*> in) {
            if (!in[0]) return;
            const auto segs = static_cast<Eigen::Index>(offs.size() - 1);
            for (Eigen::Index s = 0; s < segs; ++s) {
                const auto b = static_cast<Eigen::Index>(offs[static_cast<std::size_t>(s)]);
                const auto e = static_cast<Eigen::Index>(offs[static_cast<std::size_t>(s) + 1]);
                if (e == b) continue;
                if (kind == Reduce::sum) {
                    for (Eigen::Index r = b; r < e; ++r) in[0]->row(r) += g.row(s);
                } else if (kind == Reduce::mean) {
                    const double inv = 1.0 / static_cast<double>(e - b);
                    for (Eigen::Index r = b; r < e; ++r) in[0]->row(r) += inv * g.row(s);
                } else {
                    for (Eigen::Index c = 0; c < w; ++c)
                        (*in[0])(arg[static_cast<std::size_t>(s * w + c)], c) += g(s, c);
                }
            }
        },
        "segment_reduce");
}

Var repeat_rows(Var a, std::size_t n) {
    const auto& av = a.value();
    if (av.rows() != 1) throw Error("repeat_rows: expected a single row, got " + shape(av));
    Tensor out = av.replicate(static_cast<Eigen::Index>(n), 1);
    return tape_of(a).push(std::move(out), {a.id},
                           [](const Tensor& g, std::span<Tensor*> in) {
                               if (in[0]) *in[0] += g.colwise().sum();
                           },
                           "repeat_rows");
}

// ---------------------------------------------------------------------------

double grad_check(const std::function<Var(Tape&, Var)>& f, const Tensor& x, double step, std::size_t max_coords,
                  std::uint64_t seed) {
    Tensor analytic;
    {
        Tape t;
        Var leaf = t.leaf(x);
        Var out = f(t, leaf);
        analytic = t.backward(out).of(leaf);
    }
    auto eval = [&](const Tensor& p) {
        Tape t;
        Var leaf = t.leaf(p);
        return f(t, leaf).scalar();
    };

    std::vector<Eigen::Index> coords;
    const auto total = x.size();
    if (max_coords == 0 || static_cast<Eigen::Index>(max_coords) >= total) {
        for (Eigen::Index k = 0; k < total; ++k) coords.push_back(k);
    } else {
        Rng rng = Rng::derive(seed, rng_stream::test, 17);
        for (auto k : rng.sample_without_replacement(static_cast<std::size_t>(total), max_coords))
            coords.push_back(static_cast<Eigen::Index>(k));
    }

    const double gmax = analytic.cwiseAbs().maxCoeff();
    const double floor = std::max(1e-7 * gmax, 1e-12);
    double worst = 0.0;
    Tensor p = x;
    for (auto k : coords) {
        const double orig = p.data()[k];
        p.data()[k] = orig + step;
        const double fp = eval(p);
        p.data()[k] = orig - step;
        const double fm = eval(p);
        p.data()[k] = orig;
        const double fd = (fp - fm) / (2.0 * step);
        const double ad = analytic.data()[k];
        const double denom = std::max({std::abs(ad), std::abs(fd), floor});
        worst = std::max(worst, std::abs(ad - fd) / denom);
    }
    return worst;
}

} // namespace gnnla::ad
