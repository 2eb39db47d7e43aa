#include "gnnla/amg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/LU>

#include "gnnla/error.hpp"
#include "gnnla/graph_net.hpp"
#include "gnnla/kernels.hpp"

namespace gnnla::amg {

using graph_net::AttrTable;
using graph_net::AttributedGraph;
using graph_net::Aggregator;
using graph_net::EdgeSet;
using graph_net::GNLayerSpec;

CFPartition CFPartition::from_labels(std::vector<Label> labels) {
    CFPartition cf;
    cf.labels = std::move(labels);
    cf.coarse_index.assign(cf.labels.size(), npos);
    for (Index i = 0; i < cf.labels.size(); ++i)
        if (cf.labels[i] == Label::C) cf.coarse_index[i] = cf.num_coarse++;
    return cf;
}

namespace {

void require_square(const SparseMatrixCSR& a, const char* who) {
    if (!a.is_square()) throw Error(std::string(who) + ": matrix must be square");
}

void require_nonzero_diagonal(const SparseMatrixCSR& a, const char* who) {
    const auto d = diag(a);
    for (Index i = 0; i < d.size(); ++i)
        if (d[i] == 0.0) throw Error(std::string(who) + ": zero diagonal entry in row " + std::to_string(i));
}

// Graph of A with edge attrs [A_ij, self] and the given vertex columns.
AttributedGraph graph_with_self_flag(const SparseMatrixCSR& a, AttrTable vertices) {
    auto g = graph_net::matrix_to_graph(a, true);
    AttrTable e(g.num_edges(), 2);
    for (Index k = 0; k < g.num_edges(); ++k) {
        e(k, 0) = g.edge_attrs()(k, 0);
        e(k, 1) = g.edge(k).src == g.edge(k).dst ? 1.0 : 0.0;
    }
    return g.with_attrs(std::move(e), std::move(vertices), {});
}

// max over off-diagonal incoming edges of f(A_ij); `none` if there are none
Aggregator offdiag_max(double (*f)(double), double none) {
    return Aggregator::make_custom(
        [f, none](const EdgeSet& s, std::span<double> out) {
            bool any = false;
            double m = none;
            for (Index k = s.begin; k < s.end; ++k) {
                if (s.graph.edge(k).src == s.vertex) continue;
                const double v = f(s.attrs(k, 0));
                m = any ? std::max(m, v) : v;
                any = true;
            }
            out[0] = m;
        },
        1);
}

double negate(double x) { return -x; }
double magnitude(double x) { return std::abs(x); }

// Layer 1 of the classic measure: v_i = max_{j != i}(-A_ij).
AttributedGraph classic_row_scale(const SparseMatrixCSR& a) {
    auto g = graph_net::matrix_to_graph(a, true);
    GNLayerSpec l;
    l.rho_ev = offdiag_max(negate, 0.0);
    l.phi_v = [](auto, auto ebar, auto, auto out) { out[0] = ebar[0]; };
    l.vertex_out_width = 1;
    g = graph_net::apply_layer(g, l);
    for (Index i = 0; i < a.n(); ++i)
        if (!(g.vertex_attrs()(i, 0) > 0.0))
            throw Error("soc_classic: row " + std::to_string(i) +
                        " has no negative off-diagonal entry, classic strength is undefined");
    return g;
}

} // namespace

SparseMatrixCSR soc_sa(const SparseMatrixCSR& a) {
    require_square(a, "soc_sa");
    require_nonzero_diagonal(a, "soc_sa");
    auto g = graph_net::matrix_to_graph(a, true);
    g = g.with_attrs(g.edge_attrs(), AttrTable::column(diag(a)), {});
    GNLayerSpec l;
    l.phi_e = [](auto e, auto vs, auto vd, auto, auto out) { out[0] = (e[0] * e[0]) / (vd[0] * vs[0]); };
    l.edge_out_width = 1;
    return graph_net::graph_to_matrix(graph_net::apply_layer(g, l), 0);
}

SparseMatrixCSR soc_classic_measure(const SparseMatrixCSR& a) {
    require_square(a, "soc_classic");
    auto g = classic_row_scale(a);
    GNLayerSpec l;
    l.phi_e = [](auto e, auto, auto vd, auto, auto out) { out[0] = -e[0] / vd[0]; };
    l.edge_out_width = 1;
    return graph_net::graph_to_matrix(graph_net::apply_layer(g, l), 0);
}

SparseMatrixCSR soc_classic(const SparseMatrixCSR& a, double tau) {
    require_square(a, "soc_classic");
    if (!(tau > 0.0 && tau <= 1.0)) throw Error("soc_classic: tau must lie in (0, 1]");
    auto g = classic_row_scale(a);
    GNLayerSpec l;
    l.phi_e = [tau](auto e, auto, auto vd, auto, auto out) {
        const double s = -e[0] / vd[0];
        out[0] = s - tau > 0.0 ? 1.0 : 0.0;
    };
    l.edge_out_width = 1;
    return graph_net::graph_to_matrix(graph_net::apply_layer(g, l), 0);
}

SparseMatrixCSR soc_abs(const SparseMatrixCSR& a, double theta) {
    require_square(a, "soc_abs");
    if (!(theta > 0.0 && theta <= 1.0)) throw Error("soc_abs: theta must lie in (0, 1]");
    auto g = graph_with_self_flag(a, AttrTable(a.n(), 0));
    GNLayerSpec l1;
    l1.rho_ev = offdiag_max(magnitude, 0.0);
    l1.phi_v = [](auto, auto ebar, auto, auto out) { out[0] = ebar[0]; };
    l1.vertex_out_width = 1;
    g = graph_net::apply_layer(g, l1);
    GNLayerSpec l2;
    l2.phi_e = [theta](auto e, auto, auto vd, auto, auto out) {
        const double m = vd[0];
        out[0] = e[1] == 0.0 && m > 0.0 && std::abs(e[0]) >= theta * m ? 1.0 : 0.0;
    };
    l2.edge_out_width = 1;
    return graph_net::graph_to_matrix(graph_net::apply_layer(g, l2), 0);
}

namespace {

void check_partition(const SparseMatrixCSR& a, const CFPartition& cf, const char* who) {
    if (cf.size() != a.n() || cf.coarse_index.size() != a.n())
        throw Error(std::string(who) + ": partition size does not match the matrix");
}

// Assembles the rectangular operator from per-edge values in A's (row, column) order.
SparseMatrixCSR finish_prolongation(const SparseMatrixCSR& a, const CFPartition& cf,
                                    const std::vector<double>& p_edge, const std::vector<double>& mask_edge) {
    std::vector<Triplet> t;
    for (Index i = 0; i < a.n(); ++i) {
        if (cf.is_coarse(i)) {
            t.push_back({i, cf.coarse_index[i], 1.0});
            continue;
        }
        const auto cols = a.row_cols(i);
        for (Index k = a.row_ptr()[i]; k < a.row_ptr()[i + 1]; ++k) {
            const Index j = cols[k - a.row_ptr()[i]];
            if (j == i || !cf.is_coarse(j) || mask_edge[k] == 0.0) continue;
            t.push_back({i, cf.coarse_index[j], p_edge[k]});
        }
    }
    return SparseMatrixCSR::from_triplets(a.n(), cf.num_coarse, std::move(t));
}

// Strength values aligned with A's stored entries (missing entries count as weak).
std::vector<double> strength_on_pattern(const SparseMatrixCSR& a, const SparseMatrixCSR& s_hat) {
    if (s_hat.rows() != a.n() || s_hat.cols() != a.n()) throw Error("direct_interpolation: S_hat shape mismatch");
    std::vector<double> s(a.nnz());
    for (Index i = 0; i < a.n(); ++i)
        for (Index k = a.row_ptr()[i]; k < a.row_ptr()[i + 1]; ++k) s[k] = s_hat.at(i, a.col_idx()[k]);
    return s;
}

[[noreturn]] void no_strong_coarse(Index i) {
    throw Error("direct_interpolation: F vertex " + std::to_string(i) +
                " has no strong coarse neighbours with nonzero weight sum");
}

} // namespace

SparseMatrixCSR direct_interpolation(const SparseMatrixCSR& a, const SparseMatrixCSR& s_hat, const CFPartition& cf) {
    require_square(a, "direct_interpolation");
    check_partition(a, cf, "direct_interpolation");
    require_nonzero_diagonal(a, "direct_interpolation");

    const auto s = strength_on_pattern(a, s_hat);
    auto g0 = graph_net::matrix_to_graph(a, true);
    // CSR order is the graph's edge order, so s lines up with the edges
    AttrTable e(g0.num_edges(), 3);
    for (Index k = 0; k < g0.num_edges(); ++k) {
        e(k, 0) = g0.edge_attrs()(k, 0);
        e(k, 1) = s[k];
        e(k, 2) = g0.edge(k).src == g0.edge(k).dst ? 1.0 : 0.0;
    }
    AttrTable v(a.n(), 2);
    const auto d = diag(a);
    for (Index i = 0; i < a.n(); ++i) {
        v(i, 0) = d[i];
        v(i, 1) = cf.is_coarse(i) ? 1.0 : 0.0;
    }
    auto g = g0.with_attrs(std::move(e), std::move(v), {});

    // Layer 1: v_ij = C_j on each edge; alpha_i from the two off-diagonal sums
    GNLayerSpec l1;
    l1.phi_e = [](auto e, auto vs, auto, auto, auto out) {
        out[0] = e[0];
        out[1] = e[1];
        out[2] = e[2];
        out[3] = vs[1];
    };
    l1.edge_out_width = 4;
    l1.rho_ev = Aggregator::make_custom(
        [](const EdgeSet& set, std::span<double> out) {
            double row_sum = 0.0, coarse_sum = 0.0;
            for (Index k = set.begin; k < set.end; ++k) {
                if (set.attrs(k, 2) != 0.0) continue;
                row_sum += set.attrs(k, 0);
                coarse_sum += set.attrs(k, 0) * set.attrs(k, 3) * set.attrs(k, 1);
            }
            out[0] = row_sum;
            out[1] = coarse_sum;
        },
        2);
    Index bad_row = CFPartition::npos;
    l1.phi_v = [](auto v, auto ebar, auto, auto out) {
        out[0] = v[0];
        out[1] = v[1];
        // C rows get alpha = 0; F rows with a zero coarse sum are caught below
        out[2] = v[1] != 0.0 || ebar[1] == 0.0 ? 0.0 : ebar[0] / (v[0] * ebar[1]);
        out[3] = v[1] == 0.0 && ebar[1] == 0.0 ? 1.0 : 0.0;
    };
    l1.vertex_out_width = 4;
    g = graph_net::apply_layer(g, l1);
    for (Index i = 0; i < a.n() && bad_row == CFPartition::npos; ++i)
        if (g.vertex_attrs()(i, 3) != 0.0) bad_row = i;
    if (bad_row != CFPartition::npos) no_strong_coarse(bad_row);

    // Layer 2: P_ij = (1 - C_i)(-A_ij alpha_i), restricted to strong coarse neighbours
    GNLayerSpec l2;
    l2.phi_e = [](auto e, auto, auto vd, auto, auto out) {
        const double mask = e[3] * e[1];
        out[0] = (1.0 - vd[1]) * (-e[0] * vd[2]) * mask;
        out[1] = mask;
    };
    l2.edge_out_width = 2;
    g = graph_net::apply_layer(g, l2);
    return finish_prolongation(a, cf, g.edge_attrs().col(0), g.edge_attrs().col(1));
}

CFPartition cf_split_greedy(const SparseMatrixCSR& s_hat) {
    if (!s_hat.is_square()) throw Error("cf_split_greedy: strength matrix must be square");
    const Index n = s_hat.n();
    const auto st = s_hat.transpose();
    enum : std::uint8_t { unset, coarse, fine };
    std::vector<std::uint8_t> state(n, unset);
    auto mark_neighbours = [&](const SparseMatrixCSR& m, Index i) {
        const auto cols = m.row_cols(i);
        const auto vals = m.row_values(i);
        for (std::size_t k = 0; k < cols.size(); ++k)
            if (cols[k] != i && vals[k] != 0.0 && state[cols[k]] == unset) state[cols[k]] = fine;
    };
    for (Index i = 0; i < n; ++i) {
        if (state[i] != unset) continue;
        state[i] = coarse;
        mark_neighbours(st, i);
    }
    std::vector<Label> labels(n);
    for (Index i = 0; i < n; ++i) labels[i] = state[i] == coarse ? Label::C : Label::F;
    return CFPartition::from_labels(std::move(labels));
}

namespace {

double norm2(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

double relative_residual(const SparseMatrixCSR& a, std::span<const double> b, std::span<const double> x,
                         double bnorm) {
    auto r = spmv_csr(a, x);
    for (Index i = 0; i < r.size(); ++i) r[i] = b[i] - r[i];
    return bnorm > 0.0 ? norm2(r) / bnorm : norm2(r);
}

void check_options(const TwoLevelOptions& opt) {
    if (!std::isfinite(opt.omega) || opt.omega <= 0.0) throw Error("two_level_solve: omega must be positive");
    if (opt.tol < 0.0) throw Error("two_level_solve: tol must be non-negative");
}

} // namespace

TwoLevelResult two_level_solve(const SparseMatrixCSR& a, std::span<const double> b, const SparseMatrixCSR& p,
                               const TwoLevelOptions& opt) {
    require_square(a, "two_level_solve");
    check_options(opt);
    const Index n = a.n();
    if (b.size() != n) throw Error("two_level_solve: right-hand side length mismatch");
    if (p.rows() != n) throw Error("two_level_solve: prolongation row count mismatch");
    require_finite(b, "two_level_solve: b");

    // coarse operator P^T A P, dense
    const Eigen::MatrixXd pd = p.to_dense();
    Eigen::MatrixXd ap = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), pd.cols());
    for (Index i = 0; i < n; ++i) {
        const auto cols = a.row_cols(i);
        const auto vals = a.row_values(i);
        for (std::size_t k = 0; k < cols.size(); ++k)
            ap.row(static_cast<Eigen::Index>(i)) += vals[k] * pd.row(static_cast<Eigen::Index>(cols[k]));
    }
    const Eigen::MatrixXd ac = pd.transpose() * ap;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(ac);
    if (ac.size() > 0 && !lu.isInvertible()) throw NumericalError("two_level_solve: singular coarse matrix");

    TwoLevelResult res;
    res.p = p;
    res.x.assign(n, 0.0);
    const double bnorm = norm2(b);
    res.residual_history.push_back(relative_residual(a, b, res.x, bnorm));
    for (std::size_t it = 0; it < opt.iters; ++it) {
        if (opt.tol > 0.0 && res.residual_history.back() < opt.tol) break;
        res.x = kernels::gnn_jacobi(a, b, res.x, opt.omega, opt.pre_sweeps);
        auto r = spmv_csr(a, res.x);
        for (Index i = 0; i < n; ++i) r[i] = b[i] - r[i];
        if (ac.size() > 0) {
            const Eigen::VectorXd rc = pd.transpose() * Eigen::Map<const Eigen::VectorXd>(r.data(), pd.rows());
            const Eigen::VectorXd ec = lu.solve(rc);
            const Eigen::VectorXd e = pd * ec;
            for (Index i = 0; i < n; ++i) res.x[i] += e(static_cast<Eigen::Index>(i));
        }
        res.x = kernels::gnn_jacobi(a, b, res.x, opt.omega, opt.pre_sweeps);
        res.residual_history.push_back(relative_residual(a, b, res.x, bnorm));
        if (!std::isfinite(res.residual_history.back())) throw NumericalError("two_level_solve: residual diverged");
    }
    return res;
}

TwoLevelResult two_level_solve(const SparseMatrixCSR& a, std::span<const double> b, const TwoLevelOptions& opt) {
    const auto s_hat = soc_classic(a, opt.tau);
    auto cf = cf_split_greedy(s_hat);
    auto p = direct_interpolation(a, s_hat, cf);
    auto res = two_level_solve(a, b, p, opt);
    res.cf = std::move(cf);
    return res;
}

std::vector<double> jacobi_residual_history(const SparseMatrixCSR& a, std::span<const double> b, double omega,
                                            std::size_t sweeps) {
    require_square(a, "jacobi_residual_history");
    const double bnorm = norm2(b);
    DenseVector x(a.n(), 0.0);
    std::vector<double> hist{relative_residual(a, b, x, bnorm)};
    for (std::size_t k = 0; k < sweeps; ++k) {
        x = kernels::gnn_jacobi(a, b, x, omega, 1);
        hist.push_back(relative_residual(a, b, x, bnorm));
    }
    return hist;
}

namespace reference {

SparseMatrixCSR soc_sa(const SparseMatrixCSR& a) {
    require_square(a, "soc_sa");
    require_nonzero_diagonal(a, "soc_sa");
    const auto d = diag(a);
    std::vector<double> s(a.nnz());
    for (Index i = 0; i < a.n(); ++i)
        for (Index k = a.row_ptr()[i]; k < a.row_ptr()[i + 1]; ++k) {
            const double v = a.values()[k];
            s[k] = (v * v) / (d[i] * d[a.col_idx()[k]]);
        }
    return a.with_values(std::move(s));
}

namespace {
std::vector<double> classic_scale(const SparseMatrixCSR& a) {
    std::vector<double> m(a.n());
    for (Index i = 0; i < a.n(); ++i) {
        bool any = false;
        double v = 0.0;
        for (Index k = a.row_ptr()[i]; k < a.row_ptr()[i + 1]; ++k) {
            if (a.col_idx()[k] == i) continue;
            v = any ? std::max(v, -a.values()[k]) : -a.values()[k];
            any = true;
        }
        if (!(v > 0.0))
            throw Error("soc_classic: row " + std::to_string(i) +
                        " has no negative off-diagonal entry, classic strength is undefined");
        m[i] = v;
    }
    return m;
}
} // namespace

SparseMatrixCSR soc_classic_measure(const SparseMatrixCSR& a) {
    const auto m = classic_scale(a);
    std::vector<double> s(a.nnz());
    for (Index i = 0; i < a.n(); ++i)
        for (Index k = a.row_ptr()[i]; k < a.row_ptr()[i + 1]; ++k) s[k] = -a.values()[k] / m[i];
    return a.with_values(std::move(s));
}

SparseMatrixCSR soc_classic(const SparseMatrixCSR& a, double tau) {
    auto s = soc_classic_measure(a);
    std::vector<double> h(s.nnz());
    for (Index k = 0; k < s.nnz(); ++k) h[k] = s.values()[k] - tau > 0.0 ? 1.0 : 0.0;
    return s.with_values(std::move(h));
}

SparseMatrixCSR soc_abs(const SparseMatrixCSR& a, double theta) {
    std::vector<double> mask(a.nnz(), 0.0);
    for (Index i = 0; i < a.n(); ++i) {
        double m = 0.0;
        for (Index k = a.row_ptr()[i]; k < a.row_ptr()[i + 1]; ++k)
            if (a.col_idx()[k] != i) m = std::max(m, std::abs(a.values()[k]));
        if (m == 0.0) continue;
        for (Index k = a.row_ptr()[i]; k < a.row_ptr()[i + 1]; ++k)
            if (a.col_idx()[k] != i && std::abs(a.values()[k]) >= theta * m) mask[k] = 1.0;
    }
    return a.with_values(std::move(mask));
}

SparseMatrixCSR direct_interpolation(const SparseMatrixCSR& a, const SparseMatrixCSR& s_hat, const CFPartition& cf) {
    require_square(a, "direct_interpolation");
    check_partition(a, cf, "direct_interpolation");
    require_nonzero_diagonal(a, "direct_interpolation");
    const auto s = strength_on_pattern(a, s_hat);
    const auto d = diag(a);
    std::vector<double> p(a.nnz(), 0.0), mask(a.nnz(), 0.0);
    for (Index i = 0; i < a.n(); ++i) {
        if (cf.is_coarse(i)) continue;
        double row_sum = 0.0, coarse_sum = 0.0;
        for (Index k = a.row_ptr()[i]; k < a.row_ptr()[i + 1]; ++k) {
            const Index j = a.col_idx()[k];
            if (j == i) continue;
            const double c = cf.is_coarse(j) ? 1.0 : 0.0;
            row_sum += a.values()[k];
            coarse_sum += a.values()[k] * c * s[k];
        }
        if (coarse_sum == 0.0) no_strong_coarse(i);
        const double alpha = row_sum / (d[i] * coarse_sum);
        for (Index k = a.row_ptr()[i]; k < a.row_ptr()[i + 1]; ++k) {
            const Index j = a.col_idx()[k];
            mask[k] = (cf.is_coarse(j) ? 1.0 : 0.0) * s[k];
            p[k] = (1.0 - 0.0) * (-a.values()[k] * alpha) * mask[k];
        }
    }
    return finish_prolongation(a, cf, p, mask);
}

} // namespace reference

} // namespace gnnla::amg
