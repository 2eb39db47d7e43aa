#include "gnnla/kernels.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "gnnla/error.hpp"

namespace gnnla::kernels {

using graph_net::AttrTable;
using graph_net::AttributedGraph;
using graph_net::Aggregator;
using graph_net::GNLayerSpec;
using graph_net::Reducer;

namespace {

void require_square(const SparseMatrixCSR& a, const char* who) {
    if (!a.is_square()) throw Error(std::string(who) + ": matrix must be square");
}

void require_len(std::span<const double> v, Index n, const char* who, const char* what) {
    if (v.size() != n)
        throw Error(std::string(who) + ": " + what + " has length " + std::to_string(v.size()) + ", expected " +
                    std::to_string(n));
}

DenseVector nonzero_diagonal(const SparseMatrixCSR& a, const char* who) {
    auto d = diag(a);
    for (Index i = 0; i < d.size(); ++i)
        if (d[i] == 0.0) throw NumericalError(std::string(who) + ": zero diagonal entry in row " + std::to_string(i));
    return d;
}

// Rebuilds vertex attributes column-wise.
AttrTable columns(std::initializer_list<std::span<const double>> cols) {
    const Index n = cols.begin()->size();
    AttrTable t(n, cols.size());
    Index j = 0;
    for (auto c : cols) {
        for (Index i = 0; i < n; ++i) t(i, j) = c[i];
        ++j;
    }
    return t;
}

void validate_chebyshev_bounds(double lmin, double lmax) {
    if (!std::isfinite(lmin) || !std::isfinite(lmax)) throw Error("chebyshev: eigenvalue bounds must be finite");
    if (lmin <= 0.0 || lmax <= 0.0) throw Error("chebyshev: eigenvalue bounds must be positive");
    if (lmin >= lmax) throw Error("chebyshev: lambda_min must be strictly less than lambda_max");
}

} // namespace

namespace layers {

namespace {

// Edge update for layers that are applied repeatedly: keeps A_ij in column 0 and puts the
// message A_ij * v_src[k] in column 1.
graph_net::EdgeFn carry_product(Index k) {
    return [k](auto e, auto vs, auto, auto, auto out) {
        out[0] = e[0];
        out[1] = e[0] * vs[k];
    };
}

} // namespace

GNLayerSpec spmv_self_edges() {
    GNLayerSpec l;
    l.edge_in_width = 1;
    l.phi_e = [](auto e, auto vs, auto, auto, auto out) { out[0] = e[0] * vs[0]; };
    l.edge_out_width = 1;
    l.rho_ev = Aggregator::of({Reducer::sum});
    l.phi_v = [](auto, auto ebar, auto, auto out) { out[0] = ebar[0]; };
    l.vertex_out_width = 1;
    return l;
}

GNLayerSpec spmv_no_self_edges() {
    // vertex attrs [x_i, A_ii]
    GNLayerSpec l;
    l.edge_in_width = 1;
    l.vertex_in_width = 2;
    l.phi_e = [](auto e, auto vs, auto, auto, auto out) { out[0] = e[0] * vs[0]; };
    l.edge_out_width = 1;
    l.rho_ev = Aggregator::of({Reducer::sum});
    l.phi_v = [](auto v, auto ebar, auto, auto out) { out[0] = ebar[0] + v[1] * v[0]; };
    l.vertex_out_width = 1;
    return l;
}

GNLayerSpec weighted_norm() {
    GNLayerSpec l;
    l.edge_in_width = 1;
    l.vertex_in_width = 1;
    l.phi_e = [](auto e, auto vs, auto, auto, auto out) { out[0] = e[0] * vs[0]; };
    l.edge_out_width = 1;
    l.rho_ev = Aggregator::of({Reducer::sum});
    l.phi_v = [](auto v, auto ebar, auto, auto out) { out[0] = v[0] * ebar[0]; };
    l.vertex_out_width = 1;
    l.rho_vg = Aggregator::of({Reducer::sum});
    l.phi_g = [](auto, auto, auto vagg, auto out) {
        if (vagg[0] < 0.0) throw NumericalError("weighted norm: x^T W x is negative; W is not positive semidefinite");
        out[0] = std::sqrt(vagg[0]);
    };
    l.global_out_width = 1;
    return l;
}

GNLayerSpec jacobi() {
    GNLayerSpec l;
    l.vertex_in_width = 3;
    l.global_in_width = 1;
    l.phi_e = carry_product(2);
    l.edge_out_width = 2;
    l.rho_ev = Aggregator::of({Reducer::sum});
    l.phi_v = [](auto v, auto ebar, auto g, auto out) {
        out[0] = v[0];
        out[1] = v[1];
        out[2] = v[2] + g[0] * (v[1] - ebar[1]) / v[0];
    };
    l.vertex_out_width = 3;
    return l;
}

GNLayerSpec chebyshev_iterate() {
    GNLayerSpec l;
    l.vertex_in_width = 3;
    l.phi_v = [](auto v, auto, auto, auto out) {
        out[0] = v[0] + v[2];
        out[1] = v[1];
        out[2] = v[2];
    };
    l.vertex_out_width = 3;
    return l;
}

GNLayerSpec chebyshev_residual() {
    GNLayerSpec l;
    l.vertex_in_width = 3;
    l.global_in_width = 4;
    l.phi_e = carry_product(2);
    l.edge_out_width = 2;
    l.rho_ev = Aggregator::of({Reducer::sum});
    l.phi_v = [](auto v, auto ebar, auto, auto out) {
        out[0] = v[0];
        out[1] = v[1] - ebar[1];
        out[2] = v[2];
    };
    l.vertex_out_width = 3;
    // g = [delta, sigma, rho, rho_prior]; the two assignments happen in this order
    l.phi_g = [](auto g, auto, auto, auto out) {
        out[0] = g[0];
        out[1] = g[1];
        out[3] = g[2];
        out[2] = 1.0 / (2.0 * g[1] - out[3]);
    };
    l.global_out_width = 4;
    return l;
}

GNLayerSpec chebyshev_direction() {
    GNLayerSpec l;
    l.vertex_in_width = 3;
    l.global_in_width = 4;
    l.phi_v = [](auto v, auto, auto g, auto out) {
        const double delta = g[0], rho = g[2], rho_prior = g[3];
        out[0] = v[0];
        out[1] = v[1];
        out[2] = rho * rho_prior * v[2] + (2.0 * rho / delta) * v[1];
    };
    l.vertex_out_width = 3;
    return l;
}

GNLayerSpec power_matvec() {
    GNLayerSpec l;
    l.vertex_in_width = 2;
    l.phi_e = carry_product(0);
    l.edge_out_width = 2;
    l.rho_ev = Aggregator::of({Reducer::sum});
    l.phi_v = [](auto v, auto ebar, auto, auto out) {
        out[0] = ebar[1];
        out[1] = v[1];
    };
    l.vertex_out_width = 2;
    return l;
}

GNLayerSpec power_norm() {
    GNLayerSpec l;
    l.vertex_in_width = 2;
    l.global_in_width = 3;
    l.phi_v = [](auto v, auto, auto, auto out) {
        out[0] = v[0];
        out[1] = v[0] * v[0];
    };
    l.vertex_out_width = 2;
    l.rho_vg = Aggregator::of({Reducer::sum});
    l.phi_g = [](auto g, auto, auto vagg, auto out) {
        out[0] = std::sqrt(vagg[1]);
        out[1] = g[1];
        out[2] = g[2];
        if (out[0] == 0.0) throw NumericalError("power method: iterate collapsed to zero (start vector in the null space)");
    };
    l.global_out_width = 3;
    return l;
}

GNLayerSpec power_normalize() {
    GNLayerSpec l;
    l.vertex_in_width = 2;
    l.global_in_width = 3;
    l.phi_v = [](auto v, auto, auto g, auto out) {
        out[0] = v[0] / g[0];
        out[1] = v[1];
    };
    l.vertex_out_width = 2;
    return l;
}

GNLayerSpec rayleigh_numerator() {
    GNLayerSpec l;
    l.vertex_in_width = 2;
    l.global_in_width = 3;
    l.phi_e = carry_product(0);
    l.edge_out_width = 2;
    l.rho_ev = Aggregator::of({Reducer::sum});
    l.phi_v = [](auto v, auto ebar, auto, auto out) {
        out[0] = v[0];
        out[1] = v[0] * ebar[1];
    };
    l.vertex_out_width = 2;
    l.rho_vg = Aggregator::of({Reducer::sum});
    l.phi_g = [](auto g, auto, auto vagg, auto out) {
        out[0] = g[0];
        out[1] = vagg[1];
        out[2] = g[2];
    };
    l.global_out_width = 3;
    return l;
}

GNLayerSpec rayleigh_quotient() {
    GNLayerSpec l;
    l.vertex_in_width = 2;
    l.global_in_width = 3;
    l.phi_v = [](auto v, auto, auto, auto out) {
        out[0] = v[0];
        out[1] = v[0] * v[0];
    };
    l.vertex_out_width = 2;
    l.rho_vg = Aggregator::of({Reducer::sum});
    l.phi_g = [](auto g, auto, auto vagg, auto out) {
        out[0] = g[0];
        out[1] = g[1];
        out[2] = g[1] / vagg[1];
    };
    l.global_out_width = 3;
    return l;
}

} // namespace layers

DenseVector gnn_spmv(const SparseMatrixCSR& a, std::span<const double> x, bool self_edges) {
    require_square(a, "gnn_spmv");
    require_len(x, a.n(), "gnn_spmv", "x");
    require_finite(x, "gnn_spmv: x");
    auto g = graph_net::matrix_to_graph(a, self_edges);
    if (self_edges) {
        g = g.with_attrs(g.edge_attrs(), AttrTable::column(x), {});
        return graph_net::apply_layer(g, layers::spmv_self_edges()).vertex_attrs().col(0);
    }
    auto d = g.vertex_attrs().col(0);
    g = g.with_attrs(g.edge_attrs(), columns({x, d}), {});
    return graph_net::apply_layer(g, layers::spmv_no_self_edges()).vertex_attrs().col(0);
}

double gnn_weighted_norm(const SparseMatrixCSR& w, std::span<const double> x) {
    require_square(w, "gnn_weighted_norm");
    require_len(x, w.n(), "gnn_weighted_norm", "x");
    require_finite(x, "gnn_weighted_norm: x");
    auto g = graph_net::matrix_to_graph(w, true);
    g = g.with_attrs(g.edge_attrs(), AttrTable::column(x), {0.0});
    return graph_net::apply_layer(g, layers::weighted_norm()).global_attrs()[0];
}

DenseVector gnn_jacobi(const SparseMatrixCSR& a, std::span<const double> b, std::span<const double> x0, double omega,
                       std::size_t iters) {
    require_square(a, "gnn_jacobi");
    require_len(b, a.n(), "gnn_jacobi", "b");
    require_len(x0, a.n(), "gnn_jacobi", "x0");
    require_finite(b, "gnn_jacobi: b");
    require_finite(x0, "gnn_jacobi: x0");
    if (!std::isfinite(omega)) throw Error("gnn_jacobi: omega must be finite");
    const auto d = nonzero_diagonal(a, "gnn_jacobi");
    auto g = graph_net::matrix_to_graph(a, true);
    g = g.with_attrs(g.edge_attrs(), columns({d, b, x0}), {omega});
    const auto layer = layers::jacobi();
    for (std::size_t k = 0; k < iters; ++k) g = graph_net::apply_layer(g, layer);
    return g.vertex_attrs().col(2);
}

DenseVector gnn_chebyshev(const SparseMatrixCSR& a, std::span<const double> b, std::span<const double> x0,
                          double lambda_min, double lambda_max, std::size_t n_iter) {
    require_square(a, "gnn_chebyshev");
    require_len(b, a.n(), "gnn_chebyshev", "b");
    require_len(x0, a.n(), "gnn_chebyshev", "x0");
    require_finite(b, "gnn_chebyshev: b");
    require_finite(x0, "gnn_chebyshev: x0");
    validate_chebyshev_bounds(lambda_min, lambda_max);
    const Index n = a.n();

    const auto ax = spmv_csr(a, x0);
    DenseVector r(n), d(n);
    const double theta = (lambda_max + lambda_min) / 2.0;
    const double delta = (lambda_max - lambda_min) / 2.0;
    const double sigma = theta / delta;
    const double rho = 1.0 / sigma;
    for (Index i = 0; i < n; ++i) {
        r[i] = b[i] - ax[i];
        d[i] = (1.0 / theta) * r[i];
    }

    auto g = graph_net::matrix_to_graph(a, true);
    g = g.with_attrs(g.edge_attrs(), columns({x0, r, d}), {delta, sigma, rho, 0.0});
    const auto l1 = layers::chebyshev_iterate();
    const auto l2 = layers::chebyshev_residual();
    const auto l3 = layers::chebyshev_direction();
    for (std::size_t k = 0; k < n_iter; ++k) {
        g = graph_net::apply_layer(g, l1);
        g = graph_net::apply_layer(g, l2);
        g = graph_net::apply_layer(g, l3);
    }
    return g.vertex_attrs().col(0);
}

PowerResult gnn_power_method(const SparseMatrixCSR& a, std::span<const double> b0, std::size_t iters) {
    require_square(a, "gnn_power_method");
    require_len(b0, a.n(), "gnn_power_method", "b0");
    require_finite(b0, "gnn_power_method: b0");
    bool nonzero = false;
    for (double v : b0) nonzero = nonzero || v != 0.0;
    if (!nonzero) throw Error("gnn_power_method: start vector is zero");

    const DenseVector zeros(a.n(), 0.0);
    auto g = graph_net::matrix_to_graph(a, true);
    g = g.with_attrs(g.edge_attrs(), columns({b0, zeros}), {0.0, 0.0, 0.0});
    const auto mv = layers::power_matvec();
    const auto nrm = layers::power_norm();
    const auto nz = layers::power_normalize();
    for (std::size_t k = 0; k < iters; ++k) {
        g = graph_net::apply_layer(g, mv);
        g = graph_net::apply_layer(g, nrm);
        g = graph_net::apply_layer(g, nz);
    }
    g = graph_net::apply_layer(g, layers::rayleigh_numerator());
    g = graph_net::apply_layer(g, layers::rayleigh_quotient());
    return {g.vertex_attrs().col(0), g.global_attrs()[2]};
}

namespace reference {

DenseVector jacobi(const SparseMatrixCSR& a, std::span<const double> b, std::span<const double> x0, double omega,
                   std::size_t iters) {
    require_square(a, "jacobi");
    require_len(b, a.n(), "jacobi", "b");
    require_len(x0, a.n(), "jacobi", "x0");
    const auto d = nonzero_diagonal(a, "jacobi");
    DenseVector x(x0.begin(), x0.end());
    for (std::size_t k = 0; k < iters; ++k) {
        const auto ax = spmv_csr(a, x);
        for (Index i = 0; i < x.size(); ++i) x[i] = x[i] + omega * (b[i] - ax[i]) / d[i];
    }
    return x;
}

DenseVector chebyshev(const SparseMatrixCSR& a, std::span<const double> b, std::span<const double> x0,
                      double lambda_min, double lambda_max, std::size_t n_iter) {
    require_square(a, "chebyshev");
    require_len(b, a.n(), "chebyshev", "b");
    require_len(x0, a.n(), "chebyshev", "x0");
    validate_chebyshev_bounds(lambda_min, lambda_max);
    const Index n = a.n();
    DenseVector x(x0.begin(), x0.end());
    auto r = spmv_csr(a, x);
    for (Index i = 0; i < n; ++i) r[i] = b[i] - r[i];
    const double theta = (lambda_max + lambda_min) / 2.0;
    const double delta = (lambda_max - lambda_min) / 2.0;
    const double sigma = theta / delta;
    double rho = 1.0 / sigma;
    DenseVector d(n);
    for (Index i = 0; i < n; ++i) d[i] = (1.0 / theta) * r[i];
    for (std::size_t k = 0; k < n_iter; ++k) {
        for (Index i = 0; i < n; ++i) x[i] = x[i] + d[i];
        const auto ad = spmv_csr(a, d);
        for (Index i = 0; i < n; ++i) r[i] = r[i] - ad[i];
        const double rho_prior = rho;
        rho = 1.0 / (2.0 * sigma - rho);
        for (Index i = 0; i < n; ++i) d[i] = rho * rho_prior * d[i] + (2.0 * rho / delta) * r[i];
    }
    return x;
}

PowerResult power_method(const SparseMatrixCSR& a, std::span<const double> b0, std::size_t iters) {
    require_square(a, "power_method");
    require_len(b0, a.n(), "power_method", "b0");
    DenseVector b(b0.begin(), b0.end());
    for (std::size_t k = 0; k < iters; ++k) {
        b = spmv_csr(a, b);
        double s = 0.0;
        for (double v : b) s += v * v;
        const double h = std::sqrt(s);
        if (h == 0.0) throw NumericalError("power method: iterate collapsed to zero (start vector in the null space)");
        for (double& v : b) v /= h;
    }
    const auto ab = spmv_csr(a, b);
    double num = 0.0, den = 0.0;
    for (Index i = 0; i < b.size(); ++i) {
        num += b[i] * ab[i];
        den += b[i] * b[i];
    }
    return {b, num / den};
}

double weighted_norm(const SparseMatrixCSR& w, std::span<const double> x) {
    require_square(w, "weighted_norm");
    require_len(x, w.n(), "weighted_norm", "x");
    const auto wx = spmv_csr(w, x);
    double s = 0.0;
    for (Index i = 0; i < wx.size(); ++i) s += x[i] * wx[i];
    if (s < 0.0) throw NumericalError("weighted norm: x^T W x is negative; W is not positive semidefinite");
    return std::sqrt(s);
}

} // namespace reference

} // namespace gnnla::kernels
