#include "gnnla/graph_net.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gnnla/error.hpp"

namespace gnnla::graph_net {

AttrTable::AttrTable(Index rows, Index width, std::vector<double> data)
    : rows_(rows), width_(width), data_(std::move(data)) {
    if (data_.size() != rows_ * width_) throw Error("AttrTable: data size does not match rows*width");
}

AttrTable AttrTable::column(std::span<const double> values) {
    return AttrTable(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

std::vector<double> AttrTable::col(Index j) const {
    if (j >= width_) throw Error("AttrTable::col: column out of range");
    std::vector<double> out(rows_);
    for (Index i = 0; i < rows_; ++i) out[i] = (*this)(i, j);
    return out;
}

AttrTable AttrTable::hcat(const AttrTable& a, const AttrTable& b) {
    if (a.rows() != b.rows()) throw Error("AttrTable::hcat: row count mismatch");
    AttrTable out(a.rows(), a.width() + b.width());
    for (Index i = 0; i < a.rows(); ++i) {
        auto r = out.row(i);
        std::copy(a.row(i).begin(), a.row(i).end(), r.begin());
        std::copy(b.row(i).begin(), b.row(i).end(), r.begin() + static_cast<std::ptrdiff_t>(a.width()));
    }
    return out;
}

AttributedGraph::AttributedGraph(Index num_vertices, std::vector<Edge> edges, AttrTable edge_attrs,
                                 AttrTable vertex_attrs, std::vector<double> global_attrs)
    : num_vertices_(num_vertices), global_attrs_(std::move(global_attrs)) {
    if (edge_attrs.rows() != edges.size())
        throw Error("AttributedGraph: " + std::to_string(edge_attrs.rows()) + " edge attribute rows for " +
                    std::to_string(edges.size()) + " edges");
    if (vertex_attrs.rows() != num_vertices)
        throw Error("AttributedGraph: " + std::to_string(vertex_attrs.rows()) + " vertex attribute rows for " +
                    std::to_string(num_vertices) + " vertices");
    for (std::size_t k = 0; k < edges.size(); ++k) {
        if (edges[k].src >= num_vertices || edges[k].dst >= num_vertices)
            throw Error("AttributedGraph: edge " + std::to_string(k) + " references a missing vertex");
    }
    std::vector<Index> order(edges.size());
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
        return edges[a].dst != edges[b].dst ? edges[a].dst < edges[b].dst : edges[a].src < edges[b].src;
    });
    const bool sorted = std::is_sorted(order.begin(), order.end());
    if (sorted) {
        edges_ = std::move(edges);
        edge_attrs_ = std::move(edge_attrs);
    } else {
        edges_.resize(order.size());
        edge_attrs_ = AttrTable(order.size(), edge_attrs.width());
        for (std::size_t k = 0; k < order.size(); ++k) {
            edges_[k] = edges[order[k]];
            const auto src = edge_attrs.row(order[k]);
            std::copy(src.begin(), src.end(), edge_attrs_.row(k).begin());
        }
    }
    vertex_attrs_ = std::move(vertex_attrs);

    in_ptr_.assign(num_vertices_ + 1, 0);
    for (const auto& e : edges_) ++in_ptr_[e.dst + 1];
    for (Index v = 0; v < num_vertices_; ++v) in_ptr_[v + 1] += in_ptr_[v];
}

AttributedGraph AttributedGraph::with_attrs(AttrTable edge_attrs, AttrTable vertex_attrs,
                                            std::vector<double> global_attrs) const {
    if (edge_attrs.rows() != edges_.size()) throw Error("with_attrs: edge attribute row count mismatch");
    if (vertex_attrs.rows() != num_vertices_) throw Error("with_attrs: vertex attribute row count mismatch");
    AttributedGraph g;
    g.num_vertices_ = num_vertices_;
    g.edges_ = edges_;
    g.in_ptr_ = in_ptr_;
    g.edge_attrs_ = std::move(edge_attrs);
    g.vertex_attrs_ = std::move(vertex_attrs);
    g.global_attrs_ = std::move(global_attrs);
    return g;
}

Index Aggregator::output_width(Index input_width) const {
    if (custom) return custom_width;
    return reducers.size() * input_width;
}

void reduce_rows(const AttrTable& table, Index begin, Index end, std::span<const Reducer> reducers,
                 std::span<double> out) {
    const Index w = table.width();
    if (out.size() != reducers.size() * w) throw Error("reduce_rows: output width mismatch");
    for (std::size_t r = 0; r < reducers.size(); ++r) {
        auto dst = out.subspan(r * w, w);
        std::fill(dst.begin(), dst.end(), 0.0);
        if (begin == end) continue;
        switch (reducers[r]) {
        case Reducer::sum:
        case Reducer::mean:
            for (Index k = begin; k < end; ++k) {
                const auto row = table.row(k);
                for (Index c = 0; c < w; ++c) dst[c] += row[c];
            }
            if (reducers[r] == Reducer::mean)
                for (Index c = 0; c < w; ++c) dst[c] /= static_cast<double>(end - begin);
            break;
        case Reducer::min:
        case Reducer::max: {
            const auto first = table.row(begin);
            std::copy(first.begin(), first.end(), dst.begin());
            for (Index k = begin + 1; k < end; ++k) {
                const auto row = table.row(k);
                for (Index c = 0; c < w; ++c)
                    dst[c] = reducers[r] == Reducer::max ? std::max(dst[c], row[c]) : std::min(dst[c], row[c]);
            }
            break;
        }
        }
    }
}

namespace {

void check_finite(std::span<const double> v, const char* what, Index entity) {
    for (double x : v)
        if (!std::isfinite(x))
            throw NumericalError(std::string(what) + " produced a non-finite value at index " + std::to_string(entity));
}

void check_width(Index declared, Index actual, const char* what) {
    if (declared != GNLayerSpec::npos && declared != actual)
        throw Error(std::string("apply_layer: ") + what + " width " + std::to_string(actual) + ", layer expects " +
                    std::to_string(declared));
}

void aggregate_into(const EdgeSet& set, const Aggregator& agg, std::span<double> out) {
    if (agg.custom)
        agg.custom(set, out);
    else
        reduce_rows(set.attrs, set.begin, set.end, agg.reducers, out);
}

} // namespace

AttrTable aggregate_incoming(const AttributedGraph& graph, const AttrTable& edge_attrs, const Aggregator& reducer) {
    if (edge_attrs.rows() != graph.num_edges()) throw Error("aggregate_incoming: edge attribute row count mismatch");
    const Index w = reducer.output_width(edge_attrs.width());
    AttrTable out(graph.num_vertices(), w);
    for (Index k = 0; k < graph.num_vertices(); ++k) {
        EdgeSet set{graph, edge_attrs, graph.in_begin(k), graph.in_end(k), k};
        aggregate_into(set, reducer, out.row(k));
    }
    return out;
}

AttributedGraph apply_layer(const AttributedGraph& graph, const GNLayerSpec& layer) {
    const auto& E = graph.edge_attrs();
    const auto& V = graph.vertex_attrs();
    const auto g = graph.global_attrs();
    check_width(layer.edge_in_width, E.width(), "edge attribute");
    check_width(layer.vertex_in_width, V.width(), "vertex attribute");
    check_width(layer.global_in_width, g.size(), "global attribute");

    // 1. edge updates read the original vertex attributes
    AttrTable E2;
    if (layer.phi_e) {
        if (layer.edge_out_width == GNLayerSpec::npos) throw Error("apply_layer: phi_e needs an output width");
        E2 = AttrTable(graph.num_edges(), layer.edge_out_width);
        for (Index k = 0; k < graph.num_edges(); ++k) {
            const auto& e = graph.edge(k);
            layer.phi_e(E.row(k), V.row(e.src), V.row(e.dst), g, E2.row(k));
            check_finite(E2.row(k), "phi_e", k);
        }
    } else {
        E2 = E;
    }

    // 2. per-vertex aggregation of updated incoming edges, then vertex update
    AttrTable V2;
    if (layer.phi_v) {
        if (layer.vertex_out_width == GNLayerSpec::npos) throw Error("apply_layer: phi_v needs an output width");
        V2 = AttrTable(graph.num_vertices(), layer.vertex_out_width);
        std::vector<double> ebar(layer.rho_ev.output_width(E2.width()));
        for (Index k = 0; k < graph.num_vertices(); ++k) {
            if (!layer.rho_ev.empty()) {
                EdgeSet set{graph, E2, graph.in_begin(k), graph.in_end(k), k};
                aggregate_into(set, layer.rho_ev, ebar);
            }
            layer.phi_v(V.row(k), ebar, g, V2.row(k));
            check_finite(V2.row(k), "phi_v", k);
        }
    } else {
        V2 = V;
    }

    // 3. global update from aggregates of the updated edges and vertices
    std::vector<double> g2;
    if (layer.phi_g) {
        if (layer.global_out_width == GNLayerSpec::npos) throw Error("apply_layer: phi_g needs an output width");
        std::vector<double> e_agg(layer.rho_eg.output_width(E2.width()));
        std::vector<double> v_agg(layer.rho_vg.output_width(V2.width()));
        if (!layer.rho_eg.empty()) {
            EdgeSet set{graph, E2, 0, graph.num_edges(), graph.num_vertices()};
            aggregate_into(set, layer.rho_eg, e_agg);
        }
        if (!layer.rho_vg.empty()) {
            if (layer.rho_vg.custom) throw Error("apply_layer: custom vertex-to-global reducers are not supported");
            reduce_rows(V2, 0, V2.rows(), layer.rho_vg.reducers, v_agg);
        }
        g2.assign(layer.global_out_width, 0.0);
        layer.phi_g(g, e_agg, v_agg, g2);
        check_finite(g2, "phi_g", 0);
    } else {
        g2.assign(g.begin(), g.end());
    }

    return graph.with_attrs(std::move(E2), std::move(V2), std::move(g2));
}

AttributedGraph matrix_to_graph(const SparseMatrixCSR& a, bool self_edges) {
    if (!a.is_square()) throw Error("matrix_to_graph: matrix must be square");
    const Index n = a.n();
    std::vector<Edge> edges;
    std::vector<double> vals;
    edges.reserve(a.nnz());
    vals.reserve(a.nnz());
    std::vector<double> diagonal(n, 0.0);
    // CSR row i is exactly the incoming edge set of vertex i, already in (dst, src) order
    for (Index i = 0; i < n; ++i) {
        const auto cols = a.row_cols(i);
        const auto v = a.row_values(i);
        for (std::size_t k = 0; k < cols.size(); ++k) {
            if (cols[k] == i && !self_edges) {
                diagonal[i] = v[k];
                continue;
            }
            edges.push_back({cols[k], i});
            vals.push_back(v[k]);
        }
    }
    const Index ne = edges.size();
    AttrTable vattrs = self_edges ? AttrTable(n, 0) : AttrTable::column(diagonal);
    return AttributedGraph(n, std::move(edges), AttrTable(ne, 1, std::move(vals)), std::move(vattrs), {});
}

SparseMatrixCSR graph_to_matrix(const AttributedGraph& graph, Index attr_column) {
    if (attr_column >= graph.edge_attrs().width())
        throw Error("graph_to_matrix: edge attribute column " + std::to_string(attr_column) + " does not exist");
    const Index n = graph.num_vertices();
    std::vector<Index> rp(n + 1, 0), ci;
    std::vector<double> vals;
    ci.reserve(graph.num_edges());
    vals.reserve(graph.num_edges());
    for (Index k = 0; k < graph.num_edges(); ++k) {
        const auto& e = graph.edge(k);
        if (k > 0 && graph.edge(k - 1) == e)
            throw Error("graph_to_matrix: duplicate edge (" + std::to_string(e.src) + " -> " + std::to_string(e.dst) +
                        ")");
        ci.push_back(e.src);
        vals.push_back(graph.edge_attrs()(k, attr_column));
        ++rp[e.dst + 1];
    }
    for (Index i = 0; i < n; ++i) rp[i + 1] += rp[i];
    return SparseMatrixCSR(n, std::move(rp), std::move(ci), std::move(vals));
}

} // namespace gnnla::graph_net
