#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "gnnla/sparse.hpp"

namespace gnnla::graph_net {

/// Dense row-major table: one row of `width` attributes per entity.
class AttrTable {
public:
    AttrTable() = default;
    AttrTable(Index rows, Index width) : rows_(rows), width_(width), data_(rows * width, 0.0) {}
    AttrTable(Index rows, Index width, std::vector<double> data);

    /// Single-column table from a vector.
    static AttrTable column(std::span<const double> values);

    Index rows() const { return rows_; }
    Index width() const { return width_; }
    std::span<const double> row(Index i) const { return {data_.data() + i * width_, width_}; }
    std::span<double> row(Index i) { return {data_.data() + i * width_, width_}; }
    double operator()(Index i, Index j) const { return data_[i * width_ + j]; }
    double& operator()(Index i, Index j) { return data_[i * width_ + j]; }
    std::span<const double> data() const { return data_; }

    /// Copy of one column.
    std::vector<double> col(Index j) const;
    /// Horizontal concatenation (equal row counts).
    static AttrTable hcat(const AttrTable& a, const AttrTable& b);

    friend bool operator==(const AttrTable&, const AttrTable&) = default;

private:
    Index rows_ = 0;
    Index width_ = 0;
    std::vector<double> data_;
};

struct Edge {
    Index src;
    Index dst;
    friend bool operator==(const Edge&, const Edge&) = default;
};

/// Directed graph with edge, vertex, and global attributes.
///
/// Edges are kept sorted by (dst, src); the incoming edges of vertex k are the contiguous
/// range [in_begin(k), in_end(k)). Construction sorts edges (and their attribute rows) into
/// this order, so reductions always run in the same sequence.
class AttributedGraph {
public:
    AttributedGraph() = default;
    AttributedGraph(Index num_vertices, std::vector<Edge> edges, AttrTable edge_attrs, AttrTable vertex_attrs,
                    std::vector<double> global_attrs);

    Index num_vertices() const { return num_vertices_; }
    Index num_edges() const { return edges_.size(); }
    std::span<const Edge> edges() const { return edges_; }
    const Edge& edge(Index k) const { return edges_[k]; }
    Index in_begin(Index v) const { return in_ptr_[v]; }
    Index in_end(Index v) const { return in_ptr_[v + 1]; }
    /// Offsets of incoming-edge segments, length num_vertices + 1.
    std::span<const Index> in_offsets() const { return in_ptr_; }

    const AttrTable& edge_attrs() const { return edge_attrs_; }
    const AttrTable& vertex_attrs() const { return vertex_attrs_; }
    std::span<const double> global_attrs() const { return global_attrs_; }

    /// Same topology, new attributes (row counts must match).
    AttributedGraph with_attrs(AttrTable edge_attrs, AttrTable vertex_attrs, std::vector<double> global_attrs) const;

    friend bool operator==(const AttributedGraph&, const AttributedGraph&) = default;

private:
    Index num_vertices_ = 0;
    std::vector<Edge> edges_;
    std::vector<Index> in_ptr_{0};
    AttrTable edge_attrs_;
    AttrTable vertex_attrs_;
    std::vector<double> global_attrs_;
};

enum class Reducer { sum, mean, min, max };

/// The set of incoming edges of one vertex (or all edges for edge-to-global aggregation).
struct EdgeSet {
    const AttributedGraph& graph;
    const AttrTable& attrs; // updated edge attributes
    Index begin;
    Index end;
    Index vertex; // receiving vertex; num_vertices() for the global set
};

using CustomReducer = std::function<void(const EdgeSet&, std::span<double> out)>;

/// Aggregation function. A list of built-in reducers concatenates their outputs in list
/// order (so [min, mean, sum, max] over width w gives 4w values). A custom reducer declares
/// its own output width. Reducing an empty set gives zeros for every built-in reducer.
struct Aggregator {
    std::vector<Reducer> reducers;
    CustomReducer custom;
    Index custom_width = 0;

    static Aggregator none() { return {}; }
    static Aggregator of(std::vector<Reducer> r) { return {std::move(r), nullptr, 0}; }
    static Aggregator make_custom(CustomReducer fn, Index width) { return {{}, std::move(fn), width}; }

    bool empty() const { return reducers.empty() && !custom; }
    Index output_width(Index input_width) const;
};

/// Reduces rows [begin, end) of a table with the given reducer list into out.
void reduce_rows(const AttrTable& table, Index begin, Index end, std::span<const Reducer> reducers,
                 std::span<double> out);

using EdgeFn = std::function<void(std::span<const double> e, std::span<const double> v_src,
                                  std::span<const double> v_dst, std::span<const double> g, std::span<double> out)>;
using VertexFn = std::function<void(std::span<const double> v, std::span<const double> e_bar,
                                    std::span<const double> g, std::span<double> out)>;
using GlobalFn = std::function<void(std::span<const double> g, std::span<const double> e_agg,
                                    std::span<const double> v_agg, std::span<double> out)>;

/// One message-passing layer: three update functions and three aggregators.
/// A null update function is the identity on that attribute set. Declared input widths
/// are checked against the graph when set (npos = unchecked).
struct GNLayerSpec {
    static constexpr Index npos = static_cast<Index>(-1);

    EdgeFn phi_e;
    Index edge_out_width = npos;
    VertexFn phi_v;
    Index vertex_out_width = npos;
    GlobalFn phi_g;
    Index global_out_width = npos;

    Aggregator rho_ev;
    Aggregator rho_eg;
    Aggregator rho_vg;

    Index edge_in_width = npos;
    Index vertex_in_width = npos;
    Index global_in_width = npos;
};

/// Executes one layer:
///   1. every edge: e' = phi_e(e, v_src, v_dst, g) using the input vertex attributes;
///   2. every vertex k: e_bar = rho_ev(e' of edges ending at k); v' = phi_v(v_k, e_bar, g);
///   3. g' = phi_g(g, rho_eg(E'), rho_vg(V')).
/// Topology is unchanged. Non-finite update outputs raise NumericalError naming the entity.
AttributedGraph apply_layer(const AttributedGraph& graph, const GNLayerSpec& layer);

/// Per-vertex aggregation of the given edge attributes over incoming edges.
AttrTable aggregate_incoming(const AttributedGraph& graph, const AttrTable& edge_attrs, const Aggregator& reducer);

/// Each stored A_ij becomes edge (src = j, dst = i) with attribute A_ij. Vertex attributes
/// start empty (width 0) unless self_edges is false, in which case the diagonal is moved to
/// a one-column vertex table (missing diagonal entries give 0) and no self-edges are created.
AttributedGraph matrix_to_graph(const SparseMatrixCSR& a, bool self_edges);

/// Inverse of matrix_to_graph on the edge set: entry (dst, src) = edge_attrs(k, attr_column).
/// Throws on duplicate (src, dst) pairs or a missing column.
SparseMatrixCSR graph_to_matrix(const AttributedGraph& graph, Index attr_column);

} // namespace gnnla::graph_net
