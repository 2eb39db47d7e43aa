#pragma once

#include <functional>
#include <vector>

#include "gnnla/autodiff.hpp"
#include "gnnla/graph_net.hpp"

namespace gnnla::graph_net {

/// Index arrays of a graph in canonical edge order, for whole-tensor execution.
struct Topology {
    std::size_t num_vertices = 0;
    std::vector<std::size_t> src;
    std::vector<std::size_t> dst;
    std::vector<std::size_t> in_offsets; // length num_vertices + 1

    static Topology of(const AttributedGraph& graph);
    std::size_t num_edges() const { return src.size(); }
};

/// Attributes held on a tape: edges (N_e, n_e), vertices (N_v, n_v), globals (1, n_g).
struct TapedAttrs {
    ad::Var edges;
    ad::Var vertices;
    ad::Var global;
};

/// Layer whose update functions act on all entities at once. phi_e receives row-aligned
/// tensors (edge attrs, source vertex attrs, destination vertex attrs, globals repeated per
/// edge) and must act row by row; likewise phi_v. Used for trained update functions, where
/// the per-entity executor would put millions of scalar nodes on the tape.
struct TapedLayer {
    std::function<ad::Var(ad::Var e, ad::Var v_src, ad::Var v_dst, ad::Var g)> phi_e;
    std::vector<ad::Reduce> rho_ev;
    std::function<ad::Var(ad::Var v, ad::Var e_bar, ad::Var g)> phi_v;
    std::vector<ad::Reduce> rho_eg;
    std::vector<ad::Reduce> rho_vg;
    std::function<ad::Var(ad::Var g, ad::Var e_agg, ad::Var v_agg)> phi_g;
};

/// Same schedule as apply_layer: edges, then per-vertex aggregation and vertex update, then
/// the global update. Null update functions leave that attribute set unchanged.
TapedAttrs apply_layer(const Topology& topo, const TapedAttrs& in, const TapedLayer& layer);

/// Concatenated [r_1, r_2, ...] per-vertex reductions of incoming edge rows.
ad::Var aggregate_incoming(const Topology& topo, ad::Var edge_attrs, const std::vector<ad::Reduce>& reducers);

} // namespace gnnla::graph_net
