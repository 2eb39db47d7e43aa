#include "gnnla/graph_net_taped.hpp"

#include "gnnla/error.hpp"

namespace gnnla::graph_net {

Topology Topology::of(const AttributedGraph& graph) {
    Topology t;
    t.num_vertices = graph.num_vertices();
    t.src.reserve(graph.num_edges());
    t.dst.reserve(graph.num_edges());
    for (const auto& e : graph.edges()) {
        t.src.push_back(e.src);
        t.dst.push_back(e.dst);
    }
    t.in_offsets.assign(graph.in_offsets().begin(), graph.in_offsets().end());
    return t;
}

ad::Var aggregate_incoming(const Topology& topo, ad::Var edge_attrs, const std::vector<ad::Reduce>& reducers) {
    if (reducers.empty()) throw Error("aggregate_incoming: no reducers");
    std::vector<ad::Var> parts;
    parts.reserve(reducers.size());
    for (auto r : reducers) parts.push_back(ad::segment_reduce(edge_attrs, topo.in_offsets, r));
    return parts.size() == 1 ? parts[0] : ad::concat_cols(parts);
}

namespace {

ad::Var reduce_all(ad::Var x, const std::vector<ad::Reduce>& reducers) {
    if (reducers.empty()) return x.tape->constant(ad::Tensor(1, 0));
    const std::size_t offs[2] = {0, static_cast<std::size_t>(x.rows())};
    std::vector<ad::Var> parts;
    for (auto r : reducers) parts.push_back(ad::segment_reduce(x, offs, r));
    return parts.size() == 1 ? parts[0] : ad::concat_cols(parts);
}

} // namespace

TapedAttrs apply_layer(const Topology& topo, const TapedAttrs& in, const TapedLayer& layer) {
    if (static_cast<std::size_t>(in.edges.rows()) != topo.num_edges())
        throw Error("apply_layer: edge attribute rows do not match the topology");
    if (static_cast<std::size_t>(in.vertices.rows()) != topo.num_vertices)
        throw Error("apply_layer: vertex attribute rows do not match the topology");
    if (in.global.rows() != 1) throw Error("apply_layer: global attributes must be a single row");

    TapedAttrs out = in;
    if (layer.phi_e) {
        auto vs = ad::gather_rows(in.vertices, topo.src);
        auto vd = ad::gather_rows(in.vertices, topo.dst);
        auto ge = ad::repeat_rows(in.global, topo.num_edges());
        out.edges = layer.phi_e(in.edges, vs, vd, ge);
        if (static_cast<std::size_t>(out.edges.rows()) != topo.num_edges())
            throw Error("apply_layer: phi_e changed the edge count");
    }
    if (layer.phi_v) {
        auto ebar = aggregate_incoming(topo, out.edges, layer.rho_ev);
        auto gv = ad::repeat_rows(in.global, topo.num_vertices);
        out.vertices = layer.phi_v(in.vertices, ebar, gv);
        if (static_cast<std::size_t>(out.vertices.rows()) != topo.num_vertices)
            throw Error("apply_layer: phi_v changed the vertex count");
    }
    if (layer.phi_g) {
        auto e_agg = reduce_all(out.edges, layer.rho_eg);
        auto v_agg = reduce_all(out.vertices, layer.rho_vg);
        out.global = layer.phi_g(in.global, e_agg, v_agg);
    }
    return out;
}

} // namespace gnnla::graph_net
