#include "gnnla/nn.hpp"

#include <algorithm>
#include <cmath>
#include <initializer_list>

#include <json.hpp>

#include "gnnla/error.hpp"
#include "gnnla/graph_net.hpp"
#include "gnnla/io.hpp"

namespace gnnla::nn {

using ad::Tensor;
using ad::Var;
using json = nlohmann::json;

std::string to_string(Activation a) {
    switch (a) {
    case Activation::none: return "none";
    case Activation::relu: return "relu";
    case Activation::leaky_relu: return "leaky_relu";
    }
    return "none";
}

Activation activation_from_string(const std::string& s) {
    if (s == "none") return Activation::none;
    if (s == "relu") return Activation::relu;
    if (s == "leaky_relu") return Activation::leaky_relu;
    throw Error("unknown activation '" + s + "'");
}

MLPSpec MLPSpec::chain(std::initializer_list<Index> widths, Activation hidden, Activation last, double leaky_slope) {
    if (widths.size() < 2) throw Error("MLPSpec::chain: need at least input and output widths");
    MLPSpec s;
    s.leaky_slope = leaky_slope;
    const std::vector<Index> w(widths);
    for (std::size_t k = 0; k + 1 < w.size(); ++k)
        s.layers.push_back({w[k], w[k + 1], true, k + 2 == w.size() ? last : hidden});
    return s;
}

void MLPSpec::validate() const {
    if (layers.empty()) throw Error("MLPSpec: no layers");
    for (std::size_t k = 0; k < layers.size(); ++k) {
        if (layers[k].in == 0 || layers[k].out == 0) throw Error("MLPSpec: layer " + std::to_string(k) + " has zero width");
        if (k > 0 && layers[k].in != layers[k - 1].out)
            throw Error("MLPSpec: layer " + std::to_string(k) + " input width " + std::to_string(layers[k].in) +
                        " does not chain with previous output " + std::to_string(layers[k - 1].out));
    }
}

Index MLPSpec::param_count() const {
    Index n = 0;
    for (const auto& l : layers) n += l.in * l.out + (l.bias ? l.out : 0);
    return n;
}

Index Architecture::param_count() const {
    Index n = 0;
    for (const auto& m : mlps) n += m.spec.param_count();
    return n;
}

const MLPSpec& Architecture::mlp(const std::string& name) const {
    for (const auto& m : mlps)
        if (m.name == name) return m.spec;
    throw Error("architecture '" + kind + "' has no MLP named '" + name + "'");
}

Architecture jacobi_architecture() {
    return {"jacobi", {{"phi_v", MLPSpec::chain({5, 50, 20, 1}, Activation::relu, Activation::none)}}};
}

Architecture diffusion_architecture(double slope) {
    using A = Activation;
    return {"diffusion",
            {{"encoder_e", MLPSpec::chain({3, 16, 16, 32}, A::relu, A::none, slope)},
             {"encoder_v", MLPSpec::chain({1, 16, 16, 32}, A::relu, A::none, slope)},
             {"encoder_g", MLPSpec::chain({1, 16, 16, 32}, A::relu, A::none, slope)},
             {"phi_e", MLPSpec::chain({128, 32, 32}, A::relu, A::none, slope)},
             {"phi_v", MLPSpec::chain({192, 32, 2}, A::relu, A::leaky_relu, slope)}}};
}

ParamStore::ParamStore(Architecture arch) : arch_(std::move(arch)) {
    Index off = 0;
    for (Index m = 0; m < arch_.mlps.size(); ++m) {
        const auto& spec = arch_.mlps[m].spec;
        spec.validate();
        mlp_begin_.push_back(slots_.size());
        for (Index l = 0; l < spec.layers.size(); ++l) {
            const auto& ls = spec.layers[l];
            Slot s{m, l, ls.out, ls.in, off, off + ls.out * ls.in, ls.bias};
            off = s.b_offset + (ls.bias ? ls.out : 0);
            slots_.push_back(s);
        }
    }
    mlp_begin_.push_back(slots_.size());
    values_.assign(off, 0.0);
}

ParamStore::ParamStore(Architecture arch, std::vector<double> values) : ParamStore(std::move(arch)) {
    if (values.size() != values_.size())
        throw Error("ParamStore: " + std::to_string(values.size()) + " values for an architecture with " +
                    std::to_string(values_.size()) + " parameters");
    values_ = std::move(values);
}

std::span<const ParamStore::Slot> ParamStore::slots_of(Index mlp) const {
    if (mlp + 1 >= mlp_begin_.size()) throw Error("ParamStore: MLP index out of range");
    return std::span<const Slot>(slots_).subspan(mlp_begin_[mlp], mlp_begin_[mlp + 1] - mlp_begin_[mlp]);
}

std::vector<double> init_glorot(const Architecture& arch, Rng& rng) {
    ParamStore store(arch);
    auto& v = store.values();
    for (const auto& s : store.slots()) {
        const double a = std::sqrt(6.0 / static_cast<double>(s.rows + s.cols));
        for (Index k = 0; k < s.rows * s.cols; ++k) v[s.w_offset + k] = rng.uniform(-a, a);
    }
    return v;
}

namespace {

void apply_activation(Tensor& t, Activation a, double slope) {
    if (a == Activation::relu)
        t = t.cwiseMax(0.0);
    else if (a == Activation::leaky_relu)
        t = t.unaryExpr([slope](double x) { return x > 0.0 ? x : slope * x; });
}

Var apply_activation(Var v, Activation a, double slope) {
    if (a == Activation::relu) return ad::relu(v);
    if (a == Activation::leaky_relu) return ad::leaky_relu(v, slope);
    return v;
}

} // namespace

Tensor mlp_forward(const MLPSpec& spec, std::span<const double> params, const Tensor& input) {
    spec.validate();
    if (params.size() != spec.param_count())
        throw Error("mlp_forward: " + std::to_string(params.size()) + " parameters for an MLP with " +
                    std::to_string(spec.param_count()));
    if (static_cast<Index>(input.cols()) != spec.in_width())
        throw Error("mlp_forward: input width " + std::to_string(input.cols()) + ", MLP expects " +
                    std::to_string(spec.in_width()));
    Tensor x = input;
    Index off = 0;
    for (const auto& l : spec.layers) {
        const auto rows = static_cast<Eigen::Index>(l.out), cols = static_cast<Eigen::Index>(l.in);
        Eigen::Map<const Tensor> w(params.data() + off, rows, cols);
        off += l.out * l.in;
        Tensor y(x.rows(), rows);
        y.noalias() = x * w.transpose();
        if (l.bias) {
            Eigen::Map<const Tensor> b(params.data() + off, 1, rows);
            y.rowwise() += b.row(0);
            off += l.out;
        }
        apply_activation(y, l.activation, spec.leaky_slope);
        x = std::move(y);
    }
    return x;
}

BoundParams::BoundParams(ad::Tape& tape, const ParamStore& store, bool trainable)
    : store_(&store), trainable_(trainable) {
    const auto& v = store.values();
    for (const auto& s : store.slots()) {
        const auto rows = static_cast<Eigen::Index>(s.rows), cols = static_cast<Eigen::Index>(s.cols);
        Tensor w = Eigen::Map<const Tensor>(v.data() + s.w_offset, rows, cols);
        Tensor b = s.bias ? Tensor(Eigen::Map<const Tensor>(v.data() + s.b_offset, 1, rows)) : Tensor(Tensor::Zero(1, rows));
        w_.push_back(trainable ? tape.leaf(std::move(w)) : tape.constant(std::move(w)));
        b_.push_back(trainable && s.bias ? tape.leaf(std::move(b)) : tape.constant(std::move(b)));
    }
}

std::vector<double> BoundParams::flatten(const ad::Grad& grad) const {
    if (!trainable_) throw Error("BoundParams::flatten: parameters were bound as constants");
    std::vector<double> out(store_->size(), 0.0);
    const auto slots = store_->slots();
    for (std::size_t k = 0; k < slots.size(); ++k) {
        const auto& gw = grad.of(w_[k]);
        std::copy(gw.data(), gw.data() + gw.size(), out.begin() + static_cast<std::ptrdiff_t>(slots[k].w_offset));
        if (slots[k].bias) {
            const auto& gb = grad.of(b_[k]);
            std::copy(gb.data(), gb.data() + gb.size(), out.begin() + static_cast<std::ptrdiff_t>(slots[k].b_offset));
        }
    }
    return out;
}

Var mlp_forward(const BoundParams& params, Index mlp, Var input) {
    const auto& spec = params.store().architecture().mlps.at(mlp).spec;
    if (static_cast<Index>(input.cols()) != spec.in_width())
        throw Error("mlp_forward: input width " + std::to_string(input.cols()) + ", MLP '" +
                    params.store().architecture().mlps[mlp].name + "' expects " + std::to_string(spec.in_width()));
    const auto slots = params.store().slots_of(mlp);
    Var x = input;
    for (const auto& s : slots) {
        const std::size_t k = static_cast<std::size_t>(&s - params.store().slots().data());
        x = ad::linear(x, params.weight(k), params.bias(k));
        x = apply_activation(x, spec.layers[s.layer].activation, spec.leaky_slope);
    }
    return x;
}

double param_grad_check(const ParamStore& store, const std::function<Var(const BoundParams&)>& loss, double step,
                        std::size_t max_coords, std::uint64_t seed) {
    std::vector<double> analytic;
    {
        ad::Tape tape;
        BoundParams bp(tape, store);
        analytic = bp.flatten(tape.backward(loss(bp)));
    }
    auto eval = [&](const std::vector<double>& v) {
        const ParamStore s(store.architecture(), v);
        ad::Tape tape;
        BoundParams bp(tape, s, false);
        return loss(bp).scalar();
    };
    std::vector<std::size_t> coords;
    if (max_coords == 0 || max_coords >= analytic.size()) {
        for (std::size_t k = 0; k < analytic.size(); ++k) coords.push_back(k);
    } else {
        Rng rng = Rng::derive(seed, rng_stream::test, 17);
        coords = rng.sample_without_replacement(analytic.size(), max_coords);
    }
    double gmax = 0.0;
    for (double g : analytic) gmax = std::max(gmax, std::abs(g));
    const double floor = std::max(1e-4 * gmax, 1e-12);
    // A step that straddles a ReLU kink gives a wrong difference quotient, so coordinates that
    // disagree are retried with smaller and then larger steps and keep their best agreement.
    const double ladder[4] = {1.0, 0.3, 0.1, 10.0};
    double worst = 0.0;
    std::vector<double> v = store.values();
    for (auto k : coords) {
        const double orig = v[k];
        double best = INFINITY;
        for (double scale : ladder) {
            const double h = step * scale;
            v[k] = orig + h;
            const double fp = eval(v);
            v[k] = orig - h;
            const double fm = eval(v);
            v[k] = orig;
            const double fd = (fp - fm) / (2.0 * h);
            const double denom = std::max({std::abs(analytic[k]), std::abs(fd), floor});
            best = std::min(best, std::abs(analytic[k] - fd) / denom);
            if (best < 1e-7) break;
        }
        worst = std::max(worst, best);
    }
    return worst;
}

namespace {

Index mlp_index(const Architecture& arch, const std::string& name) {
    for (Index k = 0; k < arch.mlps.size(); ++k)
        if (arch.mlps[k].name == name) return k;
    throw Error("architecture '" + arch.kind + "' has no MLP named '" + name + "'");
}

void require_kind(const ParamStore& p, const char* kind) {
    if (p.architecture().kind != kind)
        throw Error(std::string("model expects a '") + kind + "' architecture, got '" + p.architecture().kind + "'");
}

} // namespace

Tensor jacobi_features(const SparseMatrixCSR& a) {
    using graph_net::Reducer;
    if (!a.is_square()) throw Error("jacobi_features: matrix must be square");
    const auto g = graph_net::matrix_to_graph(a, false);
    const auto agg = graph_net::aggregate_incoming(
        g, g.edge_attrs(), graph_net::Aggregator::of({Reducer::min, Reducer::mean, Reducer::sum, Reducer::max}));
    Tensor f(static_cast<Eigen::Index>(a.n()), 5);
    for (Index i = 0; i < a.n(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        f(r, 0) = g.vertex_attrs()(i, 0);
        for (Index c = 0; c < 4; ++c) f(r, static_cast<Eigen::Index>(c + 1)) = agg(i, c);
    }
    return f;
}

Var jacobi_model_forward(const BoundParams& params, Var features) {
    require_kind(params.store(), "jacobi");
    return mlp_forward(params, mlp_index(params.store().architecture(), "phi_v"), features);
}

DenseVector jacobi_model_forward(const SparseMatrixCSR& a, const ParamStore& params) {
    require_kind(params, "jacobi");
    const auto& arch = params.architecture();
    const Index m = mlp_index(arch, "phi_v");
    const auto s = params.slots_of(m);
    const Index begin = s.front().w_offset;
    const Index count = arch.mlps[m].spec.param_count();
    const auto out = mlp_forward(arch.mlps[m].spec, std::span<const double>(params.values()).subspan(begin, count),
                                 jacobi_features(a));
    return DenseVector(out.data(), out.data() + out.size());
}

DiffusionInputs diffusion_inputs(const SparseMatrixCSR& a, std::span<const double> x, std::span<const double> y,
                                 double h) {
    if (!a.is_square()) throw Error("diffusion_inputs: matrix must be square");
    if (x.size() != a.n() || y.size() != a.n()) throw Error("diffusion_inputs: coordinate count mismatch");
    if (!(h > 0.0)) throw Error("diffusion_inputs: h must be positive");
    const auto g = graph_net::matrix_to_graph(a, false);
    DiffusionInputs in;
    in.topology = graph_net::Topology::of(g);
    const double period = std::round(1.0 / h);
    auto offset = [&](double from, double to) {
        double r = std::round((to - from) / h);
        if (r > period / 2.0) r -= period;
        if (r < -period / 2.0) r += period;
        return r;
    };
    in.edges.resize(static_cast<Eigen::Index>(g.num_edges()), 3);
    for (Index k = 0; k < g.num_edges(); ++k) {
        const auto& e = g.edge(k);
        const auto r = static_cast<Eigen::Index>(k);
        // edge carries c_ij for A_ij: i = dst, j = src
        in.edges(r, 0) = g.edge_attrs()(k, 0);
        in.edges(r, 1) = offset(x[e.dst], x[e.src]);
        in.edges(r, 2) = offset(y[e.dst], y[e.src]);
    }
    in.vertices.resize(static_cast<Eigen::Index>(a.n()), 1);
    for (Index i = 0; i < a.n(); ++i) in.vertices(static_cast<Eigen::Index>(i), 0) = g.vertex_attrs()(i, 0);
    in.global = Tensor::Constant(1, 1, h);
    return in;
}

Var diffusion_model_forward(const BoundParams& params, const DiffusionInputs& in) {
    require_kind(params.store(), "diffusion");
    const auto& arch = params.store().architecture();
    ad::Tape& tape = *params.weight(0).tape;
    const auto& topo = in.topology;

    // encoders act entity-wise, no message passing
    const Var e = mlp_forward(params, mlp_index(arch, "encoder_e"), tape.constant(in.edges));
    const Var v = mlp_forward(params, mlp_index(arch, "encoder_v"), tape.constant(in.vertices));
    const Var g = mlp_forward(params, mlp_index(arch, "encoder_g"), tape.constant(in.global));

    graph_net::TapedLayer layer;
    const Index ie = mlp_index(arch, "phi_e"), iv = mlp_index(arch, "phi_v");
    layer.phi_e = [&](Var ea, Var vs, Var vd, Var ga) { return mlp_forward(params, ie, ad::concat_cols({ea, vs, vd, ga})); };
    layer.rho_ev = {ad::Reduce::min, ad::Reduce::mean, ad::Reduce::sum, ad::Reduce::max};
    layer.phi_v = [&](Var va, Var eb, Var ga) { return mlp_forward(params, iv, ad::concat_cols({va, eb, ga})); };
    const auto out = graph_net::apply_layer(topo, {e, v, g}, layer);
    return out.vertices;
}

Tensor diffusion_model_forward(const DiffusionInputs& in, const ParamStore& params) {
    ad::Tape tape;
    BoundParams bound(tape, params, false);
    return diffusion_model_forward(bound, in).value();
}

void adam_step(std::vector<double>& params, std::span<const double> grads, AdamState& state, const AdamConfig& cfg) {
    if (grads.size() != params.size()) throw Error("adam_step: gradient length does not match parameters");
    if (state.m.empty()) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
    }
    if (state.m.size() != params.size()) throw Error("adam_step: optimiser state does not match parameters");
    ++state.t;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
    for (std::size_t k = 0; k < params.size(); ++k) {
        const double g = grads[k];
        state.m[k] = cfg.beta1 * state.m[k] + (1.0 - cfg.beta1) * g;
        state.v[k] = cfg.beta2 * state.v[k] + (1.0 - cfg.beta2) * g * g;
        const double mhat = state.m[k] / c1;
        const double vhat = state.v[k] / c2;
        params[k] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
}

namespace {

json mlp_to_json(const NamedMLP& m) {
    json layers = json::array();
    for (const auto& l : m.spec.layers)
        layers.push_back({{"in", l.in}, {"out", l.out}, {"bias", l.bias}, {"activation", to_string(l.activation)}});
    return {{"name", m.name}, {"leaky_slope", m.spec.leaky_slope}, {"layers", layers}};
}

NamedMLP mlp_from_json(const json& j) {
    NamedMLP m;
    m.name = j.at("name").get<std::string>();
    m.spec.leaky_slope = j.at("leaky_slope").get<double>();
    for (const auto& l : j.at("layers"))
        m.spec.layers.push_back({l.at("in").get<Index>(), l.at("out").get<Index>(), l.at("bias").get<bool>(),
                                 activation_from_string(l.at("activation").get<std::string>())});
    m.spec.validate();
    return m;
}

} // namespace

std::string checkpoint_to_json(const Checkpoint& ckpt) {
    const auto& arch = ckpt.params.architecture();
    json mlps = json::array();
    for (const auto& m : arch.mlps) mlps.push_back(mlp_to_json(m));
    const auto& t = ckpt.training;
    json doc = {
        {"format_version", Checkpoint::format_version},
        {"architecture", {{"kind", arch.kind}, {"param_count", arch.param_count()}, {"mlps", mlps}}},
        {"parameters", ckpt.params.values()},
        {"training",
         {{"seed", t.seed},
          {"best_epoch", t.best_epoch},
          {"epochs_run", t.epochs_run},
          {"best_val_loss", t.best_val_loss},
          {"train_loss", t.train_loss},
          {"val_loss", t.val_loss}}},
    };
    return doc.dump(1) + "\n";
}

Checkpoint checkpoint_from_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(std::string("checkpoint: invalid JSON: ") + e.what());
    }
    try {
        const int version = doc.at("format_version").get<int>();
        if (version != Checkpoint::format_version)
            throw Error("checkpoint: unsupported format_version " + std::to_string(version));
        Architecture arch;
        arch.kind = doc.at("architecture").at("kind").get<std::string>();
        for (const auto& m : doc.at("architecture").at("mlps")) arch.mlps.push_back(mlp_from_json(m));
        const auto declared = doc.at("architecture").at("param_count").get<Index>();
        if (declared != arch.param_count())
            throw Error("checkpoint: param_count " + std::to_string(declared) + " does not match the layer list (" +
                        std::to_string(arch.param_count()) + ")");
        Checkpoint c{ParamStore(std::move(arch), doc.at("parameters").get<std::vector<double>>()), {}};
        const auto& t = doc.at("training");
        c.training.seed = t.at("seed").get<std::uint64_t>();
        c.training.best_epoch = t.at("best_epoch").get<std::size_t>();
        c.training.epochs_run = t.at("epochs_run").get<std::size_t>();
        c.training.best_val_loss = t.at("best_val_loss").get<double>();
        c.training.train_loss = t.at("train_loss").get<std::vector<double>>();
        c.training.val_loss = t.at("val_loss").get<std::vector<double>>();
        return c;
    } catch (const json::exception& e) {
        throw Error(std::string("checkpoint: ") + e.what());
    }
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    io::write_text(path, checkpoint_to_json(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    try {
        return checkpoint_from_json(io::read_text(path));
    } catch (const Error& e) {
        throw Error(path.string() + ": " + e.what());
    }
}

} // namespace gnnla::nn
