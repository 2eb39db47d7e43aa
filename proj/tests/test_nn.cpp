#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "gnnla/error.hpp"
#include "gnnla/nn.hpp"
#include "support.hpp"

using namespace gnnla;
using namespace gnnla::nn;
using ad::Tensor;

namespace {

std::vector<double> random_params(const Architecture& arch, std::uint64_t seed, double scale = 0.5) {
    Rng rng = Rng::derive(seed, rng_stream::test, 3);
    std::vector<double> v(static_cast<std::size_t>(arch.param_count()));
    for (auto& x : v) x = rng.uniform(-scale, scale);
    return v;
}

// 5-point periodic stencil on an m x m grid, vertex k = j*m + i at (i/m, j/m)
struct PeriodicGrid {
    SparseMatrixCSR a;
    std::vector<double> x, y;
    double h;
};

PeriodicGrid periodic_grid(Index m, std::uint64_t seed) {
    Rng rng = Rng::derive(seed, rng_stream::test, 4);
    std::vector<Triplet> t;
    PeriodicGrid g;
    g.h = 1.0 / static_cast<double>(m);
    auto id = [m](Index i, Index j) { return (j % m) * m + (i % m); };
    for (Index j = 0; j < m; ++j)
        for (Index i = 0; i < m; ++i) {
            const Index k = id(i, j);
            const double ax = rng.uniform(0.5, 1.5), ay = rng.uniform(0.5, 1.5);
            t.push_back({k, k, 2 * ax + 2 * ay});
            t.push_back({k, id(i + 1, j), -ax});
            t.push_back({k, id(i + m - 1, j), -ax});
            t.push_back({k, id(i, j + 1), -ay});
            t.push_back({k, id(i, j + m - 1), -ay});
            g.x.push_back(static_cast<double>(i) * g.h);
            g.y.push_back(static_cast<double>(j) * g.h);
        }
    g.a = SparseMatrixCSR::from_triplets(m * m, m * m, t);
    return g;
}

SparseMatrixCSR permute(const SparseMatrixCSR& a, const std::vector<std::size_t>& perm) {
    // new index of old vertex i is perm[i]
    std::vector<Triplet> t;
    for (Index i = 0; i < a.rows(); ++i) {
        auto cols = a.row_cols(i);
        auto vals = a.row_values(i);
        for (std::size_t k = 0; k < cols.size(); ++k) t.push_back({perm[i], perm[cols[k]], vals[k]});
    }
    return SparseMatrixCSR::from_triplets(a.rows(), a.cols(), t);
}

// scalarise a model output with fixed random weights
ad::Var weighted(ad::Var out, std::uint64_t seed) {
    Rng rng = Rng::derive(seed, rng_stream::test, 9);
    Tensor w(out.rows(), out.cols());
    for (Eigen::Index k = 0; k < w.size(); ++k) w.data()[k] = rng.uniform(-1.0, 1.0);
    return ad::sum(ad::mul(out, out.tape->constant(w)));
}

} // namespace

TEST_CASE("parameter counts") {
    CHECK(jacobi_architecture().param_count() == 1341);
    CHECK(diffusion_architecture().param_count() == 14002);
    CHECK(ParamStore(jacobi_architecture()).size() == 1341);
    const auto diff = diffusion_architecture();
    const auto& pv = diff.mlp("phi_v");
    CHECK(pv.in_width() == 192);
    CHECK(pv.out_width() == 2);
    CHECK(pv.layers.back().activation == Activation::leaky_relu);
    CHECK_THROWS_AS(diffusion_architecture().mlp("decoder"), Error);
}

TEST_CASE("spec validation") {
    MLPSpec bad{{{3, 4, true, Activation::relu}, {5, 1, true, Activation::none}}};
    CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("layer 1"), Error);
    CHECK_THROWS_AS(ParamStore(jacobi_architecture(), std::vector<double>(10)), Error);
    CHECK(activation_from_string(to_string(Activation::leaky_relu)) == Activation::leaky_relu);
    CHECK_THROWS_AS(activation_from_string("tanh"), Error);
}

TEST_CASE("parameter layout is W row-major then b, layer by layer") {
    ParamStore s(jacobi_architecture());
    auto slots = s.slots();
    REQUIRE(slots.size() == 3);
    CHECK(slots[0].w_offset == 0);
    CHECK(slots[0].b_offset == 250);
    CHECK(slots[1].w_offset == 300);
    CHECK(slots[1].b_offset == 1300);
    CHECK(slots[2].w_offset == 1320);
    CHECK(slots[2].b_offset == 1340);
}

TEST_CASE("plain MLP matches a scalar loop and the taped evaluation") {
    const auto arch = diffusion_architecture();
    const ParamStore store(arch, random_params(arch, 1));
    const auto& spec = arch.mlp("phi_v");
    const auto slots = store.slots_of(4);
    const auto begin = static_cast<std::ptrdiff_t>(slots.front().w_offset);
    std::vector<double> p(store.values().begin() + begin,
                          store.values().begin() + begin + static_cast<std::ptrdiff_t>(spec.param_count()));
    Tensor x(3, 192);
    Rng rng(7);
    for (Eigen::Index k = 0; k < x.size(); ++k) x.data()[k] = rng.uniform(-1.0, 1.0);

    const Tensor plain = mlp_forward(spec, p, x);

    // scalar oracle
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        std::vector<double> cur(x.row(r).data(), x.row(r).data() + x.cols());
        std::size_t off = 0;
        for (const auto& l : spec.layers) {
            std::vector<double> nxt(l.out);
            for (Index o = 0; o < l.out; ++o) {
                double s = 0.0;
                for (Index i = 0; i < l.in; ++i) s += p[off + o * l.in + i] * cur[i];
                nxt[o] = s + p[off + l.out * l.in + o];
                if (l.activation == Activation::relu) nxt[o] = std::max(nxt[o], 0.0);
                if (l.activation == Activation::leaky_relu && nxt[o] < 0) nxt[o] *= spec.leaky_slope;
            }
            off += l.out * l.in + l.out;
            cur = nxt;
        }
        for (Index o = 0; o < 2; ++o) CHECK(plain(r, static_cast<Eigen::Index>(o)) == doctest::Approx(cur[o]).epsilon(1e-12));
    }

    ad::Tape tape;
    BoundParams bp(tape, store);
    const Tensor taped = mlp_forward(bp, 4, tape.constant(x)).value();
    CHECK(taped == plain);
}

TEST_CASE("zero parameters give zero output") {
    const ParamStore z(jacobi_architecture());
    const auto d = jacobi_model_forward(test::laplace_2d(4), z);
    CHECK(test::max_abs(d) == 0.0);
    const auto g = periodic_grid(4, 1);
    const ParamStore zd(diffusion_architecture());
    CHECK(diffusion_model_forward(diffusion_inputs(g.a, g.x, g.y, g.h), zd).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("glorot variance for a 64x64 layer") {
    Architecture arch{"probe", {{"m", MLPSpec::chain({64, 64}, Activation::none, Activation::none)}}};
    Rng rng(11);
    const auto v = init_glorot(arch, rng);
    double mean = 0.0, var = 0.0;
    for (int k = 0; k < 64 * 64; ++k) mean += v[k];
    mean /= 64 * 64;
    for (int k = 0; k < 64 * 64; ++k) var += (v[k] - mean) * (v[k] - mean);
    var /= 64 * 64;
    const double expected = 2.0 / (64 + 64);
    CHECK(std::abs(var - expected) <= 0.2 * expected);
    for (int k = 64 * 64; k < 64 * 64 + 64; ++k) CHECK(v[k] == 0.0);
    Rng again(11);
    CHECK(init_glorot(arch, again) == v);
}

TEST_CASE("jacobi features are [A_ii, min, mean, sum, max] of the off-diagonals") {
    const auto f = jacobi_features(test::laplace_1d(4));
    REQUIRE(f.rows() == 4);
    REQUIRE(f.cols() == 5);
    CHECK(f(0, 0) == 2.0);
    CHECK(f(0, 1) == -1.0);
    CHECK(f(0, 2) == -1.0);
    CHECK(f(0, 3) == -1.0);
    CHECK(f(1, 3) == -2.0);
    CHECK(f(1, 4) == -1.0);

    const auto a = test::random_spd(30, 0.2, 4);
    const auto g = jacobi_features(a);
    for (Index i = 0; i < a.n(); ++i) {
        double mn = INFINITY, mx = -INFINITY, s = 0.0;
        int cnt = 0;
        auto cols = a.row_cols(i);
        auto vals = a.row_values(i);
        for (std::size_t k = 0; k < cols.size(); ++k) {
            if (cols[k] == i) continue;
            mn = std::min(mn, vals[k]);
            mx = std::max(mx, vals[k]);
            s += vals[k];
            ++cnt;
        }
        const auto r = static_cast<Eigen::Index>(i);
        CHECK(g(r, 0) == a.at(i, i));
        if (cnt == 0) {
            CHECK(g.row(r).tail(4).isZero());
        } else {
            CHECK(g(r, 1) == mn);
            CHECK(g(r, 2) == doctest::Approx(s / cnt).epsilon(1e-14));
            CHECK(g(r, 3) == doctest::Approx(s).epsilon(1e-14));
            CHECK(g(r, 4) == mx);
        }
    }
}

TEST_CASE("jacobi model is permutation equivariant") {
    const auto arch = jacobi_architecture();
    const ParamStore store(arch, random_params(arch, 2));
    const auto a = test::random_spd(25, 0.3, 9);
    Rng rng(3);
    const auto perm = rng.permutation(a.n());
    const auto d = jacobi_model_forward(a, store);
    const auto dp = jacobi_model_forward(permute(a, perm), store);
    for (Index i = 0; i < a.n(); ++i) CHECK(dp[perm[i]] == doctest::Approx(d[i]).epsilon(1e-12));
}

TEST_CASE("diffusion inputs use minimum-image offsets in units of h") {
    const auto g = periodic_grid(6, 2);
    const auto in = diffusion_inputs(g.a, g.x, g.y, g.h);
    CHECK(in.topology.num_edges() == 36 * 4);
    CHECK(in.vertices.rows() == 36);
    CHECK(in.global(0, 0) == g.h);
    for (std::size_t k = 0; k < in.topology.num_edges(); ++k) {
        const auto r = static_cast<Eigen::Index>(k);
        const double ox = in.edges(r, 1), oy = in.edges(r, 2);
        CHECK(std::abs(ox) + std::abs(oy) == 1.0);
        // edge for A_ij has src j and dst i
        CHECK(in.edges(r, 0) == g.a.at(in.topology.dst[k], in.topology.src[k]));
    }
    // vertex 0 sits at (0, 0); its left neighbour wraps to (5h, 0) and must read as offset -1
    const auto& t = in.topology;
    bool found = false;
    for (std::size_t k = t.in_offsets[0]; k < t.in_offsets[1]; ++k)
        if (t.src[k] == 5) {
            CHECK(in.edges(static_cast<Eigen::Index>(k), 1) == -1.0);
            CHECK(in.edges(static_cast<Eigen::Index>(k), 2) == 0.0);
            found = true;
        }
    CHECK(found);
    CHECK_THROWS_AS(diffusion_inputs(g.a, g.x, std::vector<double>(3), g.h), Error);
}

TEST_CASE("diffusion model is permutation equivariant") {
    const auto arch = diffusion_architecture();
    const ParamStore store(arch, random_params(arch, 5, 0.3));
    const auto g = periodic_grid(5, 3);
    Rng rng(8);
    const auto perm = rng.permutation(g.a.n());
    std::vector<double> px(g.x.size()), py(g.y.size());
    for (Index i = 0; i < g.x.size(); ++i) {
        px[perm[i]] = g.x[i];
        py[perm[i]] = g.y[i];
    }
    const Tensor out = diffusion_model_forward(diffusion_inputs(g.a, g.x, g.y, g.h), store);
    const Tensor outp = diffusion_model_forward(diffusion_inputs(permute(g.a, perm), px, py, g.h), store);
    for (Index i = 0; i < g.x.size(); ++i)
        for (Eigen::Index c = 0; c < 2; ++c)
            CHECK(outp(static_cast<Eigen::Index>(perm[i]), c) ==
                  doctest::Approx(out(static_cast<Eigen::Index>(i), c)).epsilon(1e-10));
}

TEST_CASE("model parameter gradients match finite differences") {
    {
        const auto arch = jacobi_architecture();
        const ParamStore store(arch, random_params(arch, 6));
        const auto a = test::random_spd(5, 0.6, 2);
        const Tensor f = jacobi_features(a);
        const double err = param_grad_check(store, [&](const BoundParams& bp) {
            return weighted(jacobi_model_forward(bp, bp.weight(0).tape->constant(f)), 1);
        });
        CHECK(err < 1e-5);
    }
    {
        const auto arch = diffusion_architecture();
        Rng rng(12);
        const ParamStore store(arch, init_glorot(arch, rng));
        const auto g = periodic_grid(3, 4);
        const auto in = diffusion_inputs(g.a, g.x, g.y, g.h);
        const double err =
            param_grad_check(store, [&](const BoundParams& bp) { return weighted(diffusion_model_forward(bp, in), 2); });
        CHECK(err < 1e-5);
    }
}

TEST_CASE("adam first step moves each parameter by about lr against the gradient sign") {
    std::vector<double> p = {1.0, -2.0, 0.5, 3.0};
    const std::vector<double> g = {0.3, -7.0, 1e-3, -0.02};
    AdamState st;
    adam_step(p, g, st);
    CHECK(p[0] == doctest::Approx(1.0 - 1e-3).epsilon(1e-6));
    CHECK(p[1] == doctest::Approx(-2.0 + 1e-3).epsilon(1e-6));
    CHECK(p[2] == doctest::Approx(0.5 - 1e-3).epsilon(1e-4));
    CHECK(p[3] == doctest::Approx(3.0 + 1e-3).epsilon(1e-6));
    CHECK(st.t == 1);
    CHECK_THROWS_AS(adam_step(p, std::vector<double>(2), st), Error);
}

TEST_CASE("adam decreases a convex quadratic") {
    // f(p) = sum_k c_k (p_k - t_k)^2
    const std::vector<double> c = {1.0, 10.0, 0.1}, t = {1.0, -1.0, 2.0};
    std::vector<double> p = {0.0, 0.0, 0.0};
    auto f = [&] {
        double s = 0.0;
        for (int k = 0; k < 3; ++k) s += c[k] * (p[k] - t[k]) * (p[k] - t[k]);
        return s;
    };
    const double f0 = f();
    AdamState st;
    AdamConfig cfg;
    cfg.lr = 0.05;
    for (int it = 0; it < 500; ++it) {
        std::vector<double> g(3);
        for (int k = 0; k < 3; ++k) g[k] = 2 * c[k] * (p[k] - t[k]);
        adam_step(p, g, st, cfg);
    }
    CHECK(f() < 1e-3 * f0);
}

TEST_CASE("checkpoint round trip is bit-exact") {
    const auto arch = diffusion_architecture();
    Rng rng(13);
    Checkpoint c{ParamStore(arch, init_glorot(arch, rng)), {}};
    c.params.values()[0] = 0.1 + 0.2;
    c.params.values()[1] = -1.0 / 3.0;
    c.params.values()[2] = 5e-324;
    c.training = {42, 3, 7, 0.125, {1.5, 0.7, 1.0 / 7.0}, {2.0, 1.0, 0.3}};
    const auto path = std::filesystem::temp_directory_path() / "gnnla_test_ckpt.json";
    save_checkpoint(c, path);
    const auto back = load_checkpoint(path);
    CHECK(back.params.architecture() == arch);
    CHECK(back.params.values() == c.params.values());
    CHECK(back.training == c.training);
    CHECK(checkpoint_to_json(back) == checkpoint_to_json(c));
    std::filesystem::remove(path);
}

TEST_CASE("checkpoint loader rejects bad documents") {
    const Checkpoint c{ParamStore(jacobi_architecture()), {}};
    std::string text = checkpoint_to_json(c);
    CHECK_THROWS_AS(checkpoint_from_json("{"), Error);
    auto bumped = text;
    bumped.replace(bumped.find("\"format_version\": 1"), 19, "\"format_version\": 9");
    CHECK_THROWS_WITH_AS(checkpoint_from_json(bumped), doctest::Contains("format_version"), Error);
    auto miscount = text;
    miscount.replace(miscount.find("\"param_count\": 1341"), 19, "\"param_count\": 1342");
    CHECK_THROWS_WITH_AS(checkpoint_from_json(miscount), doctest::Contains("param_count"), Error);
}
