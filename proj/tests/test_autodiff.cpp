#include <doctest.h>

#include "gnnla/autodiff.hpp"
#include "gnnla/error.hpp"
#include "gnnla/rng.hpp"
#include "support.hpp"

using namespace gnnla;
using namespace gnnla::ad;

namespace {

Tensor random_tensor(Eigen::Index r, Eigen::Index c, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    Rng rng = Rng::derive(seed, rng_stream::test, 7);
    Tensor t(r, c);
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(lo, hi);
    return t;
}

// scalarise with a fixed random weighting so every output entry matters
Var weighted_sum(Var y, std::uint64_t seed = 5) {
    auto w = y.tape->constant(random_tensor(y.rows(), y.cols(), seed));
    return sum(mul(y, w));
}

constexpr double tol = 1e-6;

} // namespace

TEST_CASE("elementwise ops pass the gradient check") {
    const Tensor x = random_tensor(4, 3, 1);
    const Tensor pos = random_tensor(4, 3, 2, 0.5, 2.0);
    CHECK(grad_check([](Tape&, Var v) { return weighted_sum(add(v, v)); }, x) < tol);
    CHECK(grad_check([](Tape&, Var v) { return weighted_sum(sub(scale(v, 3.0), add_scalar(v, 1.0))); }, x) < tol);
    CHECK(grad_check([](Tape&, Var v) { return weighted_sum(mul(v, v)); }, x) < tol);
    CHECK(grad_check([](Tape&, Var v) { return weighted_sum(relu(v)); }, x) < tol);
    CHECK(grad_check([](Tape&, Var v) { return weighted_sum(leaky_relu(v, 0.01)); }, x) < tol);
    CHECK(grad_check([](Tape&, Var v) { return weighted_sum(reciprocal(v)); }, pos) < tol);
    CHECK(grad_check([](Tape&, Var v) { return weighted_sum(power(v, 1.0 / 3.0)); }, pos) < tol);
    CHECK(grad_check([](Tape&, Var v) { return weighted_sum(power(v, 3.0)); }, x) < tol);
    CHECK(grad_check([](Tape&, Var v) { return weighted_sum(sqrt(v)); }, pos) < tol);
}

TEST_CASE("linear algebra ops pass the gradient check") {
    const Tensor x = random_tensor(5, 3, 3);
    const Tensor w = random_tensor(4, 3, 4);
    const Tensor b = random_tensor(1, 4, 5);
    CHECK(grad_check([&](Tape& t, Var v) { return weighted_sum(linear(v, t.constant(w), t.constant(b))); }, x) < tol);
    CHECK(grad_check([&](Tape& t, Var v) { return weighted_sum(linear(t.constant(x), v, t.constant(b))); }, w) < tol);
    CHECK(grad_check([&](Tape& t, Var v) { return weighted_sum(linear(t.constant(x), t.constant(w), v)); }, b) < tol);
    CHECK(grad_check([&](Tape& t, Var v) { return weighted_sum(matmul(v, t.constant(w.transpose()))); }, x) < tol);
    const Tensor d = random_tensor(5, 1, 6);
    CHECK(grad_check([&](Tape& t, Var v) { return weighted_sum(mul_rows(t.constant(x), v)); }, d) < tol);
    CHECK(grad_check([&](Tape& t, Var v) { return weighted_sum(mul_rows(v, t.constant(d))); }, x) < tol);
    CHECK(grad_check([&](Tape& t, Var v) { return weighted_sum(add_row_broadcast(t.constant(x), v)); },
                     random_tensor(1, 3, 7)) < tol);
    const auto a = test::random_spd(5, 0.5, 8);
    CHECK(grad_check([&](Tape&, Var v) { return weighted_sum(spmm(a, v)); }, x) < tol);
}

TEST_CASE("reductions pass the gradient check") {
    const Tensor x = random_tensor(6, 2, 9);
    CHECK(grad_check([](Tape&, Var v) { return sum(v); }, x) < tol);
    CHECK(grad_check([](Tape&, Var v) { return mean(v); }, x) < tol);
    CHECK(grad_check([](Tape&, Var v) { return min(v); }, x) < tol);
    CHECK(grad_check([](Tape&, Var v) { return max(v); }, x) < tol);
    CHECK(grad_check([](Tape&, Var v) { return l2_norm(v); }, x) < tol);
    CHECK(grad_check([](Tape&, Var v) { return weighted_sum(col_norms(v)); }, x) < tol);
}

TEST_CASE("structural ops pass the gradient check") {
    const Tensor x = random_tensor(6, 2, 10);
    const std::vector<std::size_t> idx = {3, 0, 3, 5, 1};
    const std::vector<std::size_t> offs = {0, 2, 2, 5, 6};
    const std::vector<std::size_t> scatter_idx = {0, 1, 1, 3, 2, 0};
    CHECK(grad_check([&](Tape&, Var v) { return weighted_sum(gather_rows(v, idx)); }, x) < tol);
    CHECK(grad_check([&](Tape&, Var v) { return weighted_sum(scatter_add_rows(v, scatter_idx, 4)); },
                     x) < tol);
    for (auto r : {Reduce::sum, Reduce::mean, Reduce::min, Reduce::max})
        CHECK(grad_check([&](Tape&, Var v) { return weighted_sum(segment_reduce(v, offs, r)); }, x) < tol);
    CHECK(grad_check([&](Tape& t, Var v) { return weighted_sum(concat_cols({v, t.constant(x), v})); }, x) < tol);
    CHECK(grad_check([&](Tape&, Var v) { return weighted_sum(repeat_rows(v, 4)); }, random_tensor(1, 3, 11)) < tol);
}

TEST_CASE("segment reduction values") {
    Tape t;
    Tensor x(4, 1);
    x << 3.0, -1.0, 2.0, 7.0;
    const std::vector<std::size_t> offs = {0, 3, 3, 4};
    CHECK(segment_reduce(t.constant(x), offs, Reduce::min).value() == (Tensor(3, 1) << -1.0, 0.0, 7.0).finished());
    CHECK(segment_reduce(t.constant(x), offs, Reduce::mean).value() ==
          (Tensor(3, 1) << 4.0 / 3.0, 0.0, 7.0).finished());
}

TEST_CASE("gradient of a small composite matches hand derivation") {
    // f(x) = sum(relu(x) * x) with x = [-1, 2, 3]: df/dx = [0, 4, 6]
    Tape t;
    auto x = t.leaf((Tensor(1, 3) << -1.0, 2.0, 3.0).finished());
    auto f = sum(mul(relu(x), x));
    CHECK(f.scalar() == 13.0);
    const auto g = t.backward(f);
    CHECK(g.of(x) == (Tensor(1, 3) << 0.0, 4.0, 6.0).finished());
}

TEST_CASE("constants receive no gradient and backward needs a scalar") {
    Tape t;
    auto x = t.leaf(Tensor::Ones(2, 2));
    auto c = t.constant(Tensor::Ones(2, 2));
    CHECK_THROWS_AS(t.backward(add(x, c)), Error);
    CHECK_THROWS_AS(add(x, t.constant(Tensor::Ones(3, 2))), Error);
    CHECK_THROWS_AS(power(t.constant((Tensor(1, 1) << -2.0).finished()), 0.5), Error);
    const auto g = t.backward(sum(mul(x, c)));
    CHECK(g.size() == 1);
    CHECK(g.of(x) == Tensor::Ones(2, 2));
}

TEST_CASE("reused nodes accumulate gradients") {
    Tape t;
    auto x = t.leaf((Tensor(1, 1) << 3.0).finished());
    auto y = mul(x, x);
    auto f = sum(add(mul(y, x), y)); // x^3 + x^2 -> 3x^2 + 2x = 33
    CHECK(t.backward(f).of(x)(0, 0) == 33.0);
}
