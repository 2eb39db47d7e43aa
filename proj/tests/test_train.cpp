#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include <Eigen/Eigenvalues>

#include "gnnla/error.hpp"
#include "gnnla/io.hpp"
#include "gnnla/train.hpp"
#include "support.hpp"

using namespace gnnla;
using namespace gnnla::train;
using ad::Tensor;

namespace {

Tensor unit_probes(Index n, std::size_t m, std::uint64_t seed) { return sphere_probes(n, m, seed, 0); }

// ||(I - diag(d) A)^K u||^(1/K), maximised over columns, with dense Eigen
double dense_jacobi_loss(const std::vector<double>& d, const SparseMatrixCSR& a, const Tensor& u, std::size_t K) {
    const Eigen::MatrixXd ad = a.to_dense();
    Eigen::MatrixXd s = Eigen::MatrixXd::Identity(ad.rows(), ad.cols()) - test::to_eigen(d).asDiagonal() * ad;
    Eigen::MatrixXd w = u;
    for (std::size_t k = 0; k < K; ++k) w = s * w;
    double best = 0.0;
    for (Eigen::Index c = 0; c < w.cols(); ++c) best = std::max(best, std::pow(w.col(c).norm(), 1.0 / K));
    return best;
}

fem::Dataset small_jacobi_data(std::uint64_t seed) {
    fem::JacobiDataConfig c;
    c.n_y = 8;
    c.n_train = 6;
    c.n_val = 3;
    c.n_test = 3;
    c.seed = seed;
    return fem::gen_jacobi_dataset(c);
}

fem::Dataset small_diffusion_data(std::uint64_t seed) {
    fem::DiffusionDataConfig c;
    c.n_min = 5;
    c.n_max = 6;
    c.theta_max = 2;
    c.n_train = 4;
    c.n_val = 2;
    c.n_test = 1;
    c.seed = seed;
    return fem::gen_diffusion_dataset(c);
}

std::filesystem::path scratch(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("gnnla_train_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

} // namespace

TEST_CASE("jacobi loss on trivial cases") {
    const auto a = test::laplace_2d(4);
    const auto u = unit_probes(16, 5, 1);
    CHECK(jacobi_loss_value(std::vector<double>(16, 0.0), a, u, 3) == doctest::Approx(1.0).epsilon(1e-14));

    std::vector<Triplet> t;
    for (Index i = 0; i < 6; ++i) t.push_back({i, i, 1.0});
    const auto id = SparseMatrixCSR::from_triplets(6, 6, t);
    CHECK(jacobi_loss_value(std::vector<double>(6, 1.0), id, unit_probes(6, 3, 2), 4) == 0.0);
    CHECK(jacobi_loss_value(std::vector<double>(6, 0.5), id, unit_probes(6, 3, 2), 4) ==
          doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("jacobi loss matches a dense oracle") {
    const auto a = test::random_spd(12, 0.3, 5);
    const auto d = test::random_vector(12, 6, 0.05, 0.3);
    for (std::size_t K : {1u, 2u, 5u}) {
        const auto u = unit_probes(12, 4, K);
        CHECK(std::abs(jacobi_loss_value(d, a, u, K) - dense_jacobi_loss(d, a, u, K)) < 1e-13);
    }
}

TEST_CASE("jacobi loss gradient with respect to the diagonal") {
    const auto a = test::random_spd(5, 0.6, 7);
    const auto u = unit_probes(5, 5, 8);
    Tensor d0(5, 1);
    const auto dv = test::random_vector(5, 9, 0.05, 0.3);
    for (int i = 0; i < 5; ++i) d0(i, 0) = dv[i];
    const double err = ad::grad_check([&](ad::Tape&, ad::Var d) { return jacobi_loss(d, a, u, 3); }, d0);
    CHECK(err < 1e-5);
}

TEST_CASE("jacobi loss is invariant under a symmetric permutation") {
    const auto a = test::random_spd(10, 0.4, 11);
    const auto d = test::random_vector(10, 12, 0.05, 0.3);
    const auto u = unit_probes(10, 3, 13);
    const auto perm = Rng::derive(14, rng_stream::test).permutation(10);
    std::vector<Triplet> t;
    for (Index i = 0; i < 10; ++i) {
        auto cols = a.row_cols(i);
        auto vals = a.row_values(i);
        for (std::size_t k = 0; k < cols.size(); ++k) t.push_back({perm[i], perm[cols[k]], vals[k]});
    }
    const auto pa = SparseMatrixCSR::from_triplets(10, 10, t);
    std::vector<double> pd(10);
    Tensor pu(10, 3);
    for (Index i = 0; i < 10; ++i) {
        pd[perm[i]] = d[i];
        pu.row(static_cast<Eigen::Index>(perm[i])) = u.row(static_cast<Eigen::Index>(i));
    }
    CHECK(std::abs(jacobi_loss_value(d, a, u, 3) - jacobi_loss_value(pd, pa, pu, 3)) < 1e-13);
}

TEST_CASE("probe selection") {
    const auto basis = fem::dst_basis(6, 5);
    const auto u = select_probes(basis.hf, 7, 3, 2);
    CHECK(u.cols() == 7);
    CHECK((u.transpose() * u - Eigen::MatrixXd::Identity(7, 7)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((select_probes(basis.hf, 7, 3, 2) - u).cwiseAbs().maxCoeff() == 0.0);
    CHECK((select_probes(basis.hf, 7, 3, 3) - u).cwiseAbs().maxCoeff() > 0.0);
    CHECK_THROWS_AS(select_probes(basis.hf, basis.hf.cols() + 1, 3, 2), Error);
    const auto s = sphere_probes(9, 4, 1, 0);
    for (Eigen::Index c = 0; c < 4; ++c) CHECK(s.col(c).norm() == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("omega_co") {
    std::vector<Triplet> t;
    for (Index i = 0; i < 7; ++i) t.push_back({i, i, 3.0});
    CHECK(omega_co(SparseMatrixCSR::from_triplets(7, 7, t)) == doctest::Approx(1.0).epsilon(1e-12));
    // D^-1 A of tridiag(-1,2,-1) has eigenvalues 1 - cos(k pi/(n+1)), symmetric about 1
    CHECK(omega_co(test::laplace_1d(10)) == doctest::Approx(1.0).epsilon(1e-8));

    const auto a = test::random_spd(8, 0.5, 21);
    const Eigen::MatrixXd ad = a.to_dense();
    const Eigen::VectorXd s = ad.diagonal().cwiseSqrt().cwiseInverse();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s.asDiagonal() * ad * s.asDiagonal());
    const double expect = 2.0 / (es.eigenvalues().minCoeff() + es.eigenvalues().maxCoeff());
    CHECK(std::abs(omega_co(a) - expect) < 1e-6);
}

TEST_CASE("projected eigenvalues") {
    std::vector<Triplet> t;
    for (Index i = 0; i < 12; ++i) t.push_back({i, i, 1.0});
    const auto id = SparseMatrixCSR::from_triplets(12, 12, t);
    const auto basis = fem::dst_basis(4, 3);
    EigOptions opt;
    opt.k = 3;
    const auto r = eval_jacobi(id, std::vector<double>(12, 0.25), basis.hf, opt);
    REQUIRE(r.values.size() == 3);
    for (double v : r.values) CHECK(v == doctest::Approx(0.75).epsilon(1e-12));

    // subspace iteration agrees with the dense solver on a band-mesh matrix
    const auto p = fem::make_jacobi_instance(10, 0.01, 4);
    const auto b = fem::dst_basis(p.grid_nx, p.grid_ny);
    const auto dg = diag(p.a);
    std::vector<double> dinv(dg.size());
    for (std::size_t i = 0; i < dinv.size(); ++i) dinv[i] = 0.8 / dg[i];
    EigOptions dense = opt, power = opt;
    dense.k = power.k = 4;
    dense.method = EigenMethod::dense;
    power.method = EigenMethod::power;
    power.tol = 1e-12;
    power.max_iter = 100000;
    const auto rd = eval_jacobi(p.a, dinv, b.hf, dense);
    const auto rp = eval_jacobi(p.a, dinv, b.hf, power);
    CHECK(rp.converged);
    for (int k = 0; k < 4; ++k) CHECK(std::abs(rd.values[k] - rp.values[k]) < 1e-6);
    CHECK(std::is_sorted(rd.values.rbegin(), rd.values.rend()));

    const Eigen::MatrixXd pb = projected_operator(p.a, dinv, b.hf);
    Eigen::EigenSolver<Eigen::MatrixXd> es(pb, false);
    double mx = 0.0;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) mx = std::max(mx, std::abs(es.eigenvalues()(i)));
    CHECK(rd.values[0] == doctest::Approx(mx).epsilon(1e-12));
}

TEST_CASE("omega override reproduces the fixed baselines") {
    const auto data = small_jacobi_data(4);
    EigOptions opt;
    opt.k = 3;
    const auto r1 = compare_methods(data.test, nullptr, 1.0, opt);
    for (const auto& m : r1.matrices) CHECK(m.max_eig(method_learned) == m.max_eig(method_omega_1));
    CHECK(r1.frac_beats_omega_1 == 0.0);
    const auto r23 = compare_methods(data.test, nullptr, 2.0 / 3.0, opt);
    for (const auto& m : r23.matrices) {
        CHECK(m.max_eig(method_learned) == m.max_eig(method_omega_2_3));
        CHECK(m.band_width == doctest::Approx(data.test[&m - r23.matrices.data()].meta.beta));
        double best = 1e300;
        for (const auto& me : m.methods) best = std::min(best, me.eig.values.front());
        CHECK(m.max_eig(m.winner) == best);
    }
    CHECK_THROWS_AS(compare_methods(data.test, nullptr, std::nullopt, opt), Error);

    const auto dir = scratch("report");
    write_eval_report(r23, dir, true, 5);
    for (const char* f : {"eig_report.csv", "winners.csv", "max_eig.csv", "diff_histogram.csv", "summary.json",
                          "diff_histogram.svg"})
        CHECK(std::filesystem::exists(dir / f));
    const auto hist = io::read_text(dir / "diff_histogram.csv");
    CHECK(hist.rfind("baseline,baseline_minus_learned_lo,baseline_minus_learned_hi,count", 0) == 0);
    std::filesystem::remove_all(dir);
}

TEST_CASE("diffusion loss") {
    Tensor target(4, 2), pred(4, 2);
    Rng rng = Rng::derive(3, rng_stream::test);
    for (Eigen::Index i = 0; i < target.size(); ++i) target.data()[i] = rng.uniform();
    pred = target.array() + 1.0;
    CHECK(diffusion_loss_value(pred, target) == doctest::Approx(1.0).epsilon(1e-14));
    pred = target;
    pred(2, 0) += 0.5;
    pred(1, 1) -= 0.25;
    CHECK(diffusion_loss_value(pred, target) == doctest::Approx((0.25 + 0.0625) / 8.0).epsilon(1e-14));
    CHECK_THROWS_AS(diffusion_loss_value(Tensor(4, 1), Tensor(4, 1)), Error);
}

TEST_CASE("jacobi training is deterministic and improves the loss") {
    const auto data = small_jacobi_data(2);
    TrainConfig cfg;
    cfg.epochs_max = 6;
    cfg.batch_size = 2;
    cfg.lr = 3e-3;
    cfg.m = 6;
    cfg.seed = 5;
    const auto a = train_jacobi(data, cfg);
    cfg.threads = 3;
    const auto b = train_jacobi(data, cfg);
    CHECK(a.checkpoint.params.values() == b.checkpoint.params.values());
    CHECK(a.curve.train == b.curve.train);
    REQUIRE(a.curve.train.size() == 7);
    CHECK(a.curve.train.back() < a.curve.train.front());
    const auto& rec = a.checkpoint.training;
    CHECK(rec.best_val_loss == *std::min_element(a.curve.val.begin(), a.curve.val.end()));
    CHECK(a.curve.val[rec.best_epoch] == rec.best_val_loss);

    // the returned parameters are the best-validation ones
    double v = 0.0;
    for (const auto& p : data.val) {
        const auto s = prepare_jacobi_sample(p, cfg);
        const auto d = nn::jacobi_model_forward(p.a, a.checkpoint.params);
        v += jacobi_loss_value(d, s.a, s.probes, cfg.K);
    }
    CHECK(v / static_cast<double>(data.val.size()) == doctest::Approx(rec.best_val_loss).epsilon(1e-12));
}

TEST_CASE("patience stops training early") {
    const auto data = small_jacobi_data(2);
    TrainConfig cfg;
    cfg.epochs_max = 50;
    cfg.batch_size = 6;
    cfg.lr = 0.5;
    cfg.m = 4;
    cfg.patience = 2;
    std::size_t calls = 0;
    cfg.on_epoch = [&](std::size_t, double, double) { ++calls; };
    const auto r = train_jacobi(data, cfg);
    CHECK(r.checkpoint.training.epochs_run <= 50);
    CHECK(calls == r.checkpoint.training.epochs_run + 1);
    if (r.checkpoint.training.epochs_run < 50)
        CHECK(r.checkpoint.training.epochs_run - r.checkpoint.training.best_epoch == 2);
}

TEST_CASE("diffusion training step and evaluation helpers") {
    const auto data = small_diffusion_data(3);
    TrainConfig cfg;
    cfg.epochs_max = 3;
    cfg.batch_size = 2;
    cfg.seed = 1;
    const auto r = train_diffusion(data, cfg);
    REQUIRE(r.curve.val.size() == 4);
    CHECK(r.checkpoint.params.size() == 14002);
    CHECK(r.curve.train.back() < r.curve.train.front());

    const auto rows = freq_sweep_eval(r.checkpoint.params, 3, 6, 2);
    REQUIRE(rows.size() == 16);
    CHECK(rows[0].theta_x == 0);
    CHECK(rows[5].theta_x == 1);
    CHECK(rows[5].theta_y == 1);
    CHECK(rows[5].in_training_region);
    CHECK_FALSE(rows[15].in_training_region);
    for (const auto& row : rows) CHECK(std::isfinite(row.mse));

    const auto probe = stencil_probe(r.checkpoint.params, 8);
    CHECK(std::isfinite(probe.alpha));
    CHECK(std::isfinite(probe.beta));

    const auto dir = scratch("curves");
    write_loss_curve(r.curve, dir / "loss.csv");
    write_freq_sweep(rows, dir / "sweep.csv");
    CHECK(io::read_text(dir / "loss.csv").rfind("epoch,train_loss,val_loss\n0,", 0) == 0);
    CHECK(io::read_text(dir / "sweep.csv").rfind("theta_x,theta_y,mse,in_training_region\n", 0) == 0);
    std::filesystem::remove_all(dir);
}

TEST_CASE("training config validation") {
    TrainConfig cfg;
    cfg.K = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = {};
    cfg.lr = 0.0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = {};
    cfg.batch_size = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);
}
