#include "gnnla/train.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <numbers>

#include <Eigen/Eigenvalues>
#include <json.hpp>

#include "gnnla/error.hpp"
#include "gnnla/io.hpp"
#include "gnnla/parallel.hpp"
#include "gnnla/rng.hpp"
#include "gnnla/svg.hpp"

namespace gnnla::train {

using ad::Tensor;
using ad::Var;
using json = nlohmann::json;

void TrainConfig::validate() const {
    if (K < 1) throw Error("train config: K must be at least 1");
    if (m < 1) throw Error("train config: m must be at least 1");
    if (batch_size < 1) throw Error("train config: batch_size must be at least 1");
    if (!(lr > 0.0)) throw Error("train config: learning rate must be positive");
}

void write_loss_curve(const LossCurve& c, const std::filesystem::path& path) {
    io::CsvWriter w({"epoch", "train_loss", "val_loss"});
    for (std::size_t e = 0; e < c.train.size(); ++e)
        w.add_row({std::to_string(e), io::format_double(c.train[e]), io::format_double(c.val[e])});
    w.save(path);
}

namespace {

/// Shared Adam loop. sample_loss(i, params, grad) evaluates training sample i and, when
/// grad is non-null, writes the parameter gradient into it.
struct TrainingProblem {
    std::size_t n_train = 0;
    std::size_t n_val = 0;
    std::function<double(std::size_t, const nn::ParamStore&, std::vector<double>*)> train_sample;
    std::function<double(std::size_t, const nn::ParamStore&)> val_sample;
    bool batch_mean = false;
};

double mean_loss(std::size_t n, std::size_t threads, const std::function<double(std::size_t)>& f) {
    std::vector<double> l(n);
    parallel_for(n, threads, [&](std::size_t i) { l[i] = f(i); });
    double s = 0.0;
    for (double v : l) s += v;
    return s / static_cast<double>(n);
}

void require_finite_loss(double v, const std::string& where) {
    if (!std::isfinite(v)) throw NumericalError("training diverged: loss is " + std::to_string(v) + " " + where);
}

TrainResult run_training(const nn::Architecture& arch, const TrainingProblem& prob, const TrainConfig& cfg) {
    cfg.validate();
    if (prob.n_train == 0) throw Error("training set is empty");
    if (prob.n_val == 0) throw Error("validation set is empty");
    Rng init = Rng::derive(cfg.seed, rng_stream::init);
    nn::ParamStore params(arch, nn::init_glorot(arch, init));
    nn::AdamState adam;
    nn::AdamConfig adam_cfg;
    adam_cfg.lr = cfg.lr;

    LossCurve curve;
    auto val_loss = [&] {
        return mean_loss(prob.n_val, cfg.threads, [&](std::size_t i) { return prob.val_sample(i, params); });
    };
    curve.train.push_back(
        mean_loss(prob.n_train, cfg.threads, [&](std::size_t i) { return prob.train_sample(i, params, nullptr); }));
    curve.val.push_back(val_loss());
    require_finite_loss(curve.train[0], "before training");
    require_finite_loss(curve.val[0], "on the validation set before training");
    if (cfg.on_epoch) cfg.on_epoch(0, curve.train[0], curve.val[0]);

    std::vector<double> best = params.values();
    std::size_t best_epoch = 0;
    double best_val = curve.val[0];
    std::size_t epochs_run = 0;

    for (std::size_t epoch = 1; epoch <= cfg.epochs_max; ++epoch) {
        const auto order = Rng::derive(cfg.seed, rng_stream::shuffle, epoch).permutation(prob.n_train);
        double epoch_sum = 0.0;
        for (std::size_t start = 0; start < prob.n_train; start += cfg.batch_size) {
            const std::size_t count = std::min(cfg.batch_size, prob.n_train - start);
            std::vector<std::vector<double>> grads(count);
            std::vector<double> losses(count);
            parallel_for(count, cfg.threads, [&](std::size_t k) {
                losses[k] = prob.train_sample(order[start + k], params, &grads[k]);
            });
            std::vector<double> g(params.size(), 0.0);
            double batch_loss = 0.0;
            for (std::size_t k = 0; k < count; ++k) {
                require_finite_loss(losses[k], "at epoch " + std::to_string(epoch) + " on training sample " +
                                                   std::to_string(order[start + k]));
                batch_loss += losses[k];
                for (std::size_t p = 0; p < g.size(); ++p) g[p] += grads[k][p];
            }
            epoch_sum += batch_loss;
            if (prob.batch_mean) {
                const double s = 1.0 / static_cast<double>(count);
                for (auto& v : g) v *= s;
            }
            for (double v : g)
                if (!std::isfinite(v))
                    throw NumericalError("training diverged: non-finite gradient at epoch " + std::to_string(epoch));
            nn::adam_step(params.values(), g, adam, adam_cfg);
        }
        epochs_run = epoch;
        curve.train.push_back(epoch_sum / static_cast<double>(prob.n_train));
        curve.val.push_back(val_loss());
        require_finite_loss(curve.val.back(), "on the validation set at epoch " + std::to_string(epoch));
        if (cfg.on_epoch) cfg.on_epoch(epoch, curve.train.back(), curve.val.back());
        if (curve.val.back() < best_val) {
            best_val = curve.val.back();
            best_epoch = epoch;
            best = params.values();
        }
        if (cfg.patience > 0 && epoch - best_epoch >= cfg.patience) break;
    }

    nn::TrainingRecord rec;
    rec.seed = cfg.seed;
    rec.epochs_run = epochs_run;
    rec.train_loss = curve.train;
    rec.val_loss = curve.val;
    if (cfg.early_stop) {
        rec.best_epoch = best_epoch;
        rec.best_val_loss = best_val;
        params.values() = best;
    } else {
        rec.best_epoch = epochs_run;
        rec.best_val_loss = curve.val.back();
    }
    return {nn::Checkpoint{std::move(params), std::move(rec)}, std::move(curve)};
}

} // namespace

// ---------------------------------------------------------------------------
// Learned Jacobi

Tensor select_probes(const Eigen::MatrixXd& v_hf, std::size_t m, std::uint64_t seed, std::size_t index) {
    const auto cols = static_cast<std::size_t>(v_hf.cols());
    if (m > cols)
        throw Error("select_probes: " + std::to_string(m) + " probes requested from " + std::to_string(cols) +
                    " high-frequency columns");
    Rng rng = Rng::derive(seed, rng_stream::probes, index);
    const auto pick = rng.sample_without_replacement(cols, m);
    Tensor u(v_hf.rows(), static_cast<Eigen::Index>(m));
    for (std::size_t k = 0; k < m; ++k) u.col(static_cast<Eigen::Index>(k)) = v_hf.col(static_cast<Eigen::Index>(pick[k]));
    return u;
}

Tensor sphere_probes(Index n, std::size_t m, std::uint64_t seed, std::size_t index) {
    Rng rng = Rng::derive(seed, rng_stream::probes, index);
    Tensor u(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
    for (Eigen::Index c = 0; c < u.cols(); ++c) {
        for (Eigen::Index r = 0; r < u.rows(); ++r) u(r, c) = rng.normal();
        u.col(c) /= u.col(c).norm();
    }
    return u;
}

Var jacobi_loss(Var d, const SparseMatrixCSR& a, const Tensor& probes, std::size_t K) {
    if (static_cast<Index>(d.rows()) != a.n() || d.cols() != 1)
        throw Error("jacobi_loss: d must be an n x 1 column for an n x n matrix");
    if (static_cast<Index>(probes.rows()) != a.n()) throw Error("jacobi_loss: probe length does not match the matrix");
    if (K < 1) throw Error("jacobi_loss: K must be at least 1");
    ad::Tape& tape = *d.tape;
    Var w = tape.constant(probes);
    for (std::size_t k = 0; k < K; ++k) w = ad::sub(w, ad::mul_rows(ad::spmm(a, w), d));
    return ad::max(ad::power(ad::col_norms(w), 1.0 / static_cast<double>(K)));
}

double jacobi_loss_value(std::span<const double> d, const SparseMatrixCSR& a, const Tensor& probes, std::size_t K) {
    ad::Tape tape;
    Tensor dt(static_cast<Eigen::Index>(d.size()), 1);
    for (std::size_t i = 0; i < d.size(); ++i) dt(static_cast<Eigen::Index>(i), 0) = d[i];
    return jacobi_loss(tape.constant(std::move(dt)), a, probes, K).scalar();
}

JacobiSample prepare_jacobi_sample(const fem::ProblemInstance& p, const TrainConfig& cfg) {
    JacobiSample s;
    s.a = p.a;
    s.features = nn::jacobi_features(p.a);
    if (cfg.probes == ProbeKind::unit_sphere) {
        s.probes = sphere_probes(p.a.n(), cfg.m, cfg.seed, p.meta.index);
    } else {
        const auto basis = fem::dst_basis(p.grid_nx, p.grid_ny);
        s.probes = select_probes(basis.hf, cfg.m, cfg.seed, p.meta.index);
    }
    return s;
}

namespace {

double jacobi_sample_loss(const JacobiSample& s, const nn::ParamStore& params, std::size_t K,
                          std::vector<double>* grad) {
    ad::Tape tape;
    nn::BoundParams bp(tape, params, grad != nullptr);
    const Var d = nn::jacobi_model_forward(bp, tape.constant(s.features));
    const Var loss = jacobi_loss(d, s.a, s.probes, K);
    if (grad) *grad = bp.flatten(tape.backward(loss));
    return loss.scalar();
}

} // namespace

TrainResult train_jacobi(const fem::Dataset& data, const TrainConfig& cfg) {
    cfg.validate();
    std::vector<JacobiSample> train(data.train.size()), val(data.val.size());
    parallel_for(train.size(), cfg.threads, [&](std::size_t i) { train[i] = prepare_jacobi_sample(data.train[i], cfg); });
    parallel_for(val.size(), cfg.threads, [&](std::size_t i) { val[i] = prepare_jacobi_sample(data.val[i], cfg); });
    TrainingProblem prob;
    prob.n_train = train.size();
    prob.n_val = val.size();
    prob.train_sample = [&](std::size_t i, const nn::ParamStore& p, std::vector<double>* g) {
        return jacobi_sample_loss(train[i], p, cfg.K, g);
    };
    prob.val_sample = [&](std::size_t i, const nn::ParamStore& p) { return jacobi_sample_loss(val[i], p, cfg.K, nullptr); };
    prob.batch_mean = false;
    return run_training(nn::jacobi_architecture(), prob, cfg);
}

double omega_co(const SparseMatrixCSR& a, double tol, std::size_t max_iter) {
    if (!a.is_square()) throw Error("omega_co: matrix must be square");
    const Index n = a.n();
    if (n == 0) throw Error("omega_co: empty matrix");
    const auto dg = diag(a);
    std::vector<double> s(n);
    for (Index i = 0; i < n; ++i) {
        if (!(dg[i] > 0.0)) throw Error("omega_co: diagonal entry " + std::to_string(i) + " is not positive");
        s[i] = 1.0 / std::sqrt(dg[i]);
    }
    auto apply_m = [&](const std::vector<double>& v) {
        std::vector<double> t(n);
        for (Index i = 0; i < n; ++i) t[i] = s[i] * v[i];
        auto r = spmv_csr(a, t);
        for (Index i = 0; i < n; ++i) r[i] *= s[i];
        return r;
    };
    auto power = [&](const std::function<std::vector<double>(const std::vector<double>&)>& op, const char* which) {
        Rng rng = Rng::derive(0, rng_stream::eigen_start, n);
        std::vector<double> v(n);
        double nv = 0.0;
        for (auto& x : v) {
            x = 1.0 + 0.1 * rng.uniform(-1.0, 1.0);
            nv += x * x;
        }
        nv = std::sqrt(nv);
        for (auto& x : v) x /= nv;
        double mu = 0.0, res = INFINITY;
        for (std::size_t it = 0; it < max_iter; ++it) {
            auto w = op(v);
            mu = 0.0;
            for (Index i = 0; i < n; ++i) mu += v[i] * w[i];
            res = 0.0;
            double nw = 0.0;
            for (Index i = 0; i < n; ++i) {
                res += (w[i] - mu * v[i]) * (w[i] - mu * v[i]);
                nw += w[i] * w[i];
            }
            res = std::sqrt(res);
            if (res <= tol * std::abs(mu)) return mu;
            nw = std::sqrt(nw);
            if (nw == 0.0) return 0.0;
            for (Index i = 0; i < n; ++i) v[i] = w[i] / nw;
        }
        throw NumericalError(std::string("omega_co: power iteration for ") + which + " did not converge after " +
                             std::to_string(max_iter) + " iterations (residual " + std::to_string(res) + ")");
    };
    const double lmax = power(apply_m, "lambda_max");
    const double shifted = power(
        [&](const std::vector<double>& v) {
            auto r = apply_m(v);
            for (Index i = 0; i < n; ++i) r[i] = lmax * v[i] - r[i];
            return r;
        },
        "lambda_min");
    const double lmin = lmax - shifted;
    return 2.0 / (lmin + lmax);
}

namespace {

EigResult sorted_result(const Eigen::VectorXcd& ev, std::size_t k) {
    std::vector<std::complex<double>> v(ev.data(), ev.data() + ev.size());
    std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
        const double ma = std::abs(a), mb = std::abs(b);
        if (ma != mb) return ma > mb;
        if (a.real() != b.real()) return a.real() > b.real();
        return a.imag() > b.imag();
    });
    EigResult r;
    for (std::size_t i = 0; i < std::min(k, v.size()); ++i) {
        r.values.push_back(std::abs(v[i]));
        r.real.push_back(v[i].real());
        r.imag.push_back(v[i].imag());
    }
    return r;
}

} // namespace

EigResult top_eigenvalues_dense(const Eigen::MatrixXd& b, std::size_t k) {
    if (b.rows() != b.cols()) throw Error("top_eigenvalues_dense: matrix must be square");
    Eigen::EigenSolver<Eigen::MatrixXd> es(b, false);
    if (es.info() != Eigen::Success) throw NumericalError("top_eigenvalues_dense: eigensolver failed");
    return sorted_result(es.eigenvalues(), k);
}

EigResult top_eigenvalues_power(const BlockOperator& op, Index n, const EigOptions& opt, std::uint64_t seed) {
    const auto k = std::min<std::size_t>(opt.k, n);
    const auto p = static_cast<Eigen::Index>(std::min<std::size_t>(k + 4, n));
    Rng rng = Rng::derive(seed, rng_stream::eigen_start, n);
    Eigen::MatrixXd q(static_cast<Eigen::Index>(n), p);
    for (Eigen::Index i = 0; i < q.size(); ++i) q.data()[i] = rng.uniform(-1.0, 1.0);
    q = Eigen::HouseholderQR<Eigen::MatrixXd>(q).householderQ() * Eigen::MatrixXd::Identity(q.rows(), p);
    Eigen::MatrixXd z(q.rows(), p);
    EigResult prev, cur;
    for (std::size_t it = 1; it <= opt.max_iter; ++it) {
        op(q, z);
        const Eigen::MatrixXd h = q.transpose() * z;
        Eigen::EigenSolver<Eigen::MatrixXd> es(h, false);
        cur = sorted_result(es.eigenvalues(), k);
        cur.iterations = it;
        bool done = it > 1;
        for (std::size_t i = 0; done && i < k; ++i)
            done = std::abs(cur.values[i] - prev.values[i]) <= opt.tol * std::max(cur.values[i], 1e-300);
        if (done) {
            cur.converged = true;
            return cur;
        }
        prev = cur;
        q = Eigen::HouseholderQR<Eigen::MatrixXd>(z).householderQ() * Eigen::MatrixXd::Identity(z.rows(), p);
    }
    cur.converged = false;
    return cur;
}

Eigen::MatrixXd projected_operator(const SparseMatrixCSR& a, std::span<const double> dinv, const Eigen::MatrixXd& v_hf) {
    if (dinv.size() != a.n() || static_cast<Index>(v_hf.rows()) != a.n())
        throw Error("projected_operator: dimensions of A, d and V_hf do not agree");
    Eigen::MatrixXd dav(v_hf.rows(), v_hf.cols());
    for (Index i = 0; i < a.n(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        dav.row(r).setZero();
        auto cols = a.row_cols(i);
        auto vals = a.row_values(i);
        for (std::size_t k = 0; k < cols.size(); ++k) dav.row(r) += vals[k] * v_hf.row(static_cast<Eigen::Index>(cols[k]));
        dav.row(r) *= dinv[i];
    }
    Eigen::MatrixXd b = -(v_hf.transpose() * dav);
    b.diagonal().array() += 1.0;
    return b;
}

EigResult eval_jacobi(const SparseMatrixCSR& a, std::span<const double> dinv, const Eigen::MatrixXd& v_hf,
                      const EigOptions& opt) {
    const auto dim = static_cast<Index>(v_hf.cols());
    const bool dense =
        opt.method == EigenMethod::dense || (opt.method == EigenMethod::automatic && dim <= opt.dense_limit);
    if (dense) return top_eigenvalues_dense(projected_operator(a, dinv, v_hf), opt.k);
    if (dinv.size() != a.n() || static_cast<Index>(v_hf.rows()) != a.n())
        throw Error("eval_jacobi: dimensions of A, d and V_hf do not agree");
    const BlockOperator op = [&](const Eigen::MatrixXd& in, Eigen::MatrixXd& out) {
        const Eigen::MatrixXd u = v_hf * in;
        Eigen::MatrixXd w(u.rows(), u.cols());
        for (Index i = 0; i < a.n(); ++i) {
            const auto r = static_cast<Eigen::Index>(i);
            w.row(r).setZero();
            auto cols = a.row_cols(i);
            auto vals = a.row_values(i);
            for (std::size_t k = 0; k < cols.size(); ++k) w.row(r) += vals[k] * u.row(static_cast<Eigen::Index>(cols[k]));
            w.row(r) *= dinv[i];
        }
        out = in - v_hf.transpose() * w;
    };
    return top_eigenvalues_power(op, dim, opt);
}

double MatrixReport::max_eig(const std::string& method) const {
    for (const auto& m : methods)
        if (m.method == method) return m.eig.values.empty() ? 0.0 : m.eig.values.front();
    throw Error("report has no method '" + method + "'");
}

EvalReport compare_methods(const std::vector<fem::ProblemInstance>& test, const nn::ParamStore* model,
                           std::optional<double> omega_override, const EigOptions& opt, std::size_t threads) {
    if (!model && !omega_override) throw Error("compare_methods: need a model or an omega override");
    EvalReport rep;
    rep.options = opt;
    rep.matrices.resize(test.size());
    parallel_for(test.size(), threads, [&](std::size_t t) {
        const auto& p = test[t];
        const auto basis = fem::dst_basis(p.grid_nx, p.grid_ny);
        const auto dg = diag(p.a);
        auto scaled = [&](double w) {
            std::vector<double> d(dg.size());
            for (std::size_t i = 0; i < d.size(); ++i) d[i] = w / dg[i];
            return d;
        };
        const auto learned = model ? nn::jacobi_model_forward(p.a, *model) : scaled(*omega_override);
        const double wco = omega_co(p.a);
        auto& mr = rep.matrices[t];
        mr.matrix_id = p.meta.index;
        mr.band_width = p.meta.beta;
        mr.band_x = p.meta.band_x;
        mr.methods.push_back({method_learned, eval_jacobi(p.a, learned, basis.hf, opt)});
        mr.methods.push_back({method_omega_1, eval_jacobi(p.a, scaled(1.0), basis.hf, opt)});
        mr.methods.push_back({method_omega_2_3, eval_jacobi(p.a, scaled(2.0 / 3.0), basis.hf, opt)});
        mr.methods.push_back({method_omega_co, eval_jacobi(p.a, scaled(wco), basis.hf, opt)});
        double best = INFINITY;
        for (const auto& m : mr.methods) {
            const double v = m.eig.values.empty() ? 0.0 : m.eig.values.front();
            if (v < best) {
                best = v;
                mr.winner = m.method;
            }
        }
    });
    std::size_t b1 = 0, b23 = 0, bco = 0;
    for (const auto& mr : rep.matrices) {
        const double l = mr.max_eig(method_learned);
        b1 += l < mr.max_eig(method_omega_1);
        b23 += l < mr.max_eig(method_omega_2_3);
        bco += l < mr.max_eig(method_omega_co);
        for (const auto& m : mr.methods) rep.unconverged += !m.eig.converged;
    }
    const double n = static_cast<double>(std::max<std::size_t>(test.size(), 1));
    rep.frac_beats_omega_1 = static_cast<double>(b1) / n;
    rep.frac_beats_omega_2_3 = static_cast<double>(b23) / n;
    rep.frac_beats_omega_co = static_cast<double>(bco) / n;
    return rep;
}

void write_eval_report(const EvalReport& r, const std::filesystem::path& dir, bool svg, std::size_t bins) {
    const char* baselines[3] = {method_omega_1, method_omega_2_3, method_omega_co};

    io::CsvWriter eig({"matrix_id", "method", "k", "eigenvalue"});
    io::CsvWriter win({"matrix_id", "band_width", "band_x", "winner"});
    io::CsvWriter mx({"matrix_id", "band_width", "band_x", "learned", "omega_1", "omega_2_3", "omega_co", "converged"});
    for (const auto& m : r.matrices) {
        const auto id = std::to_string(m.matrix_id);
        bool conv = true;
        for (const auto& me : m.methods) {
            conv = conv && me.eig.converged;
            for (std::size_t k = 0; k < me.eig.values.size(); ++k)
                eig.add_row({id, me.method, std::to_string(k + 1), io::format_double(me.eig.values[k])});
        }
        win.add_row({id, io::format_double(m.band_width), io::format_double(m.band_x), m.winner});
        mx.add_row({id, io::format_double(m.band_width), io::format_double(m.band_x),
                    io::format_double(m.max_eig(method_learned)), io::format_double(m.max_eig(method_omega_1)),
                    io::format_double(m.max_eig(method_omega_2_3)), io::format_double(m.max_eig(method_omega_co)),
                    conv ? "1" : "0"});
    }
    eig.save(dir / "eig_report.csv");
    win.save(dir / "winners.csv");
    mx.save(dir / "max_eig.csv");

    // histograms of (baseline - learned) max eigenvalue; positive means the learned diagonal wins
    io::CsvWriter hist({"baseline", "baseline_minus_learned_lo", "baseline_minus_learned_hi", "count"});
    std::vector<svg::Histogram> panels;
    for (const char* b : baselines) {
        std::vector<double> diffs;
        for (const auto& m : r.matrices) diffs.push_back(m.max_eig(b) - m.max_eig(method_learned));
        svg::Histogram h;
        h.label = std::string(b) + " - learned";
        double lo = 0.0, hi = 0.0;
        if (!diffs.empty()) {
            lo = *std::min_element(diffs.begin(), diffs.end());
            hi = *std::max_element(diffs.begin(), diffs.end());
        }
        lo = std::min(lo, 0.0);
        hi = std::max(hi, 0.0);
        if (hi == lo) hi = lo + 1e-12;
        for (std::size_t k = 0; k <= bins; ++k)
            h.edges.push_back(k == bins ? hi : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(bins));
        h.counts.assign(bins, 0);
        for (double d : diffs) {
            auto k = static_cast<std::size_t>((d - lo) / (hi - lo) * static_cast<double>(bins));
            ++h.counts[std::min(k, bins - 1)];
        }
        for (std::size_t k = 0; k < bins; ++k)
            hist.add_row({b, io::format_double(h.edges[k]), io::format_double(h.edges[k + 1]), std::to_string(h.counts[k])});
        panels.push_back(std::move(h));
    }
    hist.save(dir / "diff_histogram.csv");

    const char* method_name = r.options.method == EigenMethod::dense   ? "dense"
                              : r.options.method == EigenMethod::power ? "power"
                                                                       : "automatic";
    const json summary = {
        {"num_matrices", r.matrices.size()},
        {"frac_learned_beats_omega_1", r.frac_beats_omega_1},
        {"frac_learned_beats_omega_2_3", r.frac_beats_omega_2_3},
        {"frac_learned_beats_omega_co", r.frac_beats_omega_co},
        {"difference", "baseline max eigenvalue minus learned max eigenvalue"},
        {"eigenvalue", "modulus, largest first, of I - V_hf^T D^-1 A V_hf"},
        {"eigen_options",
         {{"k", r.options.k},
          {"tol", r.options.tol},
          {"max_iter", r.options.max_iter},
          {"method", method_name},
          {"dense_limit", r.options.dense_limit}}},
        {"unconverged", r.unconverged},
    };
    io::write_text(dir / "summary.json", summary.dump(1) + "\n");
    if (svg)
        io::write_text(dir / "diff_histogram.svg",
                       svg::histograms("Max projected eigenvalue: baseline minus learned", panels, "difference"));
}

// ---------------------------------------------------------------------------
// Diffusion coefficients

Var diffusion_loss(Var pred, const Tensor& target) {
    if (pred.rows() != target.rows() || pred.cols() != target.cols() || target.cols() != 2)
        throw Error("diffusion_loss: prediction and target must both be n x 2");
    const Var d = ad::sub(pred, pred.tape->constant(target));
    return ad::scale(ad::sum(ad::mul(d, d)), 1.0 / (2.0 * static_cast<double>(target.rows())));
}

double diffusion_loss_value(const Tensor& pred, const Tensor& target) {
    ad::Tape tape;
    return diffusion_loss(tape.constant(pred), target).scalar();
}

DiffusionSample prepare_diffusion_sample(const fem::ProblemInstance& p) {
    if (p.alpha.size() != p.a.n() || p.beta.size() != p.a.n())
        throw Error("prepare_diffusion_sample: instance " + std::to_string(p.meta.index) + " has no targets");
    DiffusionSample s;
    s.inputs = nn::diffusion_inputs(p.a, p.x, p.y, p.h());
    s.target.resize(static_cast<Eigen::Index>(p.a.n()), 2);
    for (Index i = 0; i < p.a.n(); ++i) {
        s.target(static_cast<Eigen::Index>(i), 0) = p.alpha[i];
        s.target(static_cast<Eigen::Index>(i), 1) = p.beta[i];
    }
    return s;
}

namespace {

double diffusion_sample_loss(const DiffusionSample& s, const nn::ParamStore& params, std::vector<double>* grad) {
    ad::Tape tape;
    nn::BoundParams bp(tape, params, grad != nullptr);
    const Var loss = diffusion_loss(nn::diffusion_model_forward(bp, s.inputs), s.target);
    if (grad) *grad = bp.flatten(tape.backward(loss));
    return loss.scalar();
}

} // namespace

TrainResult train_diffusion(const fem::Dataset& data, const TrainConfig& cfg) {
    cfg.validate();
    std::vector<DiffusionSample> train(data.train.size()), val(data.val.size());
    parallel_for(train.size(), cfg.threads, [&](std::size_t i) { train[i] = prepare_diffusion_sample(data.train[i]); });
    parallel_for(val.size(), cfg.threads, [&](std::size_t i) { val[i] = prepare_diffusion_sample(data.val[i]); });
    TrainingProblem prob;
    prob.n_train = train.size();
    prob.n_val = val.size();
    prob.train_sample = [&](std::size_t i, const nn::ParamStore& p, std::vector<double>* g) {
        return diffusion_sample_loss(train[i], p, g);
    };
    prob.val_sample = [&](std::size_t i, const nn::ParamStore& p) { return diffusion_sample_loss(val[i], p, nullptr); };
    prob.batch_mean = true;
    return run_training(nn::diffusion_architecture(cfg.leaky_slope), prob, cfg);
}

std::vector<FreqSweepRow> freq_sweep_eval(const nn::ParamStore& model, int theta_grid_max, Index n,
                                          int trained_theta_max, std::size_t threads) {
    if (theta_grid_max < 0) throw Error("freq_sweep_eval: theta_grid_max must be non-negative");
    const auto side = static_cast<std::size_t>(theta_grid_max + 1);
    std::vector<FreqSweepRow> rows(side * side);
    parallel_for(rows.size(), threads, [&](std::size_t k) {
        const int tx = static_cast<int>(k / side), ty = static_cast<int>(k % side);
        const auto p = fem::assemble_diffusion_periodic(n, tx, ty, tx, ty);
        const auto s = prepare_diffusion_sample(p);
        const double mse = diffusion_loss_value(nn::diffusion_model_forward(s.inputs, model), s.target);
        rows[k] = {tx, ty, mse, tx <= trained_theta_max && ty <= trained_theta_max};
    });
    return rows;
}

void write_freq_sweep(const std::vector<FreqSweepRow>& rows, const std::filesystem::path& path) {
    io::CsvWriter w({"theta_x", "theta_y", "mse", "in_training_region"});
    for (const auto& r : rows)
        w.add_row({std::to_string(r.theta_x), std::to_string(r.theta_y), io::format_double(r.mse),
                   r.in_training_region ? "1" : "0"});
    w.save(path);
}

StencilProbeResult stencil_probe(const nn::ParamStore& model, Index n) {
    const auto p = fem::assemble_diffusion_periodic(
        n, [](double, double) { return 0.001; }, [](double, double) { return 0.8; });
    const auto in = nn::diffusion_inputs(p.a, p.x, p.y, p.h());
    const Tensor out = nn::diffusion_model_forward(in, model);
    return {out.col(0).mean(), out.col(1).mean()};
}

} // namespace gnnla::train
