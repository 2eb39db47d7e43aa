#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Eigenvalues>
#include <json.hpp>

#include "gnnla/amg.hpp"
#include "gnnla/dataset.hpp"
#include "gnnla/error.hpp"
#include "gnnla/fem.hpp"
#include "gnnla/io.hpp"
#include "gnnla/kernels.hpp"
#include "gnnla/nn.hpp"
#include "gnnla/parallel.hpp"
#include "gnnla/run_config.hpp"
#include "gnnla/sparse.hpp"
#include "gnnla/svg.hpp"
#include "gnnla/train.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace gnnla;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_numerical = 1;
constexpr int exit_usage = 2;

struct Globals {
    std::size_t threads = 1;
    bool svg = false;
};

// ---------------------------------------------------------------------------
// kernel

struct KernelArgs {
    std::string name;
    std::string matrix;
    std::string demo;
    Index size = 32;
    std::string vector;
    std::string rhs;
    double omega = 2.0 / 3.0;
    std::size_t iters = 10;
    std::size_t n = 10;
    std::optional<double> lambda_min, lambda_max;
    double tau = 0.25;
    double theta = 0.25;
    double tol = 1e-10;
    std::size_t max_print = 64;
};

const std::vector<std::string> kernel_names = {"spmv",       "spmv-no-self", "weighted-norm", "jacobi",  "chebyshev",
                                               "power",      "soc-sa",       "soc-classic",   "soc-abs"};

SparseMatrixCSR demo_matrix(const std::string& name, Index size) {
    if (name == "identity") return SparseMatrixCSR::identity(size);
    if (name == "tridiag") {
        std::vector<Triplet> t;
        for (Index i = 0; i < size; ++i) {
            if (i > 0) t.push_back({i, i - 1, -1.0});
            t.push_back({i, i, 2.0});
            if (i + 1 < size) t.push_back({i, i + 1, -1.0});
        }
        return SparseMatrixCSR::from_triplets(size, size, t);
    }
    if (name == "stencil")
        return fem::assemble_diffusion_periodic(
                   size, [](double, double) { return 0.001; }, [](double, double) { return 0.8; })
            .a;
    throw Error("unknown demo matrix '" + name + "' (expected identity, tridiag or stencil)");
}

void print_vector(const std::string& label, const std::vector<double>& v, std::size_t max_print) {
    std::cout << label << " (" << v.size() << "):";
    for (std::size_t i = 0; i < std::min(v.size(), max_print); ++i) std::cout << ' ' << io::format_double(v[i]);
    if (v.size() > max_print) std::cout << " ...";
    std::cout << '\n';
}

void print_entries(const std::string& label, const SparseMatrixCSR& s, std::size_t max_print) {
    std::cout << label << " (i j value):\n";
    std::size_t shown = 0;
    for (Index i = 0; i < s.rows(); ++i) {
        auto cols = s.row_cols(i);
        auto vals = s.row_values(i);
        for (std::size_t k = 0; k < cols.size(); ++k) {
            if (shown++ == max_print) {
                std::cout << "  ...\n";
                return;
            }
            std::cout << "  " << i << ' ' << cols[k] << ' ' << io::format_double(vals[k]) << '\n';
        }
    }
}

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

double max_abs(const std::vector<double>& a) {
    double m = 0.0;
    for (double v : a) m = std::max(m, std::abs(v));
    return m;
}

// loop versions of the strength measures, entry by entry on A's pattern
SparseMatrixCSR loop_soc(const SparseMatrixCSR& a, const std::string& name, double param) {
    const auto d = diag(a);
    std::vector<Triplet> t;
    for (Index i = 0; i < a.rows(); ++i) {
        auto cols = a.row_cols(i);
        auto vals = a.row_values(i);
        double vmax = -INFINITY, amax = 0.0;
        for (std::size_t k = 0; k < cols.size(); ++k)
            if (cols[k] != i) {
                vmax = std::max(vmax, -vals[k]);
                amax = std::max(amax, std::abs(vals[k]));
            }
        if (name == "soc-classic" && !(vmax > 0.0))
            throw NumericalError("row " + std::to_string(i) + " has no negative off-diagonal entry");
        for (std::size_t k = 0; k < cols.size(); ++k) {
            const Index j = cols[k];
            double s = 0.0;
            if (name == "soc-sa") s = vals[k] * vals[k] / (d[i] * d[j]);
            else if (name == "soc-classic") s = (-vals[k] / vmax - param > 0.0) ? 1.0 : 0.0;
            else s = (j != i && amax > 0.0 && std::abs(vals[k]) >= param * amax) ? 1.0 : 0.0;
            t.push_back({i, j, s});
        }
    }
    return SparseMatrixCSR::from_triplets(a.rows(), a.cols(), t);
}

int run_kernel(const KernelArgs& k) {
    if (std::find(kernel_names.begin(), kernel_names.end(), k.name) == kernel_names.end()) {
        std::cerr << "error: unknown kernel '" << k.name << "'; available:";
        for (const auto& n : kernel_names) std::cerr << ' ' << n;
        std::cerr << '\n';
        return exit_usage;
    }
    if (k.matrix.empty() == k.demo.empty()) throw Error("give exactly one of --matrix and --demo");
    const SparseMatrixCSR a = k.matrix.empty() ? demo_matrix(k.demo, k.size) : read_matrix_market(k.matrix);
    const Index n = a.rows();
    auto vec_or = [&](const std::string& path, double fill) {
        if (path.empty()) return std::vector<double>(n, fill);
        auto v = io::read_vector(path);
        if (static_cast<Index>(v.size()) != n)
            throw Error(path + ": expected " + std::to_string(n) + " values, found " + std::to_string(v.size()));
        return v;
    };

    std::cout << "kernel " << k.name << " on " << a.rows() << " x " << a.cols() << " matrix, " << a.nnz()
              << " stored entries\n";
    double discrepancy = 0.0, scale = 1.0;
    if (k.name.rfind("soc-", 0) == 0) {
        const double param = k.name == "soc-abs" ? k.theta : k.tau;
        const SparseMatrixCSR g = k.name == "soc-sa"        ? amg::soc_sa(a)
                                  : k.name == "soc-classic" ? amg::soc_classic(a, k.tau)
                                                            : amg::soc_abs(a, k.theta);
        const SparseMatrixCSR o = loop_soc(a, k.name, param);
        print_entries("gnn", g, k.max_print);
        print_entries("oracle", o, k.max_print);
        const Eigen::MatrixXd dg = g.to_dense(), dor = o.to_dense();
        discrepancy = (dg - dor).cwiseAbs().maxCoeff();
        scale = std::max(dor.cwiseAbs().maxCoeff(), 1e-300);
        if (k.name != "soc-sa") {
            std::size_t strong = 0;
            for (double v : g.values()) strong += v != 0.0;
            std::cout << "strong connections: " << strong << '\n';
        }
    } else if (k.name == "weighted-norm") {
        const auto x = vec_or(k.vector, 1.0);
        const double g = kernels::gnn_weighted_norm(a, x), o = kernels::reference::weighted_norm(a, x);
        std::cout << "gnn: " << io::format_double(g) << "\noracle: " << io::format_double(o) << '\n';
        discrepancy = std::abs(g - o);
        scale = std::max(std::abs(o), 1e-300);
    } else if (k.name == "power") {
        const auto b0 = vec_or(k.vector, 1.0);
        const auto g = kernels::gnn_power_method(a, b0, k.iters);
        const auto o = kernels::reference::power_method(a, b0, k.iters);
        std::cout << "gnn lambda_max: " << io::format_double(g.lambda_max)
                  << "\noracle lambda_max: " << io::format_double(o.lambda_max) << '\n';
        print_vector("gnn vector", g.vector, k.max_print);
        print_vector("oracle vector", o.vector, k.max_print);
        discrepancy = std::max(std::abs(g.lambda_max - o.lambda_max) / std::max(std::abs(o.lambda_max), 1e-300),
                               max_diff(g.vector, o.vector));
    } else {
        std::vector<double> g, o;
        if (k.name == "spmv" || k.name == "spmv-no-self") {
            const auto x = vec_or(k.vector, 1.0);
            g = kernels::gnn_spmv(a, x, k.name == "spmv");
            o = spmv_csr(a, x);
        } else {
            const auto b = vec_or(k.rhs, 1.0);
            const auto x0 = vec_or(k.vector, 0.0);
            if (k.name == "jacobi") {
                g = kernels::gnn_jacobi(a, b, x0, k.omega, k.iters);
                o = kernels::reference::jacobi(a, b, x0, k.omega, k.iters);
            } else {
                double lmin = 0.0, lmax = 0.0;
                if (!k.lambda_min || !k.lambda_max) {
                    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a.to_dense(), Eigen::EigenvaluesOnly);
                    lmin = es.eigenvalues().minCoeff();
                    lmax = es.eigenvalues().maxCoeff();
                }
                lmin = k.lambda_min.value_or(lmin);
                lmax = k.lambda_max.value_or(lmax);
                std::cout << "lambda_min " << io::format_double(lmin) << ", lambda_max " << io::format_double(lmax)
                          << ", N = " << k.n << '\n';
                g = kernels::gnn_chebyshev(a, b, x0, lmin, lmax, k.n);
                o = kernels::reference::chebyshev(a, b, x0, lmin, lmax, k.n);
            }
        }
        print_vector("gnn", g, k.max_print);
        print_vector("oracle", o, k.max_print);
        discrepancy = max_diff(g, o);
        scale = std::max(max_abs(o), 1e-300);
    }
    const double rel = discrepancy / std::max(scale, 1.0);
    std::cout << "max discrepancy: " << io::format_double(discrepancy) << " (relative " << io::format_double(rel)
              << ", tolerance " << io::format_double(k.tol) << ")\n";
    return rel <= k.tol ? exit_ok : exit_numerical;
}

// ---------------------------------------------------------------------------
// config handling

json read_config_doc(const std::string& path) {
    try {
        return json::parse(io::read_text(path));
    } catch (const json::parse_error& e) {
        throw Error("config " + path + ": invalid JSON: " + e.what());
    }
}

void ensure_object(json& doc, const char* key) {
    if (!doc.contains(key)) doc[key] = json::object();
}

void check_kind(const RunConfig& c, const std::string& kind) {
    if (to_string(c.kind) != kind)
        throw Error("config describes a " + to_string(c.kind) + " run but the command asked for " + kind);
}

// ---------------------------------------------------------------------------
// gen-data

int run_gen_data(const std::string& config, const std::string& out, std::optional<std::uint64_t> seed, bool force,
                 const Globals& g) {
    json doc = read_config_doc(config);
    if (seed) doc["seed"] = *seed;
    if (!out.empty()) {
        ensure_object(doc, "dataset");
        doc["dataset"]["dir"] = out;
    }
    const RunConfig c = parse_run_config(doc);
    const fem::Dataset d = c.kind == ProblemKind::jacobi ? fem::gen_jacobi_dataset(c.jacobi_data, g.threads)
                                                         : fem::gen_diffusion_dataset(c.diffusion_data, g.threads);
    dataset::save_dataset(d, c.data_dir, c.dataset_json(), force);
    std::cout << "wrote " << d.train.size() + d.val.size() + d.test.size() << " " << to_string(c.kind)
              << " instances (" << d.train.size() << "/" << d.val.size() << "/" << d.test.size() << ") to "
              << c.data_dir.string() << '\n';
    return exit_ok;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
    std::string kind;
    std::string config;
    std::string data;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> epochs;
    std::optional<double> lr;
    std::optional<std::size_t> batch_size;
    std::optional<std::size_t> patience;
};

int run_train(const TrainArgs& a, const Globals& g) {
    json doc = read_config_doc(a.config);
    if (a.seed) doc["seed"] = *a.seed;
    if (!a.out.empty()) doc["output_dir"] = a.out;
    if (!a.data.empty()) {
        ensure_object(doc, "dataset");
        doc["dataset"]["dir"] = a.data;
    }
    if (a.epochs || a.lr || a.batch_size || a.patience) ensure_object(doc, "train");
    if (a.epochs) doc["train"]["epochs_max"] = *a.epochs;
    if (a.lr) doc["train"]["lr"] = *a.lr;
    if (a.batch_size) doc["train"]["batch_size"] = *a.batch_size;
    if (a.patience) doc["train"]["patience"] = *a.patience;
    RunConfig c = parse_run_config(doc);
    check_kind(c, a.kind);
    c.train.threads = g.threads;
    c.train.on_epoch = [](std::size_t e, double tr, double va) {
        std::fprintf(stderr, "epoch %3zu  train %.6e  val %.6e\n", e, tr, va);
    };

    const fem::Dataset data = dataset::load_dataset(c.data_dir);
    const auto result = c.kind == ProblemKind::jacobi ? train::train_jacobi(data, c.train)
                                                      : train::train_diffusion(data, c.train);
    fs::create_directories(c.output_dir);
    nn::save_checkpoint(result.checkpoint, c.output_dir / "checkpoint.json");
    train::write_loss_curve(result.curve, c.output_dir / "loss_curve.csv");
    io::write_text(c.output_dir / "config.json", c.to_json().dump(1) + "\n");
    if (g.svg) {
        std::vector<double> epochs(result.curve.train.size());
        for (std::size_t e = 0; e < epochs.size(); ++e) epochs[e] = static_cast<double>(e);
        io::write_text(c.output_dir / "loss_curve.svg",
                       svg::line_chart("Loss per epoch", {{"train", epochs, result.curve.train}, {"validation", epochs, result.curve.val}},
                                       "epoch", "loss", true));
    }
    const auto& rec = result.checkpoint.training;
    std::cout << "trained " << to_string(c.kind) << " model: " << rec.epochs_run << " epochs, best validation loss "
              << io::format_double(rec.best_val_loss) << " at epoch " << rec.best_epoch << "\nwrote "
              << (c.output_dir / "checkpoint.json").string() << '\n';
    return exit_ok;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
    std::string kind;
    std::string checkpoint;
    std::string data;
    std::string config;
    std::string out;
    std::string split = "test";
    std::optional<double> omega;
};

const std::vector<fem::ProblemInstance>& pick_split(const fem::Dataset& d, const std::string& s) {
    if (s == "train") return d.train;
    if (s == "val") return d.val;
    if (s == "test") return d.test;
    throw Error("unknown split '" + s + "' (expected train, val or test)");
}

int run_eval(const EvalArgs& a, const Globals& g) {
    RunConfig c;
    if (!a.config.empty()) c = load_run_config(a.config);
    fs::path out = a.out.empty() ? (a.checkpoint.empty() ? fs::path(".") : fs::path(a.checkpoint).parent_path()) : fs::path(a.out);
    if (out.empty()) out = ".";
    fs::create_directories(out);

    const fem::Dataset data = dataset::load_dataset(a.data);
    const auto& split = pick_split(data, a.split);
    const auto manifest = dataset::load_manifest(a.data);
    if (manifest.value("kind", "") != a.kind)
        throw Error("dataset " + a.data + " holds " + manifest.value("kind", std::string("unknown")) + " instances, not " + a.kind);

    std::optional<nn::Checkpoint> ckpt;
    if (!a.checkpoint.empty()) {
        ckpt = nn::load_checkpoint(a.checkpoint);
        if (ckpt->params.architecture().kind != a.kind)
            throw Error("checkpoint " + a.checkpoint + " holds a " + ckpt->params.architecture().kind +
                        " model, not " + a.kind);
    }

    if (a.kind == "jacobi") {
        if (!ckpt && !a.omega) throw Error("eval jacobi needs --checkpoint or --omega");
        if (ckpt && a.omega) throw Error("--checkpoint and --omega are mutually exclusive");
        const auto rep = train::compare_methods(split, ckpt ? &ckpt->params : nullptr, a.omega, c.eval.eig, g.threads);
        train::write_eval_report(rep, out, g.svg, c.eval.bins);
        std::cout << "evaluated " << rep.matrices.size() << " matrices\n"
                  << "learned beats omega=1 on " << io::format_double(100 * rep.frac_beats_omega_1) << "%\n"
                  << "learned beats omega=2/3 on " << io::format_double(100 * rep.frac_beats_omega_2_3) << "%\n"
                  << "learned beats omega_co on " << io::format_double(100 * rep.frac_beats_omega_co) << "%\n";
        if (rep.unconverged > 0) std::cout << rep.unconverged << " eigenvalue runs did not converge\n";
        std::cout << "wrote reports to " << out.string() << '\n';
        return exit_ok;
    }

    if (a.kind != "diffusion") throw Error("unknown problem kind '" + a.kind + "'");
    if (!ckpt) throw Error("eval diffusion needs --checkpoint");
    if (a.omega) throw Error("--omega applies to jacobi evaluation only");
    const auto& model = ckpt->params;
    std::vector<double> mse(split.size());
    parallel_for(split.size(), g.threads, [&](std::size_t i) {
        const auto s = train::prepare_diffusion_sample(split[i]);
        mse[i] = train::diffusion_loss_value(nn::diffusion_model_forward(s.inputs, model), s.target);
    });
    io::CsvWriter per({"matrix_id", "n", "mse"});
    double mean = 0.0;
    for (std::size_t i = 0; i < split.size(); ++i) {
        per.add_row({std::to_string(split[i].meta.index), std::to_string(split[i].meta.n), io::format_double(mse[i])});
        mean += mse[i] / static_cast<double>(split.size());
    }
    per.save(out / "eval_mse.csv");

    const int trained_theta = manifest.value("theta_max", 4);
    const auto rows = train::freq_sweep_eval(model, c.eval.theta_grid_max, c.eval.sweep_n, trained_theta, g.threads);
    train::write_freq_sweep(rows, out / "freq_sweep.csv");
    const auto probe = train::stencil_probe(model, c.eval.probe_n);
    double in_sum = 0.0, out_sum = 0.0;
    std::size_t in_n = 0, out_n = 0;
    for (const auto& r : rows) {
        if (r.in_training_region) {
            in_sum += r.mse;
            ++in_n;
        } else {
            out_sum += r.mse;
            ++out_n;
        }
    }
    const json summary = {{"split", a.split},
                          {"num_matrices", split.size()},
                          {"mean_mse", mean},
                          {"freq_sweep",
                           {{"n", c.eval.sweep_n},
                            {"theta_grid_max", c.eval.theta_grid_max},
                            {"trained_theta_max", trained_theta},
                            {"mean_mse_in_training_region", in_n ? in_sum / static_cast<double>(in_n) : 0.0},
                            {"mean_mse_outside", out_n ? out_sum / static_cast<double>(out_n) : 0.0}}},
                          {"stencil_probe",
                           {{"n", c.eval.probe_n},
                            {"target_alpha", 0.001},
                            {"target_beta", 0.8},
                            {"alpha", probe.alpha},
                            {"beta", probe.beta}}}};
    io::write_text(out / "summary.json", summary.dump(1) + "\n");
    if (g.svg) {
        // mean MSE against the larger of the two frequencies
        std::vector<double> x, y;
        for (int t = 0; t <= c.eval.theta_grid_max; ++t) {
            double s = 0.0;
            int cnt = 0;
            for (const auto& r : rows)
                if (std::max(r.theta_x, r.theta_y) == t) {
                    s += r.mse;
                    ++cnt;
                }
            x.push_back(t);
            y.push_back(s / cnt);
        }
        io::write_text(out / "freq_sweep.svg",
                       svg::line_chart("Frequency sweep", {{"mean MSE", x, y}}, "max(theta_x, theta_y)", "MSE", true));
    }
    std::cout << "mean " << a.split << " MSE " << io::format_double(mean) << " over " << split.size()
              << " instances\nstencil probe: alpha " << io::format_double(probe.alpha) << ", beta "
              << io::format_double(probe.beta) << "\nwrote reports to " << out.string() << '\n';
    return exit_ok;
}

// ---------------------------------------------------------------------------
// demo-amg

struct AmgArgs {
    std::string matrix;
    Index size = 63;
    amg::TwoLevelOptions opt;
    std::string out = ".";
};

int run_demo_amg(const AmgArgs& a, const Globals& g) {
    const SparseMatrixCSR m = a.matrix.empty() ? demo_matrix("tridiag", a.size) : read_matrix_market(a.matrix);
    // b = A * 1 so that the solution is known
    const auto b = spmv_csr(m, std::vector<double>(m.rows(), 1.0));
    const auto tl = amg::two_level_solve(m, b, a.opt);
    const std::size_t sweeps_per_iter = 2 * a.opt.pre_sweeps;
    const auto jac = amg::jacobi_residual_history(m, b, a.opt.omega, sweeps_per_iter * a.opt.iters);

    io::CsvWriter w({"iteration", "jacobi_sweeps", "two_level", "jacobi"});
    std::vector<double> it, r2, rj;
    for (std::size_t i = 0; i < tl.residual_history.size(); ++i) {
        const std::size_t s = i * sweeps_per_iter;
        const double j = s < jac.size() ? jac[s] : jac.back();
        w.add_row({std::to_string(i), std::to_string(s), io::format_double(tl.residual_history[i]), io::format_double(j)});
        it.push_back(static_cast<double>(i));
        r2.push_back(tl.residual_history[i]);
        rj.push_back(j);
    }
    fs::create_directories(a.out);
    w.save(fs::path(a.out) / "amg_residuals.csv");
    if (g.svg)
        io::write_text(fs::path(a.out) / "amg_residuals.svg",
                       svg::line_chart("Relative residual", {{"two-level", it, r2}, {"Jacobi", it, rj}}, "iteration",
                                       "residual", true));
    std::cout << "n = " << m.rows() << ", coarse points " << tl.cf.num_coarse << ", P nnz " << tl.p.nnz() << '\n'
              << "two-level residual after " << tl.residual_history.size() - 1
              << " iterations: " << io::format_double(tl.residual_history.back()) << '\n'
              << "Jacobi residual after " << jac.size() - 1 << " sweeps: " << io::format_double(jac.back()) << '\n'
              << "wrote " << (fs::path(a.out) / "amg_residuals.csv").string() << '\n';
    return exit_ok;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sparse linear-algebra kernels as graph networks, and learned relaxation parameters"};
    app.require_subcommand(1);
    // let --threads and --svg follow the subcommand as well
    app.fallthrough();
    Globals g;
    std::size_t threads_opt = 1;
    app.add_option("--threads", threads_opt, "worker threads (0 = all cores); results do not depend on it")
        ->capture_default_str();
    app.add_flag("--svg", g.svg, "also write SVG plots next to the CSV output");

    KernelArgs ka;
    auto* kernel = app.add_subcommand("kernel", "run a graph-network kernel next to its direct implementation");
    kernel->add_option("name", ka.name, "spmv, spmv-no-self, weighted-norm, jacobi, chebyshev, power, soc-sa, soc-classic, soc-abs")
        ->required();
    kernel->add_option("--matrix", ka.matrix, "Matrix Market file");
    kernel->add_option("--demo", ka.demo, "built-in matrix: identity, tridiag or stencil");
    kernel->add_option("--size", ka.size, "size of the demo matrix (stencil: points per side)")->capture_default_str();
    kernel->add_option("--vector", ka.vector, "x for spmv/weighted-norm, x0 for jacobi/chebyshev, b0 for power (CSV)");
    kernel->add_option("--rhs", ka.rhs, "right-hand side b for jacobi/chebyshev (CSV, default ones)");
    kernel->add_option("--omega", ka.omega, "Jacobi weight")->capture_default_str();
    kernel->add_option("--iters", ka.iters, "Jacobi sweeps or power iterations")->capture_default_str();
    kernel->add_option("--n", ka.n, "Chebyshev iterations")->capture_default_str();
    kernel->add_option("--lambda-min", ka.lambda_min, "Chebyshev lower eigenvalue bound (default exact)");
    kernel->add_option("--lambda-max", ka.lambda_max, "Chebyshev upper eigenvalue bound (default exact)");
    kernel->add_option("--tau", ka.tau, "classic strength threshold")->capture_default_str();
    kernel->add_option("--theta", ka.theta, "absolute strength threshold")->capture_default_str();
    kernel->add_option("--tol", ka.tol, "relative discrepancy tolerance")->capture_default_str();
    kernel->add_option("--max-print", ka.max_print, "entries printed per result")->capture_default_str();

    std::string gd_config, gd_out;
    std::optional<std::uint64_t> gd_seed;
    bool gd_force = false;
    auto* gen = app.add_subcommand("gen-data", "generate a dataset directory from a run config");
    gen->add_option("--config", gd_config, "run config JSON")->required();
    gen->add_option("--out", gd_out, "dataset directory (overrides dataset.dir)");
    gen->add_option("--seed", gd_seed, "overrides the config seed");
    gen->add_flag("--force", gd_force, "replace an existing dataset directory");

    TrainArgs ta;
    auto* tr = app.add_subcommand("train", "train a model on a generated dataset");
    tr->add_option("kind", ta.kind, "jacobi or diffusion")->required()->check(CLI::IsMember({"jacobi", "diffusion"}));
    tr->add_option("--config", ta.config, "run config JSON")->required();
    tr->add_option("--data", ta.data, "dataset directory (overrides dataset.dir)");
    tr->add_option("--out", ta.out, "output directory (overrides output_dir)");
    tr->add_option("--seed", ta.seed, "overrides the config seed");
    tr->add_option("--epochs", ta.epochs, "overrides train.epochs_max");
    tr->add_option("--lr", ta.lr, "overrides train.lr");
    tr->add_option("--batch-size", ta.batch_size, "overrides train.batch_size");
    tr->add_option("--patience", ta.patience, "overrides train.patience");

    EvalArgs ea;
    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint (or a fixed omega) on a dataset split");
    ev->add_option("kind", ea.kind, "jacobi or diffusion")->required()->check(CLI::IsMember({"jacobi", "diffusion"}));
    ev->add_option("--checkpoint", ea.checkpoint, "checkpoint JSON written by train");
    ev->add_option("--data", ea.data, "dataset directory")->required();
    ev->add_option("--config", ea.config, "run config JSON for the eval section");
    ev->add_option("--out", ea.out, "report directory (default: next to the checkpoint)");
    ev->add_option("--split", ea.split, "train, val or test")->capture_default_str();
    ev->add_option("--omega", ea.omega, "evaluate d_i = omega / A_ii instead of a model");

    AmgArgs aa;
    auto* amg_cmd = app.add_subcommand("demo-amg", "two-level AMG against Jacobi, residual histories as CSV");
    amg_cmd->add_option("--matrix", aa.matrix, "Matrix Market file (default tridiag(-1, 2, -1))");
    amg_cmd->add_option("--size", aa.size, "size of the default matrix")->capture_default_str();
    amg_cmd->add_option("--tau", aa.opt.tau, "classic strength threshold")->capture_default_str();
    amg_cmd->add_option("--omega", aa.opt.omega, "Jacobi weight")->capture_default_str();
    amg_cmd->add_option("--pre-sweeps", aa.opt.pre_sweeps, "smoothing sweeps before and after the coarse correction")
        ->capture_default_str();
    amg_cmd->add_option("--iters", aa.opt.iters, "two-level iterations")->capture_default_str();
    amg_cmd->add_option("--out", aa.out, "output directory")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_usage;
    }

    try {
        g.threads = resolve_threads(threads_opt);
        if (kernel->parsed()) return run_kernel(ka);
        if (gen->parsed()) return run_gen_data(gd_config, gd_out, gd_seed, gd_force, g);
        if (tr->parsed()) return run_train(ta, g);
        if (ev->parsed()) return run_eval(ea, g);
        if (amg_cmd->parsed()) return run_demo_amg(aa, g);
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return exit_numerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_usage;
    }
    return exit_usage;
}
