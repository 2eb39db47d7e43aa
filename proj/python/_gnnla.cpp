#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "gnnla/amg.hpp"
#include "gnnla/dataset.hpp"
#include "gnnla/error.hpp"
#include "gnnla/fem.hpp"
#include "gnnla/kernels.hpp"
#include "gnnla/nn.hpp"
#include "gnnla/run_config.hpp"
#include "gnnla/sparse.hpp"
#include "gnnla/train.hpp"

namespace py = pybind11;
using namespace gnnla;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

py::array_t<double> to_numpy(const std::vector<double>& v) {
    py::array_t<double> out(static_cast<py::ssize_t>(v.size()));
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

std::vector<double> to_vector(const Array& a) {
    if (a.ndim() != 1) throw Error("expected a one-dimensional array");
    return {a.data(), a.data() + a.size()};
}

template <class T> py::array_t<T> index_array(std::span<const Index> v) {
    py::array_t<T> out(static_cast<py::ssize_t>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) out.mutable_data()[i] = static_cast<T>(v[i]);
    return out;
}

SparseMatrixCSR csr_from_arrays(Index rows, Index cols, const py::array_t<std::int64_t>& indptr,
                                const py::array_t<std::int64_t>& indices, const Array& data) {
    std::vector<Index> rp(indptr.data(), indptr.data() + indptr.size());
    std::vector<Index> ci(indices.data(), indices.data() + indices.size());
    return SparseMatrixCSR(rows, cols, std::move(rp), std::move(ci), to_vector(data));
}

train::TrainResult train_from_config(const RunConfig& c, const fem::Dataset& data, std::size_t threads) {
    auto cfg = c.train;
    cfg.threads = threads;
    return c.kind == ProblemKind::jacobi ? train::train_jacobi(data, cfg) : train::train_diffusion(data, cfg);
}

} // namespace

PYBIND11_MODULE(_gnnla, m) {
    m.doc() = "Sparse linear-algebra kernels as graph networks, FEM datasets and learned relaxation";

    static py::exception<Error> error(m, "Error", PyExc_ValueError);
    static py::exception<NumericalError> numerical(m, "NumericalError", error.ptr());
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const NumericalError& e) {
            py::set_error(numerical, e.what());
        } catch (const Error& e) {
            py::set_error(error, e.what());
        }
    });

    // sparse
    py::class_<SparseMatrixCSR>(m, "SparseMatrix")
        .def(py::init(&csr_from_arrays), py::arg("rows"), py::arg("cols"), py::arg("indptr"), py::arg("indices"),
             py::arg("data"))
        .def_static("from_dense", &SparseMatrixCSR::from_dense, py::arg("dense"), py::arg("drop_tol") = 0.0)
        .def_static("identity", &SparseMatrixCSR::identity)
        .def_property_readonly("shape", [](const SparseMatrixCSR& a) { return py::make_tuple(a.rows(), a.cols()); })
        .def_property_readonly("nnz", &SparseMatrixCSR::nnz)
        .def_property_readonly("indptr", [](const SparseMatrixCSR& a) { return index_array<std::int64_t>(a.row_ptr()); })
        .def_property_readonly("indices", [](const SparseMatrixCSR& a) { return index_array<std::int64_t>(a.col_idx()); })
        .def_property_readonly("data", [](const SparseMatrixCSR& a) {
            return to_numpy({a.values().begin(), a.values().end()});
        })
        .def("at", &SparseMatrixCSR::at)
        .def("to_dense", &SparseMatrixCSR::to_dense)
        .def("transpose", &SparseMatrixCSR::transpose)
        .def("__matmul__", [](const SparseMatrixCSR& a, const Array& x) { return to_numpy(spmv_csr(a, to_vector(x))); })
        .def("__repr__", [](const SparseMatrixCSR& a) {
            return "<SparseMatrix " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + ", nnz " +
                   std::to_string(a.nnz()) + ">";
        });
    m.def("read_matrix_market", &read_matrix_market, py::arg("path"));
    m.def("write_matrix_market", &write_matrix_market, py::arg("matrix"), py::arg("path"));
    m.def("spmv", [](const SparseMatrixCSR& a, const Array& x) { return to_numpy(spmv_csr(a, to_vector(x))); });
    m.def("diag", [](const SparseMatrixCSR& a) { return to_numpy(diag(a)); });

    // graph-network kernels
    m.def(
        "gnn_spmv",
        [](const SparseMatrixCSR& a, const Array& x, bool self_edges) {
            return to_numpy(kernels::gnn_spmv(a, to_vector(x), self_edges));
        },
        py::arg("a"), py::arg("x"), py::arg("self_edges") = true);
    m.def("gnn_weighted_norm",
          [](const SparseMatrixCSR& w, const Array& x) { return kernels::gnn_weighted_norm(w, to_vector(x)); });
    m.def(
        "gnn_jacobi",
        [](const SparseMatrixCSR& a, const Array& b, const Array& x0, double omega, std::size_t iters) {
            return to_numpy(kernels::gnn_jacobi(a, to_vector(b), to_vector(x0), omega, iters));
        },
        py::arg("a"), py::arg("b"), py::arg("x0"), py::arg("omega"), py::arg("iters"));
    m.def(
        "gnn_chebyshev",
        [](const SparseMatrixCSR& a, const Array& b, const Array& x0, double lmin, double lmax, std::size_t n) {
            return to_numpy(kernels::gnn_chebyshev(a, to_vector(b), to_vector(x0), lmin, lmax, n));
        },
        py::arg("a"), py::arg("b"), py::arg("x0"), py::arg("lambda_min"), py::arg("lambda_max"), py::arg("n_iter"));
    m.def(
        "gnn_power_method",
        [](const SparseMatrixCSR& a, const Array& b0, std::size_t iters) {
            const auto r = kernels::gnn_power_method(a, to_vector(b0), iters);
            return py::make_tuple(to_numpy(r.vector), r.lambda_max);
        },
        py::arg("a"), py::arg("b0"), py::arg("iters"));

    // AMG
    py::class_<amg::CFPartition>(m, "CFPartition")
        .def_property_readonly("is_coarse",
                               [](const amg::CFPartition& cf) {
                                   std::vector<bool> c(cf.size());
                                   for (Index i = 0; i < cf.size(); ++i) c[i] = cf.is_coarse(i);
                                   return c;
                               })
        .def_readonly("num_coarse", &amg::CFPartition::num_coarse)
        .def_static("from_coarse", [](const std::vector<bool>& coarse) {
            std::vector<amg::Label> l(coarse.size());
            for (std::size_t i = 0; i < l.size(); ++i) l[i] = coarse[i] ? amg::Label::C : amg::Label::F;
            return amg::CFPartition::from_labels(std::move(l));
        });
    m.def("soc_sa", &amg::soc_sa);
    m.def("soc_classic", &amg::soc_classic, py::arg("a"), py::arg("tau") = 0.25);
    m.def("soc_abs", &amg::soc_abs, py::arg("a"), py::arg("theta") = 0.25);
    m.def("cf_split_greedy", &amg::cf_split_greedy);
    m.def("direct_interpolation", &amg::direct_interpolation, py::arg("a"), py::arg("s_hat"), py::arg("cf"));
    m.def(
        "two_level_solve",
        [](const SparseMatrixCSR& a, const Array& b, double tau, double omega, std::size_t pre_sweeps,
           std::size_t iters) {
            amg::TwoLevelOptions o;
            o.tau = tau;
            o.omega = omega;
            o.pre_sweeps = pre_sweeps;
            o.iters = iters;
            const auto r = amg::two_level_solve(a, to_vector(b), o);
            return py::make_tuple(to_numpy(r.x), to_numpy(r.residual_history));
        },
        py::arg("a"), py::arg("b"), py::arg("tau") = 0.25, py::arg("omega") = 2.0 / 3.0, py::arg("pre_sweeps") = 1,
        py::arg("iters") = 30);

    // FEM and datasets
    py::class_<fem::InstanceMeta>(m, "InstanceMeta")
        .def_readonly("kind", &fem::InstanceMeta::kind)
        .def_readonly("index", &fem::InstanceMeta::index)
        .def_readonly("n", &fem::InstanceMeta::n)
        .def_readonly("h", &fem::InstanceMeta::h)
        .def_readonly("beta", &fem::InstanceMeta::beta)
        .def_readonly("band_x", &fem::InstanceMeta::band_x);
    py::class_<fem::ProblemInstance>(m, "ProblemInstance")
        .def_readonly("a", &fem::ProblemInstance::a)
        .def_property_readonly("x", [](const fem::ProblemInstance& p) { return to_numpy(p.x); })
        .def_property_readonly("y", [](const fem::ProblemInstance& p) { return to_numpy(p.y); })
        .def_property_readonly("alpha", [](const fem::ProblemInstance& p) { return to_numpy(p.alpha); })
        .def_property_readonly("beta", [](const fem::ProblemInstance& p) { return to_numpy(p.beta); })
        .def_readonly("grid_nx", &fem::ProblemInstance::grid_nx)
        .def_readonly("grid_ny", &fem::ProblemInstance::grid_ny)
        .def_readonly("meta", &fem::ProblemInstance::meta);
    m.def("make_jacobi_instance", &fem::make_jacobi_instance, py::arg("n_y"), py::arg("beta"), py::arg("band_col"));
    m.def("assemble_diffusion_periodic",
          py::overload_cast<Index, int, int, int, int>(&fem::assemble_diffusion_periodic), py::arg("n"),
          py::arg("theta_ax"), py::arg("theta_ay"), py::arg("theta_bx"), py::arg("theta_by"));
    m.def("assemble_laplace_uniform",
          [](Index n_y) { return fem::assemble_laplace_dirichlet(fem::build_uniform_mesh(n_y)); }, py::arg("n_y"));
    m.def(
        "dst_basis",
        [](Index nx, Index ny) {
            auto b = fem::dst_basis(nx, ny);
            return py::make_tuple(std::move(b.lf), std::move(b.hf));
        },
        py::arg("nx"), py::arg("ny"));
    py::class_<fem::Dataset>(m, "Dataset")
        .def_readonly("train", &fem::Dataset::train)
        .def_readonly("val", &fem::Dataset::val)
        .def_readonly("test", &fem::Dataset::test);

    // configs
    py::class_<RunConfig>(m, "RunConfig")
        .def_static("from_json", [](const std::string& text) { return parse_run_config(nlohmann::json::parse(text)); })
        .def_static("load", &load_run_config)
        .def_property_readonly("kind", [](const RunConfig& c) { return to_string(c.kind); })
        .def_readwrite("seed", &RunConfig::seed)
        .def("to_json", [](const RunConfig& c) { return c.to_json().dump(1); });
    m.def(
        "generate_dataset",
        [](const RunConfig& c, std::size_t threads) {
            return c.kind == ProblemKind::jacobi ? fem::gen_jacobi_dataset(c.jacobi_data, threads)
                                                 : fem::gen_diffusion_dataset(c.diffusion_data, threads);
        },
        py::arg("config"), py::arg("threads") = 1);
    m.def(
        "save_dataset",
        [](const fem::Dataset& d, const RunConfig& c, const std::filesystem::path& root, bool force) {
            dataset::save_dataset(d, root, c.dataset_json(), force);
        },
        py::arg("dataset"), py::arg("config"), py::arg("root"), py::arg("force") = false);
    m.def("load_dataset", &dataset::load_dataset, py::arg("root"));

    // models and training
    py::class_<nn::ParamStore>(m, "Model")
        .def_property_readonly("kind", [](const nn::ParamStore& p) { return p.architecture().kind; })
        .def_property_readonly("param_count", [](const nn::ParamStore& p) { return p.size(); })
        .def_property_readonly("parameters", [](const nn::ParamStore& p) { return to_numpy(p.values()); });
    m.def("jacobi_param_count", [] { return nn::jacobi_architecture().param_count(); });
    m.def(
        "diffusion_param_count", [](double slope) { return nn::diffusion_architecture(slope).param_count(); },
        py::arg("leaky_slope") = 0.01);
    py::class_<nn::Checkpoint>(m, "Checkpoint")
        .def_readonly("model", &nn::Checkpoint::params)
        .def_property_readonly("best_epoch", [](const nn::Checkpoint& c) { return c.training.best_epoch; })
        .def_property_readonly("best_val_loss", [](const nn::Checkpoint& c) { return c.training.best_val_loss; })
        .def_property_readonly("train_loss", [](const nn::Checkpoint& c) { return to_numpy(c.training.train_loss); })
        .def_property_readonly("val_loss", [](const nn::Checkpoint& c) { return to_numpy(c.training.val_loss); })
        .def("save", [](const nn::Checkpoint& c, const std::filesystem::path& p) { nn::save_checkpoint(c, p); });
    m.def("load_checkpoint", &nn::load_checkpoint, py::arg("path"));
    m.def(
        "train",
        [](const RunConfig& c, const fem::Dataset& d, std::size_t threads) {
            py::gil_scoped_release release;
            return train_from_config(c, d, threads).checkpoint;
        },
        py::arg("config"), py::arg("dataset"), py::arg("threads") = 1);
    m.def("jacobi_diagonal", [](const nn::ParamStore& model, const SparseMatrixCSR& a) {
        return to_numpy(nn::jacobi_model_forward(a, model));
    });
    m.def("predict_coefficients", [](const nn::ParamStore& model, const fem::ProblemInstance& p) {
        return Eigen::MatrixXd(nn::diffusion_model_forward(nn::diffusion_inputs(p.a, p.x, p.y, p.h()), model));
    });
    m.def(
        "jacobi_loss",
        [](const Array& d, const SparseMatrixCSR& a, const Eigen::MatrixXd& probes, std::size_t K) {
            return train::jacobi_loss_value(to_vector(d), a, probes, K);
        },
        py::arg("d"), py::arg("a"), py::arg("probes"), py::arg("K") = 3);
    m.def("omega_co", [](const SparseMatrixCSR& a) { return train::omega_co(a); });
    m.def(
        "eval_jacobi",
        [](const SparseMatrixCSR& a, const Array& dinv, const Eigen::MatrixXd& v_hf, std::size_t k) {
            train::EigOptions o;
            o.k = k;
            return to_numpy(train::eval_jacobi(a, to_vector(dinv), v_hf, o).values);
        },
        py::arg("a"), py::arg("dinv"), py::arg("v_hf"), py::arg("k") = 10);
    m.def(
        "compare_methods",
        [](const std::vector<fem::ProblemInstance>& test, const nn::ParamStore* model, std::optional<double> omega,
           std::size_t k, std::size_t threads) {
            train::EigOptions o;
            o.k = k;
            const auto r = train::compare_methods(test, model, omega, o, threads);
            py::list rows;
            for (const auto& mr : r.matrices) {
                py::dict d;
                d["matrix_id"] = mr.matrix_id;
                d["band_width"] = mr.band_width;
                d["band_x"] = mr.band_x;
                d["winner"] = mr.winner;
                for (const auto& me : mr.methods) d[me.method.c_str()] = to_numpy(me.eig.values);
                rows.append(d);
            }
            py::dict out;
            out["matrices"] = rows;
            out["frac_beats_omega_1"] = r.frac_beats_omega_1;
            out["frac_beats_omega_2_3"] = r.frac_beats_omega_2_3;
            out["frac_beats_omega_co"] = r.frac_beats_omega_co;
            return out;
        },
        py::arg("test"), py::arg("model") = nullptr, py::arg("omega") = py::none(), py::arg("k") = 10,
        py::arg("threads") = 1);
    m.def("stencil_probe", [](const nn::ParamStore& model, Index n) {
        const auto r = train::stencil_probe(model, n);
        return py::make_tuple(r.alpha, r.beta);
    }, py::arg("model"), py::arg("n") = 32);
}
