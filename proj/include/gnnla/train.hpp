#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gnnla/autodiff.hpp"
#include "gnnla/fem.hpp"
#include "gnnla/nn.hpp"

namespace gnnla::train {

enum class ProbeKind { dst_high_frequency, unit_sphere };

struct TrainConfig {
    std::size_t epochs_max = 30;
    std::size_t batch_size = 10;
    double lr = 1e-3;
    std::size_t K = 3;
    std::size_t m = 20;
    std::uint64_t seed = 0;
    /// Return the parameters of the epoch with the lowest validation loss (otherwise the last).
    bool early_stop = true;
    /// Stop after this many epochs without a new validation minimum (0 = never).
    std::size_t patience = 0;
    ProbeKind probes = ProbeKind::dst_high_frequency;
    double leaky_slope = 0.01;
    std::size_t threads = 1;
    /// Called after every epoch with (epoch, train_loss, val_loss).
    std::function<void(std::size_t, double, double)> on_epoch;

    void validate() const;
};

/// Per-epoch losses; entry 0 is measured before the first update. Training losses for
/// later epochs are the mean of the per-sample losses seen during that epoch.
struct LossCurve {
    std::vector<double> train;
    std::vector<double> val;
};

struct TrainResult {
    nn::Checkpoint checkpoint;
    LossCurve curve;
};

void write_loss_curve(const LossCurve& c, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Learned Jacobi

/// m distinct columns of V_hf, drawn with Rng::derive(seed, probes, index).
ad::Tensor select_probes(const Eigen::MatrixXd& v_hf, std::size_t m, std::uint64_t seed, std::size_t index);
/// m random unit vectors (normalised Gaussian), same stream.
ad::Tensor sphere_probes(Index n, std::size_t m, std::uint64_t seed, std::size_t index);

/// max_i ||(I - diag(d) A)^K u_i||^(1/K) over the probe columns, on the tape.
ad::Var jacobi_loss(ad::Var d, const SparseMatrixCSR& a, const ad::Tensor& probes, std::size_t K);
/// Same value without a tape.
double jacobi_loss_value(std::span<const double> d, const SparseMatrixCSR& a, const ad::Tensor& probes,
                         std::size_t K);

struct JacobiSample {
    SparseMatrixCSR a;
    ad::Tensor features;
    ad::Tensor probes;
};

JacobiSample prepare_jacobi_sample(const fem::ProblemInstance& p, const TrainConfig& cfg);

/// Trains the 1341-parameter diagonal model. The loss of a batch is the sum of the
/// per-matrix losses; reported epoch losses are per-matrix means.
TrainResult train_jacobi(const fem::Dataset& data, const TrainConfig& cfg);

/// 2/(lambda_min + lambda_max) of D^{-1}A, both from power iteration on D^{-1/2} A D^{-1/2}
/// (lambda_min via the shifted matrix lambda_max I - M). Stops when ||M v - mu v|| <= tol |mu|.
double omega_co(const SparseMatrixCSR& a, double tol = 1e-10, std::size_t max_iter = 1000000);

enum class EigenMethod { automatic, dense, power };

struct EigOptions {
    std::size_t k = 10;
    double tol = 1e-8;
    std::size_t max_iter = 5000;
    EigenMethod method = EigenMethod::automatic;
    /// automatic uses the dense solver up to this dimension
    Index dense_limit = 400;
};

/// Eigenvalues ordered by decreasing modulus. `values` holds the moduli (the damping
/// factors); `real`/`imag` keep the complex values.
struct EigResult {
    std::vector<double> values;
    std::vector<double> real;
    std::vector<double> imag;
    bool converged = true;
    std::size_t iterations = 0;
};

/// Block linear operator: out = B * in for an n x b block.
using BlockOperator = std::function<void(const Eigen::MatrixXd& in, Eigen::MatrixXd& out)>;

/// Orthogonal (simultaneous) iteration with Rayleigh-Ritz on a block of k + 4 vectors: the
/// block form of power iteration with orthogonalised deflation. Converged when every one of
/// the k leading Ritz moduli changes by less than tol (relative) between iterations.
EigResult top_eigenvalues_power(const BlockOperator& op, Index n, const EigOptions& opt, std::uint64_t seed = 0);
/// Dense oracle.
EigResult top_eigenvalues_dense(const Eigen::MatrixXd& b, std::size_t k);

/// I - V_hf^T diag(dinv) A V_hf as a dense matrix.
Eigen::MatrixXd projected_operator(const SparseMatrixCSR& a, std::span<const double> dinv, const Eigen::MatrixXd& v_hf);

/// Top-k eigenvalues of the projected relaxation operator.
EigResult eval_jacobi(const SparseMatrixCSR& a, std::span<const double> dinv, const Eigen::MatrixXd& v_hf,
                      const EigOptions& opt = {});

struct MethodEig {
    std::string method;
    EigResult eig;
};

struct MatrixReport {
    Index matrix_id = 0;
    double band_width = 0.0;
    double band_x = 0.0;
    std::vector<MethodEig> methods; // learned first, then the baselines
    std::string winner;

    double max_eig(const std::string& method) const;
};

struct EvalReport {
    std::vector<MatrixReport> matrices;
    EigOptions options;
    /// learned diagonal strictly better than the baseline, as a fraction of test matrices
    double frac_beats_omega_1 = 0.0;
    double frac_beats_omega_2_3 = 0.0;
    double frac_beats_omega_co = 0.0;
    std::size_t unconverged = 0;
};

/// Method names used in reports.
inline constexpr const char* method_learned = "learned";
inline constexpr const char* method_omega_1 = "omega_1";
inline constexpr const char* method_omega_2_3 = "omega_2_3";
inline constexpr const char* method_omega_co = "omega_co";

/// The learned diagonal is d = model(A) when a model is given, else omega_override / A_ii.
EvalReport compare_methods(const std::vector<fem::ProblemInstance>& test, const nn::ParamStore* model,
                           std::optional<double> omega_override, const EigOptions& opt, std::size_t threads = 1);

/// eig_report.csv, winners.csv, max_eig.csv, diff_histogram.csv, summary.json (+ SVG histograms).
void write_eval_report(const EvalReport& r, const std::filesystem::path& dir, bool svg = false,
                       std::size_t bins = 20);

// ---------------------------------------------------------------------------
// Diffusion coefficients

/// (1/2N^2) sum (alpha - alpha~)^2 + (beta - beta~)^2 with N^2 = rows.
ad::Var diffusion_loss(ad::Var pred, const ad::Tensor& target);
double diffusion_loss_value(const ad::Tensor& pred, const ad::Tensor& target);

struct DiffusionSample {
    nn::DiffusionInputs inputs;
    ad::Tensor target; // (n, 2)
};

DiffusionSample prepare_diffusion_sample(const fem::ProblemInstance& p);

/// Adam on the 14002-parameter model; the batch loss is the mean of the sample losses.
TrainResult train_diffusion(const fem::Dataset& data, const TrainConfig& cfg);

struct FreqSweepRow {
    int theta_x;
    int theta_y;
    double mse;
    bool in_training_region;
};

/// Isotropic instances alpha = beta = cos^2(tx pi x) cos^2(ty pi y) for every
/// (tx, ty) in {0..theta_grid_max}^2 on an N x N periodic mesh.
std::vector<FreqSweepRow> freq_sweep_eval(const nn::ParamStore& model, int theta_grid_max, Index n,
                                          int trained_theta_max, std::size_t threads = 1);
void write_freq_sweep(const std::vector<FreqSweepRow>& rows, const std::filesystem::path& path);

struct StencilProbeResult {
    double alpha;
    double beta;
};

/// Mean prediction on the constant-coefficient instance alpha = 0.001, beta = 0.8.
StencilProbeResult stencil_probe(const nn::ParamStore& model, Index n = 32);

} // namespace gnnla::train
