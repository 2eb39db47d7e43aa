#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gnnla/sparse.hpp"

namespace gnnla::fem {

struct BandInfo {
    Index column;      // index of the original grid column the band surrounds
    double band_x;     // its x coordinate
    double half_width; // beta: distance of the two added columns from band_x
};

/// Quadrilateral mesh on the unit square laid out as a logical nx x ny vertex grid
/// (vertex id = j * nx + i, i along x). Elements list four vertex ids counterclockwise.
/// Periodic meshes identify x = 1 with x = 0 and y = 1 with y = 0; element geometry is then
/// unwrapped relative to the element's first vertex.
struct QuadMesh {
    Index nx = 0;
    Index ny = 0;
    std::vector<double> x;
    std::vector<double> y;
    std::vector<std::array<Index, 4>> elements;
    std::vector<bool> boundary;
    bool periodic = false;
    std::optional<BandInfo> band;

    Index num_vertices() const { return x.size(); }
    /// Vertex coordinates of an element, unwrapped for periodic meshes.
    std::array<std::pair<double, double>, 4> element_coords(Index e) const;
    /// Throws unless coordinates lie in [0, 1] and every element has positive area.
    void validate() const;
};

/// Uniform Dirichlet mesh with n_y points per direction, h = 1/(n_y - 1).
QuadMesh build_uniform_mesh(Index n_y);

/// Uniform mesh plus two vertex columns at band_x -/+ beta around grid column band_col.
/// band_col must lie in [2, n_y - 3] so the band stays clear of the outermost interior
/// columns, and 0 < beta < h/2 so the new columns do not reach the neighbouring ones.
QuadMesh build_band_mesh(Index n_y, double beta, Index band_col);

/// N x N periodic mesh, h = 1/N, vertices at (i h, j h).
QuadMesh build_periodic_mesh(Index n);

using Coefficient = std::function<double(double x, double y)>;

/// Bilinear stiffness for -div(diag(alpha, beta) grad u), coefficients sampled at the 2x2
/// Gauss points of each element. Returns the full vertex matrix (no boundary handling).
/// Contributions are summed in element order; entries (i, j) and (j, i) are bit-identical.
SparseMatrixCSR assemble_diffusion(const QuadMesh& mesh, const Coefficient& alpha, const Coefficient& beta);

/// Ids of the vertices that are not on the Dirichlet boundary, in id order.
std::vector<Index> interior_vertices(const QuadMesh& mesh);

/// -Laplace with homogeneous Dirichlet rows/columns removed; unknowns are the interior
/// vertices in id order, i.e. a row-major (nx - 2) x (ny - 2) grid.
SparseMatrixCSR assemble_laplace_dirichlet(const QuadMesh& mesh);

struct InstanceMeta {
    std::string kind; // "jacobi" or "diffusion"
    std::uint64_t seed = 0;
    Index index = 0;
    Index n = 0; // N_y (jacobi) or N (diffusion)
    double h = 0.0;
    // jacobi
    double beta = 0.0;
    double band_x = 0.0;
    Index band_col = 0;
    // diffusion: theta_alpha_x, theta_alpha_y, theta_beta_x, theta_beta_y
    std::array<int, 4> theta{0, 0, 0, 0};
    bool operator==(const InstanceMeta&) const = default;
};

/// One dataset entry. grid_nx x grid_ny is the logical layout of the unknowns (row-major).
/// Diffusion instances carry per-vertex targets (alpha, beta); jacobi instances leave them empty.
struct ProblemInstance {
    SparseMatrixCSR a;
    std::vector<double> x;
    std::vector<double> y;
    Index grid_nx = 0;
    Index grid_ny = 0;
    std::vector<double> alpha;
    std::vector<double> beta;
    InstanceMeta meta;

    double h() const { return meta.h; }
    void validate() const;
};

/// Band-mesh Laplace problem for the learned-Jacobi experiment.
ProblemInstance make_jacobi_instance(Index n_y, double beta, Index band_col);

/// Periodic problem with alpha = cos^2(t_ax pi x) cos^2(t_ay pi y), beta likewise.
ProblemInstance assemble_diffusion_periodic(Index n, int theta_ax, int theta_ay, int theta_bx, int theta_by);

/// Periodic problem with arbitrary coefficient fields (targets sampled at the vertices).
ProblemInstance assemble_diffusion_periodic(Index n, const Coefficient& alpha, const Coefficient& beta);

/// Discrete sine basis on an nx x ny grid of unknowns (row-major, unknown k = j * nx + i):
/// column (tx, ty) holds sin(tx pi (i+1)/(nx+1)) sin(ty pi (j+1)/(ny+1)) scaled to unit
/// norm. Low frequency: tx <= nx/2 and ty <= ny/2; everything else is high frequency.
struct DstBasis {
    Eigen::MatrixXd lf;
    Eigen::MatrixXd hf;
    std::vector<std::pair<int, int>> lf_modes;
    std::vector<std::pair<int, int>> hf_modes;
};

DstBasis dst_basis(Index nx, Index ny);
inline DstBasis dst_basis(Index n) { return dst_basis(n, n); }

struct JacobiDataConfig {
    Index n_y = 20;
    double beta_min = 0.002;
    double beta_max = 0.025;
    Index n_train = 60;
    Index n_val = 20;
    Index n_test = 20;
    std::uint64_t seed = 0;
};

struct DiffusionDataConfig {
    Index n_min = 24;
    Index n_max = 32;
    int theta_max = 4;
    Index n_train = 100;
    Index n_val = 30;
    Index n_test = 20;
    std::uint64_t seed = 0;
};

struct Dataset {
    std::vector<ProblemInstance> train;
    std::vector<ProblemInstance> val;
    std::vector<ProblemInstance> test;
};

/// Instance k draws beta ~ U[beta_min, beta_max) and band_col ~ U{2..n_y-3} from
/// Rng::derive(seed, dataset, k); instances 0..n_train-1 are training, then validation, then test.
Dataset gen_jacobi_dataset(const JacobiDataConfig& cfg, std::size_t threads = 1);

/// Instance k draws N ~ U{n_min..n_max} and the four thetas ~ U{0..theta_max}.
Dataset gen_diffusion_dataset(const DiffusionDataConfig& cfg, std::size_t threads = 1);

} // namespace gnnla::fem
