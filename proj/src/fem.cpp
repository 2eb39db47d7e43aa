#include "gnnla/fem.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include "gnnla/error.hpp"
#include "gnnla/parallel.hpp"
#include "gnnla/rng.hpp"

namespace gnnla::fem {

namespace {

QuadMesh tensor_mesh(const std::vector<double>& xs, const std::vector<double>& ys) {
    QuadMesh m;
    m.nx = xs.size();
    m.ny = ys.size();
    for (Index j = 0; j < m.ny; ++j)
        for (Index i = 0; i < m.nx; ++i) {
            m.x.push_back(xs[i]);
            m.y.push_back(ys[j]);
            m.boundary.push_back(i == 0 || j == 0 || i + 1 == m.nx || j + 1 == m.ny);
        }
    for (Index j = 0; j + 1 < m.ny; ++j)
        for (Index i = 0; i + 1 < m.nx; ++i) {
            const Index v = j * m.nx + i;
            m.elements.push_back({v, v + 1, v + 1 + m.nx, v + m.nx});
        }
    return m;
}

std::vector<double> uniform_coords(Index n_y) {
    std::vector<double> c(n_y);
    const double h = 1.0 / static_cast<double>(n_y - 1);
    for (Index i = 0; i < n_y; ++i) c[i] = static_cast<double>(i) * h;
    c.back() = 1.0;
    return c;
}

} // namespace

std::array<std::pair<double, double>, 4> QuadMesh::element_coords(Index e) const {
    std::array<std::pair<double, double>, 4> c;
    const auto& el = elements[e];
    for (int k = 0; k < 4; ++k) {
        double px = x[el[k]], py = y[el[k]];
        if (periodic && k > 0) {
            const double x0 = x[el[0]], y0 = y[el[0]];
            if (px - x0 > 0.5) px -= 1.0;
            if (px - x0 < -0.5) px += 1.0;
            if (py - y0 > 0.5) py -= 1.0;
            if (py - y0 < -0.5) py += 1.0;
        }
        c[k] = {px, py};
    }
    return c;
}

void QuadMesh::validate() const {
    if (x.size() != y.size() || x.size() != nx * ny) throw Error("QuadMesh: vertex arrays do not match the grid");
    for (Index v = 0; v < x.size(); ++v)
        if (!(x[v] >= 0.0 && x[v] <= 1.0 && y[v] >= 0.0 && y[v] <= 1.0))
            throw Error("QuadMesh: vertex " + std::to_string(v) + " lies outside the unit square");
    for (Index e = 0; e < elements.size(); ++e) {
        for (Index id : elements[e])
            if (id >= x.size()) throw Error("QuadMesh: element " + std::to_string(e) + " references a missing vertex");
        const auto c = element_coords(e);
        double area2 = 0.0;
        for (int k = 0; k < 4; ++k) {
            const auto& p = c[k];
            const auto& q = c[(k + 1) % 4];
            area2 += p.first * q.second - q.first * p.second;
        }
        if (!(area2 > 0.0))
            throw Error("QuadMesh: element " + std::to_string(e) + " is degenerate or clockwise");
    }
}

QuadMesh build_uniform_mesh(Index n_y) {
    if (n_y < 3) throw Error("build_uniform_mesh: need at least 3 points per direction");
    auto m = tensor_mesh(uniform_coords(n_y), uniform_coords(n_y));
    m.validate();
    return m;
}

QuadMesh build_band_mesh(Index n_y, double beta, Index band_col) {
    if (n_y < 5) throw Error("build_band_mesh: need at least 5 points per direction");
    const double h = 1.0 / static_cast<double>(n_y - 1);
    if (band_col < 2 || band_col + 3 > n_y)
        throw Error("build_band_mesh: band column " + std::to_string(band_col) + " outside [2, " +
                    std::to_string(n_y - 3) + "]");
    if (!(beta > 0.0) || !(beta < h / 2.0))
        throw Error("build_band_mesh: beta = " + std::to_string(beta) + " must lie in (0, h/2) with h = " +
                    std::to_string(h) + "; larger values collide with the neighbouring grid column");
    auto xs = uniform_coords(n_y);
    const double bx = xs[band_col];
    xs.insert(xs.begin() + static_cast<std::ptrdiff_t>(band_col) + 1, bx + beta);
    xs.insert(xs.begin() + static_cast<std::ptrdiff_t>(band_col), bx - beta);
    auto m = tensor_mesh(xs, uniform_coords(n_y));
    m.band = BandInfo{band_col, bx, beta};
    m.validate();
    return m;
}

QuadMesh build_periodic_mesh(Index n) {
    if (n < 4) throw Error("build_periodic_mesh: need N >= 4");
    QuadMesh m;
    m.nx = m.ny = n;
    m.periodic = true;
    const double h = 1.0 / static_cast<double>(n);
    for (Index j = 0; j < n; ++j)
        for (Index i = 0; i < n; ++i) {
            m.x.push_back(static_cast<double>(i) * h);
            m.y.push_back(static_cast<double>(j) * h);
            m.boundary.push_back(false);
        }
    auto id = [n](Index i, Index j) { return (j % n) * n + (i % n); };
    for (Index j = 0; j < n; ++j)
        for (Index i = 0; i < n; ++i) m.elements.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)});
    m.validate();
    return m;
}

SparseMatrixCSR assemble_diffusion(const QuadMesh& mesh, const Coefficient& alpha, const Coefficient& beta) {
    static constexpr double xi[4] = {-1.0, 1.0, 1.0, -1.0};
    static constexpr double eta[4] = {-1.0, -1.0, 1.0, 1.0};
    const double g = 1.0 / std::sqrt(3.0);
    const double gauss[2] = {-g, g};

    std::vector<std::map<Index, double>> rows(mesh.num_vertices());
    for (Index e = 0; e < mesh.elements.size(); ++e) {
        const auto c = mesh.element_coords(e);
        double ke[4][4] = {};
        for (double gx : gauss)
            for (double gy : gauss) {
                double dn_dxi[4], dn_deta[4], n[4];
                for (int a = 0; a < 4; ++a) {
                    n[a] = 0.25 * (1 + xi[a] * gx) * (1 + eta[a] * gy);
                    dn_dxi[a] = 0.25 * xi[a] * (1 + eta[a] * gy);
                    dn_deta[a] = 0.25 * eta[a] * (1 + xi[a] * gx);
                }
                double j11 = 0, j12 = 0, j21 = 0, j22 = 0, px = 0, py = 0;
                for (int a = 0; a < 4; ++a) {
                    j11 += dn_dxi[a] * c[a].first;
                    j12 += dn_dxi[a] * c[a].second;
                    j21 += dn_deta[a] * c[a].first;
                    j22 += dn_deta[a] * c[a].second;
                    px += n[a] * c[a].first;
                    py += n[a] * c[a].second;
                }
                const double det = j11 * j22 - j12 * j21;
                if (!(det > 0.0)) throw Error("assemble: element " + std::to_string(e) + " is degenerate");
                double dx[4], dy[4];
                for (int a = 0; a < 4; ++a) {
                    dx[a] = (j22 * dn_dxi[a] - j12 * dn_deta[a]) / det;
                    dy[a] = (-j21 * dn_dxi[a] + j11 * dn_deta[a]) / det;
                }
                const double al = alpha(px, py), be = beta(px, py);
                for (int a = 0; a < 4; ++a)
                    for (int b = a; b < 4; ++b) ke[a][b] += det * (al * dx[a] * dx[b] + be * dy[a] * dy[b]);
            }
        const auto& el = mesh.elements[e];
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b) rows[el[a]][el[b]] += a <= b ? ke[a][b] : ke[b][a];
    }
    std::vector<Index> rp{0}, ci;
    std::vector<double> vals;
    for (const auto& r : rows) {
        for (const auto& [col, v] : r) {
            ci.push_back(col);
            vals.push_back(v);
        }
        rp.push_back(ci.size());
    }
    return SparseMatrixCSR(mesh.num_vertices(), std::move(rp), std::move(ci), std::move(vals));
}

std::vector<Index> interior_vertices(const QuadMesh& mesh) {
    std::vector<Index> out;
    for (Index v = 0; v < mesh.num_vertices(); ++v)
        if (!mesh.boundary[v]) out.push_back(v);
    return out;
}

namespace {

SparseMatrixCSR restrict_to(const SparseMatrixCSR& a, const std::vector<Index>& keep) {
    std::vector<Index> map(a.n(), static_cast<Index>(-1));
    for (Index k = 0; k < keep.size(); ++k) map[keep[k]] = k;
    std::vector<Index> rp{0}, ci;
    std::vector<double> vals;
    for (Index v : keep) {
        const auto cols = a.row_cols(v);
        const auto vs = a.row_values(v);
        for (std::size_t k = 0; k < cols.size(); ++k)
            if (map[cols[k]] != static_cast<Index>(-1)) {
                ci.push_back(map[cols[k]]);
                vals.push_back(vs[k]);
            }
        rp.push_back(ci.size());
    }
    return SparseMatrixCSR(keep.size(), std::move(rp), std::move(ci), std::move(vals));
}

double one(double, double) { return 1.0; }

} // namespace

SparseMatrixCSR assemble_laplace_dirichlet(const QuadMesh& mesh) {
    if (mesh.periodic) throw Error("assemble_laplace_dirichlet: mesh is periodic");
    return restrict_to(assemble_diffusion(mesh, one, one), interior_vertices(mesh));
}

void ProblemInstance::validate() const {
    const Index n = a.n();
    if (!a.is_square()) throw Error("ProblemInstance: matrix is not square");
    if (x.size() != n || y.size() != n) throw Error("ProblemInstance: coordinate count does not match the matrix");
    if (grid_nx * grid_ny != n) throw Error("ProblemInstance: grid shape does not match the matrix");
    if (!alpha.empty() && alpha.size() != n) throw Error("ProblemInstance: alpha target size mismatch");
    if (!beta.empty() && beta.size() != n) throw Error("ProblemInstance: beta target size mismatch");
    if (!(meta.h > 0.0)) throw Error("ProblemInstance: h must be positive");
}

ProblemInstance make_jacobi_instance(Index n_y, double beta, Index band_col) {
    const auto mesh = build_band_mesh(n_y, beta, band_col);
    ProblemInstance p;
    p.a = assemble_laplace_dirichlet(mesh);
    for (Index v : interior_vertices(mesh)) {
        p.x.push_back(mesh.x[v]);
        p.y.push_back(mesh.y[v]);
    }
    p.grid_nx = mesh.nx - 2;
    p.grid_ny = mesh.ny - 2;
    p.meta.kind = "jacobi";
    p.meta.n = n_y;
    p.meta.h = 1.0 / static_cast<double>(n_y - 1);
    p.meta.beta = beta;
    p.meta.band_x = mesh.band->band_x;
    p.meta.band_col = band_col;
    return p;
}

ProblemInstance assemble_diffusion_periodic(Index n, const Coefficient& alpha, const Coefficient& beta) {
    const auto mesh = build_periodic_mesh(n);
    ProblemInstance p;
    p.a = assemble_diffusion(mesh, alpha, beta);
    p.x = mesh.x;
    p.y = mesh.y;
    p.grid_nx = p.grid_ny = n;
    for (Index v = 0; v < mesh.num_vertices(); ++v) {
        p.alpha.push_back(alpha(mesh.x[v], mesh.y[v]));
        p.beta.push_back(beta(mesh.x[v], mesh.y[v]));
    }
    p.meta.kind = "diffusion";
    p.meta.n = n;
    p.meta.h = 1.0 / static_cast<double>(n);
    return p;
}

namespace {

Coefficient cos2_field(int tx, int ty) {
    return [tx, ty](double x, double y) {
        const double cx = std::cos(tx * std::numbers::pi * x);
        const double cy = std::cos(ty * std::numbers::pi * y);
        return cx * cx * cy * cy;
    };
}

} // namespace

ProblemInstance assemble_diffusion_periodic(Index n, int theta_ax, int theta_ay, int theta_bx, int theta_by) {
    for (int t : {theta_ax, theta_ay, theta_bx, theta_by})
        if (t < 0) throw Error("assemble_diffusion_periodic: theta values must be non-negative");
    auto p = assemble_diffusion_periodic(n, cos2_field(theta_ax, theta_ay), cos2_field(theta_bx, theta_by));
    p.meta.theta = {theta_ax, theta_ay, theta_bx, theta_by};
    return p;
}

DstBasis dst_basis(Index nx, Index ny) {
    if (nx < 1 || ny < 1) throw Error("dst_basis: grid must be non-empty");
    const Index n = nx * ny;
    DstBasis b;
    auto column = [&](int tx, int ty) {
        Eigen::VectorXd v(static_cast<Eigen::Index>(n));
        for (Index j = 0; j < ny; ++j)
            for (Index i = 0; i < nx; ++i)
                v(static_cast<Eigen::Index>(j * nx + i)) =
                    std::sin(tx * std::numbers::pi * static_cast<double>(i + 1) / static_cast<double>(nx + 1)) *
                    std::sin(ty * std::numbers::pi * static_cast<double>(j + 1) / static_cast<double>(ny + 1));
        return Eigen::VectorXd(v / v.norm());
    };
    for (int ty = 1; ty <= static_cast<int>(ny); ++ty)
        for (int tx = 1; tx <= static_cast<int>(nx); ++tx) {
            const bool low = 2 * static_cast<Index>(tx) <= nx && 2 * static_cast<Index>(ty) <= ny;
            (low ? b.lf_modes : b.hf_modes).emplace_back(tx, ty);
        }
    auto fill = [&](Eigen::MatrixXd& m, const std::vector<std::pair<int, int>>& modes) {
        m.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(modes.size()));
        for (std::size_t k = 0; k < modes.size(); ++k)
            m.col(static_cast<Eigen::Index>(k)) = column(modes[k].first, modes[k].second);
    };
    fill(b.lf, b.lf_modes);
    fill(b.hf, b.hf_modes);
    return b;
}

namespace {

Dataset split(std::vector<ProblemInstance> all, Index n_train, Index n_val) {
    Dataset d;
    for (Index k = 0; k < all.size(); ++k) {
        auto& dst = k < n_train ? d.train : (k < n_train + n_val ? d.val : d.test);
        dst.push_back(std::move(all[k]));
    }
    return d;
}

} // namespace

Dataset gen_jacobi_dataset(const JacobiDataConfig& cfg, std::size_t threads) {
    if (cfg.n_train + cfg.n_val + cfg.n_test == 0) throw Error("gen_jacobi_dataset: all split counts are zero");
    const double h = 1.0 / static_cast<double>(cfg.n_y - 1);
    if (!(cfg.beta_min > 0.0) || !(cfg.beta_max >= cfg.beta_min) || !(cfg.beta_max < h / 2.0))
        throw Error("gen_jacobi_dataset: need 0 < beta_min <= beta_max < h/2 = " + std::to_string(h / 2.0));
    if (cfg.n_y < 6) throw Error("gen_jacobi_dataset: n_y must be at least 6");
    const Index total = cfg.n_train + cfg.n_val + cfg.n_test;
    std::vector<ProblemInstance> all(total);
    parallel_for(total, threads, [&](std::size_t k) {
        Rng rng = Rng::derive(cfg.seed, rng_stream::dataset, k);
        const double beta = cfg.beta_min == cfg.beta_max ? cfg.beta_min : rng.uniform(cfg.beta_min, cfg.beta_max);
        const auto col = static_cast<Index>(rng.uniform_int(2, static_cast<std::int64_t>(cfg.n_y) - 3));
        all[k] = make_jacobi_instance(cfg.n_y, beta, col);
        all[k].meta.seed = cfg.seed;
        all[k].meta.index = k;
    });
    return split(std::move(all), cfg.n_train, cfg.n_val);
}

Dataset gen_diffusion_dataset(const DiffusionDataConfig& cfg, std::size_t threads) {
    if (cfg.n_train + cfg.n_val + cfg.n_test == 0) throw Error("gen_diffusion_dataset: all split counts are zero");
    if (cfg.n_min < 4 || cfg.n_max < cfg.n_min) throw Error("gen_diffusion_dataset: need 4 <= n_min <= n_max");
    if (cfg.theta_max < 0) throw Error("gen_diffusion_dataset: theta_max must be non-negative");
    const Index total = cfg.n_train + cfg.n_val + cfg.n_test;
    std::vector<ProblemInstance> all(total);
    parallel_for(total, threads, [&](std::size_t k) {
        Rng rng = Rng::derive(cfg.seed, rng_stream::dataset, k);
        const auto n = static_cast<Index>(
            rng.uniform_int(static_cast<std::int64_t>(cfg.n_min), static_cast<std::int64_t>(cfg.n_max)));
        std::array<int, 4> t{};
        for (auto& v : t) v = static_cast<int>(rng.uniform_int(0, cfg.theta_max));
        all[k] = assemble_diffusion_periodic(n, t[0], t[1], t[2], t[3]);
        all[k].meta.seed = cfg.seed;
        all[k].meta.index = k;
    });
    return split(std::move(all), cfg.n_train, cfg.n_val);
}

} // namespace gnnla::fem
