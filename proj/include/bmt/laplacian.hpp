#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <cmath>
#include <vector>

#include "bmt/grid.hpp"

namespace bmt {

// Dirichlet Poisson solver on the interior block: L u = rhs inside,
// u = bdry on the boundary. The interior block of -L is a symmetric
// M-matrix, factorized once per grid and reused.
class PoissonSolver {
public:
    explicit PoissonSolver(const Grid& g, double tol = Tolerances{}.linear_solve)
        : grid_(&g), tol_(tol) {
        const int ni = g.n_interior();
        const double ih2 = 1.0 / (g.spacing * g.spacing);
        interior_pos_.assign(g.n(), -1);
        for (int p = 0; p < ni; ++p) interior_pos_[g.interior[p]] = p;

        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(static_cast<std::size_t>(ni) * (2 * g.dim + 1));
        for (int p = 0; p < ni; ++p) {
            const int i = g.interior[p];
            trip.emplace_back(p, p, 2.0 * g.dim * ih2);
            for (int s = 0; s < 2 * g.dim; ++s) {
                const int nb = g.neighbor[static_cast<std::size_t>(i) * 2 * g.dim + s];
                const int q = interior_pos_[nb];
                if (q >= 0) trip.emplace_back(p, q, -ih2);
            }
        }
        Eigen::SparseMatrix<double> A(ni, ni);
        A.setFromTriplets(trip.begin(), trip.end());
        ldlt_.compute(A);
        if (ldlt_.info() != Eigen::Success)
            throw SolverError("Poisson matrix factorization failed", -1.0);
    }

    // rhs is read on interior nodes, bdry on boundary nodes.
    ScalarField solve(const ScalarField& rhs, const ScalarField& bdry) const {
        const Grid& g = *grid_;
        const int ni = g.n_interior();
        const double ih2 = 1.0 / (g.spacing * g.spacing);
        Eigen::VectorXd b(ni);
        for (int p = 0; p < ni; ++p) {
            const int i = g.interior[p];
            double v = -rhs[i];
            for (int s = 0; s < 2 * g.dim; ++s) {
                const int nb = g.neighbor[static_cast<std::size_t>(i) * 2 * g.dim + s];
                if (interior_pos_[nb] < 0) v += bdry[nb] * ih2;
            }
            b(p) = v;
        }
        Eigen::VectorXd x = ldlt_.solve(b);
        ScalarField u(g.n(), 0.0);
        for (int i : g.boundary) u[i] = bdry[i];
        for (int p = 0; p < ni; ++p) u[g.interior[p]] = x(p);

        const ScalarField lu = discrete_laplacian(u, g);
        double res = 0.0, scale = 1.0;
        for (int i : g.interior) {
            res = std::max(res, std::abs(lu[i] - rhs[i]));
            scale = std::max(scale, std::abs(rhs[i]));
        }
        scale = std::max(scale, u.max_abs() * ih2);
        if (res > tol_ * scale)
            throw SolverError("Poisson solve residual above tolerance", res);
        return u;
    }

    const Grid& grid() const { return *grid_; }
    int interior_index(int node) const { return interior_pos_[node]; }

private:
    const Grid* grid_;
    double tol_;
    std::vector<int> interior_pos_;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
};

inline ScalarField solve_poisson(const ScalarField& rhs, const ScalarField& bdry,
                                 const Grid& g) {
    return PoissonSolver(g).solve(rhs, bdry);
}

// u with L u = 1 inside and u = 0 on the boundary; -u(x) is the expected
// physical exit time of the walk started at x.
inline ScalarField exit_time_potential(const Grid& g) {
    return solve_poisson(ScalarField(g.n(), 1.0), ScalarField(g.n(), 0.0), g);
}

inline ScalarField exit_time_potential(const PoissonSolver& solver) {
    const Grid& g = solver.grid();
    return solver.solve(ScalarField(g.n(), 1.0), ScalarField(g.n(), 0.0));
}

// Dual Sobolev norm of a (signed) measure against the zero-trace Dirichlet
// pairing. Boundary mass does not contribute: the potential vanishes there.
inline double h_minus1_norm(const GridMeasure& rho, const PoissonSolver& solver) {
    const Grid& g = solver.grid();
    if (rho.size() != g.n()) throw PreconditionError("measure size does not match grid");
    const double vol = g.cell_volume();
    ScalarField rhs(g.n(), 0.0);
    for (int i : g.interior) rhs[i] = -rho[i] / vol;
    const ScalarField phi = solver.solve(rhs, ScalarField(g.n(), 0.0));
    double q = 0.0;
    for (int i : g.interior) q += phi[i] * rho[i] * vol;
    return std::sqrt(std::max(q, 0.0));
}

inline double h_minus1_norm(const GridMeasure& rho, const Grid& g) {
    return h_minus1_norm(rho, PoissonSolver(g));
}

namespace detail {

// Exact solve of: u harmonic on the flagged interior nodes, u fixed
// everywhere else. Values of u at non-free nodes are inputs.
inline bool harmonic_fill(ScalarField& u, const std::vector<std::uint8_t>& is_free,
                          const Grid& g) {
    std::vector<int> free_nodes;
    std::vector<int> pos(g.n(), -1);
    for (int i : g.interior)
        if (is_free[i]) {
            pos[i] = static_cast<int>(free_nodes.size());
            free_nodes.push_back(i);
        }
    if (free_nodes.empty()) return true;

    const int nf = static_cast<int>(free_nodes.size());
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(nf) * (2 * g.dim + 1));
    Eigen::VectorXd b = Eigen::VectorXd::Zero(nf);
    for (int p = 0; p < nf; ++p) {
        const int i = free_nodes[p];
        trip.emplace_back(p, p, 2.0 * g.dim);
        for (int s = 0; s < 2 * g.dim; ++s) {
            const int nb = g.neighbor[static_cast<std::size_t>(i) * 2 * g.dim + s];
            if (pos[nb] >= 0)
                trip.emplace_back(p, pos[nb], -1.0);
            else
                b(p) += u[nb];
        }
    }
    Eigen::SparseMatrix<double> A(nf, nf);
    A.setFromTriplets(trip.begin(), trip.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(A);
    if (ldlt.info() != Eigen::Success) return false;
    Eigen::VectorXd x = ldlt.solve(b);
    for (int p = 0; p < nf; ++p) u[free_nodes[p]] = x(p);
    return true;
}

}  // namespace detail

// Expected physical time for the walk to hit the masked set (or the
// boundary); zero on the absorbing set itself.
inline ScalarField expected_hit_time(const std::vector<std::uint8_t>& absorbing,
                                     const Grid& g) {
    std::vector<int> free_nodes;
    std::vector<int> pos(g.n(), -1);
    for (int i : g.interior)
        if (!absorbing[i]) {
            pos[i] = static_cast<int>(free_nodes.size());
            free_nodes.push_back(i);
        }
    ScalarField v(g.n(), 0.0);
    const int nf = static_cast<int>(free_nodes.size());
    if (nf == 0) return v;
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(nf) * (2 * g.dim + 1));
    const double inv2d = 1.0 / (2.0 * g.dim);
    Eigen::VectorXd b = Eigen::VectorXd::Constant(nf, g.step_time());
    for (int p = 0; p < nf; ++p) {
        const int i = free_nodes[p];
        trip.emplace_back(p, p, 1.0);
        for (int s = 0; s < 2 * g.dim; ++s) {
            const int nb = g.neighbor[static_cast<std::size_t>(i) * 2 * g.dim + s];
            if (pos[nb] >= 0) trip.emplace_back(p, pos[nb], -inv2d);
        }
    }
    Eigen::SparseMatrix<double> A(nf, nf);
    A.setFromTriplets(trip.begin(), trip.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(A);
    if (ldlt.info() != Eigen::Success)
        throw SolverError("hit-time factorization failed", -1.0);
    Eigen::VectorXd x = ldlt.solve(b);
    for (int p = 0; p < nf; ++p) v[free_nodes[p]] = x(p);
    return v;
}

// Discrete zero-trace Dirichlet energy sum_edges (du)^2 h^{d-2}; fields with
// nonzero boundary values get the boundary edges counted as well.
inline double dirichlet_energy(const ScalarField& f, const Grid& g) {
    double acc = 0.0;
    for (int i = 0; i < g.n(); ++i) {
        for (int axis = 0; axis < g.dim; ++axis) {
            const int nb = g.neighbor_at(i, axis, 0);  // +direction once per edge
            if (nb < 0) continue;
            const double d = f[nb] - f[i];
            acc += d * d;
        }
    }
    return acc * std::pow(g.spacing, g.dim - 2);
}

}  // namespace bmt
