#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <vector>

#include "bmt/grid.hpp"
#include "bmt/laplacian.hpp"

namespace bmt {

struct ObstacleSolveOptions {
    double omega = 1.5;          // relaxation, [1, 2)
    double tol = 1e-9;           // sup-norm update criterion per sweep
    long max_iterations = 100000;
    bool polish = true;          // direct re-solve on the final inactive set
    const ScalarField* warm_start = nullptr;  // initial iterate, clipped to the obstacle
};

struct ObstacleSolution {
    ScalarField u;
    std::vector<std::uint8_t> active;   // per node; contact with the obstacle
    double complementarity_residual = 0.0;  // max_int |min(u - obstacle, -Lu)|
    long iterations = 0;
    bool polished = false;
};

// Least discretely-superharmonic function above the obstacle with the given
// boundary values. Projected SOR with lexicographic sweeps; by default the
// final active set is re-solved directly so the complementarity system holds
// to solver precision, with a fallback to the plain PSOR iterate if the
// re-solve fails verification.
inline ObstacleSolution obstacle_solve(const ScalarField& obstacle,
                                       const ScalarField& bdry, const Grid& g,
                                       const ObstacleSolveOptions& opt = {}) {
    if (obstacle.size() != g.n() || bdry.size() != g.n())
        throw PreconditionError("obstacle/boundary field size does not match grid");
    if (!obstacle.all_finite())
        throw PreconditionError("obstacle must be finite at every node");
    for (int i : g.boundary)
        if (bdry[i] < obstacle[i] - 1e-12 * (1.0 + std::abs(obstacle[i])))
            throw PreconditionError("boundary data below the obstacle");

    ObstacleSolution sol;
    sol.u = ScalarField(g.n(), 0.0);
    ScalarField& u = sol.u;
    for (int i : g.boundary) u[i] = bdry[i];
    for (int i : g.interior)
        u[i] = opt.warm_start ? std::max(obstacle[i], (*opt.warm_start)[i]) : obstacle[i];

    const double inv2d = 1.0 / (2.0 * g.dim);
    double change = 0.0;
    long it = 0;
    for (; it < opt.max_iterations; ++it) {
        change = 0.0;
        for (int i : g.interior) {
            double nb_sum = 0.0;
            for (int s = 0; s < 2 * g.dim; ++s)
                nb_sum += u[g.neighbor[static_cast<std::size_t>(i) * 2 * g.dim + s]];
            const double gs = nb_sum * inv2d;
            const double cand = u[i] + opt.omega * (gs - u[i]);
            const double next = std::max(obstacle[i], cand);
            change = std::max(change, std::abs(next - u[i]));
            u[i] = next;
        }
        if (change <= opt.tol) break;
    }
    sol.iterations = it + 1;
    if (change > opt.tol)
        throw MaxIterationsError("PSOR exceeded its iteration budget",
                                 opt.max_iterations, change);

    const double scale = 1.0 + std::max(u.max_abs(), obstacle.max_abs());
    const double contact_tol = std::max(100.0 * opt.tol, 1e-12) * scale;

    if (opt.polish) {
        std::vector<std::uint8_t> is_free(g.n(), 0);
        ScalarField polished = u;
        for (int i : g.interior) {
            if (u[i] - obstacle[i] > contact_tol)
                is_free[i] = 1;
            else
                polished[i] = obstacle[i];
        }
        if (detail::harmonic_fill(polished, is_free, g)) {
            bool ok = true;
            const double vtol = 1e-11 * scale;
            for (int i : g.interior) {
                if (is_free[i]) {
                    if (polished[i] < obstacle[i] - vtol) { ok = false; break; }
                } else {
                    double nb_sum = 0.0;
                    for (int s = 0; s < 2 * g.dim; ++s)
                        nb_sum += polished[g.neighbor[static_cast<std::size_t>(i) * 2 * g.dim + s]];
                    // stop nodes must stay superharmonic: average <= value
                    if (nb_sum * inv2d > polished[i] + vtol) { ok = false; break; }
                }
            }
            if (ok) {
                u = polished;
                sol.polished = true;
            }
        }
    }

    sol.active.assign(g.n(), 0);
    double res = 0.0;
    const double ih2 = 1.0 / (g.spacing * g.spacing);
    for (int i : g.interior) {
        double nb_sum = 0.0;
        for (int s = 0; s < 2 * g.dim; ++s)
            nb_sum += u[g.neighbor[static_cast<std::size_t>(i) * 2 * g.dim + s]];
        const double lap = (nb_sum - 2.0 * g.dim * u[i]) * ih2;
        res = std::max(res, std::abs(std::min(u[i] - obstacle[i], -lap)));
        if (u[i] - obstacle[i] <= contact_tol) sol.active[i] = 1;
    }
    sol.complementarity_residual = res;
    return sol;
}

// Least superharmonic majorant with the function's own boundary values.
inline ObstacleSolution superharmonic_envelope(const ScalarField& f, const Grid& g,
                                               const ObstacleSolveOptions& opt = {}) {
    return obstacle_solve(f, f, g, opt);
}

}  // namespace bmt
