#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <cmath>
#include <memory>
#include <vector>

#include "bmt/grid.hpp"
#include "bmt/laplacian.hpp"

namespace bmt {

// Hitting law and expected occupation of the walk absorbed on a node set.
struct StoppedLaw {
    GridMeasure law;                   // stopped distribution over all nodes
    std::vector<double> occupation;    // expected physical time per node
    double expected_time = 0.0;        // total expected physical stopping time
};

// One factorization of the free (non-absorbing interior) block, reusable for
// many sources against the same absorbing set. Boundary always absorbs.
class AbsorbingChainSolver {
public:
    AbsorbingChainSolver(const std::vector<std::uint8_t>& absorbing_mask, const Grid& g)
        : grid_(&g) {
        if (static_cast<int>(absorbing_mask.size()) != g.n())
            throw PreconditionError("absorbing mask size does not match grid");
        pos_.assign(g.n(), -1);
        for (int i : g.interior)
            if (!absorbing_mask[i]) {
                pos_[i] = static_cast<int>(free_.size());
                free_.push_back(i);
            }
        const int nf = static_cast<int>(free_.size());
        if (nf == 0) return;
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(static_cast<std::size_t>(nf) * (2 * g.dim + 1));
        const double inv2d = 1.0 / (2.0 * g.dim);
        for (int p = 0; p < nf; ++p) {
            const int i = free_[p];
            trip.emplace_back(p, p, 1.0);
            for (int s = 0; s < 2 * g.dim; ++s) {
                const int nb = g.neighbor[static_cast<std::size_t>(i) * 2 * g.dim + s];
                if (pos_[nb] >= 0) trip.emplace_back(p, pos_[nb], -inv2d);
            }
        }
        Eigen::SparseMatrix<double> A(nf, nf);
        A.setFromTriplets(trip.begin(), trip.end());
        ldlt_ = std::make_unique<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>(A);
        if (ldlt_->info() != Eigen::Success)
            throw SolverError("absorbing chain factorization failed", -1.0);
    }

    bool is_free(int node) const { return pos_[node] >= 0; }

    // Walk entering with the given sub-probability distribution over free
    // nodes plus mass already sitting on absorbing nodes.
    StoppedLaw solve_from(const GridMeasure& entering) const {
        const Grid& g = *grid_;
        StoppedLaw out;
        out.law = GridMeasure(g.n(), 0.0);
        out.occupation.assign(g.n(), 0.0);
        const int nf = static_cast<int>(free_.size());
        const double inv2d = 1.0 / (2.0 * g.dim);
        const double dt = g.step_time();

        Eigen::VectorXd b = Eigen::VectorXd::Zero(std::max(nf, 1));
        for (int i = 0; i < g.n(); ++i) {
            if (entering[i] == 0.0) continue;
            if (pos_[i] >= 0)
                b(pos_[i]) += entering[i];
            else
                out.law[i] += entering[i];
        }
        if (nf > 0) {
            // visits(z) = expected number of times the walk occupies z
            Eigen::VectorXd visits = ldlt_->solve(b);
            for (int p = 0; p < nf; ++p) {
                const int z = free_[p];
                const double v = visits(p);
                if (v == 0.0) continue;
                out.occupation[z] = v * dt;
                out.expected_time += v * dt;
                for (int s = 0; s < 2 * g.dim; ++s) {
                    const int nb = g.neighbor[static_cast<std::size_t>(z) * 2 * g.dim + s];
                    if (pos_[nb] < 0) out.law[nb] += v * inv2d;
                }
            }
        }
        return out;
    }

    StoppedLaw solve(int source) const {
        GridMeasure e(grid_->n(), 0.0);
        e[source] = 1.0;
        return solve_from(e);
    }

private:
    const Grid* grid_;
    std::vector<int> pos_;
    std::vector<int> free_;
    std::unique_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> ldlt_;
};

// Hitting law of absorbing (plus the boundary) for the walk from `source`;
// a source inside the absorbing set is stopped immediately.
inline StoppedLaw stopped_law_with_occupation(int source,
                                              const std::vector<std::uint8_t>& absorbing,
                                              const Grid& g) {
    AbsorbingChainSolver chain(absorbing, g);
    StoppedLaw out = chain.solve(source);
    const double mass = out.law.total();
    if (std::abs(mass - 1.0) > 1e-10)
        throw SolverError("stopped law lost mass", std::abs(mass - 1.0));
    return out;
}

inline GridMeasure stopped_distribution(int source,
                                        const std::vector<std::uint8_t>& absorbing,
                                        const Grid& g) {
    return stopped_law_with_occupation(source, absorbing, g).law;
}

// Exact value of sup over stopping times of E[payoff(X_tau)] for the walk
// absorbed at the boundary, by monotone value iteration from below plus a
// direct re-solve on the detected stop set. Independent of the PSOR path.
// An optional mask restricts where stopping is allowed: outside it the walk
// must continue (useful for support-constrained stopping subproblems).
struct StoppingValue {
    ScalarField value;
    std::vector<std::uint8_t> stop;  // interior nodes where stopping is optimal
};

inline StoppingValue optimal_stopping_value(
    const ScalarField& payoff, const Grid& g, const ScalarField* warm_start = nullptr,
    const std::vector<std::uint8_t>* allowed_stop = nullptr) {
    StoppingValue res;
    res.value = ScalarField(g.n(), 0.0);
    ScalarField& v = res.value;
    double lowest = 0.0;
    for (int i = 0; i < g.n(); ++i) lowest = std::min(lowest, payoff[i]);
    auto may_stop = [&](int i) { return !allowed_stop || (*allowed_stop)[i] != 0; };
    for (int i : g.boundary) v[i] = payoff[i];
    for (int i : g.interior) {
        const double floor = may_stop(i) ? payoff[i] : lowest;
        v[i] = warm_start ? std::max(floor, (*warm_start)[i]) : floor;
    }

    const double inv2d = 1.0 / (2.0 * g.dim);
    const double scale = 1.0 + payoff.max_abs();
    const double tol = 1e-13 * scale;
    // Gauss-Seidel-style sweeps stay monotone from below and converge faster
    // than Jacobi sweeps; the fixed point is the same.
    for (long it = 0; it < 1000000; ++it) {
        double change = 0.0;
        for (int i : g.interior) {
            double nb = 0.0;
            for (int s = 0; s < 2 * g.dim; ++s)
                nb += v[g.neighbor[static_cast<std::size_t>(i) * 2 * g.dim + s]];
            const double cont = nb * inv2d;
            const double next = may_stop(i) ? std::max(payoff[i], cont) : cont;
            change = std::max(change, next - v[i]);
            v[i] = next;
        }
        if (change <= tol) break;
    }

    res.stop.assign(g.n(), 0);
    for (int i : g.interior)
        if (may_stop(i) && v[i] - payoff[i] <= 1e-9 * scale) res.stop[i] = 1;

    // pin the stop set, make the continuation region exactly harmonic
    ScalarField exact = v;
    std::vector<std::uint8_t> is_free(g.n(), 0);
    for (int i : g.interior) {
        if (res.stop[i])
            exact[i] = payoff[i];
        else
            is_free[i] = 1;
    }
    bool ok = detail::harmonic_fill(exact, is_free, g);
    if (ok) {
        const double vtol = 1e-11 * scale;
        for (int i : g.interior) {
            if (is_free[i]) {
                if (may_stop(i) && exact[i] < payoff[i] - vtol) { ok = false; break; }
            } else {
                double nb = 0.0;
                for (int s = 0; s < 2 * g.dim; ++s)
                    nb += exact[g.neighbor[static_cast<std::size_t>(i) * 2 * g.dim + s]];
                if (nb * inv2d > exact[i] + vtol) { ok = false; break; }
            }
        }
    }
    if (ok) res.value = exact;
    return res;
}

}  // namespace bmt
