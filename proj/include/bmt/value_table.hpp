#pragma once

#include <numeric>
#include <vector>

#include "bmt/cost.hpp"
#include "bmt/obstacle.hpp"

namespace bmt {

struct ValueTableOptions {
    ObstacleSolveOptions solve;
    double contact_tol = 1e-6;
    double boundary_tol = 1e-12;  // allowed |psi| on the boundary
    const struct ValueTable* warm = nullptr;  // previous table, speeds the sweeps
};

// Per-source optimal stopping values J(x, y): row x solves the obstacle
// problem with obstacle psi - c(x,.) and boundary data -c(x,.). Rows are
// independent.
struct ValueTable {
    int n_nodes = 0;
    std::vector<int> sources;              // node indices
    std::vector<double> values;            // n_sources * n_nodes
    std::vector<std::uint8_t> active;      // contact flags, n_sources * n_nodes
    std::vector<double> residual;          // per row

    int n_sources() const { return static_cast<int>(sources.size()); }
    double at(int row, int node) const {
        return values[static_cast<std::size_t>(row) * n_nodes + node];
    }
    bool contact(int row, int node) const {
        return active[static_cast<std::size_t>(row) * n_nodes + node] != 0;
    }
    std::span<const double> row(int r) const {
        return {values.data() + static_cast<std::size_t>(r) * n_nodes,
                static_cast<std::size_t>(n_nodes)};
    }
    // row index for a given source node, -1 if absent
    int row_of(int source_node) const {
        for (int r = 0; r < n_sources(); ++r)
            if (sources[r] == source_node) return r;
        return -1;
    }
    // J(x, x) for row r
    double diagonal(int r) const { return at(r, sources[r]); }
};

inline void require_zero_boundary(const ScalarField& psi, const Grid& g, double tol) {
    for (int i : g.boundary)
        if (std::abs(psi[i]) > tol)
            throw PreconditionError("potential must vanish on the boundary");
}

inline ValueTable value_table(const ScalarField& psi, const CostMatrix& C,
                              const Grid& g, std::vector<int> sources = {},
                              const ValueTableOptions& opt = {}) {
    if (psi.size() != g.n()) throw PreconditionError("potential size does not match grid");
    if (C.n != g.n()) throw PreconditionError("cost matrix does not match grid");
    require_zero_boundary(psi, g, opt.boundary_tol);

    ValueTable t;
    t.n_nodes = g.n();
    if (sources.empty()) {
        sources.resize(g.n());
        std::iota(sources.begin(), sources.end(), 0);
    }
    t.sources = std::move(sources);
    const int ns = t.n_sources();
    t.values.resize(static_cast<std::size_t>(ns) * g.n());
    t.active.assign(static_cast<std::size_t>(ns) * g.n(), 0);
    t.residual.resize(ns);

    ScalarField obstacle(g.n(), 0.0), bdry(g.n(), 0.0), warm_row(g.n(), 0.0);
    for (int r = 0; r < ns; ++r) {
        const int x = t.sources[r];
        const double* crow = C.values.data() + static_cast<std::size_t>(x) * g.n();
        for (int y = 0; y < g.n(); ++y) obstacle[y] = psi[y] - crow[y];
        for (int y : g.boundary) bdry[y] = -crow[y];
        ObstacleSolveOptions sopt = opt.solve;
        int warm_row_idx = -1;
        if (opt.warm && opt.warm->n_nodes == g.n()) warm_row_idx = opt.warm->row_of(x);
        if (warm_row_idx >= 0) {
            const auto row = opt.warm->row(warm_row_idx);
            for (int y = 0; y < g.n(); ++y) warm_row[y] = row[y];
            sopt.warm_start = &warm_row;
        }
        ObstacleSolution sol;
        try {
            sol = obstacle_solve(obstacle, bdry, g, sopt);
        } catch (const MaxIterationsError& e) {
            throw MaxIterationsError(
                "value table row for source " + std::to_string(x) + ": " + e.what(),
                e.budget, e.residual);
        }
        double* out = t.values.data() + static_cast<std::size_t>(r) * g.n();
        std::uint8_t* act = t.active.data() + static_cast<std::size_t>(r) * g.n();
        for (int y = 0; y < g.n(); ++y) {
            out[y] = sol.u[y];
            // barrier tie-break: contact within tolerance counts as contact
            if (sol.u[y] - obstacle[y] <= opt.contact_tol) act[y] = 1;
        }
        for (int y : g.boundary) act[y] = 1;
        t.residual[r] = sol.complementarity_residual;
    }
    return t;
}

}  // namespace bmt
