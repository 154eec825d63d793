#pragma once

#include <cmath>
#include <vector>

#include "bmt/stopping.hpp"
#include "bmt/value_table.hpp"

namespace bmt {

// Contact-set barrier: pairs (source, target) where the value touches the
// obstacle within the tolerance. Boundary targets always count: the walk is
// absorbed there regardless.
struct Barrier {
    int n_nodes = 0;
    std::vector<int> sources;
    std::vector<std::uint8_t> contains;  // n_sources * n_nodes
    std::vector<double> slack;           // J - (psi - c), same layout
    double tol = 0.0;

    int n_sources() const { return static_cast<int>(sources.size()); }
    bool at(int row, int node) const {
        return contains[static_cast<std::size_t>(row) * n_nodes + node] != 0;
    }
    double slack_at(int row, int node) const {
        return slack[static_cast<std::size_t>(row) * n_nodes + node];
    }
    int row_of(int source_node) const {
        for (int r = 0; r < n_sources(); ++r)
            if (sources[r] == source_node) return r;
        return -1;
    }
    std::vector<std::uint8_t> absorbing_mask(int row, const Grid& g) const {
        std::vector<std::uint8_t> mask(n_nodes, 0);
        for (int i : g.interior)
            if (at(row, i)) mask[i] = 1;
        return mask;
    }
};

inline Barrier extract_barrier(const ScalarField& psi, const ValueTable& table,
                               const CostMatrix& C, const Grid& g, double tol) {
    Barrier b;
    b.n_nodes = table.n_nodes;
    b.sources = table.sources;
    b.tol = tol;
    b.contains.assign(static_cast<std::size_t>(b.n_sources()) * b.n_nodes, 0);
    b.slack.assign(static_cast<std::size_t>(b.n_sources()) * b.n_nodes, 0.0);
    for (int r = 0; r < b.n_sources(); ++r) {
        const int x = b.sources[r];
        for (int y = 0; y < b.n_nodes; ++y) {
            const double s = table.at(r, y) - psi[y] + C.at(x, y);
            b.slack[static_cast<std::size_t>(r) * b.n_nodes + y] = s;
            if (s <= tol) b.contains[static_cast<std::size_t>(r) * b.n_nodes + y] = 1;
        }
        for (int y : g.boundary)
            b.contains[static_cast<std::size_t>(r) * b.n_nodes + y] = 1;
    }
    return b;
}

// Overlap decomposition: the common part min(mu, nu) stays put at time zero,
// the disjoint remainders are what the walk actually transports.
struct StayPutSplit {
    GridMeasure common;
    GridMeasure mu_rest;
    GridMeasure nu_rest;
    double common_mass = 0.0;
    double rest_mass = 0.0;
};

inline StayPutSplit stay_put_split(const GridMeasure& mu, const GridMeasure& nu) {
    if (mu.size() != nu.size()) throw PreconditionError("marginal sizes differ");
    StayPutSplit out;
    const int n = mu.size();
    out.common = GridMeasure(n, 0.0);
    out.mu_rest = GridMeasure(n, 0.0);
    out.nu_rest = GridMeasure(n, 0.0);
    for (int i = 0; i < n; ++i) {
        out.common[i] = std::min(mu[i], nu[i]);
        out.mu_rest[i] = mu[i] - out.common[i];
        out.nu_rest[i] = nu[i] - out.common[i];
    }
    out.common_mass = out.common.total();
    out.rest_mass = out.mu_rest.total();
    return out;
}

// Deterministic stopped law of the first-entry rule "stop at the first step
// t >= 1 with (X_0, X_t) in the barrier". The origin pair being in the
// barrier does not trigger a stop at time zero; that is the stay-put
// randomization's job.
inline GridMeasure exact_stopped_law(const Barrier& barrier, const GridMeasure& mu,
                                     const Grid& g) {
    if (mu.size() != g.n()) throw PreconditionError("measure size does not match grid");
    GridMeasure out(g.n(), 0.0);
    const double inv2d = 1.0 / (2.0 * g.dim);
    for (int r = 0; r < barrier.n_sources(); ++r) {
        const int x = barrier.sources[r];
        const double w = mu[x];
        if (w <= 0.0) continue;
        if (!g.is_interior(x)) {
            out[x] += w;  // boundary sources are already absorbed
            continue;
        }
        const AbsorbingChainSolver chain(barrier.absorbing_mask(r, g), g);
        // one forced step, then absorption on the barrier
        GridMeasure entering(g.n(), 0.0);
        for (int s = 0; s < 2 * g.dim; ++s)
            entering[g.neighbor[static_cast<std::size_t>(x) * 2 * g.dim + s]] += inv2d;
        const StoppedLaw sl = chain.solve_from(entering);
        for (int i = 0; i < g.n(); ++i) out[i] += w * sl.law[i];
    }
    for (int i = 0; i < g.n(); ++i)
        if (mu[i] > 0.0 && barrier.row_of(i) < 0)
            throw PreconditionError("barrier has no row for a source with mass");
    return out;
}

inline double total_variation(const GridMeasure& a, const GridMeasure& b) {
    if (a.size() != b.size()) throw PreconditionError("measure sizes differ");
    double tv = 0.0;
    for (int i = 0; i < a.size(); ++i) tv += std::abs(a[i] - b[i]);
    return 0.5 * tv;
}

}  // namespace bmt
