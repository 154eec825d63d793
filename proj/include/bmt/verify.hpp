#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <random>
#include <vector>

#include "bmt/barrier.hpp"
#include "bmt/dual.hpp"
#include "bmt/lp_oracle.hpp"

namespace bmt {

struct VerifyOptions {
    double contact_tol = 1e-6;
    double mono_tol = 1e-6;
    long n_quadruples = 10000;
    std::uint64_t seed = 7;
    double support_floor = 1e-12;  // plan mass below this does not count as support
};

struct MonoViolation {
    int x = -1, x_alt = -1, y = -1;
    double excess = 0.0;
};

struct VerifyReport {
    double off_contact_mass = 0.0;    // plan mass on pairs with slack > contact_tol
    double duality_gap = 0.0;         // plan cost - dual objective
    long quadruples_checked = 0;
    long mono_violations = 0;
    double worst_mono_excess = 0.0;
    std::vector<MonoViolation> samples;  // up to 32 recorded violations
    bool contact_ok(double mass_tol = 1e-3) const { return off_contact_mass <= mass_tol; }
};

// Optimality audit of a transport plan against a certified potential and its
// value table: contact-support check, duality gap, and the stop-go
// monotonicity inequality on sampled quadruples. The continuation law from an
// intermediate node follows the alternate source's own barrier.
inline VerifyReport verify_optimality(const TransportPlan& plan, const ScalarField& psi,
                                      const ValueTable& table, const CostMatrix& C,
                                      const GridMeasure& mu, const GridMeasure& nu,
                                      const Grid& g, const VerifyOptions& opt = {}) {
    VerifyReport rep;

    // (a) mass on pairs whose slack exceeds the contact tolerance
    double off = 0.0, total = 0.0;
    for (std::size_t s = 0; s < plan.sources.size(); ++s) {
        const int x = plan.sources[s];
        const int row = table.row_of(x);
        if (row < 0) throw PreconditionError("value table misses a plan source");
        for (int y = 0; y < g.n(); ++y) {
            const double m = plan.mu_weights[s] * plan.pi[s][y];
            if (m <= 0.0) continue;
            total += m;
            const double slack = table.at(row, y) - psi[y] + C.at(x, y);
            if (slack > opt.contact_tol) off += m;
        }
    }
    rep.off_contact_mass = total > 0.0 ? off / total : 0.0;

    // (b) duality gap against the supplied potential
    rep.duality_gap = plan.cost - dual_objective(psi, mu, nu, C, g, &table);

    // (c) stop-go monotonicity on sampled quadruples. sigma pairs (x', y) are
    // one-step intermediates of the barrier rule for x'; the continuation from
    // y is the hitting law of x''s own contact set.
    struct ContState {
        std::unique_ptr<AbsorbingChainSolver> chain;
        std::vector<std::uint8_t> mask;
    };
    std::vector<ContState> cont(plan.sources.size());
    auto chain_for = [&](std::size_t s) -> ContState& {
        if (!cont[s].chain) {
            const int row = table.row_of(plan.sources[s]);
            cont[s].mask.assign(g.n(), 0);
            for (int i : g.interior)
                if (table.contact(row, i)) cont[s].mask[i] = 1;
            cont[s].chain = std::make_unique<AbsorbingChainSolver>(cont[s].mask, g);
        }
        return cont[s];
    };

    // final pairs of the plan, grouped by target node
    std::vector<std::vector<int>> stoppers_at(g.n());  // source rows s with pi_s(y) > 0
    for (std::size_t s = 0; s < plan.sources.size(); ++s)
        for (int y = 0; y < g.n(); ++y)
            if (plan.mu_weights[s] * plan.pi[s][y] > opt.support_floor)
                stoppers_at[y].push_back(static_cast<int>(s));

    // intermediate pairs (x', y): every node the walk from x' can occupy
    // strictly before its own stop is a point of some intermediate law of the
    // plan's rule for x'
    std::vector<std::pair<int, int>> intermediates;  // (source index, y)
    for (std::size_t s = 0; s < plan.sources.size(); ++s) {
        const int x = plan.sources[s];
        if (!g.is_interior(x)) continue;
        const int row = table.row_of(x);
        // BFS through the continuation region
        std::vector<std::uint8_t> seen(g.n(), 0);
        std::vector<int> queue;
        if (!table.contact(row, x)) {
            seen[x] = 1;
            queue.push_back(x);
        }
        for (std::size_t qi = 0; qi < queue.size(); ++qi) {
            const int at = queue[qi];
            if (!stoppers_at[at].empty())
                intermediates.emplace_back(static_cast<int>(s), at);
            for (int k = 0; k < 2 * g.dim; ++k) {
                const int nb = g.neighbor[static_cast<std::size_t>(at) * 2 * g.dim + k];
                if (!g.is_interior(nb) || seen[nb]) continue;
                if (table.contact(row, nb)) continue;
                seen[nb] = 1;
                queue.push_back(nb);
            }
        }
    }

    if (intermediates.empty()) return rep;

    std::mt19937_64 rng(opt.seed);
    std::uniform_int_distribution<std::size_t> pick_mid(0, intermediates.size() - 1);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::map<std::pair<int, int>, StoppedLaw> laws;  // continuation cache

    for (long q = 0; q < opt.n_quadruples; ++q) {
        const auto [s_alt, y] = intermediates[pick_mid(rng)];
        const auto& candidates = stoppers_at[y];
        const int s_stop = candidates[static_cast<std::size_t>(unif(rng) * candidates.size()) %
                                      candidates.size()];
        if (s_stop == s_alt) continue;
        const int x = plan.sources[s_stop];     // stops at y under the plan
        const int x_alt = plan.sources[s_alt];  // passes through y and continues

        auto it = laws.find({s_alt, y});
        if (it == laws.end()) {
            ContState& cs = chain_for(s_alt);
            it = laws.emplace(std::make_pair(s_alt, y), cs.chain->solve(y)).first;
        }
        const GridMeasure& continuation = it->second.law;

        double e_cost_x = 0.0, e_cost_alt = 0.0;
        for (int i = 0; i < g.n(); ++i) {
            if (continuation[i] == 0.0) continue;
            e_cost_x += continuation[i] * C.at(x, i);
            e_cost_alt += continuation[i] * C.at(x_alt, i);
        }
        const double lhs = C.at(x, y) + e_cost_alt;
        const double rhs = C.at(x_alt, y) + e_cost_x;
        ++rep.quadruples_checked;
        if (lhs > rhs + opt.mono_tol) {
            ++rep.mono_violations;
            rep.worst_mono_excess = std::max(rep.worst_mono_excess, lhs - rhs);
            if (rep.samples.size() < 32)
                rep.samples.push_back({x, x_alt, y, lhs - rhs});
        }
    }
    return rep;
}

}  // namespace bmt
