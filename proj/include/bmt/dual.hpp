#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "bmt/laplacian.hpp"
#include "bmt/lp_oracle.hpp"
#include "bmt/stopping.hpp"
#include "bmt/value_table.hpp"

namespace bmt {

// Feasibility certificate for a dual potential: nonpositive, vanishing on the
// boundary, Laplacian at most D, and above the exit-time lower bound D*u_O.
struct DualCertificate {
    double bound_d = 0.0;
    double max_value = 0.0;           // max psi over all nodes
    double max_boundary_abs = 0.0;    // max |psi| on the boundary
    double max_laplacian_excess = 0.0;  // max (L psi - D)_+ over interior
    double min_exit_gap = 0.0;        // min (psi - D u_O) over all nodes

    bool value_ok() const { return max_value <= 1e-10; }
    bool boundary_ok() const { return max_boundary_abs <= 1e-12; }
    bool laplacian_ok() const { return max_laplacian_excess <= 1e-8; }
    bool exit_bound_ok() const { return min_exit_gap >= -1e-8; }
    bool pass() const {
        return value_ok() && boundary_ok() && laplacian_ok() && exit_bound_ok();
    }
};

inline DualCertificate certify_potential(const ScalarField& psi, double D,
                                         const Grid& g,
                                         const ScalarField& exit_potential) {
    DualCertificate c;
    c.bound_d = D;
    c.max_value = -std::numeric_limits<double>::infinity();
    c.min_exit_gap = std::numeric_limits<double>::infinity();
    for (int i = 0; i < g.n(); ++i) {
        c.max_value = std::max(c.max_value, psi[i]);
        c.min_exit_gap = std::min(c.min_exit_gap, psi[i] - D * exit_potential[i]);
    }
    for (int i : g.boundary)
        c.max_boundary_abs = std::max(c.max_boundary_abs, std::abs(psi[i]));
    const ScalarField lp = discrete_laplacian(psi, g);
    for (int i : g.interior)
        c.max_laplacian_excess = std::max(c.max_laplacian_excess, lp[i] - D);
    c.max_laplacian_excess = std::max(c.max_laplacian_excess, 0.0);
    return c;
}

inline void require_subharmonic_cost(const CostMatrix& C) {
    if (C.min_target_laplacian < -1e-12 * (1.0 + std::abs(C.max_target_laplacian)))
        throw SubharmonicityRequiredError(
            "cost is not subharmonic in the target variable; apply the "
            "subharmonizing shift first",
            C.min_target_laplacian);
}

// Dual functional: integral of psi against nu minus the diagonal of the value
// table against mu.
inline double dual_objective(const ScalarField& psi, const GridMeasure& mu,
                             const GridMeasure& nu, const CostMatrix& C,
                             const Grid& g, const ValueTable* table = nullptr,
                             const ValueTableOptions& vopt = {}) {
    std::optional<ValueTable> local;
    if (table == nullptr) {
        std::vector<int> supp;
        for (int i = 0; i < g.n(); ++i)
            if (mu[i] > 0.0) supp.push_back(i);
        local = value_table(psi, C, g, supp, vopt);
        table = &*local;
    }
    double obj = integrate(psi, nu);
    for (int r = 0; r < table->n_sources(); ++r)
        obj -= mu[table->sources[r]] * table->diagonal(r);
    return obj;
}

struct ImproveResult {
    ScalarField psi;
    DualCertificate certificate;
    ValueTable table;  // all-source table of the envelope-reduced potential
};

struct ImproveOptions {
    ValueTableOptions table;
    double boundary_tol = 1e-12;
};

// Feasibility-restoring projection built from the value table itself. First
// subtract the superharmonic envelope (restores nonpositivity and the zero
// trace without losing dual value when the marginals are in subharmonic
// order), then replace the potential by the pointwise infimum over sources of
// value-plus-cost (restores the Laplacian bound, keeps every row of the value
// table fixed).
inline ImproveResult improve(const ScalarField& psi, const CostMatrix& C,
                             const Grid& g, const ScalarField& exit_potential,
                             const ImproveOptions& opt = {}) {
    require_subharmonic_cost(C);
    if (psi.size() != g.n()) throw PreconditionError("potential size does not match grid");

    const ObstacleSolution env = superharmonic_envelope(psi, g, opt.table.solve);
    ScalarField reduced(g.n(), 0.0);
    for (int i = 0; i < g.n(); ++i) reduced[i] = psi[i] - env.u[i];
    for (int i : g.boundary) reduced[i] = 0.0;  // exact zero trace by construction

    ImproveResult out;
    out.table = value_table(reduced, C, g, {}, opt.table);
    const ValueTable& t = out.table;
    out.psi = ScalarField(g.n(), 0.0);
    for (int y = 0; y < g.n(); ++y) {
        double best = std::numeric_limits<double>::infinity();
        for (int r = 0; r < t.n_sources(); ++r)
            best = std::min(best, t.at(r, y) + C.at(t.sources[r], y));
        out.psi[y] = best;
    }
    out.certificate =
        certify_potential(out.psi, C.max_target_laplacian, g, exit_potential);
    return out;
}

inline ImproveResult improve(const ScalarField& psi, const CostMatrix& C,
                             const Grid& g, const ImproveOptions& opt = {}) {
    return improve(psi, C, g, exit_time_potential(g), opt);
}

// Contact-tie normalization. The infimum projection saturates the potential
// against value-plus-cost wherever it can, which puts spurious pairs (ones no
// optimal plan stops on, the source diagonal in particular) into the contact
// set: the lattice walk revisits points, so a first-entry rule would strand
// mass there. Subtracting a small multiple of the complement hit-time
// potential (zero on supp nu and the boundary) opens strict slack off the
// target support. The map never lowers the dual objective: it leaves the
// nu-integral untouched and can only shrink the value-table diagonal.
inline ScalarField open_offsupport_slack(const ScalarField& psi, const GridMeasure& nu,
                                         double D, const Grid& g,
                                         const ScalarField& exit_potential,
                                         double max_coeff = 1.0) {
    std::vector<std::uint8_t> support(g.n(), 0);
    bool any_free = false;
    for (int i : g.interior) {
        support[i] = nu[i] > 0.0 ? 1 : 0;
        any_free = any_free || !support[i];
    }
    if (!any_free) return psi;
    const ScalarField v = expected_hit_time(support, g);
    const ScalarField lp = discrete_laplacian(psi, g);
    const ScalarField lv = discrete_laplacian(v, g);
    double eps = max_coeff;
    for (int i : g.interior) {
        if (v[i] <= 0.0) continue;
        if (lv[i] < -1e-12)  // lowering raises the Laplacian here
            eps = std::min(eps, 0.9 * std::max(D - lp[i], 0.0) / (-lv[i]));
        const double headroom = psi[i] - D * exit_potential[i];
        eps = std::min(eps, 0.9 * std::max(headroom, 0.0) / v[i]);
    }
    if (eps <= 0.0) return psi;
    ScalarField out = psi;
    for (int i : g.interior) out[i] -= eps * v[i];
    return out;
}

// Aggregate stopped law at the contact sets of a value table: the
// supergradient of the diagonal term of the dual functional.
inline GridMeasure contact_stopped_law(const ValueTable& table, const GridMeasure& mu,
                                       const Grid& g) {
    GridMeasure out(g.n(), 0.0);
    std::vector<std::uint8_t> absorbing(g.n(), 0);
    for (int r = 0; r < table.n_sources(); ++r) {
        const int x = table.sources[r];
        const double w = mu[x];
        if (w <= 0.0) continue;
        for (int i : g.interior) absorbing[i] = table.contact(r, i) ? 1 : 0;
        const AbsorbingChainSolver chain(absorbing, g);
        const StoppedLaw sl = chain.solve(x);
        for (int i = 0; i < g.n(); ++i) out[i] += w * sl.law[i];
    }
    return out;
}

// Certified potential built from LP dual prices: improvement projection plus
// the off-support slack normalization. The result is a member of the
// certified class whose objective is at least the price vector's Lagrangian
// bound, which for optimal prices pins it at the optimum itself.
inline ImproveResult certify_prices(const ScalarField& prices, const GridMeasure& nu,
                                    const CostMatrix& C, const Grid& g,
                                    const ScalarField& exit_potential,
                                    const ImproveOptions& opt = {}) {
    ImproveResult res = improve(prices, C, g, exit_potential, opt);
    res.psi = open_offsupport_slack(res.psi, nu, C.max_target_laplacian, g, exit_potential);
    res.certificate = certify_potential(res.psi, C.max_target_laplacian, g, exit_potential);
    return res;
}

enum class AscentStatus {
    ResidualConverged,
    GapConverged,
    StepExhausted,
    Stalled,
    IterationCap,
};

inline const char* to_string(AscentStatus s) {
    switch (s) {
        case AscentStatus::ResidualConverged: return "residual_converged";
        case AscentStatus::GapConverged: return "gap_converged";
        case AscentStatus::StepExhausted: return "step_exhausted";
        case AscentStatus::Stalled: return "stalled";
        case AscentStatus::IterationCap: return "iteration_cap";
    }
    return "?";
}

struct AscentOptions {
    int max_iterations = 400;
    double grad_tol = 0.02;                  // l1 residual target
    double gap_tol = 0.0;                    // relative gap target (needs primal_value)
    std::optional<double> primal_value;      // supplied primal cost, if any
    double alpha0 = 1.0;
    int max_halvings = 20;
    double objective_slack = 1e-8;           // tolerated per-step decrease
    bool precondition = true;                // inverse-Laplacian ascent direction
    bool check_order = true;                 // feasibility screen before ascending
    int stall_limit = 40;                    // iterations without progress before giving up
    ImproveOptions improve;
};

struct AscentIterate {
    int iteration = 0;
    double objective = 0.0;
    double residual = 0.0;
    double step = 0.0;
    double cert_max_value = 0.0;
    double cert_boundary = 0.0;
    double cert_laplacian_excess = 0.0;
    double cert_exit_gap = 0.0;
    double dirichlet_energy = 0.0;
};

struct DualState {
    ScalarField psi;
    ValueTable table;  // rows over supp(mu), for the returned potential
    double objective = 0.0;
    double residual = 0.0;
    DualCertificate certificate;
    AscentStatus status = AscentStatus::IterationCap;
    std::vector<AscentIterate> log;
    double energy_bound = 0.0;  // D^2 sum |u_O| h^d, a per-grid constant
    int iterations = 0;
};

// Supergradient ascent over the certified potentials, with the improvement
// operators as the feasibility projection, inverse-Laplacian preconditioning
// of the residual measure nu - A(psi), and a halving backtracking line search
// that accepts any step not decreasing the objective beyond solver noise.
inline DualState ascend(const GridMeasure& mu, const GridMeasure& nu,
                        const CostSpec& spec, const Grid& g,
                        const AscentOptions& opt = {}) {
    const CostMatrix C = eval_cost(spec, g);
    require_subharmonic_cost(C);
    if (opt.check_order) {
        const OrderCheck chk = check_subharmonic_order(mu, nu, g);
        if (!chk.feasible)
            throw InfeasibleError("marginals are not in subharmonic order",
                                  chk.witness ? chk.witness->values : std::vector<double>{},
                                  chk.separation);
    }

    const PoissonSolver solver(g);
    const ScalarField u_exit = exit_time_potential(solver);
    const double D = C.max_target_laplacian;
    const double vol = g.cell_volume();

    std::vector<int> supp;
    for (int i = 0; i < g.n(); ++i)
        if (mu[i] > 0.0) supp.push_back(i);

    DualState st;
    st.psi = ScalarField(g.n(), 0.0);
    st.certificate = certify_potential(st.psi, D, g, u_exit);
    st.table = value_table(st.psi, C, g, supp, opt.improve.table);
    st.objective = dual_objective(st.psi, mu, nu, C, g, &st.table);
    {
        double k = 0.0;
        for (int i : g.interior) k += std::abs(u_exit[i]) * vol;
        st.energy_bound = D * D * k;
    }

    GridMeasure contact_law = contact_stopped_law(st.table, mu, g);
    auto l1_residual = [&](const GridMeasure& law) {
        double r = 0.0;
        for (int i = 0; i < g.n(); ++i) r += std::abs(nu[i] - law[i]);
        return r;
    };
    st.residual = l1_residual(contact_law);

    auto push_log = [&](int iter, double step) {
        AscentIterate row;
        row.iteration = iter;
        row.objective = st.objective;
        row.residual = st.residual;
        row.step = step;
        row.cert_max_value = st.certificate.max_value;
        row.cert_boundary = st.certificate.max_boundary_abs;
        row.cert_laplacian_excess = st.certificate.max_laplacian_excess;
        row.cert_exit_gap = st.certificate.min_exit_gap;
        row.dirichlet_energy = dirichlet_energy(st.psi, g);
        st.log.push_back(row);
    };
    push_log(0, 0.0);

    ScalarField best_psi = st.psi;
    double best_objective = st.objective;

    for (int iter = 1; iter <= opt.max_iterations; ++iter) {
        st.iterations = iter - 1;
        if (st.residual <= opt.grad_tol) {
            st.status = AscentStatus::ResidualConverged;
            break;
        }
        if (opt.primal_value && opt.gap_tol > 0.0 &&
            *opt.primal_value - st.objective <=
                opt.gap_tol * std::max(1.0, std::abs(*opt.primal_value))) {
            st.status = AscentStatus::GapConverged;
            break;
        }

        ScalarField direction(g.n(), 0.0);
        if (opt.precondition) {
            ScalarField rhs(g.n(), 0.0);
            for (int i : g.interior) rhs[i] = -(nu[i] - contact_law[i]) / vol;
            direction = solver.solve(rhs, ScalarField(g.n(), 0.0));
        } else {
            for (int i : g.interior) direction[i] = nu[i] - contact_law[i];
        }

        bool accepted = false;
        double alpha = opt.alpha0;
        ImproveResult trial;
        ValueTable trial_table;
        double trial_objective = 0.0;
        for (int h = 0; h <= opt.max_halvings; ++h) {
            ScalarField cand(g.n(), 0.0);
            for (int i = 0; i < g.n(); ++i) cand[i] = st.psi[i] + alpha * direction[i];
            trial = improve(cand, C, g, u_exit, opt.improve);
            trial.psi = open_offsupport_slack(trial.psi, nu, D, g, u_exit);
            trial.certificate = certify_potential(trial.psi, D, g, u_exit);
            trial_table = value_table(trial.psi, C, g, supp, opt.improve.table);
            trial_objective = dual_objective(trial.psi, mu, nu, C, g, &trial_table);
            if (trial_objective >= st.objective - opt.objective_slack) {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) {
            st.status = AscentStatus::StepExhausted;
            break;
        }

        st.psi = std::move(trial.psi);
        st.certificate = trial.certificate;
        st.table = std::move(trial_table);
        st.objective = trial_objective;
        contact_law = contact_stopped_law(st.table, mu, g);
        st.residual = l1_residual(contact_law);
        push_log(iter, alpha);
        st.iterations = iter;

        if (st.objective > best_objective) {
            best_objective = st.objective;
            best_psi = st.psi;
        }
    }

    // return the best certified iterate by objective
    if (best_objective > st.objective + opt.objective_slack) {
        st.psi = best_psi;
        st.certificate = certify_potential(st.psi, D, g, u_exit);
        st.table = value_table(st.psi, C, g, supp, opt.improve.table);
        st.objective = dual_objective(st.psi, mu, nu, C, g, &st.table);
        st.residual = l1_residual(contact_stopped_law(st.table, mu, g));
    }
    return st;
}

}  // namespace bmt
