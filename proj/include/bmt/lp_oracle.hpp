#pragma once

#include <cmath>
#include <limits>
#include <set>
#include <memory>
#include <optional>
#include <vector>

#include "bmt/cost.hpp"
#include "bmt/simplex.hpp"
#include "bmt/stopping.hpp"

namespace bmt {

struct LpOptions {
    long interior_cap = 300;
    double rel_gap = 1e-10;        // primal-dual certification target
    int max_rounds = 2000;         // column generation rounds
    double column_tol = 1e-11;     // reduced-cost threshold for new columns
    double feasibility_tol = 1e-10;
};

// Source-indexed stopped laws pi_x plus interior occupation densities m_x.
// Occupation is stored as physical-time density: multiplying by h^d gives the
// expected time the walk spends at the node before stopping.
struct TransportPlan {
    std::vector<int> sources;
    std::vector<double> mu_weights;
    std::vector<GridMeasure> pi;
    std::vector<std::vector<double>> occupation_density;
    double cost = 0.0;
    double dual_bound = 0.0;
    double rel_gap = 0.0;
    int rounds = 0;
    long simplex_iterations = 0;
    // dual prices at termination, extended below the useful range off the
    // support of nu (a valid starting point for certification)
    ScalarField node_prices;

    double aggregate(const int node) const {
        double s = 0.0;
        for (std::size_t r = 0; r < sources.size(); ++r) s += mu_weights[r] * pi[r][node];
        return s;
    }
};

struct OrderCheck {
    bool feasible = false;
    std::optional<TransportPlan> certificate;  // occupation certificate
    std::optional<ScalarField> witness;        // subharmonic separating witness
    double separation = 0.0;                   // <w, mu> - <w, nu> when infeasible
    double phase1_mass_gap = 0.0;
};

namespace detail {

inline void validate_marginals(const GridMeasure& mu, const GridMeasure& nu,
                               const Grid& g) {
    if (mu.size() != g.n() || nu.size() != g.n())
        throw PreconditionError("measure size does not match grid");
    if (!mu.is_probability(1e-12) || !nu.is_probability(1e-12))
        throw PreconditionError("marginals must be probability measures");
    for (int i : g.boundary)
        if (mu[i] > 0.0 || nu[i] > 0.0)
            throw PreconditionError("marginals must be supported inside the domain");
}

// Column-generation engine over the occupation polytope, restricted to the
// support of nu: every feasible plan stops inside it, so the master only
// carries rows for supported targets plus one convexity row per source. The
// per-source pricing subproblem is an optimal stopping problem allowed to
// stop on the support only, with the boundary priced low enough that valid
// rules avoid it whenever they can.
class OccupationLp {
public:
    OccupationLp(const GridMeasure& mu, const GridMeasure& nu, const Grid& g,
                 const LpOptions& opt)
        : g_(g), nu_(nu), opt_(opt) {
        validate_marginals(mu, nu, g);
        for (int i = 0; i < g.n(); ++i)
            if (mu[i] > 0.0) {
                sources_.push_back(i);
                weights_.push_back(mu[i]);
            }
        n_src_ = static_cast<int>(sources_.size());

        allowed_.assign(g.n(), 0);
        row_of_node_.assign(g.n(), -1);
        for (int i = 0; i < g.n(); ++i)
            if (nu[i] > 0.0) {
                allowed_[i] = 1;
                row_of_node_[i] = static_cast<int>(support_.size());
                support_.push_back(i);
            }
        n_node_rows_ = static_cast<int>(support_.size());

        b_exact_.assign(n_node_rows_ + n_src_, 0.0);
        for (int k = 0; k < n_node_rows_; ++k) b_exact_[k] = nu[support_[k]];
        for (int s = 0; s < n_src_; ++s) b_exact_[n_node_rows_ + s] = 1.0;
        // deterministic anti-degeneracy perturbation; every reported number
        // is recomputed against the exact right-hand side afterwards
        std::vector<double> b = b_exact_;
        for (std::size_t k = 0; k < b.size(); ++k) {
            const double u =
                static_cast<double>(splitmix64(0xb10c5eedULL + k) >> 11) * 0x1p-53;
            b[k] += 1e-10 * (0.5 + u) * (1.0 + b[k]);
        }
        lp_ = std::make_unique<DenseSimplex>(std::move(b));

        std::vector<int> basis;
        for (int s = 0; s < n_src_; ++s) {
            GridMeasure law(g.n(), 0.0);
            law[sources_[s]] = 1.0;
            basis.push_back(push_law_column(s, std::move(law), {})); // may leak off-support
        }
        t_start_ = n_columns();
        for (int k = 0; k < n_node_rows_; ++k) {
            DenseSimplex::Column plus, minus;
            plus.entries = {{k, 1.0}};
            plus.cost = 1.0;
            minus.entries = {{k, -1.0}};
            minus.cost = 1.0;
            meta_.push_back({});
            const int jp = lp_->add_column(std::move(plus));
            meta_.push_back({});
            lp_->add_column(std::move(minus));
            // initial slack: nu(y) minus the mass the seed columns put there
            const int node = support_[k];
            double seeded = 0.0;
            for (int s = 0; s < n_src_; ++s)
                if (sources_[s] == node) seeded += weights_[s];
            basis.push_back(nu[node] - seeded >= 0.0 ? jp : jp + 1);
        }
        lp_->set_basis(std::move(basis));
        warm_.assign(n_src_, ScalarField());
    }

    // Phase 1: minimize the total slack mass; zero means nu is reachable.
    // The returned slack is measured against the exact right-hand side.
    double run_feasibility_phase() {
        cost_ = nullptr;
        run_rounds(false);
        return finish_exact();
    }

    // Phase 2: minimize the transport cost (requires a feasible phase 1).
    void run_oracle_phase(const CostMatrix& C) {
        cost_ = &C;
        restore_perturbation();
        retire_slack_columns();
        for (int s = 0; s < n_src_; ++s) warm_[s] = ScalarField();
        for (int j = 0; j < n_columns(); ++j)
            if (meta_[j].source_row >= 0)
                lp_->column(j).cost = meta_[j].true_cost =
                    column_cost(meta_[j].source_row, meta_[j].law);
        restore_perturbation();
        run_rounds(true);
        finish_exact();
    }

    TransportPlan extract_plan() const {
        TransportPlan plan;
        plan.sources = sources_;
        plan.mu_weights = weights_;
        plan.pi.assign(n_src_, GridMeasure(g_.n(), 0.0));
        plan.occupation_density.assign(n_src_, std::vector<double>(g_.n(), 0.0));
        const auto& bas = lp_->basis();
        const double vol = g_.cell_volume();
        for (int r = 0; r < lp_->n_rows(); ++r) {
            const int j = bas[r];
            const double lam = lp_->basic_values()(r);
            if (lam <= 0.0 || meta_[j].source_row < 0) continue;
            const int s = meta_[j].source_row;
            for (int i = 0; i < g_.n(); ++i)
                if (meta_[j].law[i] != 0.0) plan.pi[s][i] += lam * meta_[j].law[i];
            if (!meta_[j].occupation.empty())
                for (int i = 0; i < g_.n(); ++i)
                    plan.occupation_density[s][i] += lam * meta_[j].occupation[i] / vol;
        }
        double cost = 0.0;
        if (cost_)
            for (int s = 0; s < n_src_; ++s)
                for (int i = 0; i < g_.n(); ++i)
                    if (plan.pi[s][i] != 0.0)
                        cost += weights_[s] * plan.pi[s][i] * cost_->at(sources_[s], i);
        plan.cost = cost;
        plan.dual_bound = best_bound_;
        plan.rel_gap = cost_ ? (cost - best_bound_) / std::max(1.0, std::abs(cost)) : 0.0;
        plan.rounds = rounds_;
        plan.simplex_iterations = lp_->iterations();
        plan.node_prices = extended_prices();
        return plan;
    }

    // prices on the support rows, extended off-support below the useful range
    ScalarField extended_prices() const {
        const auto y = lp_->duals();
        double lo = 0.0, hi = 0.0;
        for (int k = 0; k < n_node_rows_; ++k) {
            lo = std::min(lo, y[k]);
            hi = std::max(hi, y[k]);
        }
        double crange = 0.0;
        if (cost_)
            for (double v : cost_->values) crange = std::max(crange, std::abs(v));
        const double off = lo - (hi - lo) - 2.0 * crange - 1.0;
        ScalarField psi(g_.n(), off);
        for (int k = 0; k < n_node_rows_; ++k) psi[support_[k]] = y[k];
        return psi;
    }

    double objective() const { return lp_->objective(); }
    double best_bound() const { return best_bound_; }
    int rounds() const { return rounds_; }

private:
    struct ColumnMeta {
        int source_row = -1;
        GridMeasure law;
        std::vector<double> occupation;
        double true_cost = 0.0;
    };

    double column_cost(int s, const GridMeasure& law) const {
        if (!cost_ || s < 0) return 0.0;
        double c = 0.0;
        const double* row =
            cost_->values.data() + static_cast<std::size_t>(sources_[s]) * g_.n();
        for (int i = 0; i < g_.n(); ++i)
            if (law[i] != 0.0) c += law[i] * row[i];
        return weights_[s] * c;
    }

    int push_law_column(int s, GridMeasure law, std::vector<double> occupation) {
        DenseSimplex::Column col;
        for (int i = 0; i < g_.n(); ++i)
            if (law[i] != 0.0 && row_of_node_[i] >= 0)
                col.entries.emplace_back(row_of_node_[i], weights_[s] * law[i]);
        col.entries.emplace_back(n_node_rows_ + s, 1.0);
        col.cost = column_cost(s, law);
        ColumnMeta meta;
        meta.source_row = s;
        meta.law = std::move(law);
        meta.occupation = std::move(occupation);
        meta.true_cost = col.cost;
        meta_.push_back(std::move(meta));
        return lp_->add_column(std::move(col));
    }

    void retire_slack_columns() {
        for (int r = 0; r < lp_->n_rows(); ++r) {
            const int j = lp_->basis()[r];
            if (j < t_start_ || meta_[j].source_row >= 0) continue;
            for (int k = 0; k < n_columns() && lp_->basis()[r] == j; ++k)
                if (meta_[k].source_row >= 0) lp_->try_replace_basic(j, k);
        }
        for (int j = t_start_; j < n_columns(); ++j) {
            if (meta_[j].source_row >= 0) continue;
            lp_->column(j).frozen = true;
            lp_->column(j).cost = 0.0;
        }
    }

    int n_columns() const { return lp_->n_columns(); }

    // drop the perturbation and refactorize the final basis on exact data
    double finish_exact() {
        if (!lp_->reset_rhs(b_exact_))
            throw LpNumericalError("final basis infeasible on the exact data");
        return lp_->objective();
    }

    void restore_perturbation() {
        std::vector<double> b = b_exact_;
        for (std::size_t k = 0; k < b.size(); ++k) {
            const double u =
                static_cast<double>(splitmix64(0xb10c5eedULL + k) >> 11) * 0x1p-53;
            b[k] += 1e-10 * (0.5 + u) * (1.0 + b[k]);
        }
        if (!lp_->reset_rhs(std::move(b)))
            throw LpNumericalError("perturbed basis became infeasible");
    }

    void run_rounds(bool oracle_phase) {
        best_bound_ = -std::numeric_limits<double>::infinity();
        double crange = 0.0;
        if (cost_)
            for (double v : cost_->values) crange = std::max(crange, std::abs(v));
        for (int round = 0; round < opt_.max_rounds; ++round) {
            ++rounds_;
            if (lp_->solve() == DenseSimplex::Status::IterationLimit)
                throw LpNumericalError("simplex hit its iteration limit");
            const double ub = lp_->objective();
            const auto y = lp_->duals();

            // boundary priced below every achievable stop value
            double lo = 0.0, hi = 0.0;
            for (int k = 0; k < n_node_rows_; ++k) {
                lo = std::min(lo, y[k]);
                hi = std::max(hi, y[k]);
            }
            const double pen = lo - 3.0 * (hi - lo + crange) - 1.0;

            double bound = 0.0;
            for (int k = 0; k < n_node_rows_; ++k) bound += y[k] * nu_[support_[k]];
            int added = 0;
            for (int s = 0; s < n_src_; ++s) {
                ScalarField payoff(g_.n(), pen);
                const double* crow =
                    oracle_phase
                        ? cost_->values.data() + static_cast<std::size_t>(sources_[s]) * g_.n()
                        : nullptr;
                for (int k = 0; k < n_node_rows_; ++k) {
                    const int node = support_[k];
                    payoff[node] = y[k] - (crow ? crow[node] : 0.0);
                }
                const StoppingValue sv = optimal_stopping_value(
                    payoff, g_, warm_[s].size() == g_.n() ? &warm_[s] : nullptr, &allowed_);
                warm_[s] = sv.value;
                const double v = sv.value[sources_[s]];
                bound -= weights_[s] * v;
                const double rc = -weights_[s] * v - y[n_node_rows_ + s];
                if (rc < -opt_.column_tol * (1.0 + crange)) {
                    StoppedLaw sl = stopped_law_with_occupation(sources_[s], sv.stop, g_);
                    double leak = 0.0;
                    for (int i : g_.boundary) leak += sl.law[i];
                    if (leak <= 1e-11 && remember_column(s, sl.law)) {
                        push_law_column(s, std::move(sl.law), std::move(sl.occupation));
                        ++added;
                    }
                }
            }
            best_bound_ = std::max(best_bound_, bound);

            if (oracle_phase) {
                const double gap = ub - best_bound_;
                if (gap <= opt_.rel_gap * std::max(1.0, std::abs(ub))) return;
            } else {
                if (ub <= opt_.feasibility_tol) return;
            }
            if (added == 0) {
                if (oracle_phase && ub - best_bound_ > 100.0 * opt_.rel_gap * std::max(1.0, std::abs(ub)))
                    throw LpNumericalError("column generation stalled with an open gap");
                return;
            }
        }
        throw LpNumericalError("column generation exceeded its round budget");
    }

    bool remember_column(int s, const GridMeasure& law) {
        std::uint64_t h = 1469598103934665603ULL ^ static_cast<std::uint64_t>(s);
        for (int i = 0; i < g_.n(); ++i) {
            if (law[i] == 0.0) continue;
            h = splitmix64(h ^ static_cast<std::uint64_t>(i));
            h = splitmix64(h ^ static_cast<std::uint64_t>(
                               std::llround(law[i] * 1e12)));
        }
        return seen_columns_.insert(h).second;
    }

    const Grid& g_;
    const GridMeasure& nu_;
    LpOptions opt_;
    const CostMatrix* cost_ = nullptr;

    std::vector<int> sources_;
    std::vector<double> weights_;
    int n_src_ = 0;
    std::vector<std::uint8_t> allowed_;
    std::vector<int> row_of_node_;
    std::vector<int> support_;
    int n_node_rows_ = 0;
    int t_start_ = 0;
    std::vector<double> b_exact_;
    std::set<std::uint64_t> seen_columns_;

    std::unique_ptr<DenseSimplex> lp_;
    std::vector<ColumnMeta> meta_;
    std::vector<ScalarField> warm_;
    double best_bound_ = 0.0;
    int rounds_ = 0;
};

// Farkas witness for an infeasible pair: prices bounded by the slack columns
// whose negated superharmonic envelope separates the marginals. Runs on a
// full-row master (every node priced), which is only needed here.
class FeasibilityWitnessLp {
public:
    FeasibilityWitnessLp(const GridMeasure& mu, const GridMeasure& nu, const Grid& g,
                         const LpOptions& opt)
        : g_(g), nu_(nu), opt_(opt) {
        validate_marginals(mu, nu, g);
        for (int i = 0; i < g.n(); ++i)
            if (mu[i] > 0.0) {
                sources_.push_back(i);
                weights_.push_back(mu[i]);
            }
        const int n_src = static_cast<int>(sources_.size());
        // drop one boundary row: stopped laws conserve mass, so it is implied
        dropped_ = g.boundary.front();
        row_of_node_.assign(g.n(), -1);
        int r = 0;
        for (int i = 0; i < g.n(); ++i)
            if (i != dropped_) row_of_node_[i] = r++;
        n_node_rows_ = r;

        std::vector<double> b(n_node_rows_ + n_src, 0.0);
        for (int i = 0; i < g.n(); ++i)
            if (row_of_node_[i] >= 0) b[row_of_node_[i]] = nu[i];
        for (int s = 0; s < n_src; ++s) b[n_node_rows_ + s] = 1.0;
        lp_ = std::make_unique<DenseSimplex>(std::move(b));

        std::vector<int> basis;
        for (int s = 0; s < n_src; ++s) {
            DenseSimplex::Column col;
            if (row_of_node_[sources_[s]] >= 0)
                col.entries.emplace_back(row_of_node_[sources_[s]], weights_[s]);
            col.entries.emplace_back(n_node_rows_ + s, 1.0);
            col.cost = 0.0;
            laws_.push_back([&] {
                GridMeasure law(g.n(), 0.0);
                law[sources_[s]] = 1.0;
                return law;
            }());
            owners_.push_back(s);
            basis.push_back(lp_->add_column(std::move(col)));
        }
        for (int i = 0; i < g.n(); ++i) {
            if (row_of_node_[i] < 0) continue;
            DenseSimplex::Column plus, minus;
            plus.entries = {{row_of_node_[i], 1.0}};
            plus.cost = 1.0;
            minus.entries = {{row_of_node_[i], -1.0}};
            minus.cost = 1.0;
            laws_.push_back(GridMeasure());
            owners_.push_back(-1);
            const int jp = lp_->add_column(std::move(plus));
            laws_.push_back(GridMeasure());
            owners_.push_back(-1);
            lp_->add_column(std::move(minus));
            double seeded = 0.0;
            for (std::size_t s = 0; s < sources_.size(); ++s)
                if (sources_[s] == i) seeded += weights_[s];
            basis.push_back(nu[i] - seeded >= 0.0 ? jp : jp + 1);
        }
        lp_->set_basis(std::move(basis));
    }

    // returns the slack mass; fills prices for the witness when positive
    double run(ScalarField& prices_out) {
        std::vector<ScalarField> warm(sources_.size());
        for (int round = 0; round < opt_.max_rounds; ++round) {
            if (lp_->solve() == DenseSimplex::Status::IterationLimit)
                throw LpNumericalError("witness simplex hit its iteration limit");
            const auto y = lp_->duals();
            ScalarField psi(g_.n(), 0.0);
            for (int i = 0; i < g_.n(); ++i)
                if (row_of_node_[i] >= 0) psi[i] = y[row_of_node_[i]];
            int added = 0;
            for (std::size_t s = 0; s < sources_.size(); ++s) {
                const StoppingValue sv = optimal_stopping_value(
                    psi, g_, warm[s].size() == g_.n() ? &warm[s] : nullptr);
                warm[s] = sv.value;
                const double rc =
                    -weights_[s] * sv.value[sources_[s]] - y[n_node_rows_ + s];
                if (rc < -opt_.column_tol) {
                    StoppedLaw sl = stopped_law_with_occupation(sources_[s], sv.stop, g_);
                    DenseSimplex::Column col;
                    for (int i = 0; i < g_.n(); ++i)
                        if (sl.law[i] != 0.0 && row_of_node_[i] >= 0)
                            col.entries.emplace_back(row_of_node_[i], weights_[s] * sl.law[i]);
                    col.entries.emplace_back(n_node_rows_ + static_cast<int>(s), 1.0);
                    col.cost = 0.0;
                    laws_.push_back(sl.law);
                    owners_.push_back(static_cast<int>(s));
                    lp_->add_column(std::move(col));
                    ++added;
                }
            }
            if (lp_->objective() <= opt_.feasibility_tol || added == 0) {
                prices_out = psi;
                return lp_->objective();
            }
        }
        throw LpNumericalError("witness column generation exceeded its budget");
    }

private:
    const Grid& g_;
    const GridMeasure& nu_;
    LpOptions opt_;
    std::vector<int> sources_;
    std::vector<double> weights_;
    int dropped_ = -1;
    std::vector<int> row_of_node_;
    int n_node_rows_ = 0;
    std::unique_ptr<DenseSimplex> lp_;
    std::vector<GridMeasure> laws_;
    std::vector<int> owners_;
};

inline ScalarField subharmonic_witness(const ScalarField& prices, const Grid& g) {
    const StoppingValue env = optimal_stopping_value(prices, g);
    ScalarField w(g.n(), 0.0);
    for (int i = 0; i < g.n(); ++i) w[i] = -env.value[i];
    return w;
}

}  // namespace detail

// Decides whether nu is reachable from mu by stopping the lattice walk. On
// success returns the occupation certificate; on failure a discrete
// subharmonic witness separating the marginals.
inline OrderCheck check_subharmonic_order(const GridMeasure& mu, const GridMeasure& nu,
                                          const Grid& g, const LpOptions& opt = {}) {
    detail::OccupationLp engine(mu, nu, g, opt);
    const double slack = engine.run_feasibility_phase();
    OrderCheck out;
    out.phase1_mass_gap = slack;
    if (slack <= opt.feasibility_tol) {
        out.feasible = true;
        out.certificate = engine.extract_plan();
        return out;
    }
    // confirm on the full-row master and extract the Farkas witness
    detail::FeasibilityWitnessLp full(mu, nu, g, opt);
    ScalarField prices(g.n(), 0.0);
    const double full_slack = full.run(prices);
    out.phase1_mass_gap = full_slack;
    if (full_slack <= opt.feasibility_tol) {
        // the restricted screen was too conservative; rebuild the certificate
        out.feasible = true;
        detail::OccupationLp retry(mu, nu, g, opt);
        retry.run_feasibility_phase();
        out.certificate = retry.extract_plan();
        return out;
    }
    ScalarField w = detail::subharmonic_witness(prices, g);
    out.feasible = false;
    out.separation = integrate(w, mu) - integrate(w, nu);
    out.witness = std::move(w);
    if (out.separation <= 0.0)
        throw LpNumericalError("infeasibility witness failed verification");
    return out;
}

// Exact small-instance minimizer of the relaxed primal over the
// occupation-measure polytope, certified by its own dual bound.
inline TransportPlan lp_oracle(const GridMeasure& mu, const GridMeasure& nu,
                               const CostMatrix& C, const Grid& g,
                               const LpOptions& opt = {}) {
    if (g.n_interior() > opt.interior_cap)
        throw InstanceTooLargeError("grid exceeds the oracle interior-node cap",
                                    g.n_interior(), opt.interior_cap);
    detail::OccupationLp engine(mu, nu, g, opt);
    const double slack = engine.run_feasibility_phase();
    if (slack > opt.feasibility_tol) {
        detail::FeasibilityWitnessLp full(mu, nu, g, opt);
        ScalarField prices(g.n(), 0.0);
        const double full_slack = full.run(prices);
        if (full_slack > opt.feasibility_tol) {
            ScalarField w = detail::subharmonic_witness(prices, g);
            const double sep = integrate(w, mu) - integrate(w, nu);
            throw InfeasibleError("marginals are not in subharmonic order",
                                  std::move(w.values), sep);
        }
        throw LpNumericalError("restricted feasibility screen disagrees with the full master");
    }
    engine.run_oracle_phase(C);
    TransportPlan plan = engine.extract_plan();
    if (plan.rel_gap > 100.0 * opt.rel_gap)
        throw LpNumericalError("oracle finished with an uncertified duality gap");

    // balance sanity: pi_x = delta_x + adjoint-generator applied to the
    // occupation measure, and the mixture reproduces nu
    const double ih2 = 1.0 / (g.spacing * g.spacing);
    const double vol = g.cell_volume();
    for (std::size_t s = 0; s < plan.sources.size(); ++s) {
        double worst = 0.0;
        for (int i = 0; i < g.n(); ++i) {
            double lt = 0.0;
            if (g.is_interior(i))
                lt -= 2.0 * g.dim * plan.occupation_density[s][i] * vol * ih2;
            for (int a = 0; a < g.dim; ++a)
                for (int dir = 0; dir < 2; ++dir) {
                    const int nb = g.neighbor_at(i, a, dir);
                    if (nb >= 0 && g.is_interior(nb))
                        lt += plan.occupation_density[s][nb] * vol * ih2;
                }
            const double expect = (i == plan.sources[s] ? 1.0 : 0.0) + lt;
            worst = std::max(worst, std::abs(plan.pi[s][i] - expect));
        }
        if (worst > 1e-8)
            throw LpNumericalError("plan violates the occupation balance identity");
    }
    double marg = 0.0;
    for (int i = 0; i < g.n(); ++i) marg = std::max(marg, std::abs(plan.aggregate(i) - nu[i]));
    if (marg > 1e-8)
        throw LpNumericalError("plan does not reproduce the target marginal");
    return plan;
}

}  // namespace bmt
