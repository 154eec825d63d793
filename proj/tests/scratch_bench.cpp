// scratch experiment harness, not part of the suite
#include <chrono>
#include <cstdio>

#include "bmt/dual.hpp"
#include "bmt/simulate.hpp"
#include "bmt/verify.hpp"

using namespace bmt;

namespace {

int find_node(const Grid& g, std::vector<double> p) {
    for (int i = 0; i < g.n(); ++i) {
        double d = 0.0;
        for (int a = 0; a < g.dim; ++a) d = std::max(d, std::abs(g.point(i)[a] - p[a]));
        if (d <= 1e-9) return i;
    }
    return -1;
}

int cheb(const Grid& g, int i, int j) {
    int c = 0;
    for (int a = 0; a < g.dim; ++a)
        c = std::max(c, std::abs(g.ipoint[(std::size_t)i * g.dim + a] -
                                 g.ipoint[(std::size_t)j * g.dim + a]));
    return c;
}

}  // namespace

int main() {
    const double h = 1.0 / 12.0;
    const Grid g = build_grid(DomainSpec::box({0.0, 0.0}, {1.0, 1.0}), h);
    std::printf("grid: n=%d interior=%d\n", g.n(), g.n_interior());

    // mu: uniform 3x3 blob at the center
    const int c = find_node(g, {0.5, 0.5});
    GridMeasure mu(g.n(), 0.0);
    for (int i : g.interior)
        if (cheb(g, i, c) <= 1) mu[i] = 1.0;
    mu.normalize();

    // nu: mixture of the hitting laws of two nested rings
    GridMeasure nu(g.n(), 0.0);
    for (const auto& [radius, w] : {std::pair{3, 0.5}, std::pair{5, 0.5}}) {
        std::vector<std::uint8_t> ring(g.n(), 0);
        for (int i : g.interior)
            if (cheb(g, i, c) == radius) ring[i] = 1;
        const AbsorbingChainSolver chain(ring, g);
        for (int i = 0; i < g.n(); ++i) {
            if (mu[i] == 0.0) continue;
            const StoppedLaw sl = chain.solve(i);
            for (int j = 0; j < g.n(); ++j) nu[j] += w * mu[i] * sl.law[j];
        }
    }
    double bdry_mass = 0.0;
    for (int i : g.boundary) bdry_mass += nu[i];
    std::printf("nu boundary mass: %.3e (must be 0)\n", bdry_mass);

    CostSpec spec;
    spec.kind = CostKind::Distance;
    const CostMatrix C = eval_cost(spec, g);
    std::printf("cost: m_c=%.6f D_c=%.6f K=%.6f\n", C.min_target_laplacian,
                C.max_target_laplacian, C.lipschitz_x);

    const auto t0 = std::chrono::steady_clock::now();
    const TransportPlan plan = lp_oracle(mu, nu, C, g);
    const auto t1 = std::chrono::steady_clock::now();
    std::printf("LP: cost=%.9f bound=%.9f relgap=%.2e rounds=%d iters=%ld  (%.2fs)\n",
                plan.cost, plan.dual_bound, plan.rel_gap, plan.rounds,
                plan.simplex_iterations,
                std::chrono::duration<double>(t1 - t0).count());

    AscentOptions opt;
    opt.grad_tol = 0.01;
    opt.max_iterations = 400;
    opt.primal_value = plan.cost;
    opt.gap_tol = 0.0;  // run on residual
    const auto t2 = std::chrono::steady_clock::now();
    const DualState st = ascend(mu, nu, spec, g, opt);
    const auto t3 = std::chrono::steady_clock::now();
    std::printf("ascent: obj=%.9f gap=%.3e rel=%.4f%% residual=%.4f status=%s iters=%d (%.2fs)\n",
                st.objective, plan.cost - st.objective,
                100.0 * (plan.cost - st.objective) / plan.cost, st.residual,
                to_string(st.status), st.iterations,
                std::chrono::duration<double>(t3 - t2).count());
    std::printf("cert: pass=%d max=%.2e bdry=%.2e lapx=%.2e exitgap=%.2e\n",
                int(st.certificate.pass()), st.certificate.max_value,
                st.certificate.max_boundary_abs, st.certificate.max_laplacian_excess,
                st.certificate.min_exit_gap);

    // barrier from the ascent potential
    const ValueTable full = value_table(st.psi, C, g);
    const Barrier b = extract_barrier(st.psi, full, C, g, 1e-6);
    int diag_contact = 0;
    for (int i = 0; i < g.n(); ++i)
        if (mu[i] > 0 && b.at(b.row_of(i), i)) ++diag_contact;
    const GridMeasure law = exact_stopped_law(b, mu, g);
    std::printf("ascent barrier: diag_contact=%d TV=%.4f\n", diag_contact,
                total_variation(law, nu));

    // how long until residual small?
    for (const auto& row : st.log)
        if (row.iteration % 20 == 0 || row.iteration == st.iterations)
            std::printf("  it=%3d obj=%.7f res=%.4f step=%.3g\n", row.iteration,
                        row.objective, row.residual, row.step);
    return 0;
}
