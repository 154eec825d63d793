#include <catch2/catch_amalgamated.hpp>

#include "bmt/simulate.hpp"
#include "oracles.hpp"

using namespace bmt;

namespace {

struct Setup {
    Grid g;
    CostMatrix C;
    ScalarField psi;
    ValueTable table;
    Barrier barrier;
    GridMeasure mu;
};

// trivial all-pairs barrier on a zero-cost problem
Setup all_pairs_setup() {
    Setup s{build_grid(DomainSpec::box({0.0, 0.0}, {1.0, 1.0}), 0.25), {}, {}, {}, {}, {}};
    s.C.n = s.g.n();
    s.C.values.assign(static_cast<std::size_t>(s.g.n()) * s.g.n(), 0.0);
    s.psi = ScalarField(s.g.n(), 0.0);
    s.table = value_table(s.psi, s.C, s.g);
    s.barrier = extract_barrier(s.psi, s.table, s.C, s.g, 1e-6);
    s.mu = GridMeasure(s.g.n(), 0.0);
    return s;
}

}  // namespace

TEST_CASE("all-pairs barrier stops every path after exactly one step") {
    Setup s = all_pairs_setup();
    const int c = oracle::find_node(s.g, {0.5, 0.5});
    s.mu[c] = 1.0;
    SimOptions opt;
    opt.n_paths = 20000;
    opt.seed = 99;
    const SimResult res = simulate_hitting(s.barrier, s.mu, s.g, opt);
    CHECK(res.mean_stop_time == Catch::Approx(s.g.step_time()));
    CHECK(res.step_histogram.at(1) == opt.n_paths);
    // empirical law is the one-step walk law
    const GridMeasure exact = exact_stopped_law(s.barrier, s.mu, s.g);
    for (int i = 0; i < s.g.n(); ++i) {
        const double se = std::sqrt(std::max(exact[i] * (1.0 - exact[i]), 1e-12) /
                                    static_cast<double>(opt.n_paths));
        CHECK(std::abs(res.empirical[i] - exact[i]) <= 3.0 * se + 1e-9);
    }
}

TEST_CASE("boundary-only barrier matches the absorbing-chain law within 3 SE") {
    const Grid g = build_grid(DomainSpec::box({0.0, 0.0}, {1.0, 1.0}), 0.125);
    CostSpec spec;
    spec.kind = CostKind::Quadratic;
    const CostMatrix C = eval_cost(spec, g);
    ScalarField psi(g.n(), 0.0);
    for (int i : g.interior) psi[i] = -50.0;  // obstacle never binds inside
    const int c = oracle::find_node(g, {0.375, 0.5});
    const ValueTable t = value_table(psi, C, g, {c});
    const Barrier b = extract_barrier(psi, t, C, g, 1e-6);
    GridMeasure mu(g.n(), 0.0);
    mu[c] = 1.0;

    const GridMeasure exact = exact_stopped_law(b, mu, g);
    SimOptions opt;
    opt.n_paths = 100000;
    opt.seed = 31337;
    opt.target = &exact;
    const SimResult res = simulate_hitting(b, mu, g, opt);
    for (int i = 0; i < g.n(); ++i) {
        const double se = std::sqrt(std::max(exact[i] * (1.0 - exact[i]), 1e-12) /
                                    static_cast<double>(opt.n_paths));
        CHECK(std::abs(res.empirical[i] - exact[i]) <= 3.0 * se + 1e-9);
    }
    CHECK(res.tv_to_target >= 0.0);
    CHECK(res.censored_paths == 0);

    SECTION("identical seeds reproduce the result exactly") {
        const SimResult again = simulate_hitting(b, mu, g, opt);
        CHECK(again.counts == res.counts);
        CHECK(again.mean_stop_time == res.mean_stop_time);
        CHECK(again.stay_put_fraction == res.stay_put_fraction);
    }
    SECTION("different seeds differ") {
        SimOptions opt2 = opt;
        opt2.seed = 202;
        const SimResult other = simulate_hitting(b, mu, g, opt2);
        CHECK(other.counts != res.counts);
    }
}

TEST_CASE("stay-put randomization stops the common mass at time zero") {
    Setup s = all_pairs_setup();
    const int c = oracle::find_node(s.g, {0.5, 0.5});
    s.mu[c] = 1.0;
    GridMeasure common(s.g.n(), 0.0);
    common[c] = 0.35;
    SimOptions opt;
    opt.n_paths = 200000;
    opt.seed = 5;
    opt.stay_put = &common;
    const SimResult res = simulate_hitting(s.barrier, s.mu, s.g, opt);
    CHECK(res.stay_put_fraction ==
          Catch::Approx(0.35).margin(3.0 * std::sqrt(0.35 * 0.65 / 200000.0)));
    CHECK(res.empirical[c] == Catch::Approx(res.stay_put_fraction));
    // mean time counts only the moving paths
    CHECK(res.mean_stop_time ==
          Catch::Approx((1.0 - res.stay_put_fraction) * s.g.step_time()));
}

TEST_CASE("simulation rejects malformed stay-put input") {
    Setup s = all_pairs_setup();
    const int c = oracle::find_node(s.g, {0.5, 0.5});
    s.mu[c] = 1.0;
    GridMeasure common(s.g.n(), 0.0);
    common[c] = 1.5;  // exceeds the marginal
    SimOptions opt;
    opt.stay_put = &common;
    CHECK_THROWS_AS(simulate_hitting(s.barrier, s.mu, s.g, opt), PreconditionError);
}
