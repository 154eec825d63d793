#include <catch2/catch_amalgamated.hpp>
#include <random>

#include "bmt/value_table.hpp"
#include "oracles.hpp"

using namespace bmt;

namespace {

ScalarField random_potential(const Grid& g, std::uint64_t seed, double lo = -1.0,
                             double hi = 0.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    ScalarField psi(g.n(), 0.0);
    for (int i : g.interior) psi[i] = u(rng);
    return psi;
}

}  // namespace

TEST_CASE("zero potential and zero cost give the zero table") {
    const Grid g = build_grid(DomainSpec::box({0.0, 0.0}, {1.0, 1.0}), 0.25);
    CostMatrix C;
    C.n = g.n();
    C.values.assign(static_cast<std::size_t>(g.n()) * g.n(), 0.0);
    const ValueTable t = value_table(ScalarField(g.n(), 0.0), C, g);
    for (int r = 0; r < t.n_sources(); ++r)
        for (int y = 0; y < g.n(); ++y) {
            CHECK(t.at(r, y) == Catch::Approx(0.0).margin(1e-10));
            CHECK(t.contact(r, y));
        }
}

TEST_CASE("quadratic cost diagonal matches the dynamic-programming oracle on 7x7") {
    const Grid g = build_grid(DomainSpec::box({0.0, 0.0}, {1.0, 1.0}), 1.0 / 6.0);
    CostSpec spec;
    spec.kind = CostKind::Quadratic;
    const CostMatrix C = eval_cost(spec, g);
    const ValueTable t = value_table(ScalarField(g.n(), 0.0), C, g);
    for (int r = 0; r < t.n_sources(); ++r) {
        const int x = t.sources[r];
        ScalarField obstacle(g.n());
        for (int y = 0; y < g.n(); ++y) obstacle[y] = -C.at(x, y);
        const ScalarField ref = oracle::value_iteration_obstacle(obstacle, obstacle, g);
        for (int y = 0; y < g.n(); ++y)
            REQUIRE(t.at(r, y) == Catch::Approx(ref[y]).margin(1e-8));
    }
}

TEST_CASE("rows respect the obstacle and boundary data") {
    const Grid g = build_grid(DomainSpec::box({0.0, 0.0}, {1.0, 1.0}), 0.125);
    CostSpec spec;
    spec.kind = CostKind::Distance;
    const CostMatrix C = eval_cost(spec, g);
    const ScalarField psi = random_potential(g, 8);
    const ValueTable t = value_table(psi, C, g, {g.interior[0], g.interior[5]});
    for (int r = 0; r < t.n_sources(); ++r) {
        const int x = t.sources[r];
        for (int y = 0; y < g.n(); ++y)
            CHECK(t.at(r, y) >= psi[y] - C.at(x, y) - 1e-9);
        for (int y : g.boundary) CHECK(t.at(r, y) == -C.at(x, y));
    }
}

TEST_CASE("potential monotonicity of the table") {
    const Grid g = build_grid(DomainSpec::box({0.0, 0.0}, {1.0, 1.0}), 1.0 / 6.0);
    CostSpec spec;
    spec.kind = CostKind::Quadratic;
    const CostMatrix C = eval_cost(spec, g);
    const ScalarField psi1 = random_potential(g, 21, -1.0, -0.2);
    ScalarField psi2 = psi1;
    std::mt19937_64 rng(22);
    std::uniform_real_distribution<double> bump(0.0, 0.2);
    for (int i : g.interior) psi2[i] += bump(rng);
    const ValueTable t1 = value_table(psi1, C, g);
    const ValueTable t2 = value_table(psi2, C, g);
    for (int r = 0; r < t1.n_sources(); ++r)
        for (int y = 0; y < g.n(); ++y) CHECK(t1.at(r, y) <= t2.at(r, y) + 1e-9);
}

TEST_CASE("envelope shift identity for subharmonic costs") {
    const Grid g = build_grid(DomainSpec::box({0.0, 0.0}, {1.0, 1.0}), 0.125);
    CostSpec spec;
    spec.kind = CostKind::Quadratic;
    const CostMatrix C = eval_cost(spec, g);
    std::uint64_t seed = 300;
    for (int rep = 0; rep < 3; ++rep) {
        // signed potentials exercise a nontrivial envelope
        ScalarField psi(g.n(), 0.0);
        {
            std::mt19937_64 rng(seed++);
            std::uniform_real_distribution<double> u(-1.0, 1.0);
            for (int i : g.interior) psi[i] = u(rng);
        }
        const ObstacleSolution env = superharmonic_envelope(psi, g);
        ScalarField reduced(g.n(), 0.0);
        for (int i = 0; i < g.n(); ++i) reduced[i] = psi[i] - env.u[i];
        const ValueTable t_red = value_table(reduced, C, g);
        const ValueTable t_psi = value_table(psi, C, g);
        for (int r = 0; r < t_red.n_sources(); ++r)
            for (int y = 0; y < g.n(); ++y)
                REQUIRE(t_red.at(r, y) ==
                        Catch::Approx(t_psi.at(r, y) - env.u[y]).margin(1e-8));
    }
}

TEST_CASE("Lipschitz bound in the source variable") {
    const Grid g = build_grid(DomainSpec::box({0.0, 0.0}, {1.0, 1.0}), 0.125);
    CostSpec spec;
    spec.kind = CostKind::Distance;
    const CostMatrix C = eval_cost(spec, g);
    const ScalarField psi = random_potential(g, 77);
    const ValueTable t = value_table(psi, C, g);
    for (int r = 0; r < t.n_sources(); ++r) {
        const int x = t.sources[r];
        for (int axis = 0; axis < g.dim; ++axis) {
            const int xp = g.neighbor_at(x, axis, 0);
            if (xp < 0) continue;
            const int rp = t.row_of(xp);
            REQUIRE(rp >= 0);
            for (int y = 0; y < g.n(); ++y)
                CHECK(std::abs(t.at(r, y) - t.at(rp, y)) <=
                      C.lipschitz_x * g.spacing + 2e-9);
        }
    }
}

TEST_CASE("nonzero boundary potential is rejected") {
    const Grid g = build_grid(DomainSpec::box({0.0}, {1.0}), 0.25);
    CostSpec spec;
    spec.kind = CostKind::Quadratic;
    const CostMatrix C = eval_cost(spec, g);
    ScalarField psi(g.n(), 0.0);
    psi[g.boundary[0]] = 1e-6;
    CHECK_THROWS_AS(value_table(psi, C, g), PreconditionError);
}
