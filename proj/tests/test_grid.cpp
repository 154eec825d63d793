#include <catch2/catch_amalgamated.hpp>

#include "bmt/grid.hpp"
#include "oracles.hpp"

using namespace bmt;

TEST_CASE("1D interval [0,1] at h=0.25") {
    const Grid g = build_grid(DomainSpec::box({0.0}, {1.0}), 0.25);
    REQUIRE(g.n_interior() == 3);
    REQUIRE(g.n_boundary() == 2);
    REQUIRE(oracle::find_node(g, {0.25}) >= 0);
    REQUIRE(oracle::find_node(g, {0.5}) >= 0);
    REQUIRE(oracle::find_node(g, {0.75}) >= 0);
    CHECK(g.is_interior(oracle::find_node(g, {0.5})));
    CHECK_FALSE(g.is_interior(oracle::find_node(g, {0.0})));
    CHECK_FALSE(g.is_interior(oracle::find_node(g, {1.0})));
}

TEST_CASE("2D unit box at h=0.5 has a single interior node") {
    const Grid g = build_grid(DomainSpec::box({0.0, 0.0}, {1.0, 1.0}), 0.5);
    REQUIRE(g.n_interior() == 1);
    const int c = g.interior[0];
    CHECK(g.point(c)[0] == Catch::Approx(0.5));
    CHECK(g.point(c)[1] == Catch::Approx(0.5));
    // corners are unreachable and must have been dropped
    CHECK(oracle::find_node(g, {0.0, 0.0}) == -1);
    CHECK(g.n_boundary() == 4);
}

TEST_CASE("grid invariants hold on box, ball and polytope") {
    const double h = 0.1;
    const auto domains = std::vector<DomainSpec>{
        DomainSpec::box({0.0, 0.0}, {1.0, 1.0}),
        DomainSpec::ball({0.0, 0.0}, 1.0),
        DomainSpec::polytope({{1.0, 1.0}}, {1.2}, {0.0, 0.0}, {1.0, 1.0}),
    };
    for (const auto& spec : domains) {
        const Grid g = build_grid(spec, h);
        REQUIRE(g.n_interior() > 0);
        for (int i : g.interior) {
            for (int s = 0; s < 2 * g.dim; ++s)
                REQUIRE(g.neighbor[static_cast<std::size_t>(i) * 2 * g.dim + s] >= 0);
        }
        for (int i : g.boundary) {
            bool touches_interior = false;
            for (int s = 0; s < 2 * g.dim; ++s) {
                const int nb = g.neighbor[static_cast<std::size_t>(i) * 2 * g.dim + s];
                if (nb >= 0 && g.is_interior(nb)) touches_interior = true;
            }
            CHECK(touches_interior);
        }
        const double eps = 1e-9 * std::max(1.0, spec.extent());
        for (int i = 0; i < g.n(); ++i) CHECK(spec.contains_closed(g.point(i), eps));
    }
}

TEST_CASE("ball interior count matches a brute-force lattice scan") {
    const DomainSpec spec = DomainSpec::ball({0.0, 0.0}, 1.0);
    const double h = 0.1;
    const Grid g = build_grid(spec, h);

    // brute force: nodes strictly inside whose full stencil stays in the closure
    const double eps = 1e-9 * std::max(1.0, spec.extent());
    long count = 0;
    for (int kx = -20; kx <= 20; ++kx) {
        for (int ky = -20; ky <= 20; ++ky) {
            const std::vector<double> p{kx * h, ky * h};
            if (!spec.contains_open(p, eps)) continue;
            bool full = true;
            for (const auto& q : {std::vector<double>{(kx + 1) * h, ky * h},
                                  std::vector<double>{(kx - 1) * h, ky * h},
                                  std::vector<double>{kx * h, (ky + 1) * h},
                                  std::vector<double>{kx * h, (ky - 1) * h}})
                full = full && spec.contains_closed(q, eps);
            if (full) ++count;
        }
    }
    CHECK(g.n_interior() == count);
}

TEST_CASE("degenerate grids are rejected") {
    CHECK_THROWS_AS(build_grid(DomainSpec::box({0.0}, {1.0}), 0.6), EmptyGridError);
    CHECK_THROWS_AS(build_grid(DomainSpec::box({0.0}, {1.0}), -0.1), ConfigError);
    CHECK_THROWS_AS(build_grid(DomainSpec::box({1.0}, {0.0}), 0.1), ConfigError);
}

TEST_CASE("measures normalize and validate") {
    GridMeasure m(4, 0.0);
    m[0] = 3.0;
    m[2] = 1.0;
    CHECK_FALSE(m.is_probability());
    m.normalize();
    CHECK(m.is_probability());
    CHECK(m[0] == Catch::Approx(0.75));
    GridMeasure z(4, 0.0);
    CHECK_THROWS_AS(z.normalize(), PreconditionError);
}
