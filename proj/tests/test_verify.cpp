#include <cmath>

#include "doctest.h"
#include "pinv/verify.hpp"

using namespace pinv;

TEST_CASE("make_check bounds are inclusive") {
    CHECK(make_check("a", 1.0, 0.0, 1.0).passed);
    CHECK(make_check("b", 0.0, 0.0, 0.0).passed);
    CHECK_FALSE(make_check("c", 1.5, 0.0, 1.0).passed);
    CHECK_FALSE(make_check("d", std::nan(""), 0.0, 1.0).passed);
}

TEST_CASE("invariant suite passes in one and two dimensions") {
    for (int dim : {1, 2}) {
        const auto checks = verify_suite(dim, 1);
        CHECK(checks.size() >= 10);
        for (const auto& c : checks) {
            INFO(c.name, " = ", c.value);
            CHECK(c.passed);
        }
    }
}

TEST_CASE("two-coefficient toy posterior matches tensor quadrature") {
    const auto checks = verify_toy_posterior(100000, 11);
    REQUIRE(checks.size() == 4);
    for (const auto& c : checks) {
        INFO(c.name, " = ", c.value);
        CHECK(c.passed);
    }
}

TEST_CASE("diagonal probes are interior nodes") {
    const Grid grid(Domain::unit(2), 5);
    const auto probes = diagonal_probes(grid, 5);
    REQUIRE(probes.size() == 5);
    for (const Point& x : probes) {
        CHECK(grid.domain().contains(x));
        CHECK(x[0] == x[1]);
        CHECK(std::abs(x[0] * 32.0 - std::round(x[0] * 32.0)) < 1e-12);
    }
    CHECK(diagonal_probes(Grid(Domain::unit(1), 5), 1)[0][0] == 0.5);
}

TEST_CASE("oracle cross-check on a constant potential") {
    const Grid grid(Domain::unit(1), 6);
    const SchrodingerSystem sys(PotentialField::constant(grid, 2.0), GridFunction(grid, 1.0));
    PathConfig cfg;
    cfg.paths = 4000;
    cfg.seed = 3;
    const auto rows = oracle_crosscheck(sys, diagonal_probes(grid, 3), cfg);
    REQUIRE(rows.size() == 3);
    for (const auto& r : rows) {
        CHECK(r.mc.stderr_ > 0.0);
        CHECK(std::abs(r.z) < 4.0);
        CHECK(r.solver == doctest::Approx(std::cosh(2.0 * (r.x[0] - 0.5)) / std::cosh(1.0)).epsilon(1e-3));
    }
}
