#include <cmath>
#include <random>

#include "doctest.h"
#include "pinv/error.hpp"
#include "pinv/obsmodel.hpp"
#include "pinv/wavelet.hpp"

using namespace pinv;

namespace {

GridFunction wavy_boundary(const Grid& grid) {
    return boundary_field(grid, [](const Point& x) { return 1.0 + 0.5 * std::sin(3.0 * x[0] + x[1]); });
}

PotentialField prior_potential(const Grid& grid, std::uint64_t seed) {
    const WaveletBasis basis(grid, 2);
    return PotentialField::from_values(sample_prior({0.3, 3, 2}, basis, seed).potential);
}

}  // namespace

TEST_CASE("noiseless observation is the forward solution") {
    const Grid grid(Domain::unit(2), 5);
    const SchrodingerSystem sys(prior_potential(grid, 1), wavy_boundary(grid));
    const Observation obs = generate_observation(sys, 0.0, 3);
    CHECK(sup_norm(obs.y - solve_forward(sys)) == 0.0);
    CHECK_THROWS_AS(generate_observation(sys, -1.0, 3), InvalidArgument);
}

TEST_CASE("noise lives on interior nodes and is seed-determined") {
    const Grid grid(Domain::unit(2), 5);
    const SchrodingerSystem sys(prior_potential(grid, 2), wavy_boundary(grid));
    const Observation a = generate_observation(sys, 0.1, 42);
    const Observation b = generate_observation(sys, 0.1, 42);
    const Observation c = generate_observation(sys, 0.1, 43);
    CHECK(sup_norm(a.y - b.y) == 0.0);
    CHECK(sup_norm(a.y - c.y) > 0.0);
    for (std::size_t n = 0; n < grid.node_count(); ++n) {
        if (grid.is_boundary(n)) CHECK(a.y[n] == sys.boundary()[n]);
    }
}

TEST_CASE("white noise isometry") {
    const Grid grid(Domain::unit(1), 6);
    const auto field = [&grid](auto fn) {
        GridFunction a = GridFunction::sample(grid, fn);
        a.zero_boundary();
        return a;
    };
    const GridFunction a = field([](const Point& x) { return std::sin(3.0 * x[0]); });
    const GridFunction b = field([](const Point& x) { return x[0] * x[0]; });
    const GridFunction c = field([](const Point& x) { return std::cos(7.0 * x[0]) - 0.2; });
    const std::vector<std::pair<GridFunction, GridFunction>> pairs = {{a, a}, {a, b}, {b, c}, {c, c}};
    const int n = 10000;
    std::vector<double> sums(pairs.size(), 0.0);
    for (int k = 0; k < n; ++k) {
        const GridFunction w = white_noise(grid, 1000 + k);
        for (std::size_t p = 0; p < pairs.size(); ++p) {
            sums[p] += l2_inner(w, pairs[p].first) * l2_inner(w, pairs[p].second);
        }
    }
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        const double expected = l2_inner(pairs[p].first, pairs[p].second);
        const double scale = l2_norm(pairs[p].first) * l2_norm(pairs[p].second);
        CHECK(std::abs(sums[p] / n - expected) <= 0.05 * scale);
    }
}

TEST_CASE("log_likelihood examples") {
    const Grid grid(Domain::unit(1), 5);
    const SchrodingerSystem sys(prior_potential(grid, 4), wavy_boundary(grid));
    Observation obs = generate_observation(sys, 0.0, 1);
    obs.eps = 0.2;
    CHECK(log_likelihood(obs, GridFunction(grid)) == 0.0);
    const double norm = l2_norm(obs.y);
    CHECK(log_likelihood(obs, obs.y) == doctest::Approx(norm * norm / (2.0 * 0.04)).epsilon(1e-13));
    CHECK_THROWS_AS(log_likelihood(obs, GridFunction(Grid(Domain::unit(1), 6))), InvalidArgument);
    obs.eps = 0.0;
    CHECK_THROWS_AS(log_likelihood(obs, obs.y), InvalidArgument);
}

TEST_CASE("likelihood ratio identity") {
    for (int dim : {1, 2}) {
        const Grid grid(Domain::unit(dim), dim == 1 ? 7 : 5);
        const GridFunction g = wavy_boundary(grid);
        const SchrodingerSystem truth(prior_potential(grid, 100), g);
        const GridFunction u0 = solve_forward(truth);
        for (std::uint64_t k = 0; k < 20; ++k) {
            const double eps = 0.05 * (1.0 + static_cast<double>(k % 4));
            const Observation obs = generate_observation(truth, eps, 500 + k);
            const GridFunction w = (obs.y - u0) / GridFunction(grid, eps);
            const GridFunction uf = solve_forward(SchrodingerSystem(prior_potential(grid, 2 * k), g));
            const GridFunction ug = solve_forward(SchrodingerSystem(prior_potential(grid, 2 * k + 1), g));
            const double lhs = log_likelihood(obs, uf) - log_likelihood(obs, ug);
            const double df = l2_norm(uf - u0);
            const double dg = l2_norm(ug - u0);
            const double rhs = -(df * df - dg * dg) / (2.0 * eps * eps) + l2_inner(uf - ug, w) / eps;
            CHECK(std::abs(lhs - rhs) <= 1e-8 * std::max(1.0, std::abs(lhs)));
        }
    }
}

TEST_CASE("likelihood differences only see the span of the two solutions") {
    const Grid grid(Domain::unit(1), 6);
    const GridFunction g = wavy_boundary(grid);
    const Observation obs = generate_observation(SchrodingerSystem(prior_potential(grid, 7), g), 0.1, 8);
    const GridFunction uf = solve_forward(SchrodingerSystem(prior_potential(grid, 9), g));
    const GridFunction ug = solve_forward(SchrodingerSystem(prior_potential(grid, 10), g));
    // Gram-Schmidt a perturbation against span{uf, ug}
    GridFunction z = GridFunction::sample(grid, [](const Point& x) { return std::cos(11.0 * x[0]); });
    z.zero_boundary();
    const GridFunction e1 = uf / GridFunction(grid, l2_norm(uf));
    GridFunction e2 = ug - l2_inner(ug, e1) * e1;
    e2 = e2 / GridFunction(grid, l2_norm(e2));
    z = z - l2_inner(z, e1) * e1 - l2_inner(z, e2) * e2;
    Observation moved = obs;
    moved.y += 3.0 * z;
    const double before = log_likelihood(obs, uf) - log_likelihood(obs, ug);
    const double after = log_likelihood(moved, uf) - log_likelihood(moved, ug);
    CHECK(after == doctest::Approx(before).epsilon(1e-10));
}

TEST_CASE("the truth maximises the noiseless likelihood among candidates") {
    const Grid grid(Domain::unit(1), 6);
    const GridFunction g = wavy_boundary(grid);
    const PotentialField f0 = prior_potential(grid, 11);
    Observation obs = generate_observation(SchrodingerSystem(f0, g), 0.0, 1);
    obs.eps = 0.1;
    const double at_truth = log_likelihood_of_potential(obs, f0, g);
    CHECK(log_likelihood_of_potential(obs, f0, g) == at_truth);
    for (const double scale : {0.5, 0.9, 1.1, 2.0}) {
        const PotentialField other = PotentialField::from_values(scale * f0.f());
        CHECK(log_likelihood_of_potential(obs, other, g) < at_truth);
    }
    CHECK(log_likelihood_of_potential(obs, prior_potential(grid, 12), g) < at_truth);
}

TEST_CASE("larger fit gives larger likelihood at equal norm") {
    const Grid grid(Domain::unit(1), 5);
    Observation obs{GridFunction::sample(grid, [](const Point& x) { return x[0]; }), 0.3, {}};
    GridFunction u1 = GridFunction::sample(grid, [](const Point& x) { return x[0] + 0.1; });
    GridFunction u2 = GridFunction::sample(grid, [](const Point& x) { return 1.1 - x[0]; });
    // same norm by symmetry of the grid about 1/2
    REQUIRE(l2_norm(u1) == doctest::Approx(l2_norm(u2)).epsilon(1e-12));
    REQUIRE(l2_inner(obs.y, u1) > l2_inner(obs.y, u2));
    CHECK(log_likelihood(obs, u1) > log_likelihood(obs, u2));
}
