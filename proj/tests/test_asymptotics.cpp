#include <cmath>
#include <random>

#include "doctest.h"
#include "pinv/asymptotics.hpp"
#include "pinv/error.hpp"
#include "pinv/stats.hpp"

using namespace pinv;

namespace {

GridFunction unit_boundary(const Grid& grid) {
    return boundary_field(grid, [](const Point&) { return 1.0; });
}

// (1 - t^2)^k t^m with t = (x - c) / half, zero outside |t| < 1.
GridFunction poly_bump(const Grid& grid, double c, double half, int k, int m) {
    return GridFunction::sample(grid, [=](const Point& x) {
        const double t = (x[0] - c) / half;
        return std::abs(t) < 1.0 ? std::pow(1.0 - t * t, k) * std::pow(t, m) : 0.0;
    });
}

std::vector<TestFunction> broad_dictionary(const Grid& grid) {
    return {{"p0", poly_bump(grid, 0.5, 0.45, 4, 0), 1.0},
            {"p1", poly_bump(grid, 0.5, 0.45, 4, 1), 1.0},
            {"p2", poly_bump(grid, 0.5, 0.4, 4, 0), 1.0}};
}

GridFunction random_potential(const Grid& grid, std::uint64_t seed) {
    const WaveletBasis basis(grid, 2);
    return sample_prior({0.3, 3, 2}, basis, seed).potential;
}

PosteriorRun synthetic_run(const std::vector<double>& centers, const std::vector<double>& scales, std::size_t n,
                           std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    PosteriorRun run;
    run.functionals.assign(centers.size(), std::vector<double>(n));
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t i = 0; i < centers.size(); ++i) run.functionals[i][k] = centers[i] + scales[i] * normal(rng);
    }
    return run;
}

}  // namespace

TEST_CASE("lan norm is the norm of the score") {
    const Grid grid(Domain::unit(1), 6);
    const SchrodingerSystem sys(PotentialField::from_values(random_potential(grid, 3)), unit_boundary(grid));
    const GridFunction u = solve_forward(sys);
    const GridFunction h = poly_bump(grid, 0.4, 0.3, 3, 1);
    CHECK(lan_norm(sys, u, GridFunction(grid, 0.0)) == 0.0);
    CHECK(lan_norm(sys, u, 2.0 * h) == doctest::Approx(2.0 * lan_norm(sys, u, h)).epsilon(1e-9));
    CHECK(lan_norm(sys, u, h) == doctest::Approx(l2_norm(solve_green(sys, h * u))).epsilon(1e-9));
}

TEST_CASE("limit covariance for the Laplacian: closed form") {
    // f = 0, g = 1 gives u = 1 and S = -Lap/2, so Sigma_11 = ||psi''/2||^2.
    // For psi = (1 - t^2)^4, t = (x - 1/2)/0.45 this is 26214400/243243.
    const double exact = 26214400.0 / 243243.0;
    double previous = 0.0;
    for (int level : {8, 9, 10}) {
        const Grid grid(Domain::unit(1), level);
        const SchrodingerSystem sys(PotentialField::constant(grid, 0.0), unit_boundary(grid));
        const GridFunction u = solve_forward(sys);
        const LimitLaw law = limit_covariance(sys, u, {{"p", poly_bump(grid, 0.5, 0.45, 4, 0), 1.0}});
        const double err = std::abs(law.sigma(0, 0) - exact);
        if (level == 10) CHECK(err / exact < 1e-4);
        if (previous > 0.0) CHECK(previous / err == doctest::Approx(4.0).epsilon(0.15));
        previous = err;
    }
}

TEST_CASE("limit covariance matches the Riesz representer") {
    const Grid grid(Domain::unit(1), 7);
    const SchrodingerSystem sys(PotentialField::from_values(random_potential(grid, 5)), unit_boundary(grid));
    const GridFunction u = solve_forward(sys);
    const auto dict = broad_dictionary(grid);
    const LimitLaw law = limit_covariance(sys, u, dict);
    for (std::size_t i = 0; i < dict.size(); ++i) {
        const GridFunction rep = riesz_representer(sys, u, dict[i].psi);
        const double lan = lan_norm(sys, u, rep);
        CHECK(law.sigma(i, i) == doctest::Approx(lan * lan).epsilon(1e-8));
        for (std::size_t j = 0; j < dict.size(); ++j) {
            CHECK(law.sigma(i, j) == doctest::Approx(l2_inner(dict[j].psi, rep)).epsilon(1e-8));
        }
    }
    CHECK(law.min_eigenvalue > 0.0);
    CHECK((law.factor * law.factor.transpose() - law.sigma).norm() < 1e-9 * law.sigma.norm());
}

TEST_CASE("limit covariance: ordering, duplicates and validation") {
    const Grid grid(Domain::unit(1), 7);
    const SchrodingerSystem sys(PotentialField::from_values(random_potential(grid, 6)), unit_boundary(grid));
    const GridFunction u = solve_forward(sys);
    auto dict = broad_dictionary(grid);
    const LimitLaw law = limit_covariance(sys, u, dict);
    std::swap(dict[0], dict[2]);
    const LimitLaw swapped = limit_covariance(sys, u, dict);
    CHECK(swapped.ids[0] == "p2");
    CHECK(swapped.sigma(0, 0) == doctest::Approx(law.sigma(2, 2)));
    CHECK(swapped.sigma(0, 1) == doctest::Approx(law.sigma(2, 1)));

    dict.push_back(dict[1]);
    const LimitLaw dup = limit_covariance(sys, u, dict);
    CHECK(dup.sigma.row(1).isApprox(dup.sigma.row(3)));
    CHECK(dup.min_eigenvalue < 1e-8 * dup.sigma.norm());

    CHECK_THROWS_AS(limit_covariance(sys, u, {}), InvalidArgument);
    CHECK_THROWS_AS(limit_covariance(sys, u, {{"edge", poly_bump(grid, 0.1, 0.2, 4, 0), 1.0}}), InvalidArgument);
}

TEST_CASE("limit law samples have covariance Sigma") {
    const Grid grid(Domain::unit(1), 7);
    const SchrodingerSystem sys(PotentialField::from_values(random_potential(grid, 7)), unit_boundary(grid));
    const LimitLaw law = limit_covariance(sys, solve_forward(sys), broad_dictionary(grid));
    const Eigen::MatrixXd z = sample_limit_law(law, 100000, 9);
    const Eigen::MatrixXd centered = z.rowwise() - z.colwise().mean();
    const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(z.rows() - 1);
    for (Eigen::Index i = 0; i < cov.rows(); ++i) {
        for (Eigen::Index j = 0; j < cov.cols(); ++j) {
            CHECK(std::abs(cov(i, j) - law.sigma(i, j)) < 0.05 * std::sqrt(law.sigma(i, i) * law.sigma(j, j)));
        }
    }
    CHECK(sample_limit_law(law, 10, 9) == sample_limit_law(law, 10, 9));

    LimitLaw zero = law;
    zero.sigma.setZero();
    zero.factor.setZero();
    CHECK(sample_limit_law(zero, 50, 1).norm() == 0.0);
}

TEST_CASE("standardized draws") {
    const std::vector<double> draws{1.0, 2.0, 3.0, 6.0};
    const auto z = standardized_draws(draws, 0.5, 2.0);
    CHECK(z[0] == doctest::Approx(-2.0));
    CHECK(z[3] == doctest::Approx(3.0));
    CHECK(mean(z) == doctest::Approx(0.0));
    CHECK_THROWS_AS(standardized_draws(draws, 0.0, 1.0), InvalidArgument);
    CHECK_THROWS_AS(standardized_draws(draws, 0.1, 0.0), InvalidArgument);
}

TEST_CASE("bvm diagnostic on exact Gaussian draws") {
    const Grid grid(Domain::unit(1), 7);
    const SchrodingerSystem sys(PotentialField::from_values(random_potential(grid, 8)), unit_boundary(grid));
    const GridFunction u = solve_forward(sys);
    const auto dict = broad_dictionary(grid);
    const LimitLaw law = limit_covariance(sys, u, dict);
    const double eps = 0.01;
    const Observation obs = generate_observation(sys, eps, 4);

    std::vector<double> centers, scales;
    for (std::size_t i = 0; i < dict.size(); ++i) {
        centers.push_back(l2_inner(sys.potential().f(), dict[i].psi));
        scales.push_back(eps * std::sqrt(law.sigma(i, i)));
    }
    const PosteriorRun run = synthetic_run(centers, scales, 5000, 21);
    const auto entries = bvm_diagnostic(run, law, obs, sys, u, dict);
    REQUIRE(entries.size() == 3);
    for (const auto& e : entries) {
        CHECK(e.ks <= e.ks_band);
        CHECK(e.spread_ratio == doctest::Approx(1.0).epsilon(0.05));
        CHECK(e.ess > 3000.0);
    }

    // scaling every draw about the mean scales the spread ratio and leaves KS alone
    PosteriorRun wide = run;
    PosteriorRun shifted = run;
    for (std::size_t i = 0; i < dict.size(); ++i) {
        for (double& v : wide.functionals[i]) v = centers[i] + 2.0 * (v - centers[i]);
        for (double& v : shifted.functionals[i]) v += eps * 0.5;
    }
    const auto wide_entries = bvm_diagnostic(wide, law, obs, sys, u, dict);
    const auto shifted_entries = bvm_diagnostic(shifted, law, obs, sys, u, dict);
    for (std::size_t i = 0; i < dict.size(); ++i) {
        CHECK(wide_entries[i].spread_ratio == doctest::Approx(2.0 * entries[i].spread_ratio));
        CHECK(wide_entries[i].ks > 0.12);  // sup |Phi(x/2) - Phi(x)| = 0.16
        CHECK(shifted_entries[i].ks == doctest::Approx(entries[i].ks));
        CHECK(shifted_entries[i].centering - entries[i].centering == doctest::Approx(0.5));
    }
}

TEST_CASE("parametric regime: posterior spread matches the submodel information bound") {
    // Truth inside the J = 1 span, eps small enough that no coefficient feels
    // its box.  The posterior sd of <f, psi> is then eps sqrt(g' I^-1 g), with
    // I the Fisher information of the coefficients; the information is built
    // here from finite differences of the forward map.
    const Grid grid(Domain::unit(1), 7);
    const WaveletBasis basis(grid, 4);
    const PriorConfig prior{1.0, 3, 1};
    CoefficientTree truth(1, 1);
    truth.at(-1, 0) = 0.3;
    truth.at(0, 0) = 0.3 * prior.box(0, 1);
    truth.at(1, 0) = -0.4 * prior.box(1, 1);
    truth.at(1, 1) = 0.2 * prior.box(1, 1);
    const GridFunction f0 = basis.synthesize(truth).map([](double v) { return std::exp(v); });
    const GridFunction g = unit_boundary(grid);

    ExperimentSetup setup{"parametric", basis, prior, false, f0, g, broad_dictionary(grid), {}, McmcParams{}, 0.1, 17, 1};
    setup.mcmc.iterations = 40000;
    const double eps = 1e-4;

    const int n = static_cast<int>(truth.size());
    std::vector<GridFunction> jac;
    const double t = 1e-5;
    for (int k = 0; k < n; ++k) {
        CoefficientTree up = truth, down = truth;
        up.flat()[k] += t;
        down.flat()[k] -= t;
        auto forward = [&](const CoefficientTree& c) {
            return solve_forward(SchrodingerSystem(PotentialField::from_values(
                                                       basis.synthesize(c).map([](double v) { return std::exp(v); })),
                                                   g),
                                 1e-13);
        };
        jac.push_back((1.0 / (2.0 * t)) * (forward(up) - forward(down)));
    }
    Eigen::MatrixXd info(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) info(i, j) = l2_inner(jac[i], jac[j]);
    }
    const SchrodingerSystem sys(PotentialField::from_values(f0), g);
    const LimitLaw law = limit_covariance(sys, solve_forward(sys), setup.dictionary);

    std::vector<double> expected;
    for (std::size_t p = 0; p < setup.dictionary.size(); ++p) {
        Eigen::VectorXd grad(n);
        CoefficientTree e(1, 1);
        for (int k = 0; k < n; ++k) {
            std::fill(e.flat().begin(), e.flat().end(), 0.0);
            e.flat()[k] = 1.0;
            grad(k) = l2_inner(f0 * basis.synthesize(e), setup.dictionary[p].psi);
        }
        expected.push_back(std::sqrt(grad.dot(info.ldlt().solve(grad)) / law.sigma(p, p)));
    }

    const auto reps = run_replications(setup, {eps}, 2);
    std::vector<double> centering;
    for (const auto& r : reps) {
        REQUIRE_FALSE(r.failed);
        for (std::size_t p = 0; p < expected.size(); ++p) {
            CHECK(r.bvm[p].spread_ratio == doctest::Approx(expected[p]).epsilon(0.12));
            CHECK(r.bvm[p].ks < 0.12);
            centering.push_back(std::abs(r.bvm[p].centering) / r.bvm[p].sigma);
        }
    }
    CHECK(median(centering) < 1.0);
}

TEST_CASE("replication harness bookkeeping") {
    const Grid grid(Domain::unit(1), 6);
    const WaveletBasis basis(grid, 3);
    const GridFunction f0 = poly_bump(grid, 0.5, 0.4, 4, 0).map([](double v) { return std::exp(0.25 * v); });
    ExperimentSetup setup{"bookkeeping", basis, PriorConfig{1.0, 3, 2}, true, f0, unit_boundary(grid),
                          broad_dictionary(grid), {}, McmcParams{}, 0.1, 3, 1};
    setup.ball = interior_dictionary(grid, 1, default_alpha(1));
    setup.mcmc.iterations = 1500;

    CHECK(prior_level(setup, 0.2) == 1);
    CHECK(prior_level(setup, 1e-12) == 3);  // clamped to Jg - 3 and the basis
    setup.level_from_rule = false;
    CHECK(prior_level(setup, 0.2) == 2);
    setup.level_from_rule = true;

    const auto serial = run_replications(setup, {0.1, 0.05}, 2);
    setup.threads = 3;
    const auto parallel = run_replications(setup, {0.1, 0.05}, 2);
    REQUIRE(serial.size() == 4);
    for (std::size_t k = 0; k < serial.size(); ++k) {
        CHECK_FALSE(serial[k].failed);
        CHECK(serial[k].seed == parallel[k].seed);
        CHECK(serial[k].error_l2 == parallel[k].error_l2);
        CHECK(serial[k].bvm[1].ks == parallel[k].bvm[1].ks);
        CHECK(serial[k].ball_radius == parallel[k].ball_radius);
    }
    CHECK(serial[0].seed != serial[1].seed);
    CHECK(serial[0].seed != serial[2].seed);

    const auto rows = replication_records(setup, serial);
    // 4 global rows, 7 per psi, 3 for the ball
    CHECK(rows.size() == serial.size() * (4 + 7 * 3 + 3));
    CHECK(rows.front().experiment == "bookkeeping");
    CHECK(rows.front().eps == 0.1);

    const CoverageSummary cov = summarize_coverage(setup, {serial[0], serial[1]});
    CHECK(cov.reps == 2);
    for (std::size_t i = 0; i < cov.ids.size(); ++i) {
        const double expect = (serial[0].covered[i] + serial[1].covered[i]) / 2.0;
        CHECK(cov.coverage[i] == expect);
        CHECK(cov.target_radius[i] ==
              doctest::Approx(normal_quantile(0.95) * (serial[0].bvm[i].sigma + serial[1].bvm[i].sigma) / 2.0));
    }

    CHECK_THROWS_AS(coverage_experiment(setup, 0.1, 10), InvalidArgument);
    CHECK_THROWS_AS(rate_experiment(setup, {0.1, 0.2, 0.05}, 2), InvalidArgument);
    CHECK_THROWS_AS(rate_experiment(setup, {0.1, 0.05}, 2), InvalidArgument);
}

TEST_CASE("failing replications are recorded, then fatal past 5%") {
    const Grid grid(Domain::unit(1), 6);
    ExperimentSetup setup{"broken", WaveletBasis(grid, 3), PriorConfig{1.0, 3, 1}, true,
                          GridFunction(Grid(Domain::unit(1), 5), 1.0),  // wrong grid
                          unit_boundary(grid), broad_dictionary(grid), {}, McmcParams{}, 0.1, 3, 1};
    const Replication r = run_replication(setup, 0.1, 0);
    CHECK(r.failed);
    CHECK_FALSE(r.failure.empty());
    CHECK_THROWS_AS(run_replications(setup, {0.1}, 3), NumericalError);
}

TEST_CASE("theoretical rate exponent") {
    CHECK(theoretical_rate_exponent(3, 1) == doctest::Approx(6.0 / 11.0));
    CHECK(theoretical_rate_exponent(2, 2) == doctest::Approx(0.4));
}
