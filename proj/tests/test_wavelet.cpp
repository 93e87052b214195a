#include <cmath>
#include <random>

#include "doctest.h"
#include "pinv/error.hpp"
#include "pinv/wavelet.hpp"

using namespace pinv;

namespace {

CoefficientTree random_tree(int dim, int level, std::mt19937_64& rng) {
    std::normal_distribution<double> normal;
    CoefficientTree t(dim, level);
    for (double& b : t.flat()) b = normal(rng);
    return t;
}

double max_abs_diff(const CoefficientTree& a, const CoefficientTree& b) {
    double m = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a.flat()[k] - b.flat()[k]));
    return m;
}

}  // namespace

TEST_CASE("Daubechies filters are orthonormal with vanishing moments") {
    for (int order : DaubechiesFilter::available_orders()) {
        const DaubechiesFilter f(order);
        const auto lo = f.lowpass();
        const auto hi = f.highpass();
        REQUIRE(lo.size() == static_cast<std::size_t>(2 * order));
        double sum = 0.0;
        for (double c : lo) sum += c;
        CHECK(sum == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
        for (std::size_t shift = 0; shift < lo.size(); shift += 2) {
            double s = 0.0;
            for (std::size_t k = 0; k + shift < lo.size(); ++k) s += lo[k] * lo[k + shift];
            CHECK(s == doctest::Approx(shift == 0 ? 1.0 : 0.0).epsilon(1e-14).scale(1.0));
        }
        for (int m = 0; m < order; ++m) {
            double moment = 0.0;
            double scale = 0.0;
            for (std::size_t k = 0; k < hi.size(); ++k) {
                moment += std::pow(static_cast<double>(k), m) * hi[k];
                scale += std::pow(static_cast<double>(k), m) * std::abs(hi[k]);
            }
            CHECK(std::abs(moment) <= 1e-10 * scale);
        }
    }
    CHECK_THROWS_AS(DaubechiesFilter(1), InvalidArgument);
}

TEST_CASE("coefficient tree layout") {
    const CoefficientTree t1(1, 3);
    CHECK(t1.size() == 16);
    CHECK(t1.count(-1) == 1);
    CHECK(t1.count(2) == 4);
    CHECK(t1.level_of(0) == -1);
    CHECK(t1.level_of(1) == 0);
    CHECK(t1.level_of(7) == 2);  // indices 4..7 belong to level 2
    const CoefficientTree t2(2, 2);
    CHECK(t2.size() == 64);
    CHECK(t2.count(1) == 12);
    for (int l = 0; l <= 6; ++l) {
        // N_l <= c0 2^{ld} with c0 = 2^d - 1
        CHECK(CoefficientTree::level_count(1, l) <= (std::size_t{1} << l));
        CHECK(CoefficientTree::level_count(2, l) <= 3 * (std::size_t{1} << (2 * l)));
    }
    CHECK_THROWS_AS(t1.level(4), InvalidArgument);
    CHECK_THROWS_AS(CoefficientTree::from_flat(1, 3, std::vector<double>(5)), InvalidArgument);
}

TEST_CASE("synthesize examples") {
    for (int dim : {1, 2}) {
        const WaveletBasis basis(Grid(Domain::unit(dim), dim == 1 ? 8 : 6), 3);
        CHECK(sup_norm(basis.synthesize(basis.zero_tree())) == 0.0);

        CoefficientTree scaling = basis.zero_tree();
        scaling.at(-1, 0) = 1.0;
        const GridFunction c = basis.synthesize(scaling);
        CHECK(c.max() - c.min() <= 1e-13);
        CHECK(periodic_inner(c, c) == doctest::Approx(1.0).epsilon(1e-12));

        CoefficientTree too_deep(dim, 4);
        CHECK_THROWS_AS(basis.synthesize(too_deep), InvalidArgument);
    }
    CHECK_THROWS_AS(WaveletBasis(Grid(Domain::unit(1), 5), 3), InvalidArgument);
}

TEST_CASE("analyze inverts synthesize and is its adjoint") {
    std::mt19937_64 rng(21);
    for (int dim : {1, 2}) {
        const Grid grid(Domain::unit(dim), dim == 1 ? 8 : 6);
        const WaveletBasis basis(grid, 3);
        for (int trial = 0; trial < 50; ++trial) {
            const CoefficientTree c = random_tree(dim, 3, rng);
            const GridFunction a = basis.synthesize(c);
            CHECK(max_abs_diff(basis.analyze(a), c) <= 1e-10);
            // Parseval
            CHECK(periodic_inner(a, a) == doctest::Approx(c.dot(c)).epsilon(1e-10));
        }
        std::normal_distribution<double> normal;
        GridFunction x(grid);
        for (double& v : x.values()) v = normal(rng);
        const CoefficientTree c = random_tree(dim, 3, rng);
        CHECK(periodic_inner(basis.synthesize(c), x) == doctest::Approx(c.dot(basis.analyze(x))).epsilon(1e-10));
    }
}

TEST_CASE("atoms are orthonormal and analyze to unit vectors") {
    const WaveletBasis basis(Grid(Domain::unit(2), 6), 2);
    for (int l = -1; l <= 2; ++l) {
        for (std::size_t r : {std::size_t{0}, basis.zero_tree().count(l) - 1}) {
            const CoefficientTree back = basis.analyze(basis.atom(l, r));
            CoefficientTree unit = basis.zero_tree();
            unit.at(l, r) = 1.0;
            CHECK(max_abs_diff(back, unit) <= 1e-10);
        }
    }
}

TEST_CASE("interior atoms are normalized in the interior quadrature") {
    const Grid grid(Domain::unit(1), 8);
    const WaveletBasis basis(grid, 5);
    // db6 atoms at level 5 have support of 11/32; position 10 sits inside (0, 1)
    const GridFunction a = basis.atom(5, 10);
    CHECK(a[0] == 0.0);
    CHECK(l2_norm(a) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(l2_inner(a, basis.atom(5, 12)) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
}

TEST_CASE("projection Parseval for smooth fields") {
    const Grid grid(Domain::unit(2), 6);
    const WaveletBasis basis(grid, 3);
    auto a = GridFunction::sample(grid, [](const Point& x) { return std::exp(x[0]) * std::sin(3.0 * x[1]); });
    auto b = GridFunction::sample(grid, [](const Point& x) { return x[0] * x[1] + std::cos(x[0] - x[1]); });
    const CoefficientTree ca = basis.analyze(a);
    const CoefficientTree cb = basis.analyze(b);
    const double lhs = ca.dot(cb);
    const double rhs = periodic_inner(basis.synthesize(ca), basis.synthesize(cb));
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-8));
    CHECK(ca.dot(ca) <= periodic_inner(a, a) * (1.0 + 1e-12));
}

TEST_CASE("prior box geometry") {
    const PriorConfig cfg{2.0, 3, 2};
    // level -1 uses l = -1 in the exponent and lbar = 1
    CHECK(cfg.box(-1, 1) == doctest::Approx(2.0 * std::exp2(3.5)));
    CHECK(cfg.box(0, 1) == doctest::Approx(2.0));
    CHECK(cfg.box(1, 1) == doctest::Approx(2.0 * std::exp2(-3.5)));
    CHECK(cfg.box(2, 2) == doctest::Approx(2.0 * std::exp2(-8.0) / 4.0));
    CHECK_THROWS_AS(PriorConfig({0.0, 3, 1}).validate(), InvalidArgument);
    CHECK_THROWS_AS(PriorConfig({1.0, 0, 1}).validate(), InvalidArgument);
}

TEST_CASE("interior_point_margin examples") {
    const PriorConfig cfg{1.5, 3, 2};
    CoefficientTree c(1, 2);
    CHECK(interior_point_margin(c, cfg) == doctest::Approx(1.5));
    c.at(1, 1) = -cfg.box(1, 1);
    CHECK(interior_point_margin(c, cfg) == doctest::Approx(0.0).scale(1.0));
    for (int l = -1; l <= 2; ++l) {
        for (double& b : c.level(l)) b = 0.5 * cfg.box(l, 1);
    }
    CHECK(interior_point_margin(c, cfg) == doctest::Approx(0.75));
    CHECK(inside_prior_box(c, cfg));
    c.at(0, 0) = 1.01 * cfg.box(0, 1);
    CHECK(!inside_prior_box(c, cfg));
}

TEST_CASE("prior draws respect the boxes and the sup-norm bound") {
    for (int dim : {1, 2}) {
        const WaveletBasis basis(Grid(Domain::unit(dim), dim == 1 ? 8 : 6), 3);
        const PriorConfig cfg{1.0, 3, 3};
        const double bound = prior_sup_bound(cfg, basis);
        for (std::uint64_t seed = 0; seed < (dim == 1 ? 1000u : 200u); ++seed) {
            const PriorDraw d = sample_prior(cfg, basis, seed);
            CHECK(inside_prior_box(d.coefficients, cfg));
            CHECK(interior_point_margin(d.coefficients, cfg) >= 0.0);
            CHECK(d.potential.min() > 0.0);
            CHECK(sup_norm(d.potential.map([](double v) { return std::log(v); })) <= bound);
        }
    }
}

TEST_CASE("prior sampling is deterministic and degenerates as B -> 0") {
    const WaveletBasis basis(Grid(Domain::unit(1), 7), 2);
    const PriorConfig cfg{1.0, 2, 2};
    const PriorDraw a = sample_prior(cfg, basis, 99);
    const PriorDraw b = sample_prior(cfg, basis, 99);
    CHECK(a.coefficients == b.coefficients);
    CHECK(!(sample_prior(cfg, basis, 100).coefficients == a.coefficients));

    const PriorDraw tiny = sample_prior({1e-300, 2, 2}, basis, 5);
    for (double v : tiny.coefficients.flat()) CHECK(std::abs(v) <= 1e-299);
    CHECK(sup_norm(tiny.potential - GridFunction(basis.grid(), 1.0)) == 0.0);
}

TEST_CASE("uniform box marginals are centred") {
    const WaveletBasis basis(Grid(Domain::unit(1), 6), 2);
    const PriorConfig cfg{1.0, 3, 2};
    const std::size_t n = 10000;
    CoefficientTree sum(1, 2);
    for (std::uint64_t seed = 0; seed < n; ++seed) {
        const PriorDraw d = sample_prior(cfg, basis, seed);
        for (std::size_t k = 0; k < sum.size(); ++k) sum.flat()[k] += d.coefficients.flat()[k];
    }
    for (std::size_t k = 0; k < sum.size(); ++k) {
        const double a = cfg.box(sum.level_of(k), 1);
        const double se = a / std::sqrt(3.0 * static_cast<double>(n));
        CHECK(std::abs(sum.flat()[k] / static_cast<double>(n)) <= 4.0 * se);
    }
}

TEST_CASE("level rule") {
    // round(-2 log2(eps) / 11) for s = 3, d = 1
    CHECK(level_rule(0.2, 3, 1, 8) == 1);
    CHECK(level_rule(0.025, 3, 1, 8) == 1);
    CHECK(level_rule(1e-4, 3, 1, 8) == 2);
    CHECK(level_rule(1e-12, 3, 1, 8) == 5);
    CHECK(level_rule(1e-12, 1, 2, 6) == 3);  // clamped to Jg - 3
    CHECK_THROWS_AS(level_rule(0.0, 3, 1, 8), InvalidArgument);
}
