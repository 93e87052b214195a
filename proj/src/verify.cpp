#include "pinv/verify.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "pinv/obsmodel.hpp"

namespace pinv {

CheckResult make_check(std::string name, double value, double lower, double upper) {
    return {std::move(name), value, lower, upper, value >= lower && value <= upper};
}

namespace {

Grid check_grid(int dim) { return Grid(Domain::unit(dim), dim == 1 ? 7 : 5); }

std::string suffix(int dim) { return "_d" + std::to_string(dim); }

GridFunction wavy_boundary(const Grid& grid) {
    return boundary_field(grid, [](const Point& x) { return 1.0 + 0.5 * std::sin(3.0 * x[0] + x[1]); });
}

GridFunction random_interior(const Grid& grid, std::mt19937_64& rng) {
    std::normal_distribution<double> normal;
    GridFunction h(grid);
    for (std::size_t n : grid.interior_nodes()) h[n] = normal(rng);
    return h;
}

GridFunction smooth_interior(const Grid& grid, double k) {
    GridFunction h = GridFunction::sample(grid, [k](const Point& x) {
        return std::cos(k * x[0]) * std::exp(x[1]) + x[0] * x[0];
    });
    h.zero_boundary();
    return h;
}

PotentialField prior_potential(const Grid& grid, std::uint64_t seed, double amplitude = 1.0) {
    const WaveletBasis basis(grid, 2);
    return PotentialField::from_values(sample_prior({amplitude, 3, 2}, basis, seed).potential);
}

// (1 - r^2/0.35^2)^6 (1 + x): interior, smooth enough for the stencils
GridFunction riesz_test_function(const Grid& grid) {
    return GridFunction::sample(grid, [dim = grid.dim()](const Point& x) {
        double r2 = (x[0] - 0.5) * (x[0] - 0.5);
        if (dim == 2) r2 += (x[1] - 0.5) * (x[1] - 0.5);
        const double t = 1.0 - r2 / (0.35 * 0.35);
        return t > 0.0 ? std::pow(t, 6) * (1.0 + x[0]) : 0.0;
    });
}

double smooth_potential(const Point& x) {
    return std::exp(0.3 * std::sin(2.0 * std::numbers::pi * x[0]) + 0.2 * x[1]);
}

}  // namespace

std::vector<CheckResult> verify_closed_form_solver() {
    std::vector<double> errors;
    for (int level = 6; level <= 9; ++level) {
        const Grid grid(Domain::unit(1), level);
        const SchrodingerSystem sys(PotentialField::constant(grid, 2.0), GridFunction(grid, 1.0));
        const GridFunction exact =
            GridFunction::sample(grid, [](const Point& x) { return std::cosh(2.0 * (x[0] - 0.5)) / std::cosh(1.0); });
        errors.push_back(l2_norm(solve_forward(sys, 1e-12) - exact) / l2_norm(exact));
    }
    return {make_check("cosh_rel_error_jg8", errors[2], 0.0, 1e-3),
            make_check("cosh_ratio_jg6_7", errors[0] / errors[1], 3.0, 5.0),
            make_check("cosh_ratio_jg7_8", errors[1] / errors[2], 3.0, 5.0),
            make_check("cosh_ratio_jg8_9", errors[2] / errors[3], 3.0, 5.0)};
}

std::vector<CheckResult> verify_green_operator(int dim, std::size_t trials, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const Grid grid = check_grid(dim);
    const GridFunction g = wavy_boundary(grid);
    const H2DualNorm dual(grid);
    double sv = 0.0, vs = 0.0, sym = 0.0, dual_ratio = 0.0, forward_ratio = 0.0, green_ratio = 0.0;
    for (std::size_t k = 0; k < trials; ++k) {
        const SchrodingerSystem sys(prior_potential(grid, seed + 2 * k), g);
        const SchrodingerSystem other(prior_potential(grid, seed + 2 * k + 1), g);
        const GridFunction h1 = random_interior(grid, rng);
        const GridFunction h2 = random_interior(grid, rng);
        const GridFunction v1 = solve_green(sys, h1);
        sv = std::max(sv, l2_norm(apply_Sf(sys, v1) - h1) / l2_norm(h1));
        vs = std::max(vs, l2_norm(solve_green(sys, apply_Sf(sys, h2)) - h2) / l2_norm(h2));
        sym = std::max(sym, std::abs(l2_inner(v1, h2) - l2_inner(h1, solve_green(sys, h2))) /
                                (l2_norm(v1) * l2_norm(h2)));
        dual_ratio = std::max(dual_ratio, l2_norm(v1) / dual(h1));

        const GridFunction df = sys.potential().f() - other.potential().f();
        forward_ratio = std::max(forward_ratio, l2_norm(solve_forward(sys) - solve_forward(other)) / dual(df));
        const GridFunction q = smooth_interior(grid, 2.0);
        green_ratio = std::max(green_ratio, l2_norm(solve_green(sys, q) - solve_green(other, q)) /
                                                (l2_norm(df) * sup_norm(q)));
    }
    const std::string d = suffix(dim);
    return {make_check("S_V_identity" + d, sv, 0.0, 1e-8),
            make_check("V_S_identity" + d, vs, 0.0, 1e-8),
            make_check("V_symmetry" + d, sym, 0.0, 1e-8),
            make_check("green_dual_stability" + d, dual_ratio, 0.0, kDualStability),
            make_check("forward_stability" + d, forward_ratio, 0.0, kForwardStability),
            make_check("green_potential_stability" + d, green_ratio, 0.0, kGreenStability)};
}

std::vector<CheckResult> verify_score_taylor(int dim, std::uint64_t seed) {
    const Grid grid = check_grid(dim);
    const GridFunction g = wavy_boundary(grid);
    const SchrodingerSystem sys(prior_potential(grid, seed, 0.5), g);
    const GridFunction& f = sys.potential().f();
    const GridFunction u = solve_forward(sys, 1e-12);
    // relative direction f h keeps f + t f h positive for |t h| < 1
    const GridFunction h = f * smooth_interior(grid, 2.0);
    const GridFunction du = score(sys, u, h, 1e-12);
    auto remainder = [&](double t) {
        const SchrodingerSystem moved(PotentialField::from_values(f + t * h), g);
        return l2_norm(solve_forward(moved, 1e-12) - u - t * du);
    };
    std::vector<CheckResult> out;
    for (double t : {1e-2, 5e-3}) {
        out.push_back(make_check(std::string("taylor_ratio_t") + (t == 1e-2 ? "1e-2" : "5e-3") + suffix(dim),
                                 remainder(t) / remainder(t / 2.0), 3.5, 4.5));
    }
    return out;
}

std::vector<CheckResult> verify_riesz(int dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const std::string d = suffix(dim);
    std::vector<CheckResult> out;
    {
        const Grid grid(Domain::unit(dim), dim == 1 ? 8 : 5);
        const SchrodingerSystem sys(prior_potential(grid, seed), wavy_boundary(grid));
        const GridFunction u = solve_forward(sys);
        const GridFunction psi = riesz_test_function(grid);
        const GridFunction score_rep = score(sys, u, riesz_representer(sys, u, psi));
        double worst = 0.0;
        for (int k = 0; k < 10; ++k) {
            const GridFunction h = random_interior(grid, rng);
            worst = std::max(worst, std::abs(l2_inner(score_rep, score(sys, u, h)) - l2_inner(psi, h)) /
                                        (l2_norm(psi) * l2_norm(h)));
        }
        out.push_back(make_check("riesz_identity" + d, worst, 0.0, 1e-2));
    }
    const int base = dim == 1 ? 5 : 4;
    auto representer = [dim](int level) {
        const Grid grid(Domain::unit(dim), level);
        const SchrodingerSystem sys(PotentialField::from_values(GridFunction::sample(grid, smooth_potential)),
                                    wavy_boundary(grid));
        return riesz_representer(sys, solve_forward(sys), riesz_test_function(grid));
    };
    const GridFunction reference = representer(base + 5);
    double previous = 0.0;
    for (int level = base; level <= base + 2; ++level) {
        const GridFunction rep = representer(level);
        const double err = l2_norm(rep - restrict_to(reference, rep.grid())) / l2_norm(rep);
        if (level > base) {
            out.push_back(make_check("riesz_refinement_ratio_jg" + std::to_string(level) + d, previous / err, 3.5, 4.5));
        }
        previous = err;
    }
    return out;
}

std::vector<CheckResult> verify_likelihood_identity(int dim, std::size_t trials, std::uint64_t seed) {
    const Grid grid = check_grid(dim);
    const GridFunction g = wavy_boundary(grid);
    const SchrodingerSystem truth(prior_potential(grid, seed), g);
    const GridFunction u0 = solve_forward(truth);
    double worst = 0.0;
    for (std::size_t k = 0; k < trials; ++k) {
        const double eps = 0.05 * (1.0 + static_cast<double>(k % 4));
        const Observation obs = generate_observation(truth, eps, seed + 1000 + k);
        const GridFunction w = (1.0 / eps) * (obs.y - u0);
        const GridFunction uf = solve_forward(SchrodingerSystem(prior_potential(grid, seed + 1 + 2 * k), g));
        const GridFunction ug = solve_forward(SchrodingerSystem(prior_potential(grid, seed + 2 + 2 * k), g));
        const double lhs = log_likelihood(obs, uf) - log_likelihood(obs, ug);
        const double df = l2_norm(uf - u0);
        const double dg = l2_norm(ug - u0);
        const double rhs = -(df * df - dg * dg) / (2.0 * eps * eps) + l2_inner(uf - ug, w) / eps;
        worst = std::max(worst, std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs)));
    }
    return {make_check("likelihood_identity" + suffix(dim), worst, 0.0, 1e-8)};
}

std::vector<CheckResult> verify_prior_support(const PriorConfig& cfg, const WaveletBasis& basis, std::size_t draws,
                                              std::uint64_t seed) {
    const double bound = prior_sup_bound(cfg, basis);
    std::size_t outside = 0;
    double worst = 0.0;
    for (std::size_t k = 0; k < draws; ++k) {
        const PriorDraw d = sample_prior(cfg, basis, seed + k);
        if (!inside_prior_box(d.coefficients, cfg)) ++outside;
        worst = std::max(worst, sup_norm(basis.synthesize(d.coefficients)) / bound);
    }
    const std::string d = suffix(basis.dim());
    return {make_check("prior_box_violations" + d, static_cast<double>(outside), 0.0, 0.0),
            make_check("prior_sup_over_bound" + d, worst, 0.0, 1.0)};
}

std::vector<CheckResult> verify_toy_posterior(std::size_t iterations, std::uint64_t seed) {
    const Grid grid(Domain::unit(1), 6);
    const WaveletBasis basis(grid, 0);
    const PriorConfig prior{1.0, 3, 0};
    const GridFunction g = boundary_field(grid, [](const Point& x) { return 1.0 + x[0]; });
    auto potential = [&](double b_scaling, double b_detail) {
        CoefficientTree c(1, 0);
        c.at(-1, 0) = b_scaling;
        c.at(0, 0) = b_detail;
        return PotentialField::from_values(basis.synthesize(c).map([](double v) { return std::exp(v); }));
    };
    const double a1 = prior.box(-1, 1);
    const double a0 = prior.box(0, 1);
    const Observation obs = generate_observation(SchrodingerSystem(potential(0.8, 0.5 * a0), g), 0.01, 7);
    auto loglik = [&](double b1, double b0) { return log_likelihood_of_potential(obs, potential(b1, b0), obs.y); };

    // The posterior fills a few cells of the box, so a coarse pass first
    // bounds the region within 40 log-units of the maximum.
    const int coarse = 60;
    auto node = [](double lo, double hi, int i, int n) { return lo + (i + 0.5) * (hi - lo) / n; };
    std::vector<double> ll(coarse * coarse);
    double top = -INFINITY;
    for (int i = 0; i < coarse; ++i) {
        for (int j = 0; j < coarse; ++j) {
            ll[i * coarse + j] = loglik(node(-a1, a1, i, coarse), node(-a0, a0, j, coarse));
            top = std::max(top, ll[i * coarse + j]);
        }
    }
    double lo1 = a1, hi1 = -a1, lo0 = a0, hi0 = -a0;
    for (int i = 0; i < coarse; ++i) {
        for (int j = 0; j < coarse; ++j) {
            if (ll[i * coarse + j] < top - 40.0) continue;
            lo1 = std::min(lo1, node(-a1, a1, i, coarse));
            hi1 = std::max(hi1, node(-a1, a1, i, coarse));
            lo0 = std::min(lo0, node(-a0, a0, j, coarse));
            hi0 = std::max(hi0, node(-a0, a0, j, coarse));
        }
    }
    lo1 = std::max(-a1, lo1 - 2.0 * a1 / coarse);
    hi1 = std::min(a1, hi1 + 2.0 * a1 / coarse);
    lo0 = std::max(-a0, lo0 - 2.0 * a0 / coarse);
    hi0 = std::min(a0, hi0 + 2.0 * a0 / coarse);

    const int n = 200;
    std::vector<double> fine(n * n);
    top = -INFINITY;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            fine[i * n + j] = loglik(node(lo1, hi1, i, n), node(lo0, hi0, j, n));
            top = std::max(top, fine[i * n + j]);
        }
    }
    double z = 0.0, m1 = 0.0, m0 = 0.0, s1 = 0.0, s0 = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const double w = std::exp(fine[i * n + j] - top);
            const double b1 = node(lo1, hi1, i, n), b0 = node(lo0, hi0, j, n);
            z += w;
            m1 += w * b1;
            m0 += w * b0;
            s1 += w * b1 * b1;
            s0 += w * b0 * b0;
        }
    }

    McmcParams params;
    params.iterations = iterations;
    const PosteriorRun run = mcmc_run(obs, prior, basis, params, seed);
    double c1 = 0.0, c0 = 0.0, q1 = 0.0, q0 = 0.0;
    for (const auto& c : run.draws) {
        c1 += c.at(-1, 0);
        c0 += c.at(0, 0);
        q1 += c.at(-1, 0) * c.at(-1, 0);
        q0 += c.at(0, 0) * c.at(0, 0);
    }
    const double k = static_cast<double>(run.draws.size());
    auto rel = [](double chain, double quad) { return std::abs(chain - quad) / std::abs(quad); };
    return {make_check("toy_mean_scaling", rel(c1 / k, m1 / z), 0.0, 0.02),
            make_check("toy_mean_detail", rel(c0 / k, m0 / z), 0.0, 0.02),
            make_check("toy_second_moment_scaling", rel(q1 / k, s1 / z), 0.0, 0.02),
            make_check("toy_second_moment_detail", rel(q0 / k, s0 / z), 0.0, 0.02)};
}

std::vector<CheckResult> verify_suite(int dim, std::uint64_t seed) {
    std::vector<CheckResult> out;
    auto append = [&out](std::vector<CheckResult> more) { out.insert(out.end(), more.begin(), more.end()); };
    if (dim == 1) append(verify_closed_form_solver());
    append(verify_green_operator(dim, 20, seed));
    append(verify_score_taylor(dim, seed));
    append(verify_riesz(dim, seed));
    append(verify_likelihood_identity(dim, 20, seed));
    const WaveletBasis basis(Grid(Domain::unit(dim), dim == 1 ? 8 : 6), 3);
    append(verify_prior_support({1.0, 3, 3}, basis, 1000, seed));
    return out;
}

std::vector<Point> diagonal_probes(const Grid& grid, std::size_t n) {
    std::vector<Point> out;
    const int cells = grid.cells_per_axis();
    for (std::size_t k = 1; k <= n; ++k) {
        const int i = std::clamp(static_cast<int>(std::lround(cells * static_cast<double>(k) / (n + 1.0))), 1, cells - 1);
        out.push_back(grid.coords(grid.dim() == 1 ? grid.node(i) : grid.node(i, i)));
    }
    return out;
}

std::vector<ProbeComparison> oracle_crosscheck(const SchrodingerSystem& sys, std::span<const Point> probes,
                                               const PathConfig& cfg, double tol) {
    const GridFunction u = solve_forward(sys, tol);
    std::vector<ProbeComparison> out;
    for (const Point& x : probes) {
        ProbeComparison p;
        p.x = x;
        p.solver = interpolate(u, x);
        p.mc = fk_forward_estimate(sys.potential(), sys.boundary(), x, cfg);
        p.z = (p.mc.mean - p.solver) / p.mc.stderr_;
        out.push_back(p);
    }
    return out;
}

}  // namespace pinv
