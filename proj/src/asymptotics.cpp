#include "pinv/asymptotics.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <random>
#include <thread>

#include <Eigen/Eigenvalues>

#include "pinv/error.hpp"
#include "pinv/rng.hpp"
#include "pinv/stats.hpp"

namespace pinv {

double lan_norm(const SchrodingerSystem& sys, const GridFunction& u, const GridFunction& h, double tol) {
    return l2_norm(score(sys, u, h, tol));
}

LimitLaw limit_covariance(const SchrodingerSystem& sys, const GridFunction& u, const std::vector<TestFunction>& dictionary) {
    if (dictionary.empty()) throw InvalidArgument("limit_covariance: empty dictionary");
    if (!(u.min() > 0.0)) throw InvalidArgument("limit_covariance: u must be positive");
    std::vector<GridFunction> images;
    LimitLaw law;
    for (const auto& t : dictionary) {
        if (!vanishes_near_boundary(t.psi)) {
            throw InvalidArgument("limit_covariance: test function '" + t.id + "' touches the boundary margin");
        }
        images.push_back(apply_Sf(sys, t.psi / u));
        law.ids.push_back(t.id);
    }
    const auto k = static_cast<Eigen::Index>(images.size());
    law.sigma.resize(k, k);
    for (Eigen::Index i = 0; i < k; ++i) {
        for (Eigen::Index j = 0; j <= i; ++j) {
            law.sigma(i, j) = law.sigma(j, i) = l2_inner(images[static_cast<std::size_t>(i)], images[static_cast<std::size_t>(j)]);
        }
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(law.sigma);
    law.min_eigenvalue = eig.eigenvalues().minCoeff();
    law.factor = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    return law;
}

Eigen::MatrixXd sample_limit_law(const LimitLaw& law, std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    const Eigen::Index k = law.sigma.rows();
    Eigen::MatrixXd z(static_cast<Eigen::Index>(n), k);
    for (Eigen::Index r = 0; r < z.rows(); ++r) {
        for (Eigen::Index c = 0; c < k; ++c) z(r, c) = normal(rng);
    }
    return z * law.factor.transpose();
}

std::vector<double> standardized_draws(std::span<const double> functional, double eps, double sigma) {
    if (!(eps > 0.0) || !(sigma > 0.0)) throw InvalidArgument("standardized_draws: eps and sigma must be positive");
    const double center = mean(functional);
    std::vector<double> z(functional.size());
    for (std::size_t k = 0; k < z.size(); ++k) z[k] = (functional[k] - center) / (eps * sigma);
    return z;
}

std::vector<BvmEntry> bvm_diagnostic(const PosteriorRun& run, const LimitLaw& law, const Observation& obs,
                                     const SchrodingerSystem& sys, const GridFunction& u0,
                                     const std::vector<TestFunction>& dictionary) {
    if (run.functionals.size() < dictionary.size() || law.ids.size() != dictionary.size()) {
        throw InvalidArgument("bvm_diagnostic: run, law and dictionary disagree");
    }
    const GridFunction w = (1.0 / obs.eps) * (obs.y - u0);
    const GridFunction& f0 = sys.potential().f();
    std::vector<BvmEntry> out;
    for (std::size_t i = 0; i < dictionary.size(); ++i) {
        const auto& draws = run.functionals[i];
        BvmEntry e;
        e.id = dictionary[i].id;
        e.sigma = std::sqrt(std::max(0.0, law.sigma(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i))));
        e.ks = ks_distance_normal(standardized_draws(draws, obs.eps, e.sigma));
        e.ess = effective_sample_size(draws);
        e.ks_band = 1.5 * 1.36 / std::sqrt(e.ess);
        e.spread_ratio = std::sqrt(variance(draws)) / (obs.eps * e.sigma);
        e.fbar_psi = mean(draws);
        e.truth_psi = l2_inner(f0, dictionary[i].psi);
        const GridFunction rep = riesz_representer(sys, u0, dictionary[i].psi);
        const double efficient = e.truth_psi + obs.eps * l2_inner(score(sys, u0, rep), w);
        e.centering = (e.fbar_psi - efficient) / obs.eps;
        out.push_back(std::move(e));
    }
    return out;
}

int prior_level(const ExperimentSetup& setup, double eps) {
    if (!setup.level_from_rule) return setup.prior.max_level;
    return std::min(setup.basis.max_level(),
                    level_rule(eps, setup.prior.smoothness, setup.basis.dim(), setup.basis.grid().level()));
}

namespace {

std::uint64_t replication_seed(const ExperimentSetup& setup, double eps, std::size_t rep) {
    return derive_seed(derive_seed(setup.seed, std::bit_cast<std::uint64_t>(eps)), rep);
}

}  // namespace

Replication run_replication(const ExperimentSetup& setup, double eps, std::size_t rep) {
    Replication out;
    out.eps = eps;
    out.rep = rep;
    out.seed = replication_seed(setup, eps, rep);
    out.level = prior_level(setup, eps);
    try {
        const WaveletBasis& basis = setup.basis;
        PriorConfig prior = setup.prior;
        prior.max_level = out.level;
        const SchrodingerSystem truth(PotentialField::from_values(setup.f0), setup.boundary, setup.mcmc.solver);
        const GridFunction u0 = solve_forward(truth, setup.mcmc.solver_tol);
        Observation obs = generate_observation(truth, eps, derive_seed(out.seed, 0), setup.mcmc.solver_tol);
        obs.truth_id = setup.name;

        std::vector<TestFunction> all = setup.dictionary;
        all.insert(all.end(), setup.ball.begin(), setup.ball.end());
        const PosteriorRun run = mcmc_run(obs, prior, basis, setup.mcmc, derive_seed(out.seed, 1), all);
        out.acceptance = run.acceptance_rate;

        const GridFunction fbar = posterior_mean(run, basis);
        out.error_l2 = l2_norm(fbar - setup.f0);
        std::vector<double> spread;
        spread.reserve(run.draws.size());
        for (const auto& c : run.draws) {
            spread.push_back(l2_norm(basis.synthesize(c).map([](double v) { return std::exp(v); }) - fbar));
        }
        out.spread_l2 = median(std::move(spread));

        if (!setup.dictionary.empty()) {
            const LimitLaw law = limit_covariance(truth, u0, setup.dictionary);
            out.bvm = bvm_diagnostic(run, law, obs, truth, u0, setup.dictionary);
            for (std::size_t i = 0; i < setup.dictionary.size(); ++i) {
                out.intervals.push_back(credible_interval(run, i, setup.beta));
                out.covered.push_back(out.intervals.back().contains(out.bvm[i].truth_psi));
            }
        }
        if (!setup.ball.empty()) {
            const std::size_t offset = setup.dictionary.size();
            std::vector<std::vector<double>> functionals(run.functionals.begin() + static_cast<std::ptrdiff_t>(offset),
                                                         run.functionals.end());
            std::vector<double> weights;
            out.ball_distance = 0.0;
            for (std::size_t i = 0; i < setup.ball.size(); ++i) {
                weights.push_back(setup.ball[i].weight);
                const double truth_psi = l2_inner(setup.f0, setup.ball[i].psi);
                out.ball_distance =
                    std::max(out.ball_distance, std::abs(truth_psi - mean(functionals[i])) / setup.ball[i].weight);
            }
            out.ball_radius = credible_ball_radius(functionals, weights, setup.beta);
            out.ball_covered = out.ball_distance <= out.ball_radius;
        }
    } catch (const Error& e) {
        out.failed = true;
        out.failure = e.what();
    }
    return out;
}

std::vector<Replication> run_replications(const ExperimentSetup& setup, const std::vector<double>& eps_list,
                                          std::size_t n_reps) {
    std::vector<std::pair<double, std::size_t>> jobs;
    for (double eps : eps_list) {
        for (std::size_t r = 0; r < n_reps; ++r) jobs.emplace_back(eps, r);
    }
    std::vector<Replication> out(jobs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k = next++; k < jobs.size(); k = next++) out[k] = run_replication(setup, jobs[k].first, jobs[k].second);
    };
    const unsigned workers = std::max(1u, std::min<unsigned>(setup.threads, static_cast<unsigned>(jobs.size())));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    std::size_t failures = 0;
    std::string first;
    for (const auto& r : out) {
        if (r.failed && failures++ == 0) first = r.failure;
    }
    if (static_cast<double>(failures) > 0.05 * static_cast<double>(out.size())) {
        throw NumericalError(std::to_string(failures) + " of " + std::to_string(out.size()) +
                             " replications failed; first: " + first);
    }
    return out;
}

CoverageSummary summarize_coverage(const ExperimentSetup& setup, const std::vector<Replication>& reps) {
    CoverageSummary s;
    const std::size_t k = setup.dictionary.size();
    for (const auto& t : setup.dictionary) s.ids.push_back(t.id);
    s.coverage.assign(k, 0.0);
    s.scaled_radius.assign(k, 0.0);
    s.target_radius.assign(k, 0.0);
    const double z = normal_quantile(1.0 - setup.beta / 2.0);
    for (const auto& r : reps) {
        s.eps = r.eps;
        if (r.failed) {
            ++s.failures;
            continue;
        }
        ++s.reps;
        for (std::size_t i = 0; i < k; ++i) {
            s.coverage[i] += r.covered[i] ? 1.0 : 0.0;
            s.scaled_radius[i] += r.intervals[i].radius / r.eps;
            s.target_radius[i] += z * r.bvm[i].sigma;
        }
        s.ball_coverage += r.ball_covered ? 1.0 : 0.0;
        s.ball_scaled_radius += r.ball_radius / r.eps;
    }
    if (s.reps == 0) throw NumericalError("coverage: every replication failed");
    const double n = static_cast<double>(s.reps);
    for (std::size_t i = 0; i < k; ++i) {
        s.coverage[i] /= n;
        s.scaled_radius[i] /= n;
        s.target_radius[i] /= n;
    }
    s.ball_coverage /= n;
    s.ball_scaled_radius /= n;
    return s;
}

CoverageSummary coverage_experiment(const ExperimentSetup& setup, double eps, std::size_t n_reps,
                                    std::vector<Record>* records) {
    if (n_reps < 50) throw InvalidArgument("coverage experiment needs at least 50 replications");
    if (setup.dictionary.empty()) throw InvalidArgument("coverage experiment needs a dictionary");
    const auto reps = run_replications(setup, {eps}, n_reps);
    if (records) {
        const auto rows = replication_records(setup, reps);
        records->insert(records->end(), rows.begin(), rows.end());
    }
    return summarize_coverage(setup, reps);
}

double theoretical_rate_exponent(int smoothness, int dim) {
    return 2.0 * smoothness / (2.0 * smoothness + 4.0 + dim);
}

RateSummary summarize_rates(const ExperimentSetup& setup, const std::vector<double>& eps_list,
                            const std::vector<Replication>& reps) {
    RateSummary s;
    s.theoretical = theoretical_rate_exponent(setup.prior.smoothness, setup.basis.dim());
    std::vector<double> log_eps, log_err;
    for (double eps : eps_list) {
        RateRow row;
        row.eps = eps;
        row.level = prior_level(setup, eps);
        std::vector<double> errors, spreads, ks, bands;
        for (const auto& r : reps) {
            if (r.eps != eps || r.failed) continue;
            errors.push_back(r.error_l2);
            spreads.push_back(r.spread_l2);
            for (const auto& b : r.bvm) {
                ks.push_back(b.ks);
                bands.push_back(b.ks_band);
            }
        }
        if (errors.empty()) throw NumericalError("rates: every replication failed at one eps");
        row.median_error = median(errors);
        row.median_spread = median(spreads);
        if (!ks.empty()) {
            row.median_ks = median(ks);
            row.median_ks_band = median(bands);
        }
        log_eps.push_back(std::log(eps));
        log_err.push_back(std::log(row.median_error));
        s.rows.push_back(row);
    }
    s.slope = ols_slope(log_eps, log_err);
    return s;
}

RateSummary rate_experiment(const ExperimentSetup& setup, const std::vector<double>& eps_list, std::size_t n_reps,
                            std::vector<Record>* records) {
    if (eps_list.size() < 3) throw InvalidArgument("rate experiment needs at least 3 noise levels");
    for (std::size_t k = 1; k < eps_list.size(); ++k) {
        if (!(eps_list[k] < eps_list[k - 1])) throw InvalidArgument("rate experiment noise levels must decrease");
    }
    const auto reps = run_replications(setup, eps_list, n_reps);
    if (records) {
        const auto rows = replication_records(setup, reps);
        records->insert(records->end(), rows.begin(), rows.end());
    }
    return summarize_rates(setup, eps_list, reps);
}

std::vector<Record> replication_records(const ExperimentSetup& setup, const std::vector<Replication>& reps) {
    std::vector<Record> rows;
    for (const auto& r : reps) {
        auto add = [&](const std::string& psi, const std::string& kind, double value) {
            rows.push_back({setup.name, r.seed, r.eps, r.rep, psi, kind, value});
        };
        if (r.failed) {
            add("-", "failed", 1.0);
            continue;
        }
        add("-", "level", r.level);
        add("-", "acceptance", r.acceptance);
        add("-", "error_l2", r.error_l2);
        add("-", "spread_l2", r.spread_l2);
        for (std::size_t i = 0; i < r.bvm.size(); ++i) {
            const auto& b = r.bvm[i];
            add(b.id, "sigma", b.sigma);
            add(b.id, "ks", b.ks);
            add(b.id, "ess", b.ess);
            add(b.id, "spread_ratio", b.spread_ratio);
            add(b.id, "centering", b.centering);
            add(b.id, "radius", r.intervals[i].radius);
            add(b.id, "covered", r.covered[i] ? 1.0 : 0.0);
        }
        if (!setup.ball.empty()) {
            add("ball", "radius", r.ball_radius);
            add("ball", "distance", r.ball_distance);
            add("ball", "covered", r.ball_covered ? 1.0 : 0.0);
        }
    }
    return rows;
}

}  // namespace pinv
