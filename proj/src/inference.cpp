#include "pinv/inference.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include <Eigen/SparseCholesky>

#include "pinv/rng.hpp"
#include "pinv/stats.hpp"

namespace pinv {

namespace {

// C-infinity step from 0 (t <= 0) to 1 (t >= 1)
double smooth_step(double t) {
    if (t <= 0.0) return 0.0;
    if (t >= 1.0) return 1.0;
    const double a = std::exp(-1.0 / t);
    const double b = std::exp(-1.0 / (1.0 - t));
    return a / (a + b);
}

// (1 - (4y)^2)^8 on |y| < 1/4: seven continuous derivatives
double dyadic_profile(double y) {
    const double t = 4.0 * y;
    return std::abs(t) < 1.0 ? std::pow(1.0 - t * t, 8) : 0.0;
}

}  // namespace

GridFunction plateau_bump(const Grid& grid, const Point& center, double half_width, double transition) {
    if (!(half_width >= 0.0) || !(transition > 0.0)) throw InvalidArgument("plateau_bump: bad widths");
    return GridFunction::sample(grid, [&](const Point& x) {
        double v = 1.0;
        for (int a = 0; a < grid.dim(); ++a) {
            const double r = std::abs(x[a] - center[a]);
            v *= smooth_step((half_width + transition - r) / transition);
        }
        return v;
    });
}

double default_alpha(int dim) { return 2.0 + 1.5 * dim + 0.5; }

std::vector<TestFunction> interior_dictionary(const Grid& grid, int max_level, double alpha) {
    if (max_level < 0) throw InvalidArgument("interior_dictionary: max_level must be >= 0");
    const int d = grid.dim();
    std::vector<TestFunction> out;
    for (int l = 0; l <= max_level; ++l) {
        const double scale = std::exp2(l);
        const int per_axis = 1 << l;
        const int count_y = d == 2 ? per_axis : 1;
        for (int ky = 0; ky < count_y; ++ky) {
            for (int kx = 0; kx < per_axis; ++kx) {
                GridFunction psi = GridFunction::sample(grid, [&](const Point& x) {
                    double v = std::pow(scale, 0.5 * d) * dyadic_profile(scale * x[0] - kx - 0.5);
                    if (d == 2) v *= dyadic_profile(scale * x[1] - ky - 0.5);
                    return v;
                });
                if (!vanishes_near_boundary(psi)) continue;
                std::string id = "dy" + std::to_string(l) + "_" + std::to_string(kx);
                if (d == 2) id += "_" + std::to_string(ky);
                out.push_back({std::move(id), std::move(psi), std::exp2(l * (alpha + 0.5 * d))});
            }
        }
    }
    return out;
}

void McmcParams::validate() const {
    if (iterations == 0) throw InvalidArgument("mcmc iterations must be positive");
    if (!(burn_in_fraction >= 0.0 && burn_in_fraction < 1.0)) throw InvalidArgument("burn-in fraction must be in [0, 1)");
    if (max_stored == 0) throw InvalidArgument("max_stored must be positive");
    if (!(step_scale > 0.0)) throw InvalidArgument("step scale must be positive");
    if (!(target_acceptance > 0.0 && target_acceptance < 1.0)) throw InvalidArgument("target acceptance must be in (0, 1)");
    if (!(solver_tol > 0.0)) throw InvalidArgument("solver tolerance must be positive");
}

std::size_t McmcParams::burn_in() const {
    return static_cast<std::size_t>(burn_in_fraction * static_cast<double>(iterations));
}

std::size_t McmcParams::thinning() const {
    const std::size_t kept = iterations - burn_in();
    return std::max<std::size_t>(1, (kept + max_stored - 1) / max_stored);
}

std::size_t McmcParams::stored_count() const { return (iterations - burn_in()) / thinning(); }

double reflect_into_box(double x, double a) {
    if (!(a > 0.0)) return 0.0;
    // fold onto a period of 4a, then mirror the upper half
    double t = std::fmod(x + a, 4.0 * a);
    if (t < 0.0) t += 4.0 * a;
    if (t > 2.0 * a) t = 4.0 * a - t;
    return t - a;
}

namespace {

CoefficientTree checked_start(const Observation& obs, const PriorConfig& prior, const WaveletBasis& basis,
                              const McmcParams& params, std::optional<CoefficientTree> start) {
    prior.validate();
    params.validate();
    if (!(obs.eps > 0.0)) throw InvalidArgument("mcmc needs an observation with eps > 0");
    if (!(obs.y.grid() == basis.grid())) throw InvalidArgument("mcmc: observation and basis grids differ");
    if (prior.max_level > basis.max_level()) throw InvalidArgument("mcmc: prior level exceeds basis level");
    CoefficientTree init = start ? std::move(*start) : CoefficientTree(basis.dim(), prior.max_level);
    if (init.max_level() != prior.max_level || init.dim() != basis.dim()) {
        throw InvalidArgument("mcmc: start tree does not match the prior");
    }
    if (!inside_prior_box(init, prior)) throw InvalidArgument("mcmc: start tree outside the prior box");
    return init;
}

}  // namespace

MetropolisChain::MetropolisChain(const Observation& obs, const PriorConfig& prior, const WaveletBasis& basis,
                                 const McmcParams& params, std::uint64_t seed, std::optional<CoefficientTree> start)
    : obs_(obs), prior_(prior), basis_(basis), params_(params), rng_(seed),
      state_(evaluate(checked_start(obs, prior, basis, params, std::move(start)))) {
    const std::size_t blocks = static_cast<std::size_t>(prior_.max_level) + 2;
    scales_.assign(blocks, params_.step_scale);
    proposals_.assign(blocks, 0);
    accepted_.assign(blocks, 0);
    batch_accepts_.assign(blocks, 0);
    batch_sizes_.assign(blocks, 0);
    batch_index_.assign(blocks, 0);
}

ChainState MetropolisChain::evaluate(const CoefficientTree& coeffs) const {
    ChainState s{coeffs, basis_.synthesize(coeffs).map([](double v) { return std::exp(v); }), GridFunction(basis_.grid()),
                 0.0};
    const SchrodingerSystem sys(PotentialField::from_values(s.f), obs_.y, params_.solver);
    s.u = solve_forward(sys, params_.solver_tol);
    s.loglik = log_likelihood(obs_, s.u);
    return s;
}

PotentialField MetropolisChain::potential() const { return PotentialField::from_values(state_.f); }

bool MetropolisChain::adapting() const { return params_.adapt && iteration_ < params_.burn_in(); }

double MetropolisChain::acceptance_rate() const {
    std::size_t p = 0;
    std::size_t a = 0;
    for (std::size_t k = 0; k < proposals_.size(); ++k) {
        p += proposals_[k];
        a += accepted_[k];
    }
    return p > 0 ? static_cast<double>(a) / static_cast<double>(p) : 0.0;
}

int MetropolisChain::step() {
    constexpr std::size_t kBatch = 25;
    const std::size_t block = iteration_ % scales_.size();
    const int level = static_cast<int>(block) - 1;
    const int d = basis_.dim();
    const double a = prior_.box(level, d);
    const double sigma = scales_[block] * a;

    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> uniform;
    CoefficientTree proposal = state_.coeffs;
    for (double& b : proposal.level(level)) b = reflect_into_box(b + sigma * normal(rng_), a);
    const double log_u = std::log(uniform(rng_));

    std::optional<ChainState> next;
    try {
        next = evaluate(proposal);
    } catch (const NumericalError& e) {
        throw ChainFailure(std::string("forward solve failed in chain: ") + e.what(), state_.coeffs, iteration_,
                           e.residual());
    }
    const bool accept = log_u < next->loglik - state_.loglik;
    ++proposals_[block];
    if (accept) {
        state_ = std::move(*next);
        ++accepted_[block];
    }

    if (adapting()) {
        batch_accepts_[block] += accept ? 1 : 0;
        if (++batch_sizes_[block] == kBatch) {
            const double rate = static_cast<double>(batch_accepts_[block]) / kBatch;
            const double gain = std::min(1.0, 2.0 / std::sqrt(static_cast<double>(++batch_index_[block])));
            scales_[block] = std::clamp(scales_[block] * std::exp(gain * (rate - params_.target_acceptance)), 1e-8, 2.0);
            batch_accepts_[block] = 0;
            batch_sizes_[block] = 0;
        }
    }
    ++iteration_;
    return level;
}

void MetropolisChain::advance(std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) step();
}

void MetropolisChain::save(std::ostream& out) const {
    out << "pinv-chain 1\n" << iteration_ << '\n' << rng_ << '\n' << std::hexfloat;
    for (double s : scales_) out << s << ' ';
    out << '\n';
    for (auto* counters : {&proposals_, &accepted_, &batch_accepts_, &batch_sizes_, &batch_index_}) {
        for (std::size_t c : *counters) out << c << ' ';
        out << '\n';
    }
    out << state_.coeffs.size() << '\n';
    for (double b : state_.coeffs.flat()) out << b << ' ';
    out << '\n' << std::defaultfloat;
}

void MetropolisChain::restore(std::istream& in) {
    std::string tag;
    int version = 0;
    in >> tag >> version;
    if (tag != "pinv-chain" || version != 1) throw InvalidArgument("not a chain checkpoint");
    std::size_t iteration = 0;
    std::mt19937_64 rng;
    in >> iteration >> rng;
    std::vector<double> scales(scales_.size());
    for (double& s : scales) {
        std::string token;
        in >> token;
        s = std::strtod(token.c_str(), nullptr);
    }
    std::vector<std::vector<std::size_t>> counters(5, std::vector<std::size_t>(scales_.size()));
    for (auto& row : counters) {
        for (std::size_t& c : row) in >> c;
    }
    std::size_t n = 0;
    in >> n;
    if (!in || n != state_.coeffs.size()) throw InvalidArgument("chain checkpoint does not match the prior");
    std::vector<double> flat(n);
    for (double& b : flat) {
        std::string token;
        in >> token;
        b = std::strtod(token.c_str(), nullptr);
    }
    if (!in) throw InvalidArgument("truncated chain checkpoint");
    const CoefficientTree coeffs = CoefficientTree::from_flat(basis_.dim(), prior_.max_level, flat);
    if (!inside_prior_box(coeffs, prior_)) throw InvalidArgument("checkpoint state outside the prior box");
    state_ = evaluate(coeffs);
    iteration_ = iteration;
    rng_ = rng;
    scales_ = std::move(scales);
    proposals_ = counters[0];
    accepted_ = counters[1];
    batch_accepts_ = counters[2];
    batch_sizes_ = counters[3];
    batch_index_ = counters[4];
}

PosteriorRun mcmc_run(const Observation& obs, const PriorConfig& prior, const WaveletBasis& basis,
                      const McmcParams& params, std::uint64_t seed, const std::vector<TestFunction>& dictionary,
                      std::optional<CoefficientTree> start) {
    MetropolisChain chain(obs, prior, basis, params, seed, std::move(start));
    PosteriorRun run;
    run.seed = seed;
    run.prior = prior;
    run.params = params;
    run.functional_ids.reserve(dictionary.size());
    for (const auto& t : dictionary) {
        if (!(t.psi.grid() == basis.grid())) throw InvalidArgument("mcmc: test function on a different grid");
        run.functional_ids.push_back(t.id);
    }
    run.functionals.assign(dictionary.size(), {});
    const std::size_t burn = params.burn_in();
    const std::size_t thin = params.thinning();
    run.draws.reserve(params.stored_count());
    while (chain.iteration() < params.iterations) {
        chain.step();
        const std::size_t done = chain.iteration();
        if (done > burn && (done - burn) % thin == 0) {
            const ChainState& s = chain.state();
            if (!inside_prior_box(s.coeffs, prior)) throw NumericalError("chain left the prior box");
            run.draws.push_back(s.coeffs);
            for (std::size_t i = 0; i < dictionary.size(); ++i) run.functionals[i].push_back(l2_inner(s.f, dictionary[i].psi));
        }
    }
    run.acceptance_rate = chain.acceptance_rate();
    run.final_scales = chain.scales();
    std::ostringstream checkpoint;
    chain.save(checkpoint);
    run.checkpoint = checkpoint.str();
    return run;
}

GridFunction posterior_mean(const PosteriorRun& run, const WaveletBasis& basis) {
    if (run.draws.empty()) throw InvalidArgument("posterior_mean of an empty run");
    GridFunction sum(basis.grid());
    for (const auto& c : run.draws) sum += basis.synthesize(c).map([](double v) { return std::exp(v); });
    return (1.0 / static_cast<double>(run.draws.size())) * sum;
}

std::vector<double> functional_draws(const PosteriorRun& run, const WaveletBasis& basis, const GridFunction& psi) {
    std::vector<double> out;
    out.reserve(run.draws.size());
    for (const auto& c : run.draws) out.push_back(l2_inner(basis.synthesize(c).map([](double v) { return std::exp(v); }), psi));
    return out;
}

CredibleInterval credible_interval(std::span<const double> draws, double beta) {
    if (!(beta > 0.0 && beta < 1.0)) throw InvalidArgument("credible level beta must be in (0, 1)");
    if (draws.size() < 100) throw InvalidArgument("credible sets need at least 100 draws");
    const double center = mean(draws);
    std::vector<double> dev(draws.size());
    for (std::size_t k = 0; k < draws.size(); ++k) dev[k] = std::abs(draws[k] - center);
    return {center, upper_quantile(std::move(dev), 1.0 - beta)};
}

CredibleInterval credible_interval(const PosteriorRun& run, std::size_t psi_index, double beta) {
    if (psi_index >= run.functionals.size()) throw InvalidArgument("credible_interval: no such test function");
    return credible_interval(run.functionals[psi_index], beta);
}

CredibleInterval credible_interval(const PosteriorRun& run, const WaveletBasis& basis, const GridFunction& psi,
                                   double beta) {
    return credible_interval(functional_draws(run, basis, psi), beta);
}

double credible_ball_radius(const std::vector<std::vector<double>>& functionals, std::span<const double> weights,
                            double beta) {
    if (!(beta > 0.0 && beta < 1.0)) throw InvalidArgument("credible level beta must be in (0, 1)");
    if (functionals.empty() || functionals.size() != weights.size()) {
        throw InvalidArgument("credible_ball_radius: dictionary and weights disagree");
    }
    const std::size_t n = functionals.front().size();
    if (n < 100) throw InvalidArgument("credible sets need at least 100 draws");
    std::vector<double> centers;
    for (const auto& f : functionals) {
        if (f.size() != n) throw InvalidArgument("credible_ball_radius: ragged draws");
        centers.push_back(mean(f));
    }
    std::vector<double> dist(n, 0.0);
    for (std::size_t i = 0; i < functionals.size(); ++i) {
        if (!(weights[i] > 0.0)) throw InvalidArgument("credible_ball_radius: weights must be positive");
        for (std::size_t k = 0; k < n; ++k) dist[k] = std::max(dist[k], std::abs(functionals[i][k] - centers[i]) / weights[i]);
    }
    return upper_quantile(std::move(dist), 1.0 - beta);
}

double credible_ball_radius(const PosteriorRun& run, std::span<const double> weights, double beta) {
    return credible_ball_radius(run.functionals, weights, beta);
}

GridFunction least_squares_u(const Observation& obs, double lambda) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InvalidArgument("ridge parameter must be finite and >= 0");
    const Grid& grid = obs.y.grid();
    const Eigen::SparseMatrix<double> lap = laplacian_matrix(grid);
    const Eigen::VectorXd b = boundary_laplacian_term(obs.y);
    const Eigen::VectorXd y = obs.y.interior_vector();
    // normal equations (I + lambda L^2) x = y - lambda L b
    Eigen::SparseMatrix<double> normal = lambda * (lap * lap);
    for (Eigen::Index r = 0; r < normal.rows(); ++r) normal.coeffRef(r, r) += 1.0;
    normal.makeCompressed();
    const Eigen::VectorXd rhs = y - lambda * (lap * b);
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(normal);
    if (ldlt.info() != Eigen::Success) throw NumericalError("least_squares_u: factorization failed");
    Eigen::VectorXd x = ldlt.solve(rhs);
    Eigen::VectorXd r = rhs - normal * x;
    if (r.norm() > 1e-12 * rhs.norm()) {
        x += ldlt.solve(r);
        r = rhs - normal * x;
    }
    const double rel = rhs.norm() > 0.0 ? r.norm() / rhs.norm() : r.norm();
    if (!(rel <= 1e-9)) throw NumericalError("least_squares_u: optimality residual above tolerance", rel);
    GridFunction u = obs.y;
    u.set_interior(x);
    return u;
}

double default_ridge(double eps, int level) { return eps * eps * std::exp2(4.0 * level); }

GridFunction plugin_estimator(const Observation& obs, const PluginParams& params) {
    return invert_pointwise(least_squares_u(obs, params.lambda), params.limits.floor, params.limits.cap);
}

SmallBallProbe prior_small_ball_probe(const PriorConfig& cfg, const WaveletBasis& basis, const GridFunction& f0,
                                      double eta, std::size_t n_samples, std::uint64_t seed) {
    if (n_samples < 1000) throw InvalidArgument("small-ball probe needs at least 1000 samples");
    if (!(f0.grid() == basis.grid())) throw InvalidArgument("small-ball probe: grid mismatch");
    const H2DualNorm dual(basis.grid());
    std::size_t hits = 0;
    for (std::size_t k = 0; k < n_samples; ++k) {
        const PriorDraw draw = sample_prior(cfg, basis, derive_seed(seed, k));
        if (dual(draw.potential - f0) < eta) ++hits;
    }
    const double n = static_cast<double>(n_samples);
    const double p = static_cast<double>(hits) / n;
    return {p, std::sqrt(p * (1.0 - p) / n)};
}

}  // namespace pinv
