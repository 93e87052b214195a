#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "pinv/error.hpp"
#include "pinv/obsmodel.hpp"
#include "pinv/pde.hpp"
#include "pinv/wavelet.hpp"

namespace pinv {

/// Interior test function psi with its dual-norm weight.
struct TestFunction {
    std::string id;
    GridFunction psi;
    double weight = 1.0;
};

/// Smooth plateau: 1 on the box |x - c| <= half_width per axis, falling to 0
/// over `transition` with a C-infinity step.  Vanishes beyond
/// half_width + transition.
GridFunction plateau_bump(const Grid& grid, const Point& center, double half_width, double transition);

/// Dyadic family 2^{ld/2} b(2^l x - k - 1/2) for levels 0..max_level, where b
/// is a polynomial bump supported in the cube of side 1/2 about the origin.
/// Members not vanishing within the Riesz margin of the boundary are dropped.
/// Weights are 2^{l(alpha + d/2)}.
std::vector<TestFunction> interior_dictionary(const Grid& grid, int max_level, double alpha);

/// Default alpha = 2 + 3d/2 + 0.5.
double default_alpha(int dim);

struct McmcParams {
    std::size_t iterations = 20000;
    double burn_in_fraction = 0.2;
    std::size_t max_stored = 10000;
    double step_scale = 0.3;          // rho, in units of the box half-width
    double target_acceptance = 0.25;  // burn-in adaptation target
    bool adapt = true;
    double solver_tol = 1e-10;
    SolverOptions solver;

    void validate() const;
    std::size_t burn_in() const;
    std::size_t thinning() const;
    std::size_t stored_count() const;
};

struct ChainState {
    CoefficientTree coeffs;
    GridFunction f;  // exp(synthesize(coeffs))
    GridFunction u;  // u_f
    double loglik = 0.0;
};

/// Raised when a forward solve fails mid-chain; carries the state at failure.
class ChainFailure : public NumericalError {
public:
    ChainFailure(const std::string& what, CoefficientTree state, std::size_t iteration, double residual)
        : NumericalError(what, residual), state_(std::move(state)), iteration_(iteration) {}

    const CoefficientTree& state() const { return state_; }
    std::size_t iteration() const { return iteration_; }

private:
    CoefficientTree state_;
    std::size_t iteration_;
};

/// Reflect x into [-a, a].
double reflect_into_box(double x, double a);

/// Level-blocked reflected random-walk Metropolis on the prior box.  Iteration
/// k proposes a move of every coefficient of level (k mod (J+2)) - 1.
class MetropolisChain {
public:
    MetropolisChain(const Observation& obs, const PriorConfig& prior, const WaveletBasis& basis,
                    const McmcParams& params, std::uint64_t seed,
                    std::optional<CoefficientTree> start = std::nullopt);

    /// One proposal; returns the level that was updated.
    int step();
    void advance(std::size_t n);

    const ChainState& state() const { return state_; }
    std::size_t iteration() const { return iteration_; }
    bool adapting() const;
    /// Proposal multipliers per level (index level + 1).
    const std::vector<double>& scales() const { return scales_; }
    std::size_t proposals(int level) const { return proposals_[static_cast<std::size_t>(level + 1)]; }
    std::size_t accepted(int level) const { return accepted_[static_cast<std::size_t>(level + 1)]; }
    double acceptance_rate() const;

    PotentialField potential() const;
    ChainState evaluate(const CoefficientTree& coeffs) const;

    /// Checkpoint: coefficients, rng state, iteration, scales and counters.
    void save(std::ostream& out) const;
    void restore(std::istream& in);

private:
    const Observation& obs_;
    PriorConfig prior_;
    const WaveletBasis& basis_;
    McmcParams params_;
    std::mt19937_64 rng_;
    ChainState state_;
    std::size_t iteration_ = 0;
    std::vector<double> scales_;
    std::vector<std::size_t> proposals_;
    std::vector<std::size_t> accepted_;
    std::vector<std::size_t> batch_accepts_;
    std::vector<std::size_t> batch_sizes_;
    std::vector<std::size_t> batch_index_;
};

struct PosteriorRun {
    std::vector<CoefficientTree> draws;
    std::vector<std::string> functional_ids;
    std::vector<std::vector<double>> functionals;  // [psi][draw] = <f, psi>
    double acceptance_rate = 0.0;
    std::vector<double> final_scales;
    std::uint64_t seed = 0;
    PriorConfig prior;
    McmcParams params;
    std::string checkpoint;  // MetropolisChain::save of the final state
};

PosteriorRun mcmc_run(const Observation& obs, const PriorConfig& prior, const WaveletBasis& basis,
                      const McmcParams& params, std::uint64_t seed, const std::vector<TestFunction>& dictionary = {},
                      std::optional<CoefficientTree> start = std::nullopt);

/// Node-wise average of f = exp(phi) over the stored draws.
GridFunction posterior_mean(const PosteriorRun& run, const WaveletBasis& basis);

/// <f, psi> for every stored draw.
std::vector<double> functional_draws(const PosteriorRun& run, const WaveletBasis& basis, const GridFunction& psi);

struct CredibleInterval {
    double center = 0.0;
    double radius = 0.0;
    bool contains(double z) const { return std::abs(z - center) <= radius; }
};

/// Center = mean of the draws, radius = (1 - beta)-quantile of |draw - center|.
CredibleInterval credible_interval(std::span<const double> draws, double beta);
CredibleInterval credible_interval(const PosteriorRun& run, std::size_t psi_index, double beta);
CredibleInterval credible_interval(const PosteriorRun& run, const WaveletBasis& basis, const GridFunction& psi,
                                   double beta);

/// (1 - beta)-quantile over draws of max_i |<f - fbar, psi_i>| / w_i.
double credible_ball_radius(const std::vector<std::vector<double>>& functionals, std::span<const double> weights,
                            double beta);
double credible_ball_radius(const PosteriorRun& run, std::span<const double> weights, double beta);

/// Minimiser of ||u - Y||^2 + lambda ||Lap_h u||^2 over fields with boundary
/// trace g (taken from obs.y).
GridFunction least_squares_u(const Observation& obs, double lambda);

/// lambda = eps^2 2^{4J}.
double default_ridge(double eps, int level);

struct PluginParams {
    double lambda = 0.0;
    InversionLimits limits;
};

GridFunction plugin_estimator(const Observation& obs, const PluginParams& params);

struct SmallBallProbe {
    double probability = 0.0;
    double stderr_ = 0.0;
};

/// Prior Monte Carlo frequency of h2_dual_norm(f - f0) < eta.
SmallBallProbe prior_small_ball_probe(const PriorConfig& cfg, const WaveletBasis& basis, const GridFunction& f0,
                                      double eta, std::size_t n_samples, std::uint64_t seed);

}  // namespace pinv
