#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pinv/inference.hpp"

namespace pinv {

/// ||DG_f0[h]||.
double lan_norm(const SchrodingerSystem& sys_at_f0, const GridFunction& u_f0, const GridFunction& h,
                double tol = 1e-10);

/// Finite-dimensional projection of the limiting Gaussian law:
/// Sigma_ij = <S_f0[psi_i/u_f0], S_f0[psi_j/u_f0]>.
struct LimitLaw {
    std::vector<std::string> ids;
    Eigen::MatrixXd sigma;
    Eigen::MatrixXd factor;  // factor * factor^T = Sigma with negative eigenvalues clipped
    double min_eigenvalue = 0.0;
};

LimitLaw limit_covariance(const SchrodingerSystem& sys_at_f0, const GridFunction& u_f0,
                          const std::vector<TestFunction>& dictionary);

/// n x k matrix of N(0, Sigma) draws.
Eigen::MatrixXd sample_limit_law(const LimitLaw& law, std::size_t n, std::uint64_t seed);

struct BvmEntry {
    std::string id;
    double sigma = 0.0;         // sqrt(Sigma_ii)
    double ks = 0.0;            // KS distance of standardized draws to N(0, 1)
    double ess = 0.0;           // effective sample size of the functional chain
    double ks_band = 0.0;       // 1.5 * 1.36 / sqrt(ess)
    double spread_ratio = 0.0;  // posterior sd / (eps sigma)
    double centering = 0.0;     // (<fbar, psi> - <ftilde, psi>) / eps
    double fbar_psi = 0.0;
    double truth_psi = 0.0;
};

/// Standardized draws (<f, psi> - <fbar, psi>) / (eps sqrt(Sigma_ii)).
std::vector<double> standardized_draws(std::span<const double> functional, double eps, double sigma);

/// Simulation-mode report per dictionary entry.  The efficient centring is
/// <ftilde, psi> = <f0, psi> + eps <DG_f0[Psi~], W> with W = (Y - u_f0)/eps.
std::vector<BvmEntry> bvm_diagnostic(const PosteriorRun& run, const LimitLaw& law, const Observation& obs,
                                     const SchrodingerSystem& sys_at_f0, const GridFunction& u_f0,
                                     const std::vector<TestFunction>& dictionary);

/// Everything a replication experiment needs.  `f0` is the true potential on
/// the grid, `boundary` carries g.
struct ExperimentSetup {
    std::string name = "experiment";
    WaveletBasis basis;
    PriorConfig prior;
    bool level_from_rule = true;  // J from level_rule(eps) instead of prior.max_level
    GridFunction f0;
    GridFunction boundary;
    std::vector<TestFunction> dictionary;  // interval / BvM functionals
    std::vector<TestFunction> ball;        // weighted dictionary for the credible ball
    McmcParams mcmc;
    double beta = 0.1;
    std::uint64_t seed = 1;
    unsigned threads = 1;
};

/// One tidy output row.
struct Record {
    std::string experiment;
    std::uint64_t seed = 0;
    double eps = 0.0;
    std::size_t rep = 0;
    std::string psi_id;
    std::string kind;
    double value = 0.0;
};

/// Result of one (eps, replication) pair: fresh data, fresh chain.
struct Replication {
    double eps = 0.0;
    std::size_t rep = 0;
    std::uint64_t seed = 0;
    int level = 0;
    double acceptance = 0.0;
    double error_l2 = 0.0;      // ||fbar - f0||
    double spread_l2 = 0.0;     // posterior median of ||f - fbar||
    std::vector<BvmEntry> bvm;  // per dictionary entry
    std::vector<CredibleInterval> intervals;
    std::vector<bool> covered;
    double ball_radius = 0.0;
    double ball_distance = 0.0;  // max_i |<f0 - fbar, psi_i>| / w_i
    bool ball_covered = false;
    bool failed = false;
    std::string failure;
};

int prior_level(const ExperimentSetup& setup, double eps);

Replication run_replication(const ExperimentSetup& setup, double eps, std::size_t rep);

/// Runs the grid of (eps, rep) pairs on setup.threads workers; each pair draws
/// its seeds from derive_seed(setup.seed, .) so results do not depend on the
/// worker count.  More than 5% failed replications raise NumericalError.
std::vector<Replication> run_replications(const ExperimentSetup& setup, const std::vector<double>& eps_list,
                                          std::size_t n_reps);

struct CoverageSummary {
    double eps = 0.0;
    std::vector<std::string> ids;
    std::vector<double> coverage;       // per psi
    std::vector<double> scaled_radius;  // mean eps^-1 R
    std::vector<double> target_radius;  // z_{1-beta/2} sqrt(Sigma_ii)
    double ball_coverage = 0.0;
    double ball_scaled_radius = 0.0;
    std::size_t reps = 0;
    std::size_t failures = 0;
};

CoverageSummary summarize_coverage(const ExperimentSetup& setup, const std::vector<Replication>& reps);

CoverageSummary coverage_experiment(const ExperimentSetup& setup, double eps, std::size_t n_reps,
                                    std::vector<Record>* records = nullptr);

struct RateRow {
    double eps = 0.0;
    int level = 0;
    double median_error = 0.0;
    double median_spread = 0.0;
    double median_ks = 0.0;
    double median_ks_band = 0.0;
};

struct RateSummary {
    std::vector<RateRow> rows;
    double slope = 0.0;        // d log(error) / d log(eps)
    double theoretical = 0.0;  // 2s / (2s + 4 + d)
};

double theoretical_rate_exponent(int smoothness, int dim);

RateSummary summarize_rates(const ExperimentSetup& setup, const std::vector<double>& eps_list,
                            const std::vector<Replication>& reps);

RateSummary rate_experiment(const ExperimentSetup& setup, const std::vector<double>& eps_list, std::size_t n_reps,
                            std::vector<Record>* records = nullptr);

/// Tidy rows for a batch of replications.
std::vector<Record> replication_records(const ExperimentSetup& setup, const std::vector<Replication>& reps);

}  // namespace pinv
