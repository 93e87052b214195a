#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pinv/fkoracle.hpp"
#include "pinv/inference.hpp"
#include "pinv/pde.hpp"
#include "pinv/wavelet.hpp"

namespace pinv {

// Stability constants, calibrated once by sweeping d in {1,2} and three grid
// levels over 20 prior draws (B = 1), then frozen with headroom.  Observed
// maxima: ||V h|| / ||h||_(H2_0)* ~ 2.01, ||u_f - u_h|| / ||f - h||_(H2_0)* ~ 2.41,
// ||V_f q - V_h q|| / (||f - h|| ||q||_inf) ~ 2e-3.
inline constexpr double kDualStability = 2.5;
inline constexpr double kForwardStability = 3.5;
inline constexpr double kGreenStability = 0.05;

/// One named numerical check: passes when lower <= value <= upper.
struct CheckResult {
    std::string name;
    double value = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    bool passed = false;
};

CheckResult make_check(std::string name, double value, double lower, double upper);

/// d = 1, f = 2, g = 1 against cosh(2(x - 1/2)) / cosh 1: relative L2 error at
/// Jg = 8 and the error ratios for Jg 6 -> 7 -> 8 -> 9.
std::vector<CheckResult> verify_closed_form_solver();

/// S V = Id, V S = Id and symmetry of V on random interior data, plus the
/// frozen stability bounds, over `trials` prior-draw potentials.
std::vector<CheckResult> verify_green_operator(int dim, std::size_t trials, std::uint64_t seed);

/// Taylor remainder ratio r(t) / r(t/2) at t = 1e-2 and 5e-3.
std::vector<CheckResult> verify_score_taylor(int dim, std::uint64_t seed);

/// Discrete Riesz identity on 10 random h (Jg = 8 for d = 1) and second-order
/// convergence of the representer under refinement.
std::vector<CheckResult> verify_riesz(int dim, std::uint64_t seed);

/// log p(Y|f) - log p(Y|g) against its expansion in W on `trials` pairs.
std::vector<CheckResult> verify_likelihood_identity(int dim, std::size_t trials, std::uint64_t seed);

/// Prior draws: every coefficient inside its box and sup |phi| <= C(B).
std::vector<CheckResult> verify_prior_support(const PriorConfig& cfg, const WaveletBasis& basis, std::size_t draws,
                                              std::uint64_t seed);

/// Two-coefficient toy posterior (d = 1, J = 0, eps = 0.01): chain means and
/// raw second moments of both coefficients against a 200 x 200 midpoint rule,
/// as relative errors with upper bound 0.02.
std::vector<CheckResult> verify_toy_posterior(std::size_t iterations, std::uint64_t seed);

/// Everything above for one dimension.
std::vector<CheckResult> verify_suite(int dim, std::uint64_t seed);

struct ProbeComparison {
    Point x{0.0, 0.0};
    double solver = 0.0;
    McEstimate mc;
    double z = 0.0;  // (mc - solver) / stderr
};

/// Interior probes along the diagonal at fractions k/(n+1), snapped to nodes.
std::vector<Point> diagonal_probes(const Grid& grid, std::size_t n);

/// Feynman-Kac estimates of u_f at the probes beside the grid solution.
std::vector<ProbeComparison> oracle_crosscheck(const SchrodingerSystem& sys, std::span<const Point> probes,
                                               const PathConfig& cfg, double tol = 1e-10);

}  // namespace pinv
