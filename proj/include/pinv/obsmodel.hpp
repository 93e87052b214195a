#pragma once

#include <cstdint>
#include <string>

#include "pinv/grid.hpp"
#include "pinv/pde.hpp"

namespace pinv {

/// Y = u_f0 + eps W on the grid.  Boundary nodes carry g exactly.
struct Observation {
    GridFunction y;
    double eps = 0.0;
    std::string truth_id;
};

/// Discrete white noise: independent N(0, 1/cell volume) at interior nodes,
/// zero on the boundary, so that <W, a> ~ N(0, ||a||^2) in l2_inner.
GridFunction white_noise(const Grid& grid, std::uint64_t seed);

/// eps = 0 is accepted and returns the noiseless forward solution.
Observation generate_observation(const SchrodingerSystem& sys_at_f0, double eps, std::uint64_t seed,
                                 double tol = 1e-10);

/// (1/eps^2) <Y, u> - (1/(2 eps^2)) ||u||^2.
double log_likelihood(const Observation& obs, const GridFunction& u);

double log_likelihood_of_potential(const Observation& obs, const PotentialField& f, const GridFunction& g,
                                   double tol = 1e-10, SolverOptions options = {});

}  // namespace pinv
